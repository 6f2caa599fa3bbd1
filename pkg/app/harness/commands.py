"""run / constants / verify / sweep 四个子命令的实现。

退出码：0 成功，1 检查失败（或迭代发散），2 用法或配置错误。
"""
import functools
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

from pydantic import ValidationError

from app.config import config
from app.exceptions import (
    ConfigError,
    ConvergenceError,
    EnumerationTooLargeError,
    InvalidMdpError,
    NonFiniteIterateError,
    PolicyFamilyError,
    StepSizeWindowError,
)
from app.harness.experiment import (
    ExperimentConfig,
    ResolvedExperiment,
    SweepSpec,
    config_error,
    load_experiment_mdp,
    resolve,
)
from app.harness.output import write_reports, write_run, write_run_meta, write_sweep
from app.logger import command_log, logger
from app.objectives import ObjectiveSpec
from app.optimizer.hyperparams import hyperparams_for_fosp
from app.optimizer.runner import RunRecord, run_pg
from app.schema import EstimatorKind, ObjectiveKind, PolicyFamily
from app.theory.constants import ConstantsSetting, compute_constants
from app.utils.files_utils import dumps, write_json
from app.verify.mutations import get_mutation
from app.verify.suite import VerifyContext, default_suite


EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2

USAGE_ERRORS = (
    ConfigError,
    InvalidMdpError,
    PolicyFamilyError,
    EnumerationTooLargeError,
    StepSizeWindowError,
)


def guarded(command: Callable[..., int]) -> Callable[..., int]:
    """把库异常映射为退出码"""

    @functools.wraps(command)
    def wrapper(*args, **kwargs) -> int:
        try:
            return command(*args, **kwargs)
        except USAGE_ERRORS as e:
            logger.error(f"{type(e).__name__}: {e}")
            return EXIT_USAGE
        except ValidationError as e:
            logger.error(f"ConfigError: {config_error(e)}")
            return EXIT_USAGE
        except NonFiniteIterateError as e:
            logger.error(f"Run diverged at iteration {e.iteration}: {e.message}")
            return EXIT_FAILED
        except ConvergenceError as e:
            logger.error(f"ConvergenceError: {e}")
            return EXIT_FAILED

    return wrapper


def resolve_output_dir(
    explicit: Optional[str], configured: Optional[str], command: str
) -> Path:
    if explicit:
        return Path(explicit)
    if configured:
        return Path(configured)
    return config.output_root / command


def run_one(
    resolved: ResolvedExperiment, seed: int, jobs: Optional[int] = None
) -> RunRecord:
    exp = resolved.config
    return run_pg(
        resolved.mdp,
        resolved.policy,
        exp.objective,
        resolved.estimator,
        resolved.schedule,
        T=resolved.T,
        base_seed=seed,
        exact_mode=exp.exact_mode,
        jobs=jobs,
        j_star=resolved.j_star,
        config_echo=exp.echo(),
    )


def _run_seed(
    resolved: ResolvedExperiment, seed: int, jobs: Optional[int]
) -> Tuple[Optional[RunRecord], Optional[NonFiniteIterateError]]:
    """发散不打断其他种子：返回（记录，错误），发散时记录为部分记录"""
    try:
        return run_one(resolved, seed, jobs), None
    except NonFiniteIterateError as e:
        return e.record, e


def _map(fn: Callable, items: List[Any], jobs: int) -> List[Any]:
    """按输入顺序返回结果，与 jobs 无关"""
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


@guarded
def cmd_run(
    config_path: str,
    output_dir: Optional[str] = None,
    seed: Optional[int] = None,
    jobs: Optional[int] = None,
) -> int:
    path = Path(config_path)
    experiment = ExperimentConfig.load(path)
    if seed is not None:
        experiment = experiment.model_copy(update={"seeds": [seed]})
    # 先完整解析，出错时不留下任何输出文件
    resolved = resolve(experiment, base_dir=path.parent)
    jobs = config.sampling.jobs if jobs is None else jobs
    seeds = list(resolved.config.seeds)
    out = resolve_output_dir(output_dir, resolved.config.output_dir, "run")
    out.mkdir(parents=True, exist_ok=True)

    with command_log(out, "run"):
        inner_jobs = jobs if len(seeds) == 1 else 1
        outcomes = _map(lambda s: _run_seed(resolved, s, inner_jobs), seeds, jobs)
        records = [record for record, _ in outcomes if record is not None]
        failures = [error for _, error in outcomes if error is not None]

        write_json(out / "config.json", resolved.config.echo())
        constants: Dict[str, Any] = {"constants": resolved.constants.to_json_dict()}
        if resolved.recipe is not None:
            constants["recipe"] = resolved.recipe.model_dump()
        write_json(out / "constants.json", constants)
        for record in records:
            write_run(record, out)
            summary = record.summary()
            print(
                f"seed={record.base_seed} J={summary['final_j']:.6f} "
                f"gap={summary['gap']:.6e} min_grad_norm_sq={summary['min_grad_norm_sq']:.6e}"
            )
        write_run_meta(out, "run", {"jobs": jobs, "config_path": str(path)})
        logger.info(f"🏁 Wrote {len(records)} run(s) to {out}")
        for error in failures:
            logger.error(f"Run diverged at iteration {error.iteration}: {error.message}")
    return EXIT_FAILED if failures else EXIT_OK


@guarded
def cmd_constants(
    family: str = PolicyFamily.SOFTMAX_TABULAR.value,
    num_states: int = 1,
    num_actions: int = 2,
    gamma: float = 0.9,
    r_max: float = 1.0,
    objective: str = ObjectiveKind.PLAIN.value,
    lam: float = 0.0,
    estimator: str = EstimatorKind.GPOMDP.value,
    horizon: int = 1,
    m: int = 1,
    feature_bound: float = 1.0,
    sigma: float = 1.0,
    epsilon: Optional[float] = None,
    output_dir: Optional[str] = None,
) -> int:
    setting = ConstantsSetting(
        family=family,
        num_states=num_states,
        num_actions=num_actions,
        feature_bound=feature_bound,
        sigma=sigma,
        objective=ObjectiveSpec(kind=objective, lam=lam),
        estimator=estimator,
        r_max=r_max,
        gamma=gamma,
        horizon=horizon,
        m=m,
    )
    report = compute_constants(setting)
    payload = report.to_json_dict()
    if epsilon is not None:
        payload["fosp"] = hyperparams_for_fosp(report, epsilon, m=m).model_dump()
    print(dumps(payload, pretty=True))
    if output_dir:
        write_json(Path(output_dir) / "constants.json", payload)
    return EXIT_OK


@guarded
def cmd_verify(
    check: Optional[str] = None,
    mdp: Optional[str] = None,
    horizon: Optional[int] = None,
    mutation: Optional[str] = None,
    seed: int = 0,
    jobs: Optional[int] = None,
    output_dir: Optional[str] = None,
) -> int:
    suite = default_suite()
    mutated = get_mutation(mutation) if mutation else None
    if check:
        names = [check]
    elif mutated:
        names = [mutated.target_check]
    else:
        names = suite.names()
    for name in names:
        suite.get_check(name)

    options = {
        "base_seed": seed,
        "jobs": config.sampling.jobs if jobs is None else jobs,
        "horizon": horizon,
        "mutation": mutated,
    }
    if mdp:
        context = VerifyContext.for_mdp(load_experiment_mdp(mdp), **options)
    else:
        context = VerifyContext(**options)

    out = resolve_output_dir(output_dir, None, "verify")
    with command_log(out, "verify"):
        reports = suite.execute_all(context, names)
        write_reports(reports, out)
        write_run_meta(out, "verify", {"checks": names, "mutation": mutation})
        for report in reports:
            print(dumps(report.to_json_dict()))
            logger.info(str(report))

    failed = [report.check_name for report in reports if report.failed]
    if failed:
        logger.warning(f"Failed checks: {', '.join(failed)}")
        return EXIT_FAILED
    return EXIT_OK


def _sweep_row(
    spec: SweepSpec, index: int, resolved: ResolvedExperiment, record: RunRecord
) -> Dict[str, Any]:
    summary = record.summary()
    exp = resolved.config
    return {
        "axis": spec.axis.value,
        "value": spec.values[index],
        "seed": record.base_seed,
        "final_gap": summary["gap"],
        "min_grad_norm_sq": summary["min_grad_norm_sq"],
        "trajectories": summary["trajectories"],
        "env_steps": summary["env_steps"],
        "T": exp.T,
        "m": exp.m,
        "H": exp.H,
        "eta": resolved.schedule.eta,
    }


@guarded
def cmd_sweep(
    spec_path: str,
    output_dir: Optional[str] = None,
    seed: Optional[int] = None,
    jobs: Optional[int] = None,
) -> int:
    path = Path(spec_path)
    spec = SweepSpec.load(path)
    points = spec.resolve_points(base_dir=path.parent)
    seeds = [seed] if seed is not None else spec.point_seeds
    jobs = config.sampling.jobs if jobs is None else jobs

    tasks = [(i, s) for i in range(len(points)) for s in seeds]
    logger.info(
        f"🚀 Sweeping {spec.axis.value} over {len(spec.values)} value(s) "
        f"x {len(seeds)} seed(s)"
    )

    def one(task) -> Dict[str, Any]:
        i, s = task
        return _sweep_row(spec, i, points[i], run_one(points[i], s, jobs=1))

    out = resolve_output_dir(output_dir, spec.base.output_dir, "sweep")
    with command_log(out, "sweep"):
        rows = _map(one, tasks, jobs)
    files = write_sweep(rows, out)
    write_json(
        out / "sweep.json",
        {
            "axis": spec.axis.value,
            "values": spec.values,
            "seeds": seeds,
            "points": [point.config.echo() for point in points],
        },
    )
    write_run_meta(out, "sweep", {"jobs": jobs, "spec_path": str(path)})
    logger.info(f"🏁 Wrote {len(rows)} sweep row(s) to {files['runs']}")
    return EXIT_OK
