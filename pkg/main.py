import argparse
import sys
from typing import List, Optional

from app.harness.commands import (
    EXIT_USAGE,
    cmd_constants,
    cmd_run,
    cmd_sweep,
    cmd_verify,
)
from app.logger import define_log_level, logger
from app.schema import ESTIMATOR_VALUES, ObjectiveKind, PolicyFamily


POLICY_ALIASES = {
    "softmax": PolicyFamily.SOFTMAX_TABULAR.value,
    "gaussian": PolicyFamily.GAUSSIAN_LINEAR.value,
}


def build_parser() -> argparse.ArgumentParser:
    # 全局参数由每个子命令共享，写在子命令之后
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="基础随机种子")
    common.add_argument("--jobs", type=int, default=None, help="并发工作线程数")
    common.add_argument("--output-dir", type=str, default=None, help="输出目录")
    common.add_argument("--config", type=str, default=None, help="实验或扫描配置 JSON")

    parser = argparse.ArgumentParser(
        prog="vanillapg", description="香草策略梯度与收敛理论的验证工具"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("run", parents=[common], help="按实验配置运行策略梯度")

    constants = sub.add_parser("constants", parents=[common], help="打印理论常数")
    constants.add_argument("--policy", choices=sorted(POLICY_ALIASES), default="softmax")
    constants.add_argument("--states", type=int, default=1)
    constants.add_argument("--actions", type=int, default=2)
    constants.add_argument("--gamma", type=float, default=0.9)
    constants.add_argument("--rmax", type=float, default=1.0)
    constants.add_argument(
        "--objective", choices=[kind.value for kind in ObjectiveKind], default="plain"
    )
    constants.add_argument("--lambda", dest="lam", type=float, default=0.0)
    constants.add_argument("--estimator", choices=ESTIMATOR_VALUES, default="gpomdp")
    constants.add_argument("--H", dest="horizon", type=int, default=1)
    constants.add_argument("--m", type=int, default=1)
    constants.add_argument("--feature-bound", type=float, default=1.0)
    constants.add_argument("--sigma", type=float, default=1.0)
    constants.add_argument("--epsilon", type=float, default=None, help="同时给出 FOSP 配方")

    verify = sub.add_parser("verify", parents=[common], help="运行假设检查")
    verify.add_argument("check", nargs="?", default=None, help="检查名，缺省为全部")
    verify.add_argument("--mdp", type=str, default=None, help="基准名或 MDP JSON 文件")
    verify.add_argument("--H", dest="horizon", type=int, default=None)
    verify.add_argument("--mutation", type=str, default=None, help="注入的错误估计器")

    sub.add_parser("sweep", parents=[common], help="按扫描规格运行一组实验")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else 0

    define_log_level(name=args.command)
    if args.command in ("run", "sweep") and not args.config:
        logger.error(f"'{args.command}' needs --config")
        return EXIT_USAGE

    if args.command == "run":
        return cmd_run(args.config, args.output_dir, args.seed, args.jobs)
    if args.command == "sweep":
        return cmd_sweep(args.config, args.output_dir, args.seed, args.jobs)
    if args.command == "constants":
        return cmd_constants(
            family=POLICY_ALIASES[args.policy],
            num_states=args.states,
            num_actions=args.actions,
            gamma=args.gamma,
            r_max=args.rmax,
            objective=args.objective,
            lam=args.lam,
            estimator=args.estimator,
            horizon=args.horizon,
            m=args.m,
            feature_bound=args.feature_bound,
            sigma=args.sigma,
            epsilon=args.epsilon,
            output_dir=args.output_dir,
        )
    return cmd_verify(
        check=args.check,
        mdp=args.mdp,
        horizon=args.horizon,
        mutation=args.mutation,
        seed=0 if args.seed is None else args.seed,
        jobs=args.jobs,
        output_dir=args.output_dir,
    )


if __name__ == "__main__":
    sys.exit(main())
