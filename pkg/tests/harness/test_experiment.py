import json

import pytest

from app.config import PROJECT_ROOT
from app.exceptions import ConfigError
from app.harness.experiment import (
    ExperimentConfig,
    SweepSpec,
    json_pointer,
    load_experiment_mdp,
    resolve,
)
from app.mdp.benchmarks import load_benchmark
from app.optimizer.hyperparams import horizon_for, hyperparams_for_fosp
from app.optimizer.schedule import step_size
from app.schema import ScheduleKind
from app.theory.constants import ConstantsSetting, compute_constants


def _config_error(data) -> ConfigError:
    with pytest.raises(ConfigError) as exc:
        ExperimentConfig.from_dict(data)
    return exc.value


def test_auto_requires_epsilon():
    error = _config_error({"m": "auto", "schedule": {"eta": 0.01}})
    assert error.path == "/epsilon"


def test_default_eta_is_auto():
    assert _config_error({}).path == "/epsilon"
    assert ExperimentConfig.from_dict({"epsilon": 0.3}).auto_fields() == ["schedule/eta"]


def test_error_paths():
    assert _config_error({"schedule": {"eta": -1.0}}).path == "/schedule/eta"
    assert _config_error({"foo": 1, "epsilon": 0.3}).path == "/foo"
    assert _config_error({"T": -3, "schedule": {"eta": 0.01}}).path == "/T"
    assert _config_error({"seeds": [], "schedule": {"eta": 0.01}}).path == "/seeds"


@pytest.mark.parametrize(
    "loc, expected",
    [
        (("schedule", "eta", "float"), "/schedule/eta"),
        (("m", "literal['auto']"), "/m"),
        (("values", 1), "/values/1"),
        (("mdp", "function-after[_check]"), "/mdp"),
        ((), ""),
    ],
)
def test_json_pointer(loc, expected):
    assert json_pointer(loc) == expected


def test_auto_fields_resolve_with_recipe():
    """Tests that 'auto' fields are replaced by the FOSP recipe values"""
    config = ExperimentConfig.from_dict(
        {"mdp": "random3", "epsilon": 0.3, "m": "auto", "H": "auto", "T": "auto"}
    )
    resolved = resolve(config)

    mdp = load_benchmark("random3")
    horizon = horizon_for(0.3, mdp.gamma)
    setting = ConstantsSetting.for_problem(mdp, resolved.policy, None, config.estimator, horizon, 1)
    recipe = hyperparams_for_fosp(compute_constants(setting), 0.3, m=1)

    assert resolved.config.m == 1
    assert resolved.config.H == recipe.H == horizon
    assert resolved.config.T == recipe.T
    assert resolved.schedule.eta == pytest.approx(recipe.eta)
    assert "auto" not in json.dumps(resolved.config.echo())
    assert resolved.estimator.horizon == horizon


def test_auto_eta_uses_explicit_horizon():
    """Tests that an 'auto' η is computed at the configured H, not the ε-derived one"""
    config = ExperimentConfig.from_dict(
        {"mdp": "random3", "estimator": "reinforce", "epsilon": 0.3, "m": 2, "H": 30, "T": 5}
    )
    resolved = resolve(config)

    mdp = load_benchmark("random3")
    setting = ConstantsSetting.for_problem(
        mdp, resolved.policy, None, config.estimator, 30, 2
    )
    at_30 = compute_constants(setting)
    assert resolved.config.H == 30
    assert resolved.constants.horizon == 30
    assert resolved.recipe.H == 30
    assert resolved.recipe.nu == pytest.approx(at_30.nu_reinforce)
    assert resolved.schedule.eta == pytest.approx(0.3**2 * 2 / (2 * at_30.L * at_30.nu))

    derived = hyperparams_for_fosp(at_30, 0.3, m=2)
    assert derived.H == horizon_for(0.3, mdp.gamma) != 30
    assert resolved.schedule.eta < derived.eta


def test_explicit_values_are_kept():
    config = ExperimentConfig.from_dict(
        {"mdp": "chain", "m": 3, "H": 7, "T": 5, "schedule": {"eta": 0.05}}
    )
    resolved = resolve(config)
    assert resolved.recipe is None
    assert resolved.T == 5
    assert resolved.estimator.m == 3
    assert resolved.constants.horizon == 7
    assert resolved.schedule.eta == 0.05
    assert resolved.j_star >= 0.0


def test_pl_schedule_is_bound():
    config = ExperimentConfig.from_dict(
        {"T": 20, "schedule": {"kind": "pl", "mu": 0.5}, "m": 4}
    )
    resolved = resolve(config)
    assert resolved.schedule.kind == ScheduleKind.PL
    assert step_size(resolved.schedule, 0) > 0.0


def test_estimator_must_match_objective():
    config = ExperimentConfig.from_dict(
        {"estimator": "barrier_gpomdp", "schedule": {"eta": 0.01}}
    )
    with pytest.raises(ConfigError) as exc:
        resolve(config)
    assert exc.value.path == "/estimator"


def test_exact_mode_ignores_estimator_objective():
    config = ExperimentConfig.from_dict(
        {
            "estimator": "gpomdp",
            "objective": {"objective": "entropy", "lambda": 0.1},
            "exact_mode": True,
            "schedule": {"eta": 0.01},
        }
    )
    assert resolve(config).config.objective.lam == 0.1


def test_gaussian_policy_is_rejected():
    config = ExperimentConfig.from_dict(
        {"policy": {"family": "gaussian_linear"}, "schedule": {"eta": 0.01}}
    )
    with pytest.raises(ConfigError) as exc:
        resolve(config)
    assert exc.value.path == "/policy/family"


def test_load_experiment_mdp_sources(tmp_path, bandit_mdp):
    inline = load_experiment_mdp(bandit_mdp.to_dict())
    assert inline.num_states == 1
    (tmp_path / "bandit.json").write_text(json.dumps(bandit_mdp.to_dict()))
    from_file = load_experiment_mdp("bandit.json", base_dir=tmp_path)
    assert from_file.gamma == bandit_mdp.gamma


def test_sweep_points():
    spec = SweepSpec.from_dict(
        {
            "base": {"T": 2, "schedule": {"eta": 0.01}, "seeds": [0, 1]},
            "axis": "m",
            "values": [1, 4],
        }
    )
    points = spec.resolve_points()
    assert [point.estimator.m for point in points] == [1, 4]
    assert spec.point_seeds == [0, 1]


def test_sweep_bad_value_path():
    spec = SweepSpec.from_dict(
        {"base": {"T": 2, "schedule": {"eta": 0.01}}, "axis": "eta", "values": [0.01, -1.0]}
    )
    with pytest.raises(ConfigError) as exc:
        spec.resolve_points()
    assert exc.value.path == "/values/1"


def test_lambda_sweep_needs_regularizer():
    spec = SweepSpec.from_dict(
        {"base": {"T": 2, "schedule": {"eta": 0.01}}, "axis": "lambda", "values": [0.1]}
    )
    with pytest.raises(ConfigError) as exc:
        spec.point(0)
    assert exc.value.path == "/axis"


def test_sweep_base_from_file(tmp_path):
    (tmp_path / "base.json").write_text(json.dumps({"T": 2, "schedule": {"eta": 0.01}}))
    (tmp_path / "sweep.json").write_text(
        json.dumps({"base": "base.json", "axis": "H", "values": [3, 6], "seeds": [5]})
    )
    spec = SweepSpec.load(tmp_path / "sweep.json")
    assert spec.point_seeds == [5]
    assert [point.config.H for point in spec.resolve_points()] == [3, 6]


@pytest.mark.parametrize("name", ["auto_run.json", "exact_run.json"])
def test_example_configs_resolve(name):
    path = PROJECT_ROOT / "config" / "examples" / name
    resolved = resolve(ExperimentConfig.load(path), base_dir=path.parent)
    assert resolved.T > 0


def test_example_sweep_resolves():
    path = PROJECT_ROOT / "config" / "examples" / "sweep_m.json"
    spec = SweepSpec.load(path)
    assert len(spec.resolve_points(base_dir=path.parent)) == len(spec.values)
