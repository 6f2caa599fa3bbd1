import math

import pytest

from app.exceptions import ConfigError
from app.optimizer.hyperparams import (
    default_delta0,
    horizon_for,
    hyperparams_for_fosp,
    hyperparams_for_global_barrier,
)
from app.schema import EstimatorKind
from app.theory.constants import ConstantsSetting, compute_constants


@pytest.fixture
def constants():
    return compute_constants(ConstantsSetting(num_actions=2, gamma=0.9))


def test_horizon_for():
    assert horizon_for(0.1, 0.9) == 44
    assert horizon_for(0.5, 0.0) == 1
    assert horizon_for(1.5, 0.9) == 1


def test_fosp_recipe(constants):
    """Tests η = ε²m/(2Lν), T = ceil(8δ₀Lν/(mε⁴)) and m_max = floor(2ν/ε²)"""
    recipe = hyperparams_for_fosp(constants, 0.5, m=4, delta0=1.0)
    assert recipe.H == horizon_for(0.5, 0.9)
    assert recipe.m_max == 4000
    assert recipe.eta == pytest.approx(0.25 * 4 / (2 * 150 * 500))
    assert recipe.T == math.ceil(8 * recipe.L * recipe.nu / (4 * 0.5**4))
    assert recipe.delta0 == 1.0


def test_fosp_default_delta0(constants):
    recipe = hyperparams_for_fosp(constants, 0.5)
    assert recipe.delta0 == pytest.approx(default_delta0(constants))
    assert recipe.delta0 == pytest.approx(20.0)


def test_fosp_rejects_out_of_range_batch(constants):
    with pytest.raises(ConfigError) as exc:
        hyperparams_for_fosp(constants, 0.5, m=4001)
    assert exc.value.path == "/m"


def test_fosp_rejects_nonpositive_epsilon(constants):
    with pytest.raises(ValueError):
        hyperparams_for_fosp(constants, 0.0)


def test_reinforce_recipe_uses_recipe_horizon():
    constants = compute_constants(
        ConstantsSetting(num_actions=2, gamma=0.9, estimator=EstimatorKind.REINFORCE)
    )
    recipe = hyperparams_for_fosp(constants, 0.5)
    assert recipe.nu == pytest.approx(recipe.H * 0.5 / 0.01)


def test_reinforce_recipe_keeps_given_horizon():
    """Tests that a fixed H sets ν_reinforce, and with it η, instead of the ε-derived H"""
    constants = compute_constants(
        ConstantsSetting(num_actions=2, gamma=0.9, estimator=EstimatorKind.REINFORCE)
    )
    recipe = hyperparams_for_fosp(constants, 0.5, m=2, horizon=30)
    assert recipe.H == 30
    assert recipe.nu == pytest.approx(30 * 0.5 / 0.01)
    assert recipe.eta == pytest.approx(0.25 * 2 / (2 * 150 * 1500))


def test_global_barrier_recipe(bandit_mdp):
    """Tests λ = (1−γ)ε/(2·mismatch) and ε_opt = λ/(2|S||A|) on the bandit"""
    constants = compute_constants(ConstantsSetting(num_actions=2, gamma=0.8))
    recipe = hyperparams_for_global_barrier(constants, bandit_mdp, 0.25, delta_prob=0.5)
    assert recipe.mismatch == pytest.approx(1.0)
    assert recipe.lam == pytest.approx(0.2 * 0.25 / 2)
    assert recipe.eps_opt == pytest.approx(recipe.lam / 4)
    assert recipe.L == pytest.approx(1.5 / 0.04 + recipe.lam)
    assert recipe.H == horizon_for(recipe.eps_opt, 0.8)

    certain = hyperparams_for_global_barrier(constants, bandit_mdp, 0.25, delta_prob=1.0)
    assert recipe.T >= 4 * certain.T - 4


def test_global_barrier_rejects_bad_probability(bandit_mdp):
    constants = compute_constants(ConstantsSetting(num_actions=2, gamma=0.8))
    with pytest.raises(ValueError):
        hyperparams_for_global_barrier(constants, bandit_mdp, 0.25, delta_prob=0.0)
