import numpy as np
import pytest

from app.exceptions import InvalidMdpError
from app.mdp.benchmarks import enumeration_mdp, load_benchmark, random_mdp
from app.mdp.core import TabularMdp
from app.mdp.dp import (
    exact_gradient,
    exact_quantities,
    exact_return,
    exact_truncated_gradient,
    exact_values,
    forward_marginals,
    mismatch_coefficient,
    occupancy_measure,
    optimal_values,
    state_marginals,
)
from app.verify.enumeration import enumerate_paths


def test_bandit_values(bandit_mdp, uniform_for):
    """Tests closed-form values on the single-state bandit"""
    policy = uniform_for(bandit_mdp)
    assert exact_return(bandit_mdp, policy) == pytest.approx(0.5 / (1 - 0.8), abs=1e-8)

    solution = optimal_values(bandit_mdp)
    assert solution.j == pytest.approx(5.0, abs=1e-8)
    assert list(solution.policy) == [0]


def test_iterate_matches_direct(softmax_for):
    mdp = load_benchmark("random5")
    policy = softmax_for(mdp, seed=2)
    iterated = exact_values(mdp, policy, method="iterate")
    direct = exact_values(mdp, policy, method="direct")
    np.testing.assert_allclose(iterated.q, direct.q, atol=1e-8)
    np.testing.assert_allclose(
        (direct.advantage * policy.action_matrix()).sum(axis=1), 0.0, atol=1e-12
    )


def test_gradient_matches_finite_difference(two_state_mdp, random_policy):
    """Tests the policy-gradient theorem against central differences of J"""
    grad = exact_gradient(two_state_mdp, random_policy, method="direct")
    step = 1e-6
    numeric = np.zeros_like(grad)
    theta = random_policy.theta
    for i in range(random_policy.dim):
        offset = np.zeros(random_policy.dim)
        offset[i] = step
        up = exact_return(two_state_mdp, random_policy.with_theta(theta + offset), method="direct")
        down = exact_return(
            two_state_mdp, random_policy.with_theta(theta - offset), method="direct"
        )
        numeric[i] = (up - down) / (2 * step)
    np.testing.assert_allclose(grad, numeric, atol=1e-6)


def test_truncated_gradient_converges(two_state_mdp, random_policy):
    full = exact_gradient(two_state_mdp, random_policy, method="direct")
    truncated = exact_truncated_gradient(two_state_mdp, random_policy, 400)
    np.testing.assert_allclose(truncated, full, atol=1e-10)


def test_truncation_is_exact_without_discount(random_policy):
    mdp = enumeration_mdp(gamma=0.0)
    np.testing.assert_allclose(
        exact_truncated_gradient(mdp, random_policy, 1),
        exact_gradient(mdp, random_policy, method="direct"),
        atol=1e-12,
    )


def test_truncated_gradient_rejects_zero_horizon(two_state_mdp, random_policy):
    with pytest.raises(ValueError):
        exact_truncated_gradient(two_state_mdp, random_policy, 0)


def test_occupancy_is_a_distribution(two_state_mdp, random_policy):
    occupancy = occupancy_measure(two_state_mdp, random_policy)
    assert occupancy.sum() == pytest.approx(1.0, abs=1e-9)
    assert np.all(occupancy >= 0.0)


def test_state_marginals_rows_sum_to_one(two_state_mdp, random_policy):
    marginals = state_marginals(two_state_mdp, random_policy, 6)
    assert marginals.shape == (6, 2)
    np.testing.assert_allclose(marginals.sum(axis=1), 1.0)
    np.testing.assert_allclose(marginals[0], two_state_mdp.initial_dist)


def test_exact_quantities_bundle(two_state_mdp, random_policy):
    bundle = exact_quantities(two_state_mdp, random_policy, 5)
    assert bundle.j == pytest.approx(exact_return(two_state_mdp, random_policy))
    np.testing.assert_allclose(
        bundle.grad_j_h, exact_truncated_gradient(two_state_mdp, random_policy, 5)
    )
    assert bundle.horizon == 5


def test_mismatch_coefficient_on_bandit(bandit_mdp):
    assert mismatch_coefficient(bandit_mdp) == pytest.approx(1.0)


def test_mismatch_needs_positive_rho(two_state_mdp):
    mdp = two_state_mdp.model_copy(update={"initial_dist": np.array([1.0, 0.0])})
    with pytest.raises(InvalidMdpError) as exc:
        mismatch_coefficient(mdp)
    assert exc.value.index == (1,)


def test_optimal_beats_any_policy(two_state_mdp, random_policy):
    assert optimal_values(two_state_mdp).j >= exact_return(two_state_mdp, random_policy) - 1e-9


def test_mismatch_coefficient_matches_hand_computation():
    """Tests max_s d_ρ(π*)(s)/ρ(s) where π* always jumps to the last state"""
    transitions = np.zeros((3, 2, 3))
    transitions[:, 0, 0] = 1.0
    transitions[:, 1, 2] = 1.0
    mdp = TabularMdp(
        num_states=3,
        num_actions=2,
        transitions=transitions,
        rewards=np.tile([0.0, 1.0], (3, 1)),
        r_max=1.0,
        gamma=0.9,
        initial_dist=np.array([0.5, 0.3, 0.2]),
    )
    assert list(optimal_values(mdp).policy) == [1, 1, 1]
    # d*(s) = (1−γ)ρ(s) + γ·1{s = 2} = (0.05, 0.03, 0.92)
    assert mismatch_coefficient(mdp) == pytest.approx(0.92 / 0.2, abs=1e-8)


def test_occupancy_without_discount_is_initial_times_policy(softmax_for):
    mdp = random_mdp(3, 2, 0.0, seed=1)
    policy = softmax_for(mdp, seed=4)
    np.testing.assert_allclose(
        occupancy_measure(mdp, policy),
        mdp.initial_dist[:, None] * policy.action_matrix(),
        atol=1e-12,
    )


def test_occupancy_matches_forward_sum(four_state_mdp, softmax_for):
    """Tests the occupancy against (1−γ) Σ_{t<400} γ^t μ_t(s, a)"""
    policy = softmax_for(four_state_mdp, seed=5)
    marginals = forward_marginals(four_state_mdp, policy.action_matrix(), 400)
    discounts = four_state_mdp.gamma ** np.arange(400)
    forward = (1.0 - four_state_mdp.gamma) * np.einsum("t,tsa->sa", discounts, marginals)
    np.testing.assert_allclose(
        occupancy_measure(four_state_mdp, policy, method="direct"), forward, atol=1e-12
    )


def test_return_matches_path_enumeration(two_state_mdp, random_policy):
    """Tests J against the probability-weighted discounted return of all length-8 paths"""
    horizon = 8
    batch, weights = enumerate_paths(two_state_mdp, random_policy, horizon)
    discounts = two_state_mdp.gamma ** np.arange(horizon)
    j_h = float(np.sum(weights * (batch.rewards @ discounts)))
    assert weights.sum() == pytest.approx(1.0, abs=1e-12)

    marginals = forward_marginals(two_state_mdp, random_policy.action_matrix(), horizon)
    assert j_h == pytest.approx(
        float(np.einsum("t,tsa,sa->", discounts, marginals, two_state_mdp.rewards)), abs=1e-12
    )

    j = exact_return(two_state_mdp, random_policy)
    tail = 2.0 * two_state_mdp.r_max * two_state_mdp.gamma**horizon / (1.0 - two_state_mdp.gamma)
    assert 0.0 <= j - j_h <= tail


def test_constant_reward_return(four_state_mdp, softmax_for):
    mdp = four_state_mdp.with_rewards(np.full((4, 2), 0.7), r_max=0.7)
    policy = softmax_for(mdp, seed=6)
    assert exact_return(mdp, policy) == pytest.approx(0.7 / (1.0 - 0.9), abs=1e-8)
