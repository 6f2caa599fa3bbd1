import numpy as np
import pytest

from app.exceptions import PolicyFamilyError
from app.mdp.benchmarks import random_mdp
from app.mdp.dp import exact_gradient
from app.policy.factory import PolicyFactory, dump_policy, loads_policy
from app.policy.softmax import SoftmaxTabularPolicy, stable_log_softmax, stable_softmax
from app.schema import PolicyFamily
from app.theory.constants import ConstantsSetting, compute_constants


@pytest.fixture
def policy():
    return PolicyFactory.uniform_random(
        PolicyFamily.SOFTMAX_TABULAR, scale=2.0, seed=4, num_states=3, num_actions=4
    )


def test_zeros_is_uniform():
    policy = PolicyFactory.zeros(PolicyFamily.SOFTMAX_TABULAR, num_states=2, num_actions=3)
    np.testing.assert_allclose(policy.action_matrix(), np.full((2, 3), 1 / 3))


def test_theta_layout(policy):
    assert policy.dim == 12
    assert policy.index(2, 1) == 9
    np.testing.assert_array_equal(policy.logits()[2], policy.theta[8:12])


def test_theta_is_read_only(policy):
    with pytest.raises(ValueError):
        policy.theta[0] = 1.0


def test_with_theta_returns_new_policy(policy):
    updated = policy.with_theta(np.zeros(policy.dim))
    assert isinstance(updated, SoftmaxTabularPolicy)
    assert updated.num_actions == 4
    assert not np.array_equal(updated.theta, policy.theta)


def test_wrong_theta_length():
    with pytest.raises(PolicyFamilyError, match="length 6"):
        PolicyFactory.create(
            PolicyFamily.SOFTMAX_TABULAR, theta=np.zeros(5), num_states=2, num_actions=3
        )


def test_unknown_family():
    with pytest.raises(PolicyFamilyError):
        PolicyFactory.create("boltzmann", num_states=1, num_actions=2)


def test_score_matches_finite_difference(policy):
    """Tests ∇ log π(a|s) against central differences of the log-probability table"""
    step = 1e-6
    s, a = 1, 2
    numeric = np.zeros(policy.dim)
    for i in range(policy.dim):
        offset = np.zeros(policy.dim)
        offset[i] = step
        up = policy.with_theta(policy.theta + offset).log_prob_table()[s, a]
        down = policy.with_theta(policy.theta - offset).log_prob_table()[s, a]
        numeric[i] = (up - down) / (2 * step)
    np.testing.assert_allclose(policy.score(s, a), numeric, atol=1e-8)


def test_score_table_matches_score(policy):
    table = policy.score_table()
    for s in range(3):
        for a in range(4):
            np.testing.assert_allclose(table[s, a], policy.score(s, a))


def test_expected_score_is_zero(policy):
    table = policy.score_table()
    probs = policy.action_matrix()
    np.testing.assert_allclose(np.einsum("sa,sad->d", probs, table), 0.0, atol=1e-12)


def test_log_hessian_block(policy):
    p = policy.action_probs(0)
    hessian = policy.log_hessian(0, 1)
    np.testing.assert_allclose(hessian[:4, :4], np.outer(p, p) - np.diag(p))
    assert np.all(hessian[4:, :] == 0.0)


def test_els_constants():
    policy = PolicyFactory.zeros(PolicyFamily.SOFTMAX_TABULAR, num_states=1, num_actions=4)
    constants = policy.els_constants()
    assert constants.g_squared == pytest.approx(0.75)
    assert constants.f == 1.0
    assert constants.g_squared_ls == 2.0


def test_empirical_els_closed_form(policy):
    """Tests that E_a|score|^2 equals 1 − |π_s|^2 and stays below 1 − 1/|A|"""
    for s in range(3):
        p = policy.action_probs(s)
        measured = policy.empirical_els_check(s)
        assert measured.measured_g2 == pytest.approx(1.0 - np.dot(p, p), abs=1e-12)
        assert measured.measured_g2 <= 0.75 + 1e-12
        assert measured.measured_f <= 1.0
        assert measured.n_samples is None


def test_log_hessian_matches_score_difference(policy):
    """Tests ∇² log π(a|s) against central differences of the score"""
    step = 1e-6
    s, a = 2, 0
    numeric = np.zeros((policy.dim, policy.dim))
    for i in range(policy.dim):
        offset = np.zeros(policy.dim)
        offset[i] = step
        up = policy.with_theta(policy.theta + offset).score(s, a)
        down = policy.with_theta(policy.theta - offset).score(s, a)
        numeric[:, i] = (up - down) / (2 * step)
    np.testing.assert_allclose(policy.log_hessian(s, a), numeric, atol=1e-8)


def test_log_hessian_spectral_norm_at_most_one(policy):
    rng = np.random.default_rng(17)
    worst = 0.0
    for _ in range(1000):
        sample = policy.with_theta(rng.uniform(-5.0, 5.0, size=policy.dim))
        s, a = rng.integers(3), rng.integers(4)
        worst = max(worst, np.linalg.norm(sample.log_hessian(s, a), ord=2))
    assert 0.0 < worst <= 1.0 + 1e-12


def test_gradient_and_gamma_scale_with_rewards():
    """Tests that doubling the rewards doubles the worst exact gradient norm and Γ"""
    mdp = random_mdp(3, 2, 0.9, seed=21)
    doubled = mdp.with_rewards(2.0 * mdp.rewards, r_max=2.0 * mdp.r_max)
    rng = np.random.default_rng(8)

    def worst_norm(target):
        norms = []
        for k in range(20):
            theta = np.random.default_rng(k).uniform(-2.0, 2.0, size=6)
            sample = PolicyFactory.create(
                PolicyFamily.SOFTMAX_TABULAR, theta=theta, num_states=3, num_actions=2
            )
            norms.append(np.linalg.norm(exact_gradient(target, sample, method="direct")))
        return max(norms)

    assert worst_norm(doubled) == pytest.approx(2.0 * worst_norm(mdp), rel=1e-9)

    policy = PolicyFactory.create(
        PolicyFamily.SOFTMAX_TABULAR, theta=rng.normal(size=6), num_states=3, num_actions=2
    )
    base = compute_constants(ConstantsSetting.for_problem(mdp, policy))
    scaled = compute_constants(ConstantsSetting.for_problem(doubled, policy))
    assert scaled.Gamma == pytest.approx(2.0 * base.Gamma)
    assert scaled.L == pytest.approx(2.0 * base.L)


def test_stable_softmax_extreme_logits():
    logits = np.array([[1000.0, 0.0, -1000.0]])
    probs = stable_softmax(logits)
    log_probs = stable_log_softmax(logits)
    assert np.all(np.isfinite(probs))
    assert np.all(np.isfinite(log_probs))
    assert probs[0, 0] == pytest.approx(1.0)
    assert log_probs[0, 2] == pytest.approx(-2000.0)


def test_policy_document_round_trip(policy):
    restored = loads_policy(dump_policy(policy))
    assert restored.family == PolicyFamily.SOFTMAX_TABULAR
    np.testing.assert_array_equal(restored.theta, policy.theta)


def test_policy_document_needs_family():
    with pytest.raises(PolicyFamilyError, match="family"):
        PolicyFactory.from_dict({"theta": [0.0, 0.0], "num_states": 1, "num_actions": 2})
