import numpy as np
import pytest

from app.mdp.benchmarks import enumeration_mdp, random_mdp
from app.mdp.core import TabularMdp
from app.policy.factory import PolicyFactory
from app.schema import PolicyFamily


@pytest.fixture
def two_state_mdp() -> TabularMdp:
    """2 状态 2 动作、γ = 0.9 的可枚举 MDP"""
    return enumeration_mdp()


@pytest.fixture
def bandit_mdp() -> TabularMdp:
    """单状态、两个动作的赌博机：动作 0 奖励 1，动作 1 奖励 0"""
    return TabularMdp(
        num_states=1,
        num_actions=2,
        transitions=np.ones((1, 2, 1)),
        rewards=np.array([[1.0, 0.0]]),
        r_max=1.0,
        gamma=0.8,
        initial_dist=np.array([1.0]),
    )


@pytest.fixture
def single_action_mdp() -> TabularMdp:
    return TabularMdp(
        num_states=2,
        num_actions=1,
        transitions=np.array([[[0.5, 0.5]], [[0.2, 0.8]]]),
        rewards=np.array([[1.0], [0.5]]),
        r_max=1.0,
        gamma=0.9,
        initial_dist=np.array([0.5, 0.5]),
    )


@pytest.fixture
def four_state_mdp() -> TabularMdp:
    return random_mdp(4, 2, 0.9, seed=11)


def softmax_policy(mdp: TabularMdp, seed: int = 7, scale: float = 1.0):
    return PolicyFactory.uniform_random(
        PolicyFamily.SOFTMAX_TABULAR,
        scale=scale,
        seed=seed,
        num_states=mdp.num_states,
        num_actions=mdp.num_actions,
    )


def uniform_policy(mdp: TabularMdp):
    return PolicyFactory.zeros(
        PolicyFamily.SOFTMAX_TABULAR,
        num_states=mdp.num_states,
        num_actions=mdp.num_actions,
    )


@pytest.fixture
def random_policy(two_state_mdp):
    return softmax_policy(two_state_mdp)


@pytest.fixture
def softmax_for():
    """按 MDP 形状构造随机 softmax 策略的工厂"""
    return softmax_policy


@pytest.fixture
def uniform_for():
    return uniform_policy
