"""仓库内置的基准 MDP。

三个固定种子的随机 MDP（3/5/8 个状态）加一条确定性链，验收运行无需外部文件。
"""
from typing import Callable, Dict, List

import numpy as np

from app.exceptions import ConfigError
from app.mdp.core import TabularMdp, validate


BENCHMARK_GAMMA = 0.8
# 常数检查（ABC、截断、光滑性）所在的折扣，与常数报告的缺省 γ 一致
REFERENCE_GAMMA = 0.9


def random_mdp(
    num_states: int,
    num_actions: int,
    gamma: float,
    seed: int,
    r_max: float = 1.0,
    signed_rewards: bool = False,
) -> TabularMdp:
    """Dirichlet 转移、均匀奖励、严格正初始分布的随机 MDP"""
    rng = np.random.default_rng(seed)
    transitions = rng.dirichlet(np.ones(num_states), size=(num_states, num_actions))
    low = -r_max if signed_rewards else 0.0
    rewards = rng.uniform(low, r_max, size=(num_states, num_actions))
    initial = rng.dirichlet(np.ones(num_states))
    # Dirichlet 抽样在浮点下行和可能差一个 ulp，这里重新归一化
    transitions /= transitions.sum(axis=2, keepdims=True)
    initial /= initial.sum()
    mdp = TabularMdp(
        num_states=num_states,
        num_actions=num_actions,
        transitions=transitions,
        rewards=rewards,
        r_max=r_max,
        gamma=gamma,
        initial_dist=initial,
    )
    validate(mdp)
    return mdp


def chain_mdp(num_states: int = 4, gamma: float = BENCHMARK_GAMMA) -> TabularMdp:
    """确定性链：动作 0 左移、动作 1 右移，只有最右端右移获得奖励 1"""
    transitions = np.zeros((num_states, 2, num_states))
    rewards = np.zeros((num_states, 2))
    for s in range(num_states):
        transitions[s, 0, max(s - 1, 0)] = 1.0
        transitions[s, 1, min(s + 1, num_states - 1)] = 1.0
    rewards[num_states - 1, 1] = 1.0
    mdp = TabularMdp(
        num_states=num_states,
        num_actions=2,
        transitions=transitions,
        rewards=rewards,
        r_max=1.0,
        gamma=gamma,
        initial_dist=np.full(num_states, 1.0 / num_states),
    )
    validate(mdp)
    return mdp


def enumeration_mdp(gamma: float = REFERENCE_GAMMA) -> TabularMdp:
    """2 状态 2 动作、可完全枚举的小 MDP"""
    transitions = np.array(
        [
            [[0.7, 0.3], [0.2, 0.8]],
            [[0.4, 0.6], [0.9, 0.1]],
        ]
    )
    rewards = np.array([[1.0, 0.0], [0.25, 0.75]])
    mdp = TabularMdp(
        num_states=2,
        num_actions=2,
        transitions=transitions,
        rewards=rewards,
        r_max=1.0,
        gamma=gamma,
        initial_dist=np.array([0.6, 0.4]),
    )
    validate(mdp)
    return mdp


def reference_mdp(seed: int = 3) -> TabularMdp:
    """γ = 0.9 的 3 状态 2 动作随机 MDP；ν_gpomdp = 500、L = 150"""
    return random_mdp(3, 2, REFERENCE_GAMMA, seed=seed)


BENCHMARKS: Dict[str, Callable[[], TabularMdp]] = {
    "random3": lambda: random_mdp(3, 2, BENCHMARK_GAMMA, seed=3),
    "random5": lambda: random_mdp(5, 2, BENCHMARK_GAMMA, seed=5),
    "random8": lambda: random_mdp(8, 3, BENCHMARK_GAMMA, seed=8),
    "chain": chain_mdp,
}


def benchmark_names() -> List[str]:
    return sorted(BENCHMARKS)


def load_benchmark(name: str) -> TabularMdp:
    if name not in BENCHMARKS:
        raise ConfigError(
            f"unknown benchmark '{name}', available: {', '.join(benchmark_names())}"
        )
    return BENCHMARKS[name]()
