"""基于计数器的种子派生。

每条轨迹、每个样本、每次迭代都从基础种子按路径派生出独立的 64 位种子，
因此结果只取决于种子路径，而与执行顺序和线程数无关。
"""
from typing import Union

import numpy as np


SeedLike = Union[int, np.integer]


def split_seed(base_seed: SeedLike, *path: int) -> int:
    """由基础种子与索引路径派生 64 位种子。"""
    sequence = np.random.SeedSequence(int(base_seed), spawn_key=tuple(int(i) for i in path))
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def make_rng(seed: SeedLike) -> np.random.Generator:
    """构造计数器型（Philox）随机数生成器。"""
    return np.random.Generator(np.random.Philox(int(seed)))
