from app.policy.base import BasePolicy, ElsConstants, ElsMeasurement
from app.policy.factory import PolicyFactory, dump_policy, load_policy, loads_policy
from app.policy.gaussian import GaussianLinearPolicy
from app.policy.softmax import SoftmaxTabularPolicy


__all__ = [
    "BasePolicy",
    "ElsConstants",
    "ElsMeasurement",
    "GaussianLinearPolicy",
    "PolicyFactory",
    "SoftmaxTabularPolicy",
    "dump_policy",
    "load_policy",
    "loads_policy",
]
