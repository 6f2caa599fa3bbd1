from typing import Any, Dict, Optional

from pydantic import BaseModel, Field

from app.schema import CheckStatus
from app.utils.files_utils import to_jsonable


class CheckReport(BaseModel):
    """表示一项检查的结果。

    不等式检查：pass ⇔ measured ≤ bound + margin。details 中记录最坏情形的
    见证输入（种子、参数），可据此复现 measured。
    """

    check_name: str
    status: CheckStatus
    measured: Any = Field(default=None)
    bound: Optional[float] = Field(default=None)
    margin: float = Field(default=0.0)
    details: Dict[str, Any] = Field(default_factory=dict)

    class Config:
        arbitrary_types_allowed = True

    @property
    def passed(self) -> bool:
        return self.status == CheckStatus.PASS

    @property
    def failed(self) -> bool:
        return self.status == CheckStatus.FAIL

    def __bool__(self):
        return self.passed

    def __str__(self):
        return (
            f"{self.check_name}: {self.status.value} "
            f"(measured={self.measured}, bound={self.bound}, margin={self.margin})"
        )

    @classmethod
    def inequality(
        cls,
        check_name: str,
        measured: float,
        bound: float,
        margin: float = 0.0,
        **details: Any,
    ) -> "CheckReport":
        status = CheckStatus.PASS if measured <= bound + margin else CheckStatus.FAIL
        return cls(
            check_name=check_name,
            status=status,
            measured=measured,
            bound=bound,
            margin=margin,
            details=details,
        )

    @classmethod
    def inconclusive(cls, check_name: str, reason: str, **details: Any) -> "CheckReport":
        return cls(
            check_name=check_name,
            status=CheckStatus.INCONCLUSIVE,
            details={"reason": reason, **details},
        )

    @classmethod
    def combine(
        cls, check_name: str, parts: Dict[str, "CheckReport"], **details: Any
    ) -> "CheckReport":
        """合并同一检查在多个设定下的结果；任一失败即失败，否则任一无定论即无定论"""
        statuses = {part.status for part in parts.values()}
        if CheckStatus.FAIL in statuses:
            status = CheckStatus.FAIL
        elif CheckStatus.INCONCLUSIVE in statuses:
            status = CheckStatus.INCONCLUSIVE
        else:
            status = CheckStatus.PASS

        def excess(part: "CheckReport") -> float:
            if part.bound is None or not isinstance(part.measured, (int, float)):
                return float("-inf")
            return part.measured - part.bound - part.margin

        worst = max(parts, key=lambda label: excess(parts[label]))
        return cls(
            check_name=check_name,
            status=status,
            measured=parts[worst].measured,
            bound=parts[worst].bound,
            margin=parts[worst].margin,
            details={
                "worst": worst,
                "parts": {label: part.to_json_dict() for label, part in parts.items()},
                **details,
            },
        )

    def replace(self, **kwargs) -> "CheckReport":
        """返回一个替换了给定字段的新 CheckReport。"""
        return type(self)(**{**self.model_dump(), **kwargs})

    def to_json_dict(self) -> Dict[str, Any]:
        return to_jsonable(
            {
                "check_name": self.check_name,
                "pass": self.passed,
                "status": self.status,
                "measured": self.measured,
                "bound": self.bound,
                "margin": self.margin,
                "details": self.details,
            }
        )
