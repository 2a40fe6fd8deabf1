from __future__ import annotations

import enum
from dataclasses import dataclass, fields, replace


class GroupingMode(enum.Enum):
    PER_FILE = "per-file"
    SINGLETONS = "singletons"
    SINGLE_GROUP = "single-group"


@dataclass(frozen=True)
class EngineSettings:
    """Tolerances and solver options shared by every analysis stage."""

    feasibility_tol: float = 1e-7
    efficiency_tol: float = 1e-6
    lambda_zero_tol: float = 1e-9
    solver: str = "auto"
    time_limit: float | None = None
    use_sos1: bool = True
    grouping_mode: GroupingMode = GroupingMode.PER_FILE
    # second solve picking, among optimal targets, the ones closest to actual levels
    tie_break: bool = True
    # per-coordinate bound on the hyperplane normal in the big-M fallback, as a
    # multiple of max_j 1/y_rj
    big_m_normal_factor: float = 1e4
    dump_lp: str | None = None

    def __post_init__(self) -> None:
        for name in ("feasibility_tol", "efficiency_tol", "lambda_zero_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if self.time_limit is not None and self.time_limit <= 0:
            raise ValueError("time_limit must be > 0")
        if isinstance(self.grouping_mode, str):
            object.__setattr__(self, "grouping_mode", GroupingMode(self.grouping_mode))

    def with_(self, **changes) -> EngineSettings:
        return replace(self, **changes)

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]
