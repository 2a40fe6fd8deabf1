"""Core data model: indicators, DMUs, payment schedules and groupings."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

WEIGHT_SUM_TOL = 1e-9


class CeilingsMode(enum.Enum):
    PROPORTIONAL_TO_ACTUAL = "proportional"
    EXPLICIT = "explicit"


@dataclass(frozen=True)
class Indicator:
    id: str
    name: str = ""
    description: str = ""


@dataclass(frozen=True)
class DmuRecord:
    id: str
    group_id: str
    values: tuple[float, ...]
    goals: tuple[float, ...]
    endowment: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        object.__setattr__(self, "goals", tuple(float(v) for v in self.goals))
        object.__setattr__(self, "endowment", float(self.endowment))


@dataclass(frozen=True)
class PaymentSchedule:
    """Indicator weights and deviation ceilings.

    ``ceilings`` is ``None`` for the default mode where each ceiling equals the
    DMU's actual level; otherwise it maps DMU id to a per-indicator tuple.
    ``weight_overrides`` optionally replaces the global weights for given DMUs.
    """

    weights: tuple[float, ...]
    ceilings: dict[str, tuple[float, ...]] | None = None
    weight_overrides: dict[str, tuple[float, ...]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if self.ceilings is not None:
            object.__setattr__(
                self, "ceilings", {k: tuple(float(x) for x in v) for k, v in self.ceilings.items()}
            )
        object.__setattr__(
            self, "weight_overrides", {k: tuple(float(x) for x in v) for k, v in self.weight_overrides.items()}
        )

    @property
    def ceilings_mode(self) -> CeilingsMode:
        return CeilingsMode.PROPORTIONAL_TO_ACTUAL if self.ceilings is None else CeilingsMode.EXPLICIT

    def weights_for(self, dmu: DmuRecord) -> tuple[float, ...]:
        return self.weight_overrides.get(dmu.id, self.weights)

    def ceilings_for(self, dmu: DmuRecord) -> tuple[float, ...]:
        if self.ceilings is None:
            return dmu.values
        return self.ceilings[dmu.id]


@dataclass(frozen=True)
class Grouping:
    groups: dict[str, tuple[str, ...]]

    def __post_init__(self) -> None:
        object.__setattr__(self, "groups", {g: tuple(ids) for g, ids in self.groups.items()})

    def group_of(self, dmu_id: str) -> str:
        for g, ids in self.groups.items():
            if dmu_id in ids:
                return g
        raise KeyError(dmu_id)


@dataclass(frozen=True)
class Dataset:
    indicators: tuple[Indicator, ...]
    dmus: tuple[DmuRecord, ...]
    schedule: PaymentSchedule
    grouping: Grouping

    def __post_init__(self) -> None:
        object.__setattr__(self, "indicators", tuple(self.indicators))
        object.__setattr__(self, "dmus", tuple(self.dmus))

    @property
    def s(self) -> int:
        return len(self.indicators)

    @property
    def n(self) -> int:
        return len(self.dmus)

    @property
    def ids(self) -> list[str]:
        return [d.id for d in self.dmus]

    def dmu(self, dmu_id: str) -> DmuRecord:
        for d in self.dmus:
            if d.id == dmu_id:
                return d
        raise KeyError(dmu_id)

    def matrix(self) -> np.ndarray:
        """Indicator levels as an (n, s) array."""
        return np.array([d.values for d in self.dmus], dtype=float).reshape(self.n, self.s)

    def regrouped(self, grouping: Grouping) -> Dataset:
        dmus = tuple(
            DmuRecord(d.id, grouping.group_of(d.id), d.values, d.goals, d.endowment) for d in self.dmus
        )
        return Dataset(self.indicators, dmus, self.schedule, grouping)


def singleton_grouping(dmu_ids: list[str]) -> Grouping:
    return Grouping({d: (d,) for d in dmu_ids})


def single_grouping(dmu_ids: list[str], name: str = "all") -> Grouping:
    return Grouping({name: tuple(dmu_ids)})


def grouping_from_column(dmus: list[DmuRecord] | tuple[DmuRecord, ...]) -> Grouping:
    groups: dict[str, list[str]] = {}
    for d in dmus:
        groups.setdefault(d.group_id, []).append(d.id)
    return Grouping({g: tuple(ids) for g, ids in groups.items()})


@dataclass(frozen=True)
class Violation:
    rule: str
    message: str
    dmu_id: str | None = None
    indicator_id: str | None = None

    def __str__(self) -> str:
        where = []
        if self.dmu_id is not None:
            where.append(f"dmu={self.dmu_id}")
        if self.indicator_id is not None:
            where.append(f"indicator={self.indicator_id}")
        loc = f" [{', '.join(where)}]" if where else ""
        return f"{self.rule}{loc}: {self.message}"


def _bad_number(x: float) -> bool:
    return not math.isfinite(x)


def _check_weights(weights: tuple[float, ...], s: int, ind_ids: list[str], dmu_id: str | None) -> list[Violation]:
    out: list[Violation] = []
    if len(weights) != s:
        return [Violation("weights.length", f"expected {s} weights, got {len(weights)}", dmu_id)]
    for w, ind in zip(weights, ind_ids):
        if _bad_number(w) or w <= 0:
            out.append(
                Violation(
                    "weights.positive",
                    f"weight {w} must be > 0; drop the indicator instead of giving it zero weight",
                    dmu_id,
                    ind,
                )
            )
    total = sum(weights)
    if abs(total - 1.0) > WEIGHT_SUM_TOL:
        out.append(Violation("weights.sum", f"weights sum to {total:.12g}, expected 1", dmu_id))
    return out


def validate_dataset(dataset: Dataset) -> list[Violation]:
    """Return every invariant violation; an empty list means the data is admissible."""
    v: list[Violation] = []
    s = dataset.s
    ind_ids = [ind.id for ind in dataset.indicators]

    if s < 1:
        v.append(Violation("indicators.count", "at least one indicator is required"))
    seen: set[str] = set()
    for ind in dataset.indicators:
        if ind.id in seen:
            v.append(Violation("indicators.unique", f"duplicate indicator id {ind.id!r}", indicator_id=ind.id))
        seen.add(ind.id)

    if dataset.n < 1:
        v.append(Violation("dmus.count", "at least one DMU is required"))
    dmu_ids: set[str] = set()
    for d in dataset.dmus:
        if d.id in dmu_ids:
            v.append(Violation("dmus.unique", f"duplicate DMU id {d.id!r}", d.id))
        dmu_ids.add(d.id)
        if len(d.values) != s:
            v.append(Violation("values.length", f"expected {s} values, got {len(d.values)}", d.id))
        else:
            for x, ind in zip(d.values, ind_ids):
                if _bad_number(x) or x < 0:
                    v.append(Violation("values.nonnegative", f"value {x} must be a finite number >= 0", d.id, ind))
            if all(x == 0 for x in d.values):
                v.append(Violation("values.nonzero", "indicator vector Y_j must not be the zero vector", d.id))
        if len(d.goals) != s:
            v.append(Violation("goals.length", f"expected {s} goals, got {len(d.goals)}", d.id))
        else:
            for x, ind in zip(d.goals, ind_ids):
                if _bad_number(x) or x < 0:
                    v.append(Violation("goals.nonnegative", f"goal {x} must be a finite number >= 0", d.id, ind))
        if _bad_number(d.endowment) or d.endowment <= 0:
            v.append(Violation("endowment.positive", f"endowment {d.endowment} must be > 0", d.id))

    sched = dataset.schedule
    if s >= 1:
        v.extend(_check_weights(sched.weights, s, ind_ids, None))
        for dmu_id, w in sched.weight_overrides.items():
            if dmu_id not in dmu_ids:
                v.append(Violation("weights.override_unknown", "weight override for unknown DMU", dmu_id))
            v.extend(_check_weights(w, s, ind_ids, dmu_id))

    if sched.ceilings is not None:
        for d in dataset.dmus:
            c = sched.ceilings.get(d.id)
            if c is None:
                v.append(Violation("ceilings.missing", "explicit ceilings given but none for this DMU", d.id))
                continue
            if len(c) != s:
                v.append(Violation("ceilings.length", f"expected {s} ceilings, got {len(c)}", d.id))
                continue
            for x, y, ind in zip(c, d.values, ind_ids):
                if _bad_number(x) or x < 0:
                    v.append(Violation("ceilings.nonnegative", f"ceiling {x} must be >= 0", d.id, ind))
                elif y > 0 and x <= 0:
                    v.append(Violation("ceilings.positive", "ceiling must be > 0 where the actual level is > 0", d.id, ind))
        for dmu_id in sched.ceilings:
            if dmu_id not in dmu_ids:
                v.append(Violation("ceilings.unknown", "ceilings given for unknown DMU", dmu_id))

    placed: dict[str, str] = {}
    for g, ids in dataset.grouping.groups.items():
        if not ids:
            v.append(Violation("grouping.nonempty", f"group {g!r} is empty"))
        for dmu_id in ids:
            if dmu_id in placed:
                v.append(Violation("grouping.partition", f"DMU in groups {placed[dmu_id]!r} and {g!r}", dmu_id))
            placed[dmu_id] = g
            if dmu_id not in dmu_ids:
                v.append(Violation("grouping.unknown", f"group {g!r} lists unknown DMU", dmu_id))
    for d in dataset.dmus:
        if d.id not in placed:
            v.append(Violation("grouping.cover", "DMU is not assigned to any group", d.id))
    return v
