"""Goal achievement and incentive payment functions.

A deviation ``s`` is the level being evaluated against (goal or target) minus
the actual level. Achievement is 1 for ``s <= 0``, falls linearly to 0 at the
ceiling ``d`` and stays 0 beyond it. With ``d == 0`` the middle branch vanishes
and achievement is a step: 1 for ``s <= 0``, else 0.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

from .domain import DmuRecord, PaymentSchedule


class PaymentRegion(enum.Enum):
    FULL_PAY = "FullPay"
    LINEAR_PAY = "LinearPay"
    ZERO_PAY = "ZeroPay"


class RegionMismatchError(ValueError):
    """A deviation outside the bounds of the region it was evaluated under."""


@dataclass(frozen=True)
class PaymentBreakdown:
    per_indicator: tuple[float, ...]
    total: float

    def rates(self, endowment: float, weights: Sequence[float]) -> tuple[float, ...]:
        """Per-indicator incentive rates ``p_r / (Q w_r)`` in [0, 1]."""
        return tuple(p / (endowment * w) for p, w in zip(self.per_indicator, weights))


def achievement(deviation: float, ceiling: float) -> float:
    if ceiling < 0:
        raise ValueError(f"ceiling must be >= 0, got {ceiling}")
    if deviation <= 0:
        return 1.0
    if deviation >= ceiling:
        return 0.0
    return 1.0 - deviation / ceiling


def payment(deviation: float, endowment: float, weight: float, ceiling: float) -> float:
    return endowment * weight * achievement(deviation, ceiling)


def total_payment(deviations: Sequence[float], dmu: DmuRecord, schedule: PaymentSchedule) -> PaymentBreakdown:
    weights = schedule.weights_for(dmu)
    ceilings = schedule.ceilings_for(dmu)
    if len(deviations) != len(weights):
        raise ValueError(f"expected {len(weights)} deviations, got {len(deviations)}")
    parts = tuple(
        payment(s, dmu.endowment, w, d) for s, w, d in zip(deviations, weights, ceilings)
    )
    return PaymentBreakdown(parts, sum(parts))


def payment_for_levels(levels: Sequence[float], dmu: DmuRecord, schedule: PaymentSchedule) -> PaymentBreakdown:
    """Payments when evaluated against ``levels`` (goals or targets)."""
    return total_payment([float(t) - y for t, y in zip(levels, dmu.values)], dmu, schedule)


def region_of(deviation: float, ceiling: float) -> PaymentRegion:
    """The region implied by a deviation; boundary points go to the lower region."""
    if deviation <= 0:
        return PaymentRegion.FULL_PAY
    if deviation < ceiling:
        return PaymentRegion.LINEAR_PAY
    return PaymentRegion.ZERO_PAY


def region_contains(region: PaymentRegion, deviation: float, ceiling: float, tol: float = 0.0) -> bool:
    if region is PaymentRegion.FULL_PAY:
        return deviation <= tol
    if region is PaymentRegion.LINEAR_PAY:
        return ceiling > 0 and -tol <= deviation <= ceiling + tol
    if ceiling == 0:
        return deviation > 0
    return deviation >= ceiling - tol


def linearized_payment(
    region: PaymentRegion,
    deviation: float,
    endowment: float,
    weight: float,
    ceiling: float,
) -> float:
    """Payment written as ``Qw I1 + Qw (1 - s/d) I2`` with one-hot region indicators.

    Raises :class:`RegionMismatchError` when ``deviation`` lies outside the
    region's bounds.
    """
    tol = 1e-12 * max(1.0, abs(ceiling))
    if not region_contains(region, deviation, ceiling, tol):
        raise RegionMismatchError(f"deviation {deviation} is not in region {region.value} (ceiling {ceiling})")
    i1 = 1.0 if region is PaymentRegion.FULL_PAY else 0.0
    i2 = 1.0 if region is PaymentRegion.LINEAR_PAY else 0.0
    qw = endowment * weight
    linear = qw * (1.0 - deviation / ceiling) * i2 if i2 else 0.0
    return qw * i1 + linear
