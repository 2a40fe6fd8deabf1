"""Attainable set membership, Pareto-efficiency tests and the extreme-efficient set.

The attainable set is ``{Y >= 0 : Y <= sum_j lam_j Y_j, sum lam = 1, lam >= 0}``.
Every test here is a small LP over the reference points, which may be the full
dataset or only its extreme-efficient members (both span the same set).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .domain import Dataset
from .solver_backend import Backend, LinearProblem, lp_backend


class PreconditionError(ValueError):
    """An operation was called with arguments violating its precondition."""


class GoalClassification(enum.Enum):
    OUTSIDE_AS = "OutsideAS"
    INTERIOR_OF_AS = "InteriorOfAS"
    ON_PARETO_FRONTIER = "OnParetoFrontier"


@dataclass(frozen=True)
class EfficientSet:
    members: tuple[str, ...]
    matrix: np.ndarray

    def __post_init__(self) -> None:
        m = np.array(self.matrix, dtype=float)
        m.setflags(write=False)
        object.__setattr__(self, "members", tuple(self.members))
        object.__setattr__(self, "matrix", m)

    def __len__(self) -> int:
        return len(self.members)

    def point(self, dmu_id: str) -> np.ndarray:
        return self.matrix[self.members.index(dmu_id)]


Reference = Union[Dataset, EfficientSet, np.ndarray]


def reference_points(ref: Reference) -> np.ndarray:
    if isinstance(ref, Dataset):
        return ref.matrix()
    if isinstance(ref, EfficientSet):
        return np.asarray(ref.matrix)
    return np.atleast_2d(np.asarray(ref, dtype=float))


def _solve(problem: LinearProblem, backend: Backend | None) -> float:
    res = (backend or lp_backend()).solve(problem)
    if not res.optimal:
        raise RuntimeError(f"{problem.name}: LP solve failed ({res.status.value}: {res.message})")
    return float(res.objective)


def _shortfall(point: np.ndarray, pts: np.ndarray, backend: Backend | None) -> tuple[float, np.ndarray]:
    m, s = pts.shape
    if m == 0:
        return float("inf"), np.full(s, np.inf)
    prob = LinearProblem("as_membership")
    lam = [prob.add_var(f"lam{k}") for k in range(m)]
    gap = [prob.add_var(f"v{r}") for r in range(s)]
    prob.add_eq({i: 1.0 for i in lam}, 1.0, "convexity")
    for r in range(s):
        coeffs = {lam[k]: pts[k, r] for k in range(m)}
        coeffs[gap[r]] = 1.0
        prob.add_ge(coeffs, point[r], f"cover{r}")
    prob.set_objective({g: 1.0 for g in gap})
    res = (backend or lp_backend()).solve(prob)
    if not res.optimal:
        raise RuntimeError(f"as_membership: LP solve failed ({res.status.value}: {res.message})")
    short = np.maximum(np.asarray(res.values)[gap], 0.0)
    return float(short.sum()), short


def dominance_gap(point: Sequence[float], points: np.ndarray, backend: Backend | None = None) -> float:
    """Smallest total shortfall ``sum_r max(0, point_r - (lam'Y)_r)`` over convex weights."""
    return _shortfall(np.asarray(point, dtype=float), np.asarray(points, dtype=float), backend)[0]


def as_membership(point: Sequence[float], ref: Reference, tol: float = 1e-7, backend: Backend | None = None) -> bool:
    """True iff ``point`` is (within ``tol``) dominated by a convex combination of the references."""
    p = np.asarray(point, dtype=float)
    if np.any(p < 0):
        raise PreconditionError("point must be componentwise nonnegative")
    return dominance_gap(p, reference_points(ref), backend) <= tol


def pareto_slack(
    point: Sequence[float], ref: Reference, tol: float = 1e-7, backend: Backend | None = None
) -> float:
    """Largest total componentwise improvement on ``point`` that stays inside the attainable set."""
    pts = reference_points(ref)
    p = np.asarray(point, dtype=float)
    if np.any(p < 0):
        raise PreconditionError("point must be componentwise nonnegative")
    gap, short = _shortfall(p, pts, backend)
    if gap > tol:
        raise PreconditionError(f"point {p.tolist()} is outside the attainable set")
    # pull a point lying within tol outside AS back onto it
    p = p - short
    m, s = pts.shape
    prob = LinearProblem("pareto_slack")
    lam = [prob.add_var(f"lam{k}") for k in range(m)]
    t = [prob.add_var(f"t{r}") for r in range(s)]
    prob.add_eq({i: 1.0 for i in lam}, 1.0, "convexity")
    for r in range(s):
        coeffs = {lam[k]: pts[k, r] for k in range(m)}
        coeffs[t[r]] = -1.0
        prob.add_ge(coeffs, p[r], f"improve{r}")
    prob.set_objective({i: -1.0 for i in t})
    return max(0.0, -_solve(prob, backend))


def extreme_efficient_set(
    dataset: Dataset,
    efficiency_tol: float = 1e-6,
    feasibility_tol: float = 1e-7,
    backend: Backend | None = None,
) -> EfficientSet:
    """Pareto-efficient DMUs that are not dominated by a convex mix of other efficient DMUs.

    Among exact duplicates only the lexicographically smallest id is kept.
    """
    pts = dataset.matrix()
    ids = dataset.ids
    efficient = [
        k for k in range(len(ids))
        if pareto_slack(pts[k], pts, feasibility_tol, backend) <= efficiency_tol
    ]
    extreme = []
    for k in efficient:
        dup_larger = {
            m for m in efficient
            if m != k and ids[m] > ids[k] and np.allclose(pts[m], pts[k], rtol=0.0, atol=feasibility_tol)
        }
        others = [m for m in efficient if m != k and m not in dup_larger]
        if others and dominance_gap(pts[k], pts[others], backend) <= feasibility_tol:
            continue
        extreme.append(k)
    return EfficientSet(tuple(ids[k] for k in extreme), pts[extreme])


def classify_goal(
    goal: Sequence[float],
    efficient: Reference,
    efficiency_tol: float = 1e-7,
    feasibility_tol: float = 1e-7,
    backend: Backend | None = None,
) -> GoalClassification:
    pts = reference_points(efficient)
    if not as_membership(goal, pts, feasibility_tol, backend):
        return GoalClassification.OUTSIDE_AS
    if pareto_slack(goal, pts, feasibility_tol, backend) <= efficiency_tol:
        return GoalClassification.ON_PARETO_FRONTIER
    return GoalClassification.INTERIOR_OF_AS
