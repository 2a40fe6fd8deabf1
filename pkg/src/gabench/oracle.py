"""Brute-force reference solver for small benchmarking instances.

Shares no model code with :mod:`gabench.gab`. Faces of the Pareto frontier are
enumerated explicitly, and for each face every assignment of payment regions
to a DMU's indicators is solved as a plain LP. With the face fixed, the group
objective separates across DMUs, so each DMU is minimised on its own and the
face totals are compared. Final objectives are re-evaluated from the targets
with the payment functions.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .domain import Dataset, DmuRecord
from .frontier import EfficientSet
from .payments import PaymentRegion, payment_for_levels
from .solver_backend import INF, Backend, LinearProblem, lp_backend

MAX_EFFICIENT = 12
MAX_INDICATORS = 4
MAX_GROUP_CELLS = 12
# must agree with the zero-pay floor used for zero ceilings in the MILP
STEP_MARGIN = 1e-6


class OracleGuardError(ValueError):
    """Instance too large for exhaustive enumeration."""


@dataclass(frozen=True)
class FacetCandidate:
    spanning_ids: tuple[str, ...]
    normal: tuple[float, ...]
    offset: float


@dataclass(frozen=True)
class OracleResult:
    objective: float
    targets: dict[str, tuple[float, ...]]
    facet: FacetCandidate


def _face_of(subset: tuple[int, ...], pts: np.ndarray, backend: Backend) -> tuple[frozenset[int], np.ndarray, float] | None:
    """Smallest positive-normal face of the hull containing ``subset``, or None.

    Maximising the capped slacks of the points outside the subset pushes the
    hyperplane off every point that does not have to lie on it.
    """
    m, s = pts.shape
    prob = LinearProblem("face")
    u = [prob.add_var(f"u{r}", 1.0, INF) for r in range(s)]
    u0 = prob.add_var("u0", -INF, INF)
    caps = {}
    for k in range(m):
        row = {u[r]: pts[k, r] for r in range(s)}
        row[u0] = 1.0
        if k in subset:
            prob.add_eq(row, 0.0)
        else:
            t = caps[k] = prob.add_var(f"t{k}", 0.0, 1.0)
            # u'Y_k + u0 + t_k <= 0
            row[t] = 1.0
            prob.add_le(row, 0.0)
    prob.set_objective({t: -1.0 for t in caps.values()})
    res = backend.solve(prob)
    if not res.optimal:
        return None
    members = set(subset) | {k for k, t in caps.items() if res.values[t] < 0.5}
    normal = np.asarray(res.values[u])
    return frozenset(members), normal, float(res.values[u0])


def enumerate_facets(
    efficient: EfficientSet, dataset: Dataset | None = None, backend: Backend | None = None
) -> list[FacetCandidate]:
    """All maximal faces of the Pareto frontier with a strictly positive normal."""
    pts = np.asarray(efficient.matrix)
    m, s = pts.shape
    if m > MAX_EFFICIENT or s > MAX_INDICATORS:
        raise OracleGuardError(
            f"facet enumeration limited to |E| <= {MAX_EFFICIENT} and s <= {MAX_INDICATORS}; got |E|={m}, s={s}"
        )
    backend = backend or lp_backend()
    found: dict[frozenset[int], tuple[np.ndarray, float]] = {}
    for size in range(min(s, m), 0, -1):
        for subset in itertools.combinations(range(m), size):
            if any(set(subset) <= face for face in found):
                continue
            face = _face_of(subset, pts, backend)
            if face is not None:
                found.setdefault(face[0], (face[1], face[2]))
    maximal = [f for f in found if not any(f < g for g in found)]
    ids = efficient.members
    facets = []
    for face in maximal:
        normal, offset = found[face]
        members = tuple(sorted(ids[k] for k in face))
        facets.append(FacetCandidate(members, tuple(float(x) for x in normal), offset))
    return sorted(facets, key=lambda f: f.spanning_ids)


def _region_interval(region: PaymentRegion, ceiling: float) -> tuple[float, float] | None:
    if region is PaymentRegion.FULL_PAY:
        return (-INF, 0.0)
    if region is PaymentRegion.LINEAR_PAY:
        return (0.0, ceiling) if ceiling > 0 else None
    return (ceiling if ceiling > 0 else STEP_MARGIN, INF)


def _best_on_face(
    dmu: DmuRecord,
    weights: tuple[float, ...],
    ceilings: tuple[float, ...],
    goal_pay: tuple[float, ...],
    face_pts: np.ndarray,
    backend: Backend,
) -> tuple[float, np.ndarray] | None:
    s = face_pts.shape[1]
    y = np.asarray(dmu.values)
    lo = face_pts.min(axis=0) - y
    hi = face_pts.max(axis=0) + 1e-9 - y
    lo = lo - 1e-9
    best: tuple[float, np.ndarray] | None = None
    for assignment in itertools.product(list(PaymentRegion), repeat=s):
        intervals = [_region_interval(reg, ceilings[r]) for r, reg in enumerate(assignment)]
        if any(iv is None or iv[0] > hi[r] or iv[1] < lo[r] for r, iv in enumerate(intervals)):
            continue
        prob = LinearProblem("oracle_cell")
        mu = [prob.add_var(f"mu{v}") for v in range(len(face_pts))]
        prob.add_eq({i: 1.0 for i in mu}, 1.0)
        obj = {}
        for r, reg in enumerate(assignment):
            a, b = intervals[r]
            dev = {mu[v]: face_pts[v, r] for v in range(len(face_pts))}
            # deviation s_r = target_r - y_r within the region
            prob.add_row(dev, a + y[r], b + y[r])
            qw = dmu.endowment * weights[r]
            pp = prob.add_var(f"pp{r}")
            pm = prob.add_var(f"pm{r}")
            obj[pp] = obj[pm] = 1.0 / qw
            # pay_r - goal_r = pp - pm, with pay_r linear inside the region
            if reg is PaymentRegion.FULL_PAY:
                prob.add_eq({pp: -1.0, pm: 1.0}, goal_pay[r] - qw)
            elif reg is PaymentRegion.ZERO_PAY:
                prob.add_eq({pp: -1.0, pm: 1.0}, goal_pay[r])
            else:
                # qw - qw/d * (target - y) - goal = pp - pm
                row = {mu[v]: -qw / ceilings[r] * face_pts[v, r] for v in range(len(face_pts))}
                row[pp] = -1.0
                row[pm] = 1.0
                prob.add_eq(row, goal_pay[r] - qw - qw / ceilings[r] * y[r])
        prob.set_objective(obj)
        res = backend.solve(prob)
        if not res.optimal:
            continue
        if best is None or res.objective < best[0]:
            weights_mu = np.maximum(np.asarray(res.values[mu]), 0.0)
            best = (float(res.objective), (weights_mu / weights_mu.sum()) @ face_pts)
    return best


def oracle_solve_group(
    group: list[str] | tuple[str, ...],
    dataset: Dataset,
    efficient: EfficientSet,
    backend: Backend | None = None,
    facets: list[FacetCandidate] | None = None,
) -> OracleResult:
    if len(group) * dataset.s > MAX_GROUP_CELLS:
        raise OracleGuardError(
            f"oracle limited to |J_g| * s <= {MAX_GROUP_CELLS}; got {len(group)} * {dataset.s}"
        )
    backend = backend or lp_backend()
    if facets is None:
        facets = enumerate_facets(efficient, dataset, backend)
    sched = dataset.schedule
    dmus = [dataset.dmu(i) for i in group]
    goal_pay = {
        dmu.id: payment_for_levels(dmu.goals, dmu, sched).per_indicator for dmu in dmus
    }

    best: OracleResult | None = None
    for facet in facets:
        face_pts = np.array([efficient.point(i) for i in facet.spanning_ids])
        targets: dict[str, tuple[float, ...]] = {}
        for dmu in dmus:
            cell = _best_on_face(
                dmu, sched.weights_for(dmu), sched.ceilings_for(dmu), goal_pay[dmu.id], face_pts, backend
            )
            if cell is None:
                break
            targets[dmu.id] = tuple(float(t) for t in cell[1])
        else:
            value = _objective(targets, dataset)
            if best is None or value < best.objective - 1e-12:
                best = OracleResult(value, targets, facet)
    if best is None:
        raise RuntimeError("oracle found no feasible facet/region combination (internal error)")
    return best


def _objective(targets: dict[str, tuple[float, ...]], dataset: Dataset) -> float:
    total = 0.0
    for dmu_id, target in targets.items():
        dmu = dataset.dmu(dmu_id)
        sched = dataset.schedule
        w = sched.weights_for(dmu)
        vs_t = payment_for_levels(target, dmu, sched).per_indicator
        vs_g = payment_for_levels(dmu.goals, dmu, sched).per_indicator
        total += sum(abs(a - b) / (dmu.endowment * wr) for a, b, wr in zip(vs_t, vs_g, w))
    return total
