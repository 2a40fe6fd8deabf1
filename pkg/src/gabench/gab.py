"""Goal-adjusted benchmarking: one MILP per group of DMUs.

Every DMU of a group is projected onto a common face of the Pareto frontier
of the attainable set. Among such projections the model picks the ones whose
incentive payments deviate least from the payments earned against the goals,
each indicator's deviation normalised by its share of the endowment.

Facet commonality is enforced through a supporting hyperplane ``u'Y + u0 = 0``
with ``u > 0``: every extreme-efficient DMU ``k`` gets a slack ``d_k >= 0`` and
``{lambda_k, d_k}`` form an SOS1 pair, so only DMUs lying on the hyperplane can
act as referents. Payments are piecewise linear in the deviation; region
binaries ``I1, I2, I3`` (full / linear / zero pay) with ``z = s * I2``
linearise them.
"""

from __future__ import annotations

import enum
import logging
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .domain import Dataset, DmuRecord, single_grouping, singleton_grouping
from .frontier import EfficientSet, extreme_efficient_set
from .payments import PaymentBreakdown, PaymentRegion, payment, payment_for_levels
from .settings import EngineSettings, GroupingMode
from .solver_backend import INF, Backend, LinearProblem, SolveStatus, get_backend, lp_backend

log = logging.getLogger(__name__)

# relative slack on the primary objective when the exact-optimum restriction
# of the tie-break solve is rejected by the solver
TIE_BREAK_SLACK = 1e-9
# lower bound on s in the zero-pay region when the payment ceiling is 0
STEP_MARGIN = 1e-6


class ModelConstructionError(ValueError):
    pass


class BigMFallbackWarning(UserWarning):
    pass


class GroupStatus(enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    TIME_LIMIT = "TimeLimit"
    ERROR = "Error"


@dataclass
class MilpProblem:
    """Model (variables, rows, SOS1 pairs) plus the index maps needed to read a solution."""

    lp: LinearProblem
    group_id: str
    dmu_ids: tuple[str, ...]
    efficient: EfficientSet
    sos1: bool
    lam: np.ndarray  # (|J|, |E|) variable indices
    lam_agg: list[int]
    d: list[int]
    u: list[int]
    u0: int
    s: np.ndarray  # (|J|, s)
    z: np.ndarray
    p_plus: np.ndarray
    p_minus: np.ndarray
    regions: np.ndarray  # (|J|, s, 3) indices of I1, I2, I3
    b: list[int] = field(default_factory=list)
    goal_payments: np.ndarray | None = None
    weights: np.ndarray | None = None  # Q_j * w_r, (|J|, s)

    @property
    def n_sos1(self) -> int:
        return len(self.lp.sos1)

    def objective_row(self) -> dict[int, float]:
        return dict(self.lp.objective)


@dataclass(frozen=True)
class GroupSolution:
    group_id: str
    dmu_ids: tuple[str, ...]
    status: GroupStatus
    targets: dict[str, tuple[float, ...]] = field(default_factory=dict)
    deviations: dict[str, tuple[float, ...]] = field(default_factory=dict)
    reference_set: tuple[str, ...] = ()
    lambdas: dict[str, dict[str, float]] = field(default_factory=dict)
    hyperplane: tuple[tuple[float, ...], float] | None = None
    objective: float | None = None
    audit_objective: float | None = None
    regions: dict[str, tuple[PaymentRegion, ...]] = field(default_factory=dict)
    payments_vs_targets: dict[str, PaymentBreakdown] = field(default_factory=dict)
    payments_vs_goals: dict[str, PaymentBreakdown] = field(default_factory=dict)
    optimal: bool = False
    message: str = ""


def _normal_lower_bounds(members: list[DmuRecord], e_max: np.ndarray) -> np.ndarray:
    """Lower bounds ``u_r >= max_j 1/y_rj`` from the positivity rows; zero levels fall back to 1/max_E y_r."""
    s = len(e_max)
    lb = np.zeros(s)
    for r in range(s):
        cands = []
        for dmu in members:
            y = dmu.values[r]
            if y > 0:
                cands.append(1.0 / y)
            else:
                cands.append(1.0 / e_max[r] if e_max[r] > 0 else 1.0)
        lb[r] = max(cands)
    return lb


def build_problem(
    group_id: str,
    members: list[DmuRecord],
    dataset: Dataset,
    efficient: EfficientSet,
    sos1: bool = True,
    big_m_normal_factor: float = 1e4,
) -> MilpProblem:
    if not members:
        raise ModelConstructionError(f"group {group_id!r} has no DMUs")
    if len(efficient) == 0:
        raise ModelConstructionError("the extreme-efficient set is empty")
    known = set(dataset.ids)
    for dmu in members:
        if dmu.id not in known:
            raise ModelConstructionError(f"DMU {dmu.id!r} of group {group_id!r} is not in the dataset")

    sched = dataset.schedule
    E = np.asarray(efficient.matrix)
    n_e, s = E.shape
    e_max = E.max(axis=0)
    J = len(members)
    lp = LinearProblem(f"gab_{group_id}")

    lam = np.array([[lp.add_var(f"lam_{efficient.members[k]}_{dmu.id}") for k in range(n_e)] for dmu in members])
    lam_agg = [lp.add_var(f"lamk_{efficient.members[k]}") for k in range(n_e)]
    d = [lp.add_var(f"d_{efficient.members[k]}") for k in range(n_e)]
    u = [lp.add_var(f"u_{r}", -INF, INF) for r in range(s)]
    u0 = lp.add_var("u0", -INF, INF)

    shape = (J, s)
    s_var = np.zeros(shape, dtype=int)
    z_var = np.zeros(shape, dtype=int)
    pp = np.zeros(shape, dtype=int)
    pm = np.zeros(shape, dtype=int)
    reg = np.zeros((J, s, 3), dtype=int)
    goal_pay = np.zeros(shape)
    qw = np.zeros(shape)

    for j, dmu in enumerate(members):
        # projection onto the convex hull of E
        for r in range(s):
            s_var[j, r] = lp.add_var(f"s_{r}_{dmu.id}", -INF, INF)
            lp.add_eq({**{lam[j, k]: E[k, r] for k in range(n_e)}, s_var[j, r]: -1.0}, dmu.values[r], f"proj_{r}_{dmu.id}")
        lp.add_eq({lam[j, k]: 1.0 for k in range(n_e)}, 1.0, f"convex_{dmu.id}")

    # supporting hyperplane through the referents
    for k in range(n_e):
        lp.add_eq({**{u[r]: E[k, r] for r in range(s)}, u0: 1.0, d[k]: 1.0}, 0.0, f"hyper_{efficient.members[k]}")
    for dmu in members:
        for r in range(s):
            y = dmu.values[r]
            if y > 0:
                lp.add_ge({u[r]: y}, 1.0, f"upos_{r}_{dmu.id}")
            else:
                scale = e_max[r] if e_max[r] > 0 else 1.0
                lp.add_ge({u[r]: scale}, 1.0, f"upos_{r}_{dmu.id}")

    objective: dict[int, float] = {}
    for j, dmu in enumerate(members):
        weights = sched.weights_for(dmu)
        ceilings = sched.ceilings_for(dmu)
        for r in range(s):
            y = dmu.values[r]
            dm = ceilings[r]
            q = dmu.endowment * weights[r]
            qw[j, r] = q
            m1 = y
            m2 = max(e_max[r], dm)
            sv = s_var[j, r]
            z = z_var[j, r] = lp.add_var(f"z_{r}_{dmu.id}", -INF, INF)
            p_plus = pp[j, r] = lp.add_var(f"pp_{r}_{dmu.id}")
            p_minus = pm[j, r] = lp.add_var(f"pm_{r}_{dmu.id}")
            i1 = lp.add_var(f"I1_{r}_{dmu.id}", binary=True)
            i2 = lp.add_var(f"I2_{r}_{dmu.id}", binary=True, ub=1.0 if dm > 0 else 0.0)
            i3 = lp.add_var(f"I3_{r}_{dmu.id}", binary=True)
            reg[j, r] = (i1, i2, i3)

            g = goal_pay[j, r] = payment(dmu.goals[r] - y, dmu.endowment, weights[r], dm)
            pay_row = {i1: q, p_plus: 1.0, p_minus: -1.0}
            if dm > 0:
                pay_row[i2] = q
                pay_row[z] = -q / dm
            lp.add_eq(pay_row, g, f"pay_{r}_{dmu.id}")

            # z = s * I2
            lp.add_ge({z: 1.0, i2: m1}, 0.0, f"zlo_{r}_{dmu.id}")
            lp.add_le({z: 1.0, i2: -m2}, 0.0, f"zhi_{r}_{dmu.id}")
            lp.add_ge({sv: 1.0, z: -1.0, i2: -m1}, -m1, f"szlo_{r}_{dmu.id}")
            lp.add_le({sv: 1.0, z: -1.0, i2: m2}, m2, f"szhi_{r}_{dmu.id}")

            # region bounds on s
            zero_pay_floor = dm if dm > 0 else STEP_MARGIN
            lp.add_ge({sv: 1.0, i3: -zero_pay_floor, i1: m1}, 0.0, f"reglo_{r}_{dmu.id}")
            lp.add_le({sv: 1.0, i2: -dm, i3: -m2}, 0.0, f"reghi_{r}_{dmu.id}")
            lp.add_eq({i1: 1.0, i2: 1.0, i3: 1.0}, 1.0, f"onehot_{r}_{dmu.id}")

            objective[p_plus] = 1.0 / q
            objective[p_minus] = 1.0 / q

    for k in range(n_e):
        lp.add_eq({lam_agg[k]: 1.0, **{lam[j, k]: -1.0 for j in range(J)}}, 0.0, f"agg_{efficient.members[k]}")

    b: list[int] = []
    if sos1:
        for k in range(n_e):
            lp.add_sos1([lam_agg[k], d[k]])
    else:
        u_lb = _normal_lower_bounds(members, e_max)
        u_ub = big_m_normal_factor * u_lb
        for r in range(s):
            lp.ub[u[r]] = float(u_ub[r])
        m_d = float(np.sum(u_ub * e_max))
        warnings.warn(
            f"group {group_id!r}: SOS1 unavailable, using big-M facet linking with |u_r| <= "
            f"{big_m_normal_factor:g} * max_j 1/y_rj and M_d = {m_d:.6g}; optimality holds only "
            "if some optimal hyperplane respects this bound",
            BigMFallbackWarning,
            stacklevel=2,
        )
        for k in range(n_e):
            bk = lp.add_var(f"b_{efficient.members[k]}", binary=True)
            b.append(bk)
            lp.add_le({d[k]: 1.0, bk: -m_d}, 0.0, f"bigm_d_{efficient.members[k]}")
            lp.add_le({lam_agg[k]: 1.0, bk: float(J)}, float(J), f"bigm_lam_{efficient.members[k]}")

    lp.set_objective(objective)
    return MilpProblem(
        lp=lp,
        group_id=group_id,
        dmu_ids=tuple(dmu.id for dmu in members),
        efficient=efficient,
        sos1=sos1,
        lam=lam,
        lam_agg=lam_agg,
        d=d,
        u=u,
        u0=u0,
        s=s_var,
        z=z_var,
        p_plus=pp,
        p_minus=pm,
        regions=reg,
        b=b,
        goal_payments=goal_pay,
        weights=qw,
    )


def _copy(base: LinearProblem, suffix: str) -> LinearProblem:
    return LinearProblem(
        name=base.name + suffix,
        var_names=list(base.var_names),
        lb=list(base.lb),
        ub=list(base.ub),
        binary=list(base.binary),
        row_names=list(base.row_names),
        row_lo=list(base.row_lo),
        row_hi=list(base.row_hi),
        rows=list(base.rows),
        cols=list(base.cols),
        vals=list(base.vals),
        sos1=[list(m) for m in base.sos1],
        objective=dict(base.objective),
    )


def _with_closest_target_objective(problem: MilpProblem, lp: LinearProblem, optimum: float, slack: float) -> LinearProblem:
    """Restrict ``lp`` to solutions within ``slack`` of the optimum and minimise scaled |s| instead."""
    base = problem.lp
    lp = _copy(lp, "_tiebreak")
    lp.add_le(dict(base.objective), optimum + slack, "primary_optimum")
    scale = np.asarray(problem.efficient.matrix).max(axis=0)
    scale[scale <= 0] = 1.0
    obj: dict[int, float] = {}
    J, s = problem.s.shape
    for j in range(J):
        for r in range(s):
            a_plus = lp.add_var(f"ap_{r}_{j}")
            a_minus = lp.add_var(f"am_{r}_{j}")
            lp.add_eq({int(problem.s[j, r]): 1.0, a_plus: -1.0, a_minus: 1.0}, 0.0, f"abs_{r}_{j}")
            obj[a_plus] = obj[a_minus] = 1.0 / scale[r]
    lp.set_objective(obj)
    return lp


def _status_of(status: SolveStatus) -> GroupStatus:
    return {
        SolveStatus.OPTIMAL: GroupStatus.OPTIMAL,
        SolveStatus.INFEASIBLE: GroupStatus.INFEASIBLE,
        SolveStatus.TIME_LIMIT: GroupStatus.TIME_LIMIT,
    }.get(status, GroupStatus.ERROR)


def objective_from_targets(
    targets: dict[str, tuple[float, ...]], dataset: Dataset
) -> float:
    """Sum over DMUs and indicators of |p(target) - p(goal)| / (Q w), via the payment functions."""
    total = 0.0
    for dmu_id, target in targets.items():
        dmu = dataset.dmu(dmu_id)
        weights = dataset.schedule.weights_for(dmu)
        vs_t = payment_for_levels(target, dmu, dataset.schedule)
        vs_g = payment_for_levels(dmu.goals, dmu, dataset.schedule)
        for r, w in enumerate(weights):
            total += abs(vs_t.per_indicator[r] - vs_g.per_indicator[r]) / (dmu.endowment * w)
    return total


def solve_group(
    problem: MilpProblem,
    dataset: Dataset,
    settings: EngineSettings | None = None,
    backend: Backend | None = None,
) -> GroupSolution:
    settings = settings or EngineSettings()
    backend = backend or get_backend(settings.solver)
    if problem.sos1 and not backend.capabilities.supports_sos1:
        raise ModelConstructionError(f"backend {backend.name!r} cannot handle SOS1; rebuild with sos1=False")
    if settings.dump_lp:
        os.makedirs(settings.dump_lp, exist_ok=True)
        with open(os.path.join(settings.dump_lp, f"group_{problem.group_id}.lp"), "w", encoding="utf-8") as fh:
            fh.write(problem.lp.to_lp_format())

    res = backend.solve(problem.lp, time_limit=settings.time_limit)
    status = _status_of(res.status)
    if res.values is None:
        if status is GroupStatus.INFEASIBLE:
            msg = "model infeasible although the efficient set is nonempty (internal error)"
        else:
            msg = res.message
        log.error("group %s: %s", problem.group_id, msg)
        return GroupSolution(problem.group_id, problem.dmu_ids, status, message=msg)

    values = res.values
    message = res.message
    if status is GroupStatus.OPTIMAL and settings.tie_break:
        optimum = float(res.objective)
        for slack in (0.0, TIE_BREAK_SLACK * max(1.0, abs(optimum))):
            tb = _with_closest_target_objective(problem, problem.lp, optimum, slack)
            tb_res = backend.solve(tb, time_limit=settings.time_limit)
            if tb_res.optimal:
                values = tb_res.values[: problem.lp.n_vars]
                break
        else:
            log.warning("group %s: tie-break solve ended with %s; keeping first solution",
                        problem.group_id, tb_res.status.value)

    polished = _polish(problem, values, settings)
    if polished is not None:
        values = polished
    return _extract(problem, dataset, values, status, settings, message)


def _polish(problem: MilpProblem, values: np.ndarray, settings: EngineSettings) -> np.ndarray | None:
    """Re-solve the continuous part as an LP with regions and referents fixed.

    The MILP fixes the combinatorial structure; HiGHS then returns vertex
    values free of the branch-and-bound tolerances. Returns None when the LP
    does not confirm the MILP solution.
    """
    lp = _copy(problem.lp, "_polish")
    lp.sos1 = []
    for i, is_bin in enumerate(lp.binary):
        if is_bin:
            v = float(round(values[i]))
            lp.lb[i] = lp.ub[i] = v
            lp.binary[i] = False
    lam = values[problem.lam]
    used = (np.where(lam < settings.lambda_zero_tol, 0.0, lam)).sum(axis=0) > 0
    for k, in_rs in enumerate(used):
        if in_rs:
            lp.ub[problem.d[k]] = 0.0
        else:
            lp.ub[problem.lam_agg[k]] = 0.0
            for j in range(problem.lam.shape[0]):
                lp.ub[int(problem.lam[j, k])] = 0.0
    backend = lp_backend()
    res = backend.solve(lp)
    milp_value = problem.lp.evaluate(values)
    if not res.optimal or res.objective > milp_value + 1e-6:
        log.debug("group %s: polish LP ended with %s", problem.group_id, res.status.value)
        return None
    if settings.tie_break:
        tb = _with_closest_target_objective(problem, lp, float(res.objective), 0.0)
        tb_res = backend.solve(tb)
        if tb_res.optimal:
            return tb_res.values[: problem.lp.n_vars]
    return res.values


def _extract(
    problem: MilpProblem,
    dataset: Dataset,
    values: np.ndarray,
    status: GroupStatus,
    settings: EngineSettings,
    message: str,
) -> GroupSolution:
    E = np.asarray(problem.efficient.matrix)
    e_ids = problem.efficient.members
    lam = values[problem.lam]
    lam = np.where(lam < settings.lambda_zero_tol, 0.0, lam)
    lam = lam / lam.sum(axis=1, keepdims=True)
    used = lam.sum(axis=0) > 0
    reference_set = tuple(e_ids[k] for k in range(len(e_ids)) if used[k])

    targets: dict[str, tuple[float, ...]] = {}
    deviations: dict[str, tuple[float, ...]] = {}
    lambdas: dict[str, dict[str, float]] = {}
    regions: dict[str, tuple[PaymentRegion, ...]] = {}
    vs_targets: dict[str, PaymentBreakdown] = {}
    vs_goals: dict[str, PaymentBreakdown] = {}
    order = (PaymentRegion.FULL_PAY, PaymentRegion.LINEAR_PAY, PaymentRegion.ZERO_PAY)
    for j, dmu_id in enumerate(problem.dmu_ids):
        dmu = dataset.dmu(dmu_id)
        target = lam[j] @ E
        targets[dmu_id] = tuple(float(t) for t in target)
        deviations[dmu_id] = tuple(float(t - y) for t, y in zip(target, dmu.values))
        lambdas[dmu_id] = {e_ids[k]: float(lam[j, k]) for k in range(len(e_ids)) if lam[j, k] > 0}
        regions[dmu_id] = tuple(
            order[int(np.argmax(values[problem.regions[j, r]]))] for r in range(len(dmu.values))
        )
        vs_targets[dmu_id] = payment_for_levels(target, dmu, dataset.schedule)
        vs_goals[dmu_id] = payment_for_levels(dmu.goals, dmu, dataset.schedule)

    objective = problem.lp.evaluate(values)
    audit = objective_from_targets(targets, dataset)
    if abs(audit - objective) > 1e-6:
        log.warning("group %s: reported objective %.9g differs from recomputed %.9g",
                    problem.group_id, objective, audit)
    u = tuple(float(values[i]) for i in problem.u)
    return GroupSolution(
        group_id=problem.group_id,
        dmu_ids=problem.dmu_ids,
        status=status,
        targets=targets,
        deviations=deviations,
        reference_set=reference_set,
        lambdas=lambdas,
        hyperplane=(u, float(values[problem.u0])),
        objective=objective,
        audit_objective=audit,
        regions=regions,
        payments_vs_targets=vs_targets,
        payments_vs_goals=vs_goals,
        optimal=status is GroupStatus.OPTIMAL,
        message=message,
    )


def apply_grouping(dataset: Dataset, mode: GroupingMode) -> Dataset:
    if mode is GroupingMode.SINGLETONS:
        return dataset.regrouped(singleton_grouping(dataset.ids))
    if mode is GroupingMode.SINGLE_GROUP:
        return dataset.regrouped(single_grouping(dataset.ids))
    return dataset


def run_analysis(
    dataset: Dataset,
    settings: EngineSettings | None = None,
    efficient: EfficientSet | None = None,
    max_workers: int = 1,
) -> list[GroupSolution]:
    """Compute the efficient set once and solve every group independently."""
    settings = settings or EngineSettings()
    dataset = apply_grouping(dataset, settings.grouping_mode)
    if efficient is None:
        efficient = extreme_efficient_set(
            dataset, settings.efficiency_tol, settings.feasibility_tol, lp_backend()
        )
    use_sos1 = settings.use_sos1 and get_backend(settings.solver).capabilities.supports_sos1
    if settings.use_sos1 and not use_sos1:
        log.warning("solver %r has no SOS1 support; falling back to big-M facet linking", settings.solver)

    def one(item: tuple[str, tuple[str, ...]]) -> GroupSolution:
        gid, ids = item
        try:
            members = [dataset.dmu(i) for i in ids]
            problem = build_problem(gid, members, dataset, efficient, use_sos1, settings.big_m_normal_factor)
            return solve_group(problem, dataset, settings, get_backend(settings.solver))
        except Exception as exc:  # one failing group must not abort the others
            log.exception("group %s failed", gid)
            return GroupSolution(gid, tuple(ids), GroupStatus.ERROR, message=f"{type(exc).__name__}: {exc}")

    items = list(dataset.grouping.groups.items())
    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            return list(pool.map(one, items))
    return [one(item) for item in items]
