"""Solver-neutral linear / mixed-integer problem representation and backends.

Problems are held in sparse triplet form (row, col, value) with two-sided row
bounds, so that every backend reads the same matrix and solutions can be
audited against it independently of the solver that produced them.

Two backends are provided:

- ``scip``  (PySCIPOpt) -- native SOS1 support, used for the benchmarking MILP.
- ``highs`` (SciPy's HiGHS bindings) -- fast LP/MILP, no SOS1.
"""

from __future__ import annotations

import enum
import io
import math
import threading
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.optimize import Bounds, LinearConstraint, milp

INF = math.inf


class BackendUnavailableError(RuntimeError):
    """Raised when a requested solver backend cannot be imported."""


class SolveStatus(enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    TIME_LIMIT = "TimeLimit"
    ERROR = "Error"


@dataclass(frozen=True)
class SolverCapabilities:
    supports_sos1: bool
    supports_binaries: bool
    deterministic: bool


@dataclass
class SolveResult:
    status: SolveStatus
    values: np.ndarray | None = None
    objective: float | None = None
    message: str = ""

    @property
    def optimal(self) -> bool:
        return self.status is SolveStatus.OPTIMAL

    def value(self, index: int) -> float:
        if self.values is None:
            raise ValueError(f"no solution values available (status {self.status.value})")
        return float(self.values[index])


@dataclass
class LinearProblem:
    """A minimisation problem ``min c'x  s.t.  lo <= Ax <= hi,  lb <= x <= ub``.

    Variables may be flagged binary; SOS1 sets list variable indices of which
    at most one may be nonzero.
    """

    name: str = "problem"
    var_names: list[str] = field(default_factory=list)
    lb: list[float] = field(default_factory=list)
    ub: list[float] = field(default_factory=list)
    binary: list[bool] = field(default_factory=list)
    objective: dict[int, float] = field(default_factory=dict)
    objective_offset: float = 0.0
    row_names: list[str] = field(default_factory=list)
    row_lo: list[float] = field(default_factory=list)
    row_hi: list[float] = field(default_factory=list)
    rows: list[int] = field(default_factory=list)
    cols: list[int] = field(default_factory=list)
    vals: list[float] = field(default_factory=list)
    sos1: list[list[int]] = field(default_factory=list)

    @property
    def n_vars(self) -> int:
        return len(self.var_names)

    @property
    def n_rows(self) -> int:
        return len(self.row_names)

    @property
    def has_binaries(self) -> bool:
        return any(self.binary)

    def add_var(self, name: str, lb: float = 0.0, ub: float = INF, binary: bool = False) -> int:
        if binary:
            lb, ub = max(lb, 0.0), min(ub, 1.0)
        self.var_names.append(name)
        self.lb.append(float(lb))
        self.ub.append(float(ub))
        self.binary.append(binary)
        return len(self.var_names) - 1

    def add_row(self, coeffs: dict[int, float], lo: float = -INF, hi: float = INF, name: str | None = None) -> int:
        idx = len(self.row_names)
        self.row_names.append(name or f"c{idx}")
        self.row_lo.append(float(lo))
        self.row_hi.append(float(hi))
        for col, val in coeffs.items():
            if val != 0.0:
                self.rows.append(idx)
                self.cols.append(col)
                self.vals.append(float(val))
        return idx

    def add_eq(self, coeffs: dict[int, float], rhs: float, name: str | None = None) -> int:
        return self.add_row(coeffs, rhs, rhs, name)

    def add_le(self, coeffs: dict[int, float], rhs: float, name: str | None = None) -> int:
        return self.add_row(coeffs, -INF, rhs, name)

    def add_ge(self, coeffs: dict[int, float], rhs: float, name: str | None = None) -> int:
        return self.add_row(coeffs, rhs, INF, name)

    def add_sos1(self, members: list[int]) -> None:
        self.sos1.append(list(members))

    def set_objective(self, coeffs: dict[int, float], offset: float = 0.0) -> None:
        self.objective = {k: float(v) for k, v in coeffs.items() if v != 0.0}
        self.objective_offset = float(offset)

    def matrix(self) -> sparse.csr_matrix:
        return sparse.csr_matrix(
            (self.vals, (self.rows, self.cols)), shape=(self.n_rows, self.n_vars)
        )

    def cost_vector(self) -> np.ndarray:
        c = np.zeros(self.n_vars)
        for k, v in self.objective.items():
            c[k] = v
        return c

    def evaluate(self, values: np.ndarray) -> float:
        return float(self.cost_vector() @ values) + self.objective_offset

    def max_violation(self, values: np.ndarray) -> float:
        """Largest violation of any row, bound, integrality or SOS1 condition."""
        x = np.asarray(values, dtype=float)
        worst = 0.0
        if self.n_rows:
            ax = self.matrix() @ x
            lo = np.asarray(self.row_lo)
            hi = np.asarray(self.row_hi)
            worst = max(worst, float(np.max(np.maximum(lo - ax, 0.0))), float(np.max(np.maximum(ax - hi, 0.0))))
        lb = np.asarray(self.lb)
        ub = np.asarray(self.ub)
        worst = max(worst, float(np.max(np.maximum(lb - x, 0.0), initial=0.0)))
        worst = max(worst, float(np.max(np.maximum(x - ub, 0.0), initial=0.0)))
        for i, is_bin in enumerate(self.binary):
            if is_bin:
                worst = max(worst, abs(x[i] - round(x[i])))
        for members in self.sos1:
            mags = sorted((abs(x[i]) for i in members), reverse=True)
            if len(mags) > 1:
                worst = max(worst, mags[1])
        return worst

    def to_lp_format(self) -> str:
        """Render the problem in CPLEX LP text format (debugging aid)."""

        def term(coef: float, name: str, first: bool) -> str:
            sign = "-" if coef < 0 else ("" if first else "+")
            mag = abs(coef)
            body = name if mag == 1.0 else f"{mag:.17g} {name}"
            return f"{sign} {body}".strip() if first else f" {sign} {body}"

        def expr(coeffs: list[tuple[int, float]]) -> str:
            if not coeffs:
                return f"0 {self.var_names[0]}" if self.var_names else "0"
            return "".join(term(v, self.var_names[c], i == 0) for i, (c, v) in enumerate(coeffs))

        by_row: list[list[tuple[int, float]]] = [[] for _ in range(self.n_rows)]
        for r, c, v in zip(self.rows, self.cols, self.vals):
            by_row[r].append((c, v))

        out = io.StringIO()
        out.write(f"\\ {self.name}\nMinimize\n obj: {expr(sorted(self.objective.items()))}\n")
        out.write("Subject To\n")
        for r in range(self.n_rows):
            lo, hi, e = self.row_lo[r], self.row_hi[r], expr(by_row[r])
            name = self.row_names[r]
            if lo == hi:
                out.write(f" {name}: {e} = {lo:.17g}\n")
            else:
                if lo > -INF:
                    out.write(f" {name}_lo: {e} >= {lo:.17g}\n")
                if hi < INF:
                    out.write(f" {name}_hi: {e} <= {hi:.17g}\n")
        out.write("Bounds\n")
        for i, name in enumerate(self.var_names):
            if self.binary[i]:
                continue
            lo, hi = self.lb[i], self.ub[i]
            if lo == -INF and hi == INF:
                out.write(f" {name} free\n")
            elif lo == hi:
                out.write(f" {name} = {lo:.17g}\n")
            else:
                lo_s = "-inf" if lo == -INF else f"{lo:.17g}"
                hi_s = "+inf" if hi == INF else f"{hi:.17g}"
                out.write(f" {lo_s} <= {name} <= {hi_s}\n")
        bins = [n for n, b in zip(self.var_names, self.binary) if b]
        if bins:
            out.write("Binaries\n " + " ".join(bins) + "\n")
        if self.sos1:
            out.write("SOS\n")
            for s, members in enumerate(self.sos1):
                body = " ".join(f"{self.var_names[m]}:{k + 1}" for k, m in enumerate(members))
                out.write(f" s{s}: S1:: {body}\n")
        out.write("End\n")
        return out.getvalue()


class Backend:
    name = "abstract"
    capabilities = SolverCapabilities(False, False, False)

    def solve(self, problem: LinearProblem, time_limit: float | None = None, mip_gap: float = 0.0) -> SolveResult:
        raise NotImplementedError


class HighsBackend(Backend):
    """SciPy's HiGHS interface; LPs and MILPs, no SOS1."""

    name = "highs"
    capabilities = SolverCapabilities(supports_sos1=False, supports_binaries=True, deterministic=True)

    def __init__(self, mip_feastol: float = 1e-9) -> None:
        self.mip_feastol = mip_feastol

    def solve(self, problem: LinearProblem, time_limit: float | None = None, mip_gap: float = 0.0) -> SolveResult:
        if problem.sos1:
            raise ValueError("highs backend does not support SOS1 sets")
        if problem.n_vars == 0:
            return SolveResult(SolveStatus.OPTIMAL, np.zeros(0), problem.objective_offset)
        constraints = []
        if problem.n_rows:
            constraints.append(LinearConstraint(problem.matrix(), problem.row_lo, problem.row_hi))
        options: dict = {"mip_rel_gap": mip_gap}
        if time_limit is not None:
            options["time_limit"] = time_limit
        if problem.has_binaries:
            # big-M rows amplify integrality slack; scipy forwards this HiGHS
            # option unvalidated, with a warning
            options["mip_feasibility_tolerance"] = self.mip_feastol
        try:
            with warnings.catch_warnings():
                warnings.filterwarnings("ignore", message="Unrecognized options", category=RuntimeWarning)
                res = milp(
                    problem.cost_vector(),
                    integrality=np.asarray(problem.binary, dtype=int),
                    bounds=Bounds(problem.lb, problem.ub),
                    constraints=constraints,
                    options=options,
                )
        except (ValueError, np.linalg.LinAlgError) as exc:
            return SolveResult(SolveStatus.ERROR, message=str(exc))
        values = None if res.x is None else np.asarray(res.x, dtype=float)
        objective = None if values is None else problem.evaluate(values)
        if res.status == 0:
            status = SolveStatus.OPTIMAL
        elif res.status == 1:
            status = SolveStatus.TIME_LIMIT
        elif res.status == 2:
            status = SolveStatus.INFEASIBLE
        elif res.status == 3:
            status = SolveStatus.UNBOUNDED
        else:
            status = SolveStatus.ERROR
        return SolveResult(status, values, objective, res.message)


class ScipBackend(Backend):
    """PySCIPOpt backend with native SOS1 constraints."""

    name = "scip"
    capabilities = SolverCapabilities(supports_sos1=True, supports_binaries=True, deterministic=True)

    def __init__(self, feastol: float = 1e-7) -> None:
        try:
            import pyscipopt  # noqa: F401
        except ImportError as exc:  # pragma: no cover - depends on environment
            raise BackendUnavailableError("pyscipopt is not installed") from exc
        self.feastol = feastol

    def solve(self, problem: LinearProblem, time_limit: float | None = None, mip_gap: float = 0.0) -> SolveResult:
        from pyscipopt import Model, quicksum

        model = Model(problem.name)
        model.hideOutput()
        model.setParam("limits/gap", mip_gap)
        model.setParam("limits/absgap", 0.0)
        model.setParam("numerics/feastol", self.feastol)
        model.setParam("numerics/dualfeastol", self.feastol)
        model.setParam("randomization/randomseedshift", 0)
        model.setParam("parallel/maxnthreads", 1)
        # this heuristic trips over near-degenerate LPs and floods stderr
        model.setParam("heuristics/lpface/freq", -1)
        if time_limit is not None:
            model.setParam("limits/time", time_limit)

        xs = []
        for i, name in enumerate(problem.var_names):
            lb = None if problem.lb[i] == -INF else problem.lb[i]
            ub = None if problem.ub[i] == INF else problem.ub[i]
            vtype = "B" if problem.binary[i] else "C"
            xs.append(model.addVar(name=name, vtype=vtype, lb=lb, ub=ub))

        by_row: list[list[tuple[int, float]]] = [[] for _ in range(problem.n_rows)]
        for r, c, v in zip(problem.rows, problem.cols, problem.vals):
            by_row[r].append((c, v))
        for r, terms in enumerate(by_row):
            lhs = quicksum(v * xs[c] for c, v in terms)
            lo, hi = problem.row_lo[r], problem.row_hi[r]
            name = problem.row_names[r]
            if lo == hi:
                model.addCons(lhs == lo, name=name)
            else:
                if lo > -INF:
                    model.addCons(lhs >= lo, name=f"{name}_lo")
                if hi < INF:
                    model.addCons(lhs <= hi, name=f"{name}_hi")
        for s, members in enumerate(problem.sos1):
            model.addConsSOS1([xs[m] for m in members], name=f"sos{s}")

        model.setObjective(quicksum(v * xs[c] for c, v in problem.objective.items()), "minimize")
        try:
            model.optimize()
        except Exception as exc:  # SCIP surfaces numeric trouble as generic errors
            return SolveResult(SolveStatus.ERROR, message=str(exc))

        scip_status = model.getStatus()
        values = None
        if model.getNSols() > 0:
            sol = model.getBestSol()
            values = np.array([model.getSolVal(sol, x) for x in xs])
        objective = None if values is None else problem.evaluate(values)
        if scip_status == "optimal":
            status = SolveStatus.OPTIMAL
        elif scip_status == "infeasible":
            status = SolveStatus.INFEASIBLE
        elif scip_status in ("unbounded", "inforunbd"):
            status = SolveStatus.UNBOUNDED
        elif scip_status in ("timelimit", "gaplimit", "nodelimit"):
            status = SolveStatus.TIME_LIMIT
        else:
            status = SolveStatus.ERROR
        return SolveResult(status, values, objective, scip_status)


_FACTORY_LOCK = threading.Lock()
_BACKENDS: dict[str, type[Backend]] = {"highs": HighsBackend, "scip": ScipBackend}


def available_backends() -> list[str]:
    names = []
    for name, cls in _BACKENDS.items():
        try:
            cls()
        except BackendUnavailableError:
            continue
        names.append(name)
    return names


def get_backend(name: str = "auto") -> Backend:
    """Return a fresh backend instance. ``auto`` prefers SCIP, then HiGHS."""
    with _FACTORY_LOCK:
        if name == "auto":
            try:
                return ScipBackend()
            except BackendUnavailableError:
                return HighsBackend()
        try:
            cls = _BACKENDS[name]
        except KeyError:
            raise BackendUnavailableError(
                f"unknown solver backend {name!r}; choose from {sorted(_BACKENDS)} or 'auto'"
            ) from None
        return cls()


def lp_backend() -> Backend:
    """Backend used for the pure LPs of frontier analysis and the oracle."""
    return HighsBackend()
