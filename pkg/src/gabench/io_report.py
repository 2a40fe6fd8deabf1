"""Dataset ingestion (CSV trio or JSON) and payment report rendering."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

from .domain import (
    Dataset,
    DmuRecord,
    Grouping,
    Indicator,
    PaymentSchedule,
    Violation,
    grouping_from_column,
    validate_dataset,
)
from .frontier import EfficientSet, GoalClassification, classify_goal, extreme_efficient_set
from .gab import GroupSolution
from .payments import payment_for_levels

BUILTIN_PREFIX = "builtin:"


class DatasetLoadError(Exception):
    """Dataset could not be loaded; ``errors`` lists every problem found."""

    def __init__(self, errors: list[str]) -> None:
        super().__init__("; ".join(errors))
        self.errors = errors


class SchemaError(DatasetLoadError):
    """Missing files, missing columns, unparsable cells or broken references."""


class ValidationError(DatasetLoadError):
    """Data parsed but violates a dataset invariant."""

    def __init__(self, violations: list[Violation]) -> None:
        super().__init__([str(v) for v in violations])
        self.violations = violations


def bundled_fixture(name: str) -> Path:
    return Path(str(resources.files("gabench") / "data" / name))


def resolve_data_path(path: str | Path) -> Path:
    text = str(path)
    if text.startswith(BUILTIN_PREFIX):
        return bundled_fixture(text[len(BUILTIN_PREFIX):])
    return Path(path)


# -- CSV ---------------------------------------------------------------------


def _read_csv(path: Path, required: list[str], errors: list[str]) -> tuple[list[str], list[tuple[int, dict[str, str]]]]:
    if not path.exists():
        errors.append(f"{path}: file not found")
        return [], []
    with path.open(newline="", encoding="utf-8-sig") as fh:
        reader = csv.DictReader(fh)
        header = [h.strip() for h in (reader.fieldnames or [])]
        reader.fieldnames = header
        missing = [c for c in required if c not in header]
        if missing:
            errors.append(f"{path}: missing column(s) {', '.join(missing)}")
            return header, []
        rows = [(reader.line_num, {k: (v or "").strip() for k, v in row.items() if k is not None}) for row in reader]
    return header, rows


def _number(text: str, where: str, errors: list[str]) -> float:
    try:
        x = float(text)
    except ValueError:
        errors.append(f"{where}: non-numeric value {text!r}")
        return math.nan
    if not math.isfinite(x):
        errors.append(f"{where}: non-finite value {text!r}")
    return x


def _load_csv_dir(root: Path) -> Dataset:
    errors: list[str] = []
    dmu_path, goal_path, weight_path = root / "dmus.csv", root / "goals.csv", root / "weights.csv"
    dmu_header, dmu_rows = _read_csv(dmu_path, ["dmu_id", "group_id", "endowment"], errors)
    _, weight_rows = _read_csv(weight_path, ["indicator_id", "weight"], errors)
    ind_ids = [h for h in dmu_header if h not in ("dmu_id", "group_id", "endowment")]
    goal_header, goal_rows = _read_csv(goal_path, ["dmu_id", *ind_ids], errors)
    if errors:
        raise SchemaError(errors)
    if not ind_ids:
        raise SchemaError([f"{dmu_path}: no indicator columns after dmu_id, group_id, endowment"])

    weights_by_ind: dict[str, float] = {}
    indicators: dict[str, Indicator] = {}
    for line, row in weight_rows:
        ind = row["indicator_id"]
        where = f"{weight_path}:{line}"
        if ind not in ind_ids:
            errors.append(f"{where}: indicator {ind!r} is not a column of dmus.csv")
            continue
        if ind in weights_by_ind:
            errors.append(f"{where}: duplicate indicator {ind!r}")
        weights_by_ind[ind] = _number(row["weight"], where, errors)
        indicators[ind] = Indicator(ind, row.get("name") or ind, row.get("description", ""))
    for ind in ind_ids:
        if ind not in weights_by_ind:
            errors.append(f"{weight_path}: no weight for indicator {ind!r}")

    goals: dict[str, tuple[float, ...]] = {}
    for line, row in goal_rows:
        dmu_id = row["dmu_id"]
        where = f"{goal_path}:{line}"
        goals[dmu_id] = tuple(_number(row[i], f"{where} column {i}", errors) for i in ind_ids)

    dmus: list[DmuRecord] = []
    seen: set[str] = set()
    for line, row in dmu_rows:
        dmu_id = row["dmu_id"]
        where = f"{dmu_path}:{line}"
        if not dmu_id:
            errors.append(f"{where}: empty dmu_id")
            continue
        if dmu_id in seen:
            errors.append(f"{where}: duplicate DMU id {dmu_id!r}")
        seen.add(dmu_id)
        values = tuple(_number(row[i], f"{where} column {i}", errors) for i in ind_ids)
        endowment = _number(row["endowment"], f"{where} column endowment", errors)
        if dmu_id not in goals:
            errors.append(f"{goal_path}: no goals for DMU {dmu_id!r}")
            continue
        dmus.append(DmuRecord(dmu_id, row["group_id"] or dmu_id, values, goals[dmu_id], endowment))
    for line, row in goal_rows:
        if row["dmu_id"] not in seen:
            errors.append(f"{goal_path}:{line}: unknown DMU id {row['dmu_id']!r}")

    ceilings = None
    ceil_path = root / "ceilings.csv"
    if ceil_path.exists():
        _, ceil_rows = _read_csv(ceil_path, ["dmu_id", *ind_ids], errors)
        ceilings = {}
        for line, row in ceil_rows:
            where = f"{ceil_path}:{line}"
            if row["dmu_id"] not in seen:
                errors.append(f"{where}: unknown DMU id {row['dmu_id']!r}")
            ceilings[row["dmu_id"]] = tuple(_number(row[i], f"{where} column {i}", errors) for i in ind_ids)

    if errors:
        raise SchemaError(errors)
    schedule = PaymentSchedule(tuple(weights_by_ind[i] for i in ind_ids), ceilings)
    return Dataset(tuple(indicators[i] for i in ind_ids), tuple(dmus), schedule, grouping_from_column(dmus))


# -- JSON --------------------------------------------------------------------


def dataset_to_dict(dataset: Dataset) -> dict[str, Any]:
    return {
        "indicators": [asdict(i) for i in dataset.indicators],
        "dmus": [
            {
                "id": d.id,
                "group_id": d.group_id,
                "values": list(d.values),
                "goals": list(d.goals),
                "endowment": d.endowment,
            }
            for d in dataset.dmus
        ],
        "schedule": {
            "weights": list(dataset.schedule.weights),
            "ceilings": None if dataset.schedule.ceilings is None
            else {k: list(v) for k, v in dataset.schedule.ceilings.items()},
            "weight_overrides": {k: list(v) for k, v in dataset.schedule.weight_overrides.items()},
        },
        "grouping": {g: list(ids) for g, ids in dataset.grouping.groups.items()},
    }


def dataset_from_dict(data: dict[str, Any]) -> Dataset:
    try:
        indicators = tuple(
            Indicator(str(i["id"]), str(i.get("name", i["id"])), str(i.get("description", "")))
            for i in data["indicators"]
        )
        dmus = tuple(
            DmuRecord(str(d["id"]), str(d.get("group_id", d["id"])), d["values"], d["goals"], d["endowment"])
            for d in data["dmus"]
        )
        sched = data["schedule"]
        schedule = PaymentSchedule(
            tuple(sched["weights"]),
            sched.get("ceilings"),
            sched.get("weight_overrides") or {},
        )
        grouping = Grouping(data["grouping"]) if data.get("grouping") else grouping_from_column(dmus)
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError([f"malformed dataset JSON: {type(exc).__name__}: {exc}"]) from exc
    if grouping.groups:
        dmus = tuple(
            DmuRecord(d.id, grouping.group_of(d.id), d.values, d.goals, d.endowment)
            if any(d.id in ids for ids in grouping.groups.values()) else d
            for d in dmus
        )
    return Dataset(indicators, dmus, schedule, grouping)


def load_dataset(path: str | Path, validate: bool = True) -> Dataset:
    """Load a CSV directory or a JSON file; ``builtin:<name>`` selects a bundled fixture."""
    p = resolve_data_path(path)
    if p.is_dir():
        dataset = _load_csv_dir(p)
    elif p.is_file():
        try:
            data = json.loads(p.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise SchemaError([f"{p}: {exc}"]) from exc
        dataset = dataset_from_dict(data)
    else:
        raise SchemaError([f"{p}: no such file or directory"])
    if validate:
        violations = validate_dataset(dataset)
        if violations:
            raise ValidationError(violations)
    return dataset


# -- report ------------------------------------------------------------------


@dataclass
class DmuReport:
    dmu_id: str
    group_id: str
    endowment: float
    actual: list[float]
    targets: list[float] | None
    goals: list[float]
    available: list[float]
    pay_targets: list[float] | None
    pay_targets_total: float | None
    pay_goals: list[float]
    pay_goals_total: float
    rate_targets_pct: float | None
    rate_goals_pct: float
    indicator_rates_targets: list[float] | None
    classification: str | None
    reference_set: list[str]
    status: str


@dataclass
class GroupReport:
    group_id: str
    dmu_ids: list[str]
    status: str
    reference_set: list[str]
    normal: list[float] | None
    offset: float | None
    objective: float | None


@dataclass
class PaymentReport:
    indicators: list[str]
    dmus: list[DmuReport] = field(default_factory=list)
    groups: list[GroupReport] = field(default_factory=list)
    efficient_set: list[str] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> PaymentReport:
        return cls(
            indicators=list(data["indicators"]),
            dmus=[DmuReport(**d) for d in data["dmus"]],
            groups=[GroupReport(**g) for g in data["groups"]],
            efficient_set=list(data.get("efficient_set", [])),
        )

    @classmethod
    def from_json(cls, text: str) -> PaymentReport:
        return cls.from_dict(json.loads(text))


def build_report(
    solutions: list[GroupSolution],
    dataset: Dataset,
    efficient: EfficientSet | None = None,
    classify: bool = True,
) -> PaymentReport:
    """Collect every reported quantity; all money derives from the payment functions."""
    report = PaymentReport([i.id for i in dataset.indicators])
    if dataset.n == 0:
        return report
    if efficient is None and classify:
        efficient = extreme_efficient_set(dataset)
    if efficient is not None:
        report.efficient_set = list(efficient.members)
    by_dmu = {dmu_id: sol for sol in solutions for dmu_id in sol.dmu_ids}
    for sol in solutions:
        report.groups.append(
            GroupReport(
                sol.group_id,
                list(sol.dmu_ids),
                sol.status.value,
                list(sol.reference_set),
                list(sol.hyperplane[0]) if sol.hyperplane else None,
                sol.hyperplane[1] if sol.hyperplane else None,
                sol.objective,
            )
        )
    for dmu in dataset.dmus:
        sol = by_dmu.get(dmu.id)
        weights = dataset.schedule.weights_for(dmu)
        vs_goals = payment_for_levels(dmu.goals, dmu, dataset.schedule)
        target = sol.targets.get(dmu.id) if sol is not None else None
        vs_targets = payment_for_levels(target, dmu, dataset.schedule) if target is not None else None
        label = classify_goal(dmu.goals, efficient).value if efficient is not None else None
        report.dmus.append(
            DmuReport(
                dmu_id=dmu.id,
                group_id=sol.group_id if sol is not None else dmu.group_id,
                endowment=dmu.endowment,
                actual=list(dmu.values),
                targets=list(target) if target is not None else None,
                goals=list(dmu.goals),
                available=[dmu.endowment * w for w in weights],
                pay_targets=list(vs_targets.per_indicator) if vs_targets else None,
                pay_targets_total=vs_targets.total if vs_targets else None,
                pay_goals=list(vs_goals.per_indicator),
                pay_goals_total=vs_goals.total,
                rate_targets_pct=100.0 * vs_targets.total / dmu.endowment if vs_targets else None,
                rate_goals_pct=100.0 * vs_goals.total / dmu.endowment,
                indicator_rates_targets=list(vs_targets.rates(dmu.endowment, weights)) if vs_targets else None,
                classification=label,
                reference_set=list(sol.reference_set) if sol is not None else [],
                status=sol.status.value if sol is not None else "Missing",
            )
        )
    return report


def _level(x: float) -> str:
    text = f"{x:.2f}".rstrip("0").rstrip(".")
    return "0" if text in ("-0", "") else text


def _money(x: float) -> str:
    text = f"{x:.2f}"
    return "0.00" if text == "-0.00" else text


def _pct(x: float) -> str:
    return f"{x:.1f}%"


def format_text(report: PaymentReport) -> str:
    inds = report.indicators
    head = ["DMU", "Row", *inds, "Payments", *inds, "Total", "Rate"]
    table: list[list[str]] = []
    outside = False
    for d in report.dmus:
        goal_row = "Goals"
        if d.classification == GoalClassification.OUTSIDE_AS.value:
            goal_row = "Goals*"
            outside = True
        table.append([d.dmu_id, "Actual", *map(_level, d.actual), "Available", *map(_money, d.available), _money(d.endowment), ""])
        if d.targets is not None:
            table.append(["", "Targets", *map(_level, d.targets), "Targets", *map(_money, d.pay_targets),
                          _money(d.pay_targets_total), _pct(d.rate_targets_pct)])
        else:
            table.append(["", "Targets", *["-"] * len(inds), "Targets", *["-"] * len(inds), "-", d.status])
        table.append(["", goal_row, *map(_level, d.goals), "Goals", *map(_money, d.pay_goals),
                      _money(d.pay_goals_total), _pct(d.rate_goals_pct)])
    widths = [max(len(r[c]) for r in [head, *table]) for c in range(len(head))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(head, widths)).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in table]
    if outside:
        lines.append("* goal bundle lies outside the attainable set")
    if report.efficient_set:
        lines.append("")
        lines.append("Extreme-efficient DMUs: " + ", ".join(report.efficient_set))
    for g in report.groups:
        if len(g.dmu_ids) > 1:
            lines.append(
                f"Group {g.group_id} ({', '.join(g.dmu_ids)}): common facet spanned by "
                f"{{{', '.join(g.reference_set)}}} [{g.status}]"
            )
        elif g.status != "Optimal":
            lines.append(f"Group {g.group_id}: {g.status}")
    return "\n".join(lines) + "\n"


def format_csv(report: PaymentReport) -> str:
    inds = report.indicators
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["dmu_id", "group_id", "row", *inds, *(f"pay_{i}" for i in inds), "total", "rate_pct",
                     "classification", "reference_set"])
    for d in report.dmus:
        ref = " ".join(d.reference_set)
        cls = d.classification or ""
        writer.writerow([d.dmu_id, d.group_id, "actual", *map(repr, d.actual), *map(repr, d.available),
                         repr(d.endowment), "", cls, ref])
        if d.targets is not None:
            writer.writerow([d.dmu_id, d.group_id, "targets", *map(repr, d.targets), *map(repr, d.pay_targets),
                             repr(d.pay_targets_total), repr(d.rate_targets_pct), cls, ref])
        writer.writerow([d.dmu_id, d.group_id, "goals", *map(repr, d.goals), *map(repr, d.pay_goals),
                         repr(d.pay_goals_total), repr(d.rate_goals_pct), cls, ref])
    return out.getvalue()


def format_json(report: PaymentReport) -> str:
    return json.dumps(report.to_dict(), indent=2, ensure_ascii=False) + "\n"


FORMATTERS = {"text": format_text, "csv": format_csv, "json": format_json}


def render_report(
    solutions: list[GroupSolution],
    dataset: Dataset,
    fmt: str = "text",
    efficient: EfficientSet | None = None,
) -> str:
    try:
        formatter = FORMATTERS[fmt]
    except KeyError:
        raise ValueError(f"unknown report format {fmt!r}; choose from {sorted(FORMATTERS)}") from None
    return formatter(build_report(solutions, dataset, efficient))
