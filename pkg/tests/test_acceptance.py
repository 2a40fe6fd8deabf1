"""Acceptance gate. Each test records one pass/fail line, echoed in the pytest terminal summary."""

import time

import numpy as np

from gabench.frontier import GoalClassification, as_membership, classify_goal, extreme_efficient_set, pareto_slack
from gabench.gab import run_analysis
from gabench.io_report import build_report, load_dataset, render_report
from gabench.oracle import enumerate_facets, oracle_solve_group
from gabench.payments import PaymentRegion, linearized_payment, payment, region_of
from gabench.settings import EngineSettings, GroupingMode

from _instances import random_instance

EXPECTED = {
    # dmu: (targets, pay vs targets, pay vs goals)
    "A": ((2, 6.6), 12.5, 12.5),
    "B": ((6, 5), 30.0, 30.0),
    "C": ((8.25, 2), 10.0, 10.0),
    "D": ((4, 5.8), 12.17, 9.17),
    "E": ((7.5, 3), 12.5, 16.25),
    "F": ((2, 6.6), 16.8, 16.8),
}
MONEY_TOL = 0.01
ORACLE_TOL = 1e-6
PAYMENT_TOL = 1e-12


def test_criterion_1_reference_example(record_criterion):
    start = time.perf_counter()
    ds = load_dataset("builtin:table1")
    settings = EngineSettings(grouping_mode=GroupingMode.SINGLETONS)
    eff = extreme_efficient_set(ds)
    sols = run_analysis(ds, settings, efficient=eff)
    text = render_report(sols, ds, "text", eff)
    elapsed = time.perf_counter() - start
    report = {d.dmu_id: d for d in build_report(sols, ds, eff).dmus}

    problems = []
    for dmu, (targets, pay_t, pay_g) in EXPECTED.items():
        row = report[dmu]
        shown = tuple(float(f"{t:.2f}") for t in row.targets)
        if shown != tuple(float(t) for t in targets):
            problems.append(f"{dmu} targets {shown}")
        if abs(round(row.pay_targets_total, 2) - pay_t) > MONEY_TOL:
            problems.append(f"{dmu} pay vs targets {row.pay_targets_total:.4f}")
        if abs(round(row.pay_goals_total, 2) - pay_g) > MONEY_TOL:
            problems.append(f"{dmu} pay vs goals {row.pay_goals_total:.4f}")
    if "12.17" not in text:
        problems.append("rendered text lacks 12.17")
    if elapsed >= 5.0:
        problems.append(f"runtime {elapsed:.2f}s")
    record_criterion(1, "reference example reproduction", not problems, "; ".join(problems) or f"{elapsed:.2f}s")
    assert not problems


def test_criterion_2_efficient_set(record_criterion):
    members = extreme_efficient_set(load_dataset("builtin:table1")).members
    ok = set(members) == {"A", "B", "C"} and len(members) == 3
    record_criterion(2, "extreme-efficient set", ok, f"E = {{{', '.join(members)}}}")
    assert ok


def test_criterion_3_classification(record_criterion):
    ds = load_dataset("builtin:table1")
    eff = extreme_efficient_set(ds)
    got = {i: classify_goal(ds.dmu(i).goals, eff) for i in "DEF"}
    want = {
        "D": GoalClassification.OUTSIDE_AS,
        "E": GoalClassification.INTERIOR_OF_AS,
        "F": GoalClassification.ON_PARETO_FRONTIER,
    }
    ok = got == want
    record_criterion(3, "goal classification", ok, ", ".join(f"{k}={v.value}" for k, v in got.items()))
    assert ok


def test_criterion_4_oracle_equivalence(record_criterion):
    rng = np.random.default_rng(20240501)
    worst, mismatches, groups = 0.0, [], 0
    for it in range(100):
        ds = random_instance(rng, pairs=bool(it % 2))
        eff = extreme_efficient_set(ds)
        facets = enumerate_facets(eff)
        for sol in run_analysis(ds, efficient=eff):
            groups += 1
            ref = oracle_solve_group(sol.dmu_ids, ds, eff, facets=facets)
            gap = abs(sol.objective - ref.objective) if sol.objective is not None else float("inf")
            worst = max(worst, gap)
            if gap > ORACLE_TOL:
                mismatches.append(f"instance {it} group {sol.group_id}: {sol.objective} vs {ref.objective}")
    ok = not mismatches
    record_criterion(4, "oracle equivalence on 100 random instances", ok,
                     f"{groups} groups, worst gap {worst:.1e}" + (f"; {mismatches[:3]}" if mismatches else ""))
    assert ok


def test_criterion_5_payment_properties(record_criterion):
    rng = np.random.default_rng(7)
    failures = []
    for k in range(1000):
        q = rng.uniform(0.01, 1000.0)
        w = rng.uniform(0.01, 1.0)
        d = rng.uniform(0.01, 100.0)
        s1, s2 = np.sort(rng.uniform(-2 * d, 3 * d, 2))
        c = rng.uniform(0.01, 100.0)
        p1, p2 = payment(s1, q, w, d), payment(s2, q, w, d)
        qw = q * w
        checks = {
            "bounds": 0.0 <= p1 <= qw and 0.0 <= p2 <= qw,
            "monotone": p1 >= p2,
            "boundary s=0": abs(linearized_payment(PaymentRegion.FULL_PAY, 0.0, q, w, d)
                                - linearized_payment(PaymentRegion.LINEAR_PAY, 0.0, q, w, d)) <= PAYMENT_TOL * qw,
            "boundary s=d": abs(linearized_payment(PaymentRegion.LINEAR_PAY, d, q, w, d)
                                - linearized_payment(PaymentRegion.ZERO_PAY, d, q, w, d)) <= PAYMENT_TOL * qw,
            "linearization": abs(linearized_payment(region_of(s1, d), s1, q, w, d) - p1) <= PAYMENT_TOL,
            "scale": abs(payment(s1, c * q, w, d) - c * p1) <= PAYMENT_TOL * max(1.0, c * qw),
        }
        failures += [f"draw {k}: {name}" for name, passed in checks.items() if not passed]
    ok = not failures
    record_criterion(5, "payment properties over 1000 draws", ok, "; ".join(failures[:3]))
    assert ok


def _invariant_failures(ds, sols, eff):
    out = []
    e_max = np.asarray(eff.matrix).max(axis=0)
    for sol in sols:
        tag = f"group {sol.group_id}"
        if not sol.optimal:
            out.append(f"{tag} status {sol.status.value}")
            continue
        if abs(sol.objective - sol.audit_objective) > 1e-6:
            out.append(f"{tag} audit gap")
        u, u0 = sol.hyperplane
        for k in sol.reference_set:
            if abs(np.dot(u, eff.point(k)) + u0) > 1e-6:
                out.append(f"{tag} hyperplane residual at {k}")
        for dmu_id in sol.dmu_ids:
            target = sol.targets[dmu_id]
            if not as_membership(target, eff, tol=1e-7):
                out.append(f"{tag} {dmu_id} target outside AS")
            elif pareto_slack(target, eff) > 1e-6:
                out.append(f"{tag} {dmu_id} target not Pareto-efficient")
            for r, (dev, y) in enumerate(zip(sol.deviations[dmu_id], ds.dmu(dmu_id).values)):
                if not (-y - 1e-9 <= dev <= e_max[r] + 1e-9):
                    out.append(f"{tag} {dmu_id} deviation bound r={r}")
    return out


def test_criterion_6_structural_invariants(record_criterion):
    failures, groups = [], 0
    ds = load_dataset("builtin:table1")
    eff = extreme_efficient_set(ds)
    for mode in GroupingMode:
        sols = run_analysis(ds, EngineSettings(grouping_mode=mode), efficient=eff)
        groups += len(sols)
        failures += _invariant_failures(ds, sols, eff)
    rng = np.random.default_rng(99)
    for it in range(60):
        inst = random_instance(rng, pairs=bool(it % 2), zero_prob=0.1 if it % 3 == 0 else 0.0)
        inst_eff = extreme_efficient_set(inst)
        sols = run_analysis(inst, efficient=inst_eff)
        groups += len(sols)
        failures += [f"instance {it} {f}" for f in _invariant_failures(inst, sols, inst_eff)]
    ok = not failures
    record_criterion(6, "structural invariants", ok, f"{groups} groups" + (f"; {failures[:3]}" if failures else ""))
    assert ok


def test_criterion_7_university_study_note(record_criterion):
    record_criterion(7, "university study has no numeric criterion (source data unpublished); covered by 4 to 6", None)
