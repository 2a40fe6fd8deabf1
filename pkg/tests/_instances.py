"""Shared fixtures and random instance generators for the test suite."""

from __future__ import annotations

import numpy as np

from gabench.domain import Dataset, DmuRecord, Grouping, Indicator, PaymentSchedule, singleton_grouping

TABLE1_VALUES = {"A": (1, 7), "B": (6, 5), "C": (9, 1), "D": (3, 4), "E": (5, 2), "F": (2, 5)}
TABLE1_GOALS = {"A": (3, 7), "B": (5, 4), "C": (8, 4), "D": (4, 7), "E": (6, 3), "F": (2, 6.6)}
TABLE1_ENDOWMENT = {"A": 25, "B": 30, "C": 20, "D": 20, "E": 25, "F": 20}


def table1(grouping: Grouping | None = None) -> Dataset:
    dmus = tuple(
        DmuRecord(i, i, TABLE1_VALUES[i], TABLE1_GOALS[i], TABLE1_ENDOWMENT[i]) for i in TABLE1_VALUES
    )
    ind = (Indicator("y1"), Indicator("y2"))
    return Dataset(ind, dmus, PaymentSchedule((0.5, 0.5)), grouping or singleton_grouping(list(TABLE1_VALUES)))


def random_weights(rng: np.random.Generator, s: int) -> tuple[float, ...]:
    w = np.maximum(np.round(rng.dirichlet(np.full(s, 2.0)), 3), 0.05)
    w = w / w.sum()
    return tuple(float(x) for x in w)


def random_instance(rng: np.random.Generator, pairs: bool, zero_prob: float = 0.0) -> Dataset:
    """s in {2, 3}, 2..8 DMUs, goals scattered around actuals; singleton or 2-DMU groups."""
    s = int(rng.choice([2, 3]))
    n = int(rng.integers(2, 9))
    Y = np.round(rng.uniform(0.5, 10.0, (n, s)), 2)
    if zero_prob:
        mask = rng.random((n, s)) < zero_prob
        for j in range(n):
            if mask[j].all():
                mask[j, 0] = False
        Y[mask] = 0.0
    G = np.round(np.maximum(Y, 0.5) * rng.uniform(0.6, 1.6, (n, s)), 2)
    Q = np.round(rng.uniform(5.0, 50.0, n), 2)
    ids = [f"D{j}" for j in range(n)]
    if pairs:
        groups = {f"g{k}": tuple(ids[k:k + 2]) for k in range(0, n, 2)}
    else:
        groups = {i: (i,) for i in ids}
    group_of = {i: g for g, members in groups.items() for i in members}
    dmus = tuple(DmuRecord(ids[j], group_of[ids[j]], Y[j], G[j], Q[j]) for j in range(n))
    return Dataset(
        tuple(Indicator(f"y{r + 1}") for r in range(s)),
        dmus,
        PaymentSchedule(random_weights(rng, s)),
        Grouping(groups),
    )
