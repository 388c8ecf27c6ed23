"""Shared fixtures and helpers for the test suite."""

from __future__ import annotations

from collections import defaultdict
from fractions import Fraction

import numpy as np
import pytest

import randinf as ri


def units_named(n: int) -> tuple[str, ...]:
    return tuple(f"u{i + 1}" for i in range(n))


def random_table(
    rng: np.random.Generator,
    n: int,
    treatments,
    stratum_sizes=None,
    wholeplot_size=None,
    cluster_sizes=None,
    scale: float = 2.0,
    shift: float = 5.0,
) -> ri.PotentialOutcomesTable:
    units = units_named(n)
    y = rng.standard_normal((n, len(treatments))) * scale + shift
    stratum_of = None
    if stratum_sizes is not None:
        stratum_of = {}
        pos = 0
        for h, size in enumerate(stratum_sizes, start=1):
            for i in range(pos, pos + size):
                stratum_of[units[i]] = str(h)
            pos += size
    wholeplot_of = None
    if wholeplot_size is not None:
        wholeplot_of = {u: str(i // wholeplot_size + 1) for i, u in enumerate(units)}
    cluster_of = None
    if cluster_sizes is not None:
        cluster_of = {}
        pos = 0
        for l, size in enumerate(cluster_sizes, start=1):
            for i in range(pos, pos + size):
                cluster_of[units[i]] = str(l)
            pos += size
    return ri.PotentialOutcomesTable(
        units,
        treatments,
        y,
        stratum_of=stratum_of,
        wholeplot_of=wholeplot_of,
        cluster_of=cluster_of,
    )


def support_probability_tables(mech):
    """First- and second-order probabilities accumulated over the support,
    as exact rationals: the oracle route for every closed-form formula."""
    pi1 = defaultdict(Fraction)
    pi2 = defaultdict(Fraction)
    for part, p in mech.enumerate_support():
        arms = part.arms
        us = part.units
        for i, u in enumerate(us):
            pi1[(u, arms[i])] += p
            for j, v in enumerate(us):
                if i != j:
                    pi2[(u, v, arms[i], arms[j])] += p
    return pi1, pi2


def rel_err(a: float, b: float) -> float:
    return abs(a - b) / max(1.0, abs(a), abs(b))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def two_arm_table_5_3() -> ri.PotentialOutcomesTable:
    """The worked two-arm example: variance exactly 5/3 under CR(2, 2)."""
    return ri.PotentialOutcomesTable(
        units_named(4), ("0", "1"), [[1, 2], [2, 3], [3, 4], [4, 5]]
    )


def mechanism_grid():
    """Small enumerable (table, mechanism, contrast) instances spanning the
    three named families; outcomes are seeded per instance."""
    cases = []
    master = np.random.default_rng(991)

    def add(name, table, mech, c):
        cases.append(pytest.param(table, mech, c, id=name))

    # completely randomized
    for n, r, gmap in [
        (4, {"0": 2, "1": 2}, {"0": -1.0, "1": 1.0}),
        (5, {"0": 3, "1": 2}, {"0": -1.0, "1": 1.0}),
        (6, {"0": 2, "1": 2, "2": 2}, {"0": 1.0, "1": -2.0, "2": 1.0}),
        (5, {"0": 2, "1": 2, "2": 1}, {"0": 1.0, "1": -1.0}),
    ]:
        table = random_table(master, n, tuple(r))
        add(f"cr{n}x{len(r)}", table, ri.CompletelyRandomized(table.units, r), ri.Contrast(gmap))

    # stratified
    for sizes, r, gmap in [
        ((2, 2), {"1": {"0": 1, "1": 1}, "2": {"0": 1, "1": 1}}, {"0": -1.0, "1": 1.0}),
        ((3, 3), {"1": {"0": 2, "1": 1}, "2": {"0": 1, "1": 2}}, {"0": -1.0, "1": 1.0}),
        (
            (3, 3),
            {"1": {"0": 1, "1": 1, "2": 1}, "2": {"0": 1, "1": 1, "2": 1}},
            {"0": 1.0, "1": -2.0, "2": 1.0},
        ),
    ]:
        treatments = tuple(r["1"])
        table = random_table(master, sum(sizes), treatments, stratum_sizes=sizes)
        add(
            f"strat{sum(sizes)}x{len(treatments)}",
            table,
            ri.Stratified.from_table(table, r),
            ri.Contrast(gmap),
        )

    # split-plot
    table = random_table(master, 8, ("00", "01", "10", "11"), wholeplot_size=2)
    add(
        "splitplot8",
        table,
        ri.SplitPlot(table.units, {"0": 2, "1": 2}, {"0": 1, "1": 1}),
        ri.Contrast({"00": 1.0, "01": -1.0, "10": -1.0, "11": 1.0}),
    )
    return cases
