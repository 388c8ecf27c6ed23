"""Potential outcomes tables, treatment contrasts, and population estimands.

The science table stores every potential outcome Y_i(z); observed-data code
paths must go through the masking view in :mod:`randinf.estimation` and never
read unassigned cells directly.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

COEFF_SUM_TOL = 1e-12

_LABEL_COLUMNS = ("stratum", "wholeplot", "cluster")


def _grouped_runs(labels: Sequence) -> list[tuple[object, int]]:
    """Collapse a label sequence into (label, run length) pairs."""
    runs: list[tuple[object, int]] = []
    for lab in labels:
        if runs and runs[-1][0] == lab:
            runs[-1] = (lab, runs[-1][1] + 1)
        else:
            runs.append((lab, 1))
    return runs


class PotentialOutcomesTable:
    """Full science table: N units by |Z| treatments of potential outcomes.

    Optional stratum / whole-plot / cluster labels describe blocking structure.
    Stratum and whole-plot labels must appear in contiguous runs of rows so
    that block-structured Q matrices built from group sizes line up with row
    order (units are labeled the way the block formulas assume).
    """

    def __init__(
        self,
        units: Sequence,
        treatments: Sequence[str],
        y,
        stratum_of: Mapping | None = None,
        wholeplot_of: Mapping | None = None,
        cluster_of: Mapping | None = None,
    ):
        self.units = tuple(units)
        self.treatments = tuple(treatments)
        self.y = np.array(y, dtype=float)
        n, nz = len(self.units), len(self.treatments)
        if n < 2:
            raise ValueError("need at least 2 units")
        if nz < 2:
            raise ValueError("need at least 2 treatments")
        if len(set(self.units)) != n:
            raise ValueError("unit ids must be unique")
        if len(set(self.treatments)) != nz:
            raise ValueError("treatment labels must be unique")
        if self.y.shape != (n, nz):
            raise ValueError(f"outcome matrix must be {n}x{nz}, got {self.y.shape}")
        if not np.all(np.isfinite(self.y)):
            raise ValueError("science table must be fully populated with finite values")
        self.y.setflags(write=False)

        self._unit_index = {u: i for i, u in enumerate(self.units)}
        self._z_index = {z: j for j, z in enumerate(self.treatments)}

        self.stratum_of = dict(stratum_of) if stratum_of is not None else None
        self.wholeplot_of = dict(wholeplot_of) if wholeplot_of is not None else None
        self.cluster_of = dict(cluster_of) if cluster_of is not None else None

        if self.stratum_of is not None:
            sizes = self._validate_grouping(self.stratum_of, "stratum")
            if min(sizes) < 2:
                raise ValueError("every stratum must contain at least 2 units")
        if self.wholeplot_of is not None:
            sizes = self._validate_grouping(self.wholeplot_of, "wholeplot")
            if len(set(sizes)) != 1:
                raise ValueError("whole-plots must all have the same size")
        if self.cluster_of is not None:
            self._validate_labels(self.cluster_of, "cluster")

    def _validate_labels(self, label_of: Mapping, kind: str) -> list:
        missing = [u for u in self.units if u not in label_of]
        if missing:
            raise ValueError(f"{kind} label missing for units {missing}")
        return [label_of[u] for u in self.units]

    def _validate_grouping(self, label_of: Mapping, kind: str) -> list[int]:
        labels = self._validate_labels(label_of, kind)
        runs = _grouped_runs(labels)
        if len({lab for lab, _ in runs}) != len(runs):
            raise ValueError(
                f"{kind} labels must be contiguous in row order; reorder the rows"
            )
        return [size for _, size in runs]

    # -- indexed access -------------------------------------------------

    @property
    def n_units(self) -> int:
        return len(self.units)

    def unit_index(self, unit) -> int:
        try:
            return self._unit_index[unit]
        except KeyError:
            raise ValueError(f"unknown unit {unit!r}") from None

    def treatment_index(self, z: str) -> int:
        try:
            return self._z_index[z]
        except KeyError:
            raise ValueError(f"unknown treatment {z!r}") from None

    def outcome(self, unit, z: str) -> float:
        return float(self.y[self.unit_index(unit), self.treatment_index(z)])

    def column(self, z: str) -> np.ndarray:
        return self.y[:, self.treatment_index(z)]

    def _group_sizes(self, label_of: Mapping) -> list[tuple[object, int]]:
        return _grouped_runs([label_of[u] for u in self.units])

    @property
    def stratum_sizes(self) -> list[int]:
        """Stratum sizes in row order; requires stratum labels."""
        if self.stratum_of is None:
            raise ValueError("table has no stratum labels")
        return [size for _, size in self._group_sizes(self.stratum_of)]

    @property
    def stratum_labels(self) -> list:
        if self.stratum_of is None:
            raise ValueError("table has no stratum labels")
        return [lab for lab, _ in self._group_sizes(self.stratum_of)]

    @property
    def wholeplot_count(self) -> int:
        if self.wholeplot_of is None:
            raise ValueError("table has no whole-plot labels")
        return len(self._group_sizes(self.wholeplot_of))

    def cluster_groups(self) -> list[tuple[object, tuple]]:
        """Clusters in order of first appearance, each with its units."""
        if self.cluster_of is None:
            raise ValueError("table has no cluster labels")
        groups: dict = {}
        order = []
        for u in self.units:
            lab = self.cluster_of[u]
            if lab not in groups:
                groups[lab] = []
                order.append(lab)
            groups[lab].append(u)
        return [(lab, tuple(groups[lab])) for lab in order]

    def __repr__(self) -> str:
        return (
            f"PotentialOutcomesTable(n_units={self.n_units}, "
            f"treatments={list(self.treatments)})"
        )


@dataclass(frozen=True)
class Contrast:
    """Treatment contrast: coefficients g(z) that sum to zero, not all zero."""

    g: Mapping[str, float]

    def __post_init__(self):
        g = {str(z): float(v) for z, v in dict(self.g).items()}
        object.__setattr__(self, "g", g)
        if not g:
            raise ValueError("contrast has no coefficients")
        total = sum(g.values())
        if abs(total) > COEFF_SUM_TOL:
            raise ValueError(f"contrast coefficients must sum to zero (got {total!r})")
        if all(v == 0.0 for v in g.values()):
            raise ValueError("contrast coefficients must not all be zero")

    @property
    def treatments(self) -> tuple[str, ...]:
        return tuple(self.g)

    def coefficient(self, z: str) -> float:
        return self.g.get(z, 0.0)

    def coefficients(self, treatments: Sequence[str]) -> np.ndarray:
        """Coefficient vector over a full treatment list (absent labels get 0)."""
        unknown = set(self.g) - set(treatments)
        if unknown:
            raise ValueError(f"contrast references unknown treatments {sorted(unknown)}")
        return np.array([self.g.get(z, 0.0) for z in treatments], dtype=float)

    def scaled(self, factor: float) -> "Contrast":
        return Contrast({z: factor * v for z, v in self.g.items()})


@dataclass(frozen=True)
class FactorialStructure:
    """Factorial effect specification over K factors with s_k levels each.

    ``effect`` is the binary exponent vector: factor k enters the effect when
    effect[k] == 1.  Per-factor vectors, when given, must sum to zero for
    effect factors and be constant nonzero otherwise.
    """

    levels: tuple[int, ...]
    effect: tuple[int, ...]
    per_factor_vectors: tuple[tuple[float, ...], ...] | None = None

    def __post_init__(self):
        levels = tuple(int(s) for s in self.levels)
        effect = tuple(int(x) for x in self.effect)
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "effect", effect)
        if len(levels) != len(effect):
            raise ValueError("levels and effect must have the same length")
        if not levels:
            raise ValueError("need at least one factor")
        if any(s < 2 for s in levels):
            raise ValueError("every factor needs at least 2 levels")
        if any(x not in (0, 1) for x in effect):
            raise ValueError("effect entries must be 0 or 1")
        if not any(effect):
            raise ValueError("no factorial effect selected (effect vector all zeros)")
        if self.per_factor_vectors is not None:
            vecs = tuple(tuple(float(v) for v in vec) for vec in self.per_factor_vectors)
            object.__setattr__(self, "per_factor_vectors", vecs)
            if len(vecs) != len(levels):
                raise ValueError("need one per-factor vector per factor")
            for k, (s, x, vec) in enumerate(zip(levels, effect, vecs)):
                if len(vec) != s:
                    raise ValueError(f"factor {k}: vector length {len(vec)} != {s} levels")
                if x == 1:
                    if abs(sum(vec)) > COEFF_SUM_TOL:
                        raise ValueError(f"factor {k}: effect-factor vector must sum to zero")
                    if all(v == 0.0 for v in vec):
                        raise ValueError(f"factor {k}: effect-factor vector is all zeros")
                else:
                    if len(set(vec)) != 1 or vec[0] == 0.0:
                        raise ValueError(
                            f"factor {k}: non-effect vector must be constant and nonzero"
                        )

    @property
    def n_treatments(self) -> int:
        out = 1
        for s in self.levels:
            out *= s
        return out


def _default_factor_vector(s: int, in_effect: bool) -> np.ndarray:
    # Defaults: constant 1/s when the factor is not in the effect, first
    # orthonormal Helmert-style contrast when it is.
    if not in_effect:
        return np.full(s, 1.0 / s)
    vec = np.zeros(s)
    vec[0], vec[1] = -1.0, 1.0
    return vec / np.sqrt(2.0)


def treatment_combination_labels(levels: Sequence[int]) -> list[str]:
    """Lexicographic treatment-combination labels, first factor slowest.

    Level l of each factor is written as str(l); labels concatenate per-factor
    levels, e.g. levels (2, 3) gives 00, 01, 02, 10, 11, 12.
    """
    labels = [""]
    for s in levels:
        labels = [lab + str(l) for lab in labels for l in range(s)]
    return labels


def factorial_contrast(fs: FactorialStructure, treatments: Sequence[str] | None = None) -> Contrast:
    """Kronecker-product contrast for a factorial effect.

    The coefficient vector is the Kronecker product of the per-factor vectors,
    mapped onto treatment-combination labels in lexicographic order.  Pass
    ``treatments`` to relabel positionally (length must equal the number of
    treatment combinations).
    """
    vecs = []
    for k, (s, x) in enumerate(zip(fs.levels, fs.effect)):
        if fs.per_factor_vectors is not None:
            vecs.append(np.array(fs.per_factor_vectors[k], dtype=float))
        else:
            vecs.append(_default_factor_vector(s, bool(x)))
    g = np.array([1.0])
    for vec in vecs:
        g = np.kron(g, vec)
    if treatments is None:
        labels = treatment_combination_labels(fs.levels)
    else:
        labels = list(treatments)
        if len(labels) != fs.n_treatments:
            raise ValueError(
                f"expected {fs.n_treatments} treatment labels, got {len(labels)}"
            )
    return Contrast(dict(zip(labels, g)))


# -- population-level operations ----------------------------------------


def treatment_means(table: PotentialOutcomesTable) -> dict[str, float]:
    """Mean potential outcome per treatment over all N units."""
    means = table.y.mean(axis=0)
    return {z: float(means[j]) for j, z in enumerate(table.treatments)}


def unit_contrasts(table: PotentialOutcomesTable, c: Contrast) -> np.ndarray:
    """Unit-level contrast values tau_i = sum_z g(z) Y_i(z)."""
    return table.y @ c.coefficients(table.treatments)


def population_contrast(table: PotentialOutcomesTable, c: Contrast) -> float:
    """Population-level contrast: sum_z g(z) Ybar(z)."""
    g = c.coefficients(table.treatments)
    return float(g @ table.y.mean(axis=0))


# -- CSV ingestion --------------------------------------------------------


def load_population_csv(path) -> PotentialOutcomesTable:
    """Read a science table from CSV.

    Expected header: unit id column first, then any of the optional label
    columns ``stratum``, ``wholeplot``, ``cluster``, then one column per
    treatment.
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 3:
        raise ValueError("population CSV needs a header row and at least 2 unit rows")
    header = [h.strip() for h in rows[0]]
    if len(header) < 3:
        raise ValueError("population CSV needs a unit column and at least 2 treatments")
    label_cols = {}
    col = 1
    while col < len(header) and header[col] in _LABEL_COLUMNS:
        label_cols[header[col]] = col
        col += 1
    treatments = header[col:]
    if len(treatments) < 2:
        raise ValueError("population CSV needs at least 2 treatment columns")

    units = []
    labels: dict[str, dict] = {kind: {} for kind in label_cols}
    y = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            raise ValueError(f"line {lineno}: expected {len(header)} fields, got {len(row)}")
        unit = row[0].strip()
        units.append(unit)
        for kind, j in label_cols.items():
            labels[kind][unit] = row[j].strip()
        try:
            y.append([float(cell) for cell in row[col:]])
        except ValueError as exc:
            raise ValueError(f"line {lineno}: non-numeric outcome ({exc})") from None
    return PotentialOutcomesTable(
        units,
        treatments,
        y,
        stratum_of=labels.get("stratum"),
        wholeplot_of=labels.get("wholeplot"),
        cluster_of=labels.get("cluster"),
    )


def write_population_csv(table: PotentialOutcomesTable, path) -> None:
    """Inverse of :func:`load_population_csv`, mainly for fixtures."""
    header = ["unit"]
    label_maps: list[tuple[str, Mapping]] = []
    for kind, mapping in (
        ("stratum", table.stratum_of),
        ("wholeplot", table.wholeplot_of),
        ("cluster", table.cluster_of),
    ):
        if mapping is not None:
            header.append(kind)
            label_maps.append((kind, mapping))
    header.extend(table.treatments)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i, unit in enumerate(table.units):
            row = [unit]
            row.extend(str(mapping[unit]) for _, mapping in label_maps)
            row.extend(repr(float(v)) for v in table.y[i])
            writer.writerow(row)
