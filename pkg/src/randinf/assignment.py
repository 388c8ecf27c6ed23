"""General assignment mechanisms over partitions of experimental units.

Each mechanism is an immutable distribution p(T) over partitions of the units
into nonempty treatment groups.  Closed-form first/second-order assignment
probabilities are exact rationals so they can be compared exactly against
support sums; sampling is a pure function of (mechanism, seed) via a
counter-based bit generator.
"""

from __future__ import annotations

import csv
import itertools
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Iterator, Mapping, Sequence

import numpy as np

DEFAULT_SUPPORT_CAP = 10**6


class SupportTooLargeError(RuntimeError):
    """Enumeration refused: the support exceeds the configured cap."""

    def __init__(self, size: int, cap: int):
        super().__init__(f"support holds {size} partitions, above the cap of {cap}")
        self.size = size
        self.cap = cap


@dataclass(frozen=True)
class Partition:
    """Assignment of every unit to exactly one treatment arm."""

    units: tuple
    arms: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "units", tuple(self.units))
        object.__setattr__(self, "arms", tuple(str(a) for a in self.arms))
        if len(self.units) != len(self.arms):
            raise ValueError("units and arms must have the same length")
        if not self.units:
            raise ValueError("partition cannot be empty")
        if len(set(self.units)) != len(self.units):
            raise ValueError("unit ids must be unique")

    @cached_property
    def _arm_of(self) -> dict:
        return dict(zip(self.units, self.arms))

    @cached_property
    def _groups(self) -> dict[str, tuple]:
        groups: dict[str, list] = {}
        for u, a in zip(self.units, self.arms):
            groups.setdefault(a, []).append(u)
        return {a: tuple(g) for a, g in groups.items()}

    def arm_of(self, unit) -> str:
        try:
            return self._arm_of[unit]
        except KeyError:
            raise ValueError(f"unknown unit {unit!r}") from None

    def group(self, z: str) -> tuple:
        return self._groups.get(str(z), ())

    @property
    def treatments(self) -> tuple[str, ...]:
        return tuple(dict.fromkeys(self.arms))

    def encode(self) -> str:
        """Canonical encoding: arm labels joined in unit order."""
        return ",".join(self.arms)

    def validate_against(self, treatments: Sequence[str]) -> None:
        if set(self.arms) != set(treatments):
            raise ValueError(
                f"partition arms {sorted(set(self.arms))} do not cover treatments "
                f"{sorted(set(treatments))} with every group nonempty"
            )


def _multinomial(n: int, sizes: Sequence[int]) -> int:
    count = 1
    remaining = n
    for s in sizes:
        count *= math.comb(remaining, s)
        remaining -= s
    return count


def _iter_splits(items: tuple, sizes: Sequence[int]) -> Iterator[tuple[tuple, ...]]:
    """All ways to split items into ordered groups of the given sizes."""
    if len(sizes) == 1:
        yield (items,)
        return
    rest_sizes = sizes[1:]
    for chosen in itertools.combinations(range(len(items)), sizes[0]):
        chosen_set = set(chosen)
        first = tuple(items[k] for k in chosen)
        rest = tuple(items[k] for k in range(len(items)) if k not in chosen_set)
        for tail in _iter_splits(rest, rest_sizes):
            yield (first,) + tail


def _validate_counts(r: Mapping[str, int], what: str) -> dict[str, int]:
    out = {}
    for z, k in r.items():
        k = int(k)
        if k < 1:
            raise ValueError(f"{what}[{z!r}] must be at least 1, got {k}")
        out[str(z)] = k
    if len(out) < 2:
        raise ValueError(f"{what} needs at least 2 arms")
    return out


class AssignmentMechanism(ABC):
    """Distribution over partitions of the units into treatment groups."""

    units: tuple
    treatments: tuple[str, ...]

    @property
    def n_units(self) -> int:
        return len(self.units)

    # -- sampling ---------------------------------------------------------

    @staticmethod
    def _rng(seed: int) -> np.random.Generator:
        if seed < 0:
            raise ValueError("seed must be a non-negative integer")
        return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))

    @abstractmethod
    def _draw(self, rng: np.random.Generator) -> Partition:
        ...

    def sample(self, seed: int) -> Partition:
        """Draw one partition; a pure function of (mechanism, seed)."""
        return self._draw(self._rng(seed))

    def sample_many(self, seed: int, n: int) -> list[Partition]:
        """Draw n partitions from one seeded stream (deterministic given seed)."""
        rng = self._rng(seed)
        return [self._draw(rng) for _ in range(n)]

    # -- support ------------------------------------------------------------

    @abstractmethod
    def support_size(self) -> int:
        ...

    @abstractmethod
    def _iter_support(self) -> Iterator[tuple[Partition, Fraction]]:
        ...

    def enumerate_support(self, cap: int = DEFAULT_SUPPORT_CAP) -> list[tuple[Partition, Fraction]]:
        """Complete support with exact rational probabilities, canonically sorted."""
        size = self.support_size()
        if size > cap:
            raise SupportTooLargeError(size, cap)
        support = sorted(self._iter_support(), key=lambda item: item[0].encode())
        return support

    # -- assignment probabilities -------------------------------------------

    @abstractmethod
    def first_order_exact(self, unit, z: str) -> Fraction:
        ...

    @abstractmethod
    def second_order_exact(self, unit_i, unit_j, z: str, zstar: str) -> Fraction:
        ...

    def first_order(self, unit, z: str) -> float:
        return float(self.first_order_exact(unit, z))

    def second_order(self, unit_i, unit_j, z: str, zstar: str) -> float:
        return float(self.second_order_exact(unit_i, unit_j, z, zstar))

    def second_order_matrix(self, z: str, zstar: str) -> np.ndarray:
        """N x N matrix of E[W_i(z) W_j(z*)] in unit order.

        The diagonal follows the indicator-product convention: pi_i(z) when
        z == z*, else 0.  Subclasses override with vectorized fills.
        """
        n = self.n_units
        out = np.empty((n, n))
        for i, ui in enumerate(self.units):
            for j, uj in enumerate(self.units):
                if i == j:
                    out[i, j] = self.first_order(ui, z) if z == zstar else 0.0
                else:
                    out[i, j] = self.second_order(ui, uj, z, zstar)
        return out

    def pair_probability_matrix(self, z: str, zstar: str) -> np.ndarray:
        """Cached, read-only view of :meth:`second_order_matrix`."""
        cache = self.__dict__.setdefault("_p2_cache", {})
        key = (z, zstar)
        if key not in cache:
            matrix = self.second_order_matrix(z, zstar)
            matrix.setflags(write=False)
            cache[key] = matrix
        return cache[key]

    def replication_counts(self, z: str) -> int | tuple[int, int]:
        """Units assigned to z: an int when constant over the support,
        otherwise the (min, max) range."""
        counts = {len(p.group(z)) for p, _ in self._iter_support()}
        if len(counts) == 1:
            return counts.pop()
        return (min(counts), max(counts))

    # -- structure checks ----------------------------------------------------

    def positivity_ok(self) -> bool:
        """First-order positivity: every pi_i(z) > 0 (needed for any LUE)."""
        return all(
            self.first_order_exact(u, z) > 0 for u in self.units for z in self.treatments
        )

    def iter_zero_second_order(self) -> Iterator[tuple[object, object, str, str]]:
        """Yield (unit_i, unit_j, z, z*) with pi_{ij}(z, z*) == 0, i < j in unit order."""
        for i, ui in enumerate(self.units):
            for uj in self.units[i + 1 :]:
                for z in self.treatments:
                    for zstar in self.treatments:
                        if self.second_order_exact(ui, uj, z, zstar) == 0:
                            yield (ui, uj, z, zstar)

    def has_positive_second_order(self) -> bool:
        return next(iter(self.iter_zero_second_order()), None) is None

    def point_estimate_only(self) -> bool:
        """Heuristic flag: replication structure too thin for the named
        sample-variance formulas (contrast and Q specific paths may still
        admit unbiased variance estimation)."""
        return not self.has_positive_second_order()

    def _require_units(self, *units) -> None:
        known = set(self.units)
        for u in units:
            if u not in known:
                raise ValueError(f"unknown unit {u!r}")

    def _require_treatments(self, *zs) -> None:
        for z in zs:
            if z not in self.treatments:
                raise ValueError(f"unknown treatment {z!r}")


class CompletelyRandomized(AssignmentMechanism):
    """Fixed arm sizes r(z); all partitions with those sizes equiprobable."""

    def __init__(self, units: Sequence, r: Mapping[str, int]):
        self.units = tuple(units)
        if len(set(self.units)) != len(self.units):
            raise ValueError("unit ids must be unique")
        self.r = _validate_counts(r, "r")
        self.treatments = tuple(self.r)
        if sum(self.r.values()) != self.n_units:
            raise ValueError(
                f"arm sizes sum to {sum(self.r.values())}, expected {self.n_units}"
            )

    def _draw(self, rng) -> Partition:
        perm = rng.permutation(self.n_units)
        arms = [""] * self.n_units
        pos = 0
        for z in self.treatments:
            for k in perm[pos : pos + self.r[z]]:
                arms[k] = z
            pos += self.r[z]
        return Partition(self.units, tuple(arms))

    def support_size(self) -> int:
        return _multinomial(self.n_units, [self.r[z] for z in self.treatments])

    def _iter_support(self):
        p = Fraction(1, self.support_size())
        sizes = [self.r[z] for z in self.treatments]
        for groups in _iter_splits(self.units, sizes):
            arm_of = {}
            for z, grp in zip(self.treatments, groups):
                for u in grp:
                    arm_of[u] = z
            yield Partition(self.units, tuple(arm_of[u] for u in self.units)), p

    def first_order_exact(self, unit, z) -> Fraction:
        self._require_units(unit)
        self._require_treatments(z)
        return Fraction(self.r[z], self.n_units)

    def second_order_exact(self, unit_i, unit_j, z, zstar) -> Fraction:
        self._require_units(unit_i, unit_j)
        self._require_treatments(z, zstar)
        if unit_i == unit_j:
            raise ValueError("second-order probability needs two distinct units")
        n = self.n_units
        if z == zstar:
            return Fraction(self.r[z] * (self.r[z] - 1), n * (n - 1))
        return Fraction(self.r[z] * self.r[zstar], n * (n - 1))

    def second_order_matrix(self, z, zstar) -> np.ndarray:
        self._require_treatments(z, zstar)
        n = self.n_units
        if z == zstar:
            off = self.r[z] * (self.r[z] - 1) / (n * (n - 1))
            diag = self.r[z] / n
        else:
            off = self.r[z] * self.r[zstar] / (n * (n - 1))
            diag = 0.0
        out = np.full((n, n), off)
        np.fill_diagonal(out, diag)
        return out

    def replication_counts(self, z) -> int:
        self._require_treatments(z)
        return self.r[z]

    def point_estimate_only(self) -> bool:
        return any(k < 2 for k in self.r.values())


class Stratified(AssignmentMechanism):
    """Independent completely randomized assignment within each stratum."""

    def __init__(self, strata: Mapping[object, Sequence], r: Mapping[object, Mapping[str, int]]):
        self.strata = {h: tuple(us) for h, us in strata.items()}
        if len(self.strata) < 1:
            raise ValueError("need at least one stratum")
        self.units = tuple(itertools.chain.from_iterable(self.strata.values()))
        if len(set(self.units)) != len(self.units):
            raise ValueError("unit ids must be unique across strata")
        if set(r) != set(self.strata):
            raise ValueError("arm-size map must cover exactly the strata")
        self.r = {h: _validate_counts(r[h], f"r[{h!r}]") for h in self.strata}
        first = next(iter(self.strata))
        self.treatments = tuple(self.r[first])
        for h, counts in self.r.items():
            if set(counts) != set(self.treatments):
                raise ValueError(f"stratum {h!r} lists different treatments")
            if sum(counts.values()) != len(self.strata[h]):
                raise ValueError(
                    f"stratum {h!r}: arm sizes sum to {sum(counts.values())}, "
                    f"expected {len(self.strata[h])}"
                )
        self._stratum_of = {u: h for h, us in self.strata.items() for u in us}

    @classmethod
    def from_table(cls, table, r: Mapping[object, Mapping[str, int]]) -> "Stratified":
        if table.stratum_of is None:
            raise ValueError("table has no stratum labels")
        strata: dict = {}
        for u in table.units:
            strata.setdefault(table.stratum_of[u], []).append(u)
        return cls(strata, r)

    def stratum_size(self, h) -> int:
        return len(self.strata[h])

    def _draw(self, rng) -> Partition:
        arm_of = {}
        for h, us in self.strata.items():
            perm = rng.permutation(len(us))
            pos = 0
            for z in self.treatments:
                for k in perm[pos : pos + self.r[h][z]]:
                    arm_of[us[k]] = z
                pos += self.r[h][z]
        return Partition(self.units, tuple(arm_of[u] for u in self.units))

    def support_size(self) -> int:
        total = 1
        for h, us in self.strata.items():
            total *= _multinomial(len(us), [self.r[h][z] for z in self.treatments])
        return total

    def _iter_support(self):
        p = Fraction(1, self.support_size())
        per_stratum = []
        for h, us in self.strata.items():
            sizes = [self.r[h][z] for z in self.treatments]
            per_stratum.append(list(_iter_splits(us, sizes)))
        for combo in itertools.product(*per_stratum):
            arm_of = {}
            for groups in combo:
                for z, grp in zip(self.treatments, groups):
                    for u in grp:
                        arm_of[u] = z
            yield Partition(self.units, tuple(arm_of[u] for u in self.units)), p

    def first_order_exact(self, unit, z) -> Fraction:
        self._require_units(unit)
        self._require_treatments(z)
        h = self._stratum_of[unit]
        return Fraction(self.r[h][z], self.stratum_size(h))

    def second_order_exact(self, unit_i, unit_j, z, zstar) -> Fraction:
        self._require_units(unit_i, unit_j)
        self._require_treatments(z, zstar)
        if unit_i == unit_j:
            raise ValueError("second-order probability needs two distinct units")
        h, hstar = self._stratum_of[unit_i], self._stratum_of[unit_j]
        if h == hstar:
            nh = self.stratum_size(h)
            if z == zstar:
                return Fraction(self.r[h][z] * (self.r[h][z] - 1), nh * (nh - 1))
            return Fraction(self.r[h][z] * self.r[h][zstar], nh * (nh - 1))
        return Fraction(
            self.r[h][z] * self.r[hstar][zstar],
            self.stratum_size(h) * self.stratum_size(hstar),
        )

    def second_order_matrix(self, z, zstar) -> np.ndarray:
        self._require_treatments(z, zstar)
        pi_z = np.array([self.first_order(u, z) for u in self.units])
        pi_zs = np.array([self.first_order(u, zstar) for u in self.units])
        out = np.outer(pi_z, pi_zs)  # cross-strata form
        pos = 0
        for h, us in self.strata.items():
            nh = len(us)
            if z == zstar:
                within = self.r[h][z] * (self.r[h][z] - 1) / (nh * (nh - 1))
                diag = self.r[h][z] / nh
            else:
                within = self.r[h][z] * self.r[h][zstar] / (nh * (nh - 1))
                diag = 0.0
            block = slice(pos, pos + nh)
            out[block, block] = within
            out[block, block][np.diag_indices(nh)] = diag
            pos += nh
        return out

    def replication_counts(self, z) -> int:
        self._require_treatments(z)
        return sum(self.r[h][z] for h in self.strata)

    def point_estimate_only(self) -> bool:
        return any(k < 2 for counts in self.r.values() for k in counts.values())


class SplitPlot(AssignmentMechanism):
    """Two-stage randomization: whole-plots to first-factor levels, then
    sub-plots within each whole-plot to second-factor levels.

    Units must be listed whole-plot by whole-plot: units[h*N0:(h+1)*N0] form
    whole-plot h.  Treatment labels concatenate the two factor levels (z1z2).
    """

    def __init__(self, units: Sequence, r1: Mapping[str, int], r2: Mapping[str, int]):
        self.units = tuple(units)
        if len(set(self.units)) != len(self.units):
            raise ValueError("unit ids must be unique")
        self.r1 = _validate_counts(r1, "r1")
        self.r2 = _validate_counts(r2, "r2")
        self.z1_levels = tuple(self.r1)
        self.z2_levels = tuple(self.r2)
        self.n_wholeplots = sum(self.r1.values())
        self.wholeplot_size = sum(self.r2.values())
        if self.n_units != self.n_wholeplots * self.wholeplot_size:
            raise ValueError(
                f"{self.n_units} units cannot form {self.n_wholeplots} whole-plots "
                f"of {self.wholeplot_size} sub-plots"
            )
        self.treatments = tuple(
            z1 + z2 for z1 in self.z1_levels for z2 in self.z2_levels
        )
        self._factors_of = {
            z1 + z2: (z1, z2) for z1 in self.z1_levels for z2 in self.z2_levels
        }

    @classmethod
    def from_table(cls, table, r1, r2) -> "SplitPlot":
        if table.wholeplot_of is None:
            raise ValueError("table has no whole-plot labels")
        mech = cls(table.units, r1, r2)
        if mech.n_wholeplots != table.wholeplot_count:
            raise ValueError(
                f"r1 implies {mech.n_wholeplots} whole-plots, table has "
                f"{table.wholeplot_count}"
            )
        return mech

    def factor_levels(self, z: str) -> tuple[str, str]:
        try:
            return self._factors_of[z]
        except KeyError:
            raise ValueError(f"unknown treatment {z!r}") from None

    def wholeplot_units(self, h: int) -> tuple:
        n0 = self.wholeplot_size
        return self.units[h * n0 : (h + 1) * n0]

    def _wholeplot_of_index(self, idx: int) -> int:
        return idx // self.wholeplot_size

    @cached_property
    def _index_of(self) -> dict:
        return {u: i for i, u in enumerate(self.units)}

    def _draw(self, rng) -> Partition:
        wp_perm = rng.permutation(self.n_wholeplots)
        z1_of_wp = [""] * self.n_wholeplots
        pos = 0
        for z1 in self.z1_levels:
            for h in wp_perm[pos : pos + self.r1[z1]]:
                z1_of_wp[h] = z1
            pos += self.r1[z1]
        arms = [""] * self.n_units
        n0 = self.wholeplot_size
        for h in range(self.n_wholeplots):
            sub_perm = rng.permutation(n0)
            pos = 0
            for z2 in self.z2_levels:
                for k in sub_perm[pos : pos + self.r2[z2]]:
                    arms[h * n0 + k] = z1_of_wp[h] + z2
                pos += self.r2[z2]
        return Partition(self.units, tuple(arms))

    def support_size(self) -> int:
        first = _multinomial(self.n_wholeplots, [self.r1[z1] for z1 in self.z1_levels])
        second = _multinomial(self.wholeplot_size, [self.r2[z2] for z2 in self.z2_levels])
        return first * second**self.n_wholeplots

    def _iter_support(self):
        p = Fraction(1, self.support_size())
        wps = tuple(range(self.n_wholeplots))
        n0 = self.wholeplot_size
        sub_sizes = [self.r2[z2] for z2 in self.z2_levels]
        sub_splits = list(_iter_splits(tuple(range(n0)), sub_sizes))
        wp_sizes = [self.r1[z1] for z1 in self.z1_levels]
        for wp_groups in _iter_splits(wps, wp_sizes):
            z1_of_wp = {}
            for z1, grp in zip(self.z1_levels, wp_groups):
                for h in grp:
                    z1_of_wp[h] = z1
            for combo in itertools.product(sub_splits, repeat=self.n_wholeplots):
                arms = [""] * self.n_units
                for h, groups in enumerate(combo):
                    for z2, grp in zip(self.z2_levels, groups):
                        for k in grp:
                            arms[h * n0 + k] = z1_of_wp[h] + z2
                yield Partition(self.units, tuple(arms)), p

    def first_order_exact(self, unit, z) -> Fraction:
        self._require_units(unit)
        z1, z2 = self.factor_levels(z)
        return Fraction(self.r1[z1] * self.r2[z2], self.n_units)

    def second_order_exact(self, unit_i, unit_j, z, zstar) -> Fraction:
        self._require_units(unit_i, unit_j)
        if unit_i == unit_j:
            raise ValueError("second-order probability needs two distinct units")
        z1, z2 = self.factor_levels(z)
        w1, w2 = self.factor_levels(zstar)
        n, n0, big_h = self.n_units, self.wholeplot_size, self.n_wholeplots
        same_wp = self._wholeplot_of_index(self._index_of[unit_i]) == self._wholeplot_of_index(
            self._index_of[unit_j]
        )
        if same_wp:
            if z1 != w1:
                return Fraction(0)
            if z2 == w2:
                return Fraction(self.r1[z1] * self.r2[z2] * (self.r2[z2] - 1), n * (n0 - 1))
            return Fraction(self.r1[z1] * self.r2[z2] * self.r2[w2], n * (n0 - 1))
        if z1 == w1:
            return Fraction(
                self.r1[z1] * (self.r1[z1] - 1) * self.r2[z2] * self.r2[w2],
                n * n0 * (big_h - 1),
            )
        return Fraction(
            self.r1[z1] * self.r1[w1] * self.r2[z2] * self.r2[w2],
            n * n0 * (big_h - 1),
        )

    def second_order_matrix(self, z, zstar) -> np.ndarray:
        z1, z2 = self.factor_levels(z)
        w1, w2 = self.factor_levels(zstar)
        n, n0, big_h = self.n_units, self.wholeplot_size, self.n_wholeplots
        if z1 == w1:
            across = self.r1[z1] * (self.r1[z1] - 1) * self.r2[z2] * self.r2[w2] / (
                n * n0 * (big_h - 1)
            )
            if z2 == w2:
                within = self.r1[z1] * self.r2[z2] * (self.r2[z2] - 1) / (n * (n0 - 1))
                diag = self.r1[z1] * self.r2[z2] / n
            else:
                within = self.r1[z1] * self.r2[z2] * self.r2[w2] / (n * (n0 - 1))
                diag = 0.0
        else:
            across = (
                self.r1[z1] * self.r1[w1] * self.r2[z2] * self.r2[w2] / (n * n0 * (big_h - 1))
            )
            within = 0.0
            diag = 0.0
        out = np.full((n, n), across)
        for h in range(big_h):
            block = slice(h * n0, (h + 1) * n0)
            out[block, block] = within
            out[block, block][np.diag_indices(n0)] = diag
        return out

    def replication_counts(self, z) -> int:
        z1, z2 = self.factor_levels(z)
        return self.r1[z1] * self.r2[z2]

    def point_estimate_only(self) -> bool:
        # Whole-plot stage drives variance estimability; r2 = 1 is fine.
        return any(k < 2 for k in self.r1.values())


class Unicluster(AssignmentMechanism):
    """Pre-formed clusters, one per treatment, randomly matched to treatments."""

    def __init__(self, clusters: Sequence[Sequence], treatments: Sequence[str]):
        self.clusters = tuple(tuple(c) for c in clusters)
        self.treatments = tuple(str(z) for z in treatments)
        if len(self.clusters) != len(self.treatments):
            raise ValueError(
                f"{len(self.clusters)} clusters for {len(self.treatments)} treatments"
            )
        if len(self.treatments) < 2:
            raise ValueError("need at least 2 treatments")
        if any(len(c) == 0 for c in self.clusters):
            raise ValueError("clusters must be nonempty")
        self.units = tuple(itertools.chain.from_iterable(self.clusters))
        if len(set(self.units)) != len(self.units):
            raise ValueError("unit ids must be unique across clusters")
        self._cluster_of = {
            u: l for l, cluster in enumerate(self.clusters) for u in cluster
        }

    @classmethod
    def from_table(cls, table) -> "Unicluster":
        groups = table.cluster_groups()
        if len(groups) != len(table.treatments):
            raise ValueError(
                f"table has {len(groups)} clusters for {len(table.treatments)} treatments"
            )
        mech = cls([units for _, units in groups], table.treatments)
        if mech.units != table.units:
            raise ValueError("cluster labels must be contiguous in row order; reorder the rows")
        return mech

    def _draw(self, rng) -> Partition:
        perm = rng.permutation(len(self.treatments))
        arm_of = {}
        for l, cluster in enumerate(self.clusters):
            z = self.treatments[perm[l]]
            for u in cluster:
                arm_of[u] = z
        return Partition(self.units, tuple(arm_of[u] for u in self.units))

    def support_size(self) -> int:
        return math.factorial(len(self.treatments))

    def _iter_support(self):
        p = Fraction(1, self.support_size())
        for perm in itertools.permutations(self.treatments):
            arm_of = {}
            for cluster, z in zip(self.clusters, perm):
                for u in cluster:
                    arm_of[u] = z
            yield Partition(self.units, tuple(arm_of[u] for u in self.units)), p

    def first_order_exact(self, unit, z) -> Fraction:
        self._require_units(unit)
        self._require_treatments(z)
        return Fraction(1, len(self.treatments))

    def second_order_exact(self, unit_i, unit_j, z, zstar) -> Fraction:
        self._require_units(unit_i, unit_j)
        self._require_treatments(z, zstar)
        if unit_i == unit_j:
            raise ValueError("second-order probability needs two distinct units")
        nz = len(self.treatments)
        same_cluster = self._cluster_of[unit_i] == self._cluster_of[unit_j]
        if same_cluster:
            return Fraction(1, nz) if z == zstar else Fraction(0)
        return Fraction(0) if z == zstar else Fraction(1, nz * (nz - 1))

    def second_order_matrix(self, z, zstar) -> np.ndarray:
        self._require_treatments(z, zstar)
        nz = len(self.treatments)
        n = self.n_units
        if z == zstar:
            across, within, diag = 0.0, 1.0 / nz, 1.0 / nz
        else:
            across, within, diag = 1.0 / (nz * (nz - 1)), 0.0, 0.0
        out = np.full((n, n), across)
        pos = 0
        for cluster in self.clusters:
            k = len(cluster)
            block = slice(pos, pos + k)
            out[block, block] = within
            out[block, block][np.diag_indices(k)] = diag
            pos += k
        return out

    def replication_counts(self, z) -> int | tuple[int, int]:
        self._require_treatments(z)
        sizes = {len(c) for c in self.clusters}
        if len(sizes) == 1:
            return sizes.pop()
        return (min(sizes), max(sizes))

    def point_estimate_only(self) -> bool:
        return True


class Custom(AssignmentMechanism):
    """Mechanism given by an explicit support of (partition, probability) pairs.

    Probabilities are validated to sum to 1 within 1e-12 and then normalized
    exactly, so enumeration weights always sum to exactly 1.  All probability
    queries route through the support; there are no closed-form shortcuts.
    """

    def __init__(
        self,
        support: Sequence[tuple[Partition, Fraction | float | int | str]],
        treatments: Sequence[str] | None = None,
    ):
        if not support:
            raise ValueError("support is empty")
        first = support[0][0]
        self.units = first.units
        probs = []
        partitions = []
        for part, prob in support:
            if set(part.units) != set(self.units):
                raise ValueError("all partitions must cover the same units")
            if part.units != self.units:
                # canonicalize to a shared unit order
                part = Partition(self.units, tuple(part.arm_of(u) for u in self.units))
            frac = prob if isinstance(prob, Fraction) else Fraction(str(prob) if isinstance(prob, str) else prob)
            if frac < 0:
                raise ValueError("probabilities must be nonnegative")
            partitions.append(part)
            probs.append(frac)
        total = sum(probs)
        if abs(total - 1) > Fraction(1, 10**12):
            raise ValueError(f"support probabilities sum to {float(total)!r}, not 1")
        if len({p.encode() for p in partitions}) != len(partitions):
            raise ValueError("support lists a partition twice")
        self._support = tuple(
            (part, prob / total) for part, prob in zip(partitions, probs) if prob > 0
        )
        if treatments is None:
            seen: dict[str, None] = {}
            for part, _ in self._support:
                for a in part.arms:
                    seen.setdefault(a, None)
            self.treatments = tuple(sorted(seen))
        else:
            self.treatments = tuple(str(z) for z in treatments)
        for part, _ in self._support:
            part.validate_against(self.treatments)

    def _draw(self, rng) -> Partition:
        u = rng.random()
        acc = 0.0
        for part, prob in self._support:
            acc += float(prob)
            if u < acc:
                return part
        return self._support[-1][0]

    def support_size(self) -> int:
        return len(self._support)

    def _iter_support(self):
        yield from self._support

    @cached_property
    def _pi1(self) -> dict[tuple[object, str], Fraction]:
        table: dict[tuple[object, str], Fraction] = {}
        for u in self.units:
            for z in self.treatments:
                table[(u, z)] = Fraction(0)
        for part, prob in self._support:
            for u, a in zip(part.units, part.arms):
                table[(u, a)] += prob
        return table

    @cached_property
    def _pi2(self) -> dict[tuple[object, object, str, str], Fraction]:
        table: dict[tuple[object, object, str, str], Fraction] = {}
        for part, prob in self._support:
            arms = part.arms
            for i, ui in enumerate(self.units):
                for j, uj in enumerate(self.units):
                    if i == j:
                        continue
                    key = (ui, uj, arms[i], arms[j])
                    table[key] = table.get(key, Fraction(0)) + prob
        return table

    def first_order_exact(self, unit, z) -> Fraction:
        self._require_units(unit)
        self._require_treatments(z)
        return self._pi1[(unit, z)]

    def second_order_exact(self, unit_i, unit_j, z, zstar) -> Fraction:
        self._require_units(unit_i, unit_j)
        self._require_treatments(z, zstar)
        if unit_i == unit_j:
            raise ValueError("second-order probability needs two distinct units")
        return self._pi2.get((unit_i, unit_j, z, zstar), Fraction(0))

    def second_order_matrix(self, z, zstar) -> np.ndarray:
        self._require_treatments(z, zstar)
        n = self.n_units
        out = np.zeros((n, n))
        index = {u: i for i, u in enumerate(self.units)}
        for (ui, uj, a, b), prob in self._pi2.items():
            if a == z and b == zstar:
                out[index[ui], index[uj]] += float(prob)
        if z == zstar:
            for u in self.units:
                out[index[u], index[u]] = float(self._pi1[(u, z)])
        return out


def support_first_order(mech: AssignmentMechanism, unit, z: str) -> Fraction:
    """Oracle route: pi_i(z) summed over the enumerated support."""
    total = Fraction(0)
    for part, prob in mech.enumerate_support():
        if part.arm_of(unit) == z:
            total += prob
    return total


def support_second_order(mech: AssignmentMechanism, unit_i, unit_j, z: str, zstar: str) -> Fraction:
    """Oracle route: pi_{ij}(z, z*) summed over the enumerated support."""
    if unit_i == unit_j:
        raise ValueError("second-order probability needs two distinct units")
    total = Fraction(0)
    for part, prob in mech.enumerate_support():
        if part.arm_of(unit_i) == z and part.arm_of(unit_j) == zstar:
            total += prob
    return total


def load_custom_support_csv(path, treatments: Sequence[str] | None = None) -> Custom:
    """Read a Custom mechanism support from CSV.

    Header: one column per unit id plus a final ``probability`` column holding
    exact rationals as ``num/den`` strings (plain decimals also accepted).
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise ValueError("support CSV needs a header row and at least one partition")
    header = [h.strip() for h in rows[0]]
    if header[-1] != "probability":
        raise ValueError("last column of a support CSV must be 'probability'")
    units = tuple(header[:-1])
    support = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            raise ValueError(f"line {lineno}: expected {len(header)} fields, got {len(row)}")
        arms = tuple(cell.strip() for cell in row[:-1])
        try:
            prob = Fraction(row[-1].strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"line {lineno}: bad probability ({exc})") from None
        support.append((Partition(units, arms), prob))
    return Custom(support, treatments=treatments)
