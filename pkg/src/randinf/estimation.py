"""Linear unbiased estimation of treatment means and contrasts.

Implements the Horvitz-Thompson estimator, general linear unbiased estimators
(LUEs) over enumerable mechanisms, the cross-moment coefficients that express
E[Ybarhat(z) Ybarhat(z*)], and exact sampling variances and covariances of
contrast estimators assembled from those coefficients.

Estimators read outcomes only through :class:`ObservedOutcomes`, which traps
any access to a potential outcome the realized partition did not expose.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping

import numpy as np

from .assignment import AssignmentMechanism, Partition
from .population import Contrast, PotentialOutcomesTable, population_contrast


class UnobservedAccessError(LookupError):
    """A potential outcome was requested for a treatment the unit did not get."""


class ObservedOutcomes:
    """Masking view over one realized assignment.

    Holds exactly one outcome per unit (the assigned arm's); asking for any
    other cell raises, which keeps estimator code honest about what an
    experiment reveals.
    """

    def __init__(self, partition: Partition, values: Mapping):
        self.partition = partition
        self._values = {u: float(values[u]) for u in partition.units}
        extra = set(values) - set(partition.units)
        if extra:
            raise ValueError(f"observed values for unknown units {sorted(map(repr, extra))}")

    @classmethod
    def from_table(cls, table: PotentialOutcomesTable, partition: Partition) -> "ObservedOutcomes":
        values = {u: table.outcome(u, partition.arm_of(u)) for u in partition.units}
        return cls(partition, values)

    def value(self, unit, z: str) -> float:
        arm = self.partition.arm_of(unit)
        if arm != z:
            raise UnobservedAccessError(
                f"unit {unit!r} was assigned {arm!r}; Y({z!r}) is unobserved"
            )
        return self._values[unit]

    def observed(self, unit) -> float:
        return self._values[unit]


# -- linear unbiased estimators ---------------------------------------------


class HorvitzThompson:
    """Inverse-probability weighting: a = 0, b_i = 1 / (N pi_i(z))."""

    name = "horvitz-thompson"

    def a(self, mech: AssignmentMechanism, partition: Partition, z: str) -> float:
        return 0.0

    def b(self, mech: AssignmentMechanism, partition: Partition, z: str, unit) -> float:
        return 1.0 / (mech.n_units * mech.first_order(unit, z))


HT = HorvitzThompson()


class CustomLUE:
    """LUE given by explicit coefficient tables keyed by partition encoding.

    Exists to exercise the general cross-moment machinery; requires an
    enumerable mechanism.  ``a_map`` maps (encoding, z) to the intercept and
    ``b_map`` maps (encoding, z, unit) to the weight of an observed outcome.
    """

    name = "custom"

    def __init__(self, a_map: Mapping, b_map: Mapping):
        self._a = dict(a_map)
        self._b = dict(b_map)

    @classmethod
    def from_functions(cls, mech: AssignmentMechanism, a_fn=None, b_fn=None) -> "CustomLUE":
        """Materialize coefficient tables over the mechanism's support."""
        a_map = {}
        b_map = {}
        for part, _ in mech.enumerate_support():
            enc = part.encode()
            for z in mech.treatments:
                a_map[(enc, z)] = float(a_fn(part, z)) if a_fn is not None else 0.0
                for u in part.group(z):
                    if b_fn is not None:
                        b_map[(enc, z, u)] = float(b_fn(part, z, u))
                    else:
                        b_map[(enc, z, u)] = 1.0 / (mech.n_units * mech.first_order(u, z))
        return cls(a_map, b_map)

    def a(self, mech, partition, z) -> float:
        try:
            return self._a[(partition.encode(), z)]
        except KeyError:
            raise ValueError(f"no intercept coefficient for this partition and {z!r}") from None

    def b(self, mech, partition, z, unit) -> float:
        try:
            return self._b[(partition.encode(), z, unit)]
        except KeyError:
            raise ValueError(
                f"no weight coefficient for unit {unit!r} at {z!r} in this partition"
            ) from None


def validate_lue(mech: AssignmentMechanism, lue, tol: float = 1e-10) -> float:
    """Structural unbiasedness check over the support; returns the worst residual.

    A LUE of every treatment mean must satisfy sum_T p(T) a(T,z) = 0 and
    sum over partitions assigning unit i to z of p(T) b_i(T,z) = 1/N.
    """
    support = mech.enumerate_support()
    n = mech.n_units
    worst = 0.0
    for z in mech.treatments:
        e_a = sum((p * Fraction(lue.a(mech, part, z)) for part, p in support), Fraction(0))
        worst = max(worst, abs(float(e_a)))
        for u in mech.units:
            e_b = sum(
                (p * Fraction(lue.b(mech, part, z, u)) for part, p in support if part.arm_of(u) == z),
                Fraction(0),
            )
            worst = max(worst, abs(float(e_b - Fraction(1, n))))
    if worst > tol:
        raise ValueError(f"not a linear unbiased estimator (worst residual {worst:g})")
    return worst


# -- mean and contrast estimates ---------------------------------------------


def _check_alignment(table: PotentialOutcomesTable, mech: AssignmentMechanism) -> None:
    if table.units != mech.units:
        raise ValueError("mechanism and table must list the same units in the same order")
    if set(table.treatments) != set(mech.treatments):
        raise ValueError(
            f"mechanism treatments {sorted(mech.treatments)} do not match table "
            f"treatments {sorted(table.treatments)}"
        )


def _aligned_outcomes(table: PotentialOutcomesTable, mech: AssignmentMechanism) -> np.ndarray:
    cols = [table.treatment_index(z) for z in mech.treatments]
    return table.y[:, cols]


def lue_mean_from_observed(obs: ObservedOutcomes, mech: AssignmentMechanism, lue, z: str) -> float:
    total = lue.a(mech, obs.partition, z)
    for u in obs.partition.group(z):
        total += lue.b(mech, obs.partition, z, u) * obs.value(u, z)
    return float(total)


def lue_mean_estimate(table, partition, mech, lue, z: str) -> float:
    obs = ObservedOutcomes.from_table(table, partition)
    return lue_mean_from_observed(obs, mech, lue, z)


def ht_mean_estimate(table, partition, mech, z: str) -> float:
    """Horvitz-Thompson estimate of the treatment mean from observed cells only."""
    if z not in mech.treatments:
        raise ValueError(f"unknown treatment {z!r}")
    return lue_mean_estimate(table, partition, mech, HT, z)


def contrast_estimate(c: Contrast, means: Mapping[str, float]) -> float:
    """Plug-in contrast estimate from per-treatment mean estimates."""
    missing = set(c.g) - set(means)
    if missing:
        raise ValueError(f"no mean estimate for treatments {sorted(missing)}")
    return float(sum(c.g[z] * means[z] for z in c.g))


def ht_contrast_estimate(table, partition, mech, c: Contrast) -> float:
    obs = ObservedOutcomes.from_table(table, partition)
    means = {z: lue_mean_from_observed(obs, mech, HT, z) for z in mech.treatments}
    return contrast_estimate(c, means)


# -- cross moments (Lemma-1 coefficients) ------------------------------------


@dataclass(frozen=True)
class CrossMomentCoefficients:
    """Coefficients expressing E[Ybarhat(z) Ybarhat(z*)] for a LUE.

    Arrays are indexed over mechanism unit order and treatment order:
    a[z,w]; a1[i,z,w] multiplies Y_i(z); a2[i,z,w] multiplies Y_i(w);
    b[i,j,z,w] multiplies Y_i(z) Y_j(w), with b[i,i,z,w] = 0 for z != w.
    """

    treatments: tuple[str, ...]
    a: np.ndarray
    a1: np.ndarray
    a2: np.ndarray
    b: np.ndarray


def cross_moments(mech: AssignmentMechanism, lue) -> CrossMomentCoefficients:
    """Lemma-1 coefficients: closed form for Horvitz-Thompson, support sums otherwise."""
    if isinstance(lue, HorvitzThompson):
        return _cross_moments_ht(mech)
    return cross_moments_via_support(mech, lue)


def _cross_moments_ht(mech: AssignmentMechanism) -> CrossMomentCoefficients:
    n = mech.n_units
    nz = len(mech.treatments)
    pi = np.array(
        [[mech.first_order(u, z) for z in mech.treatments] for u in mech.units]
    )
    if np.any(pi <= 0.0):
        raise ValueError("Horvitz-Thompson needs every first-order probability positive")
    b = np.empty((n, n, nz, nz))
    for zi, z in enumerate(mech.treatments):
        for wi, w in enumerate(mech.treatments):
            p2 = mech.pair_probability_matrix(z, w)
            b[:, :, zi, wi] = p2 / (n * n * np.outer(pi[:, zi], pi[:, wi]))
    zeros2 = np.zeros((nz, nz))
    zeros3 = np.zeros((n, nz, nz))
    return CrossMomentCoefficients(mech.treatments, zeros2, zeros3, zeros3.copy(), b)


def cross_moments_via_support(mech: AssignmentMechanism, lue) -> CrossMomentCoefficients:
    """Lemma-1 coefficients accumulated exactly over the enumerated support."""
    support = mech.enumerate_support()
    n = mech.n_units
    zs = mech.treatments
    nz = len(zs)
    uidx = {u: i for i, u in enumerate(mech.units)}
    a = [[Fraction(0)] * nz for _ in range(nz)]
    a1 = [[[Fraction(0)] * nz for _ in range(nz)] for _ in range(n)]
    a2 = [[[Fraction(0)] * nz for _ in range(nz)] for _ in range(n)]
    b = np.zeros((n, n, nz, nz))
    b_frac: dict[tuple[int, int, int, int], Fraction] = {}
    for part, p in support:
        a_vals = [Fraction(lue.a(mech, part, z)) for z in zs]
        b_vals: list[list[tuple[int, Fraction]]] = []
        for z in zs:
            b_vals.append(
                [(uidx[u], Fraction(lue.b(mech, part, z, u))) for u in part.group(z)]
            )
        for zi in range(nz):
            for wi in range(nz):
                a[zi][wi] += p * a_vals[zi] * a_vals[wi]
                for i, bi in b_vals[zi]:
                    a1[i][zi][wi] += p * bi * a_vals[wi]
                for j, bj in b_vals[wi]:
                    a2[j][zi][wi] += p * a_vals[zi] * bj
                for i, bi in b_vals[zi]:
                    for j, bj in b_vals[wi]:
                        key = (i, j, zi, wi)
                        b_frac[key] = b_frac.get(key, Fraction(0)) + p * bi * bj
    for (i, j, zi, wi), val in b_frac.items():
        b[i, j, zi, wi] = float(val)
    a_arr = np.array([[float(v) for v in row] for row in a])
    a1_arr = np.array([[[float(v) for v in row] for row in plane] for plane in a1])
    a2_arr = np.array([[[float(v) for v in row] for row in plane] for plane in a2])
    return CrossMomentCoefficients(zs, a_arr, a1_arr, a2_arr, b)


def expected_mean_product(
    table: PotentialOutcomesTable,
    mech: AssignmentMechanism,
    lue,
    z: str,
    zstar: str,
    cm: CrossMomentCoefficients | None = None,
) -> float:
    """E[Ybarhat(z) Ybarhat(z*)] assembled from cross-moment coefficients."""
    _check_alignment(table, mech)
    if cm is None:
        cm = cross_moments(mech, lue)
    y = _aligned_outcomes(table, mech)
    zi = mech.treatments.index(z)
    wi = mech.treatments.index(zstar)
    linear = float(cm.a1[:, zi, wi] @ y[:, zi] + cm.a2[:, zi, wi] @ y[:, wi])
    quad = float(y[:, zi] @ cm.b[:, :, zi, wi] @ y[:, wi])
    return float(cm.a[zi, wi]) + linear + quad


# -- Theorem-1 / Theorem-3 coefficient assemblies -----------------------------


@dataclass(frozen=True)
class MCoefficients:
    """Variance-assembly coefficients for one contrast."""

    m: float
    m_i: np.ndarray
    m_ii: np.ndarray
    m_pair: np.ndarray  # zero on the unit diagonal


def m_coefficients(cm: CrossMomentCoefficients, g: np.ndarray) -> MCoefficients:
    m = float(g @ cm.a @ g)
    lin1 = np.einsum("w,izw->iz", g, cm.a1)
    lin2 = np.einsum("w,iwz->iz", g, cm.a2)
    m_i = g[None, :] * (lin1 + lin2)
    n = cm.b.shape[0]
    diag = cm.b[np.arange(n), np.arange(n)]  # (N, Z, Z)
    m_ii = (g**2)[None, :] * diag[:, np.arange(len(g)), np.arange(len(g))]
    m_pair = cm.b * np.multiply.outer(g, g)[None, None, :, :]
    m_pair = m_pair.copy()
    m_pair[np.arange(n), np.arange(n)] = 0.0
    return MCoefficients(m, m_i, m_ii, m_pair)


@dataclass(frozen=True)
class RCoefficients:
    """Covariance-assembly coefficients for a pair of contrasts."""

    r: float
    r_i: np.ndarray
    r_ii: np.ndarray
    r_pair: np.ndarray  # zero on the unit diagonal


def r_coefficients(cm: CrossMomentCoefficients, g1: np.ndarray, g2: np.ndarray) -> RCoefficients:
    r = float(g1 @ cm.a @ g2)
    lin1 = g1[None, :] * np.einsum("w,izw->iz", g2, cm.a1)
    lin2 = g2[None, :] * np.einsum("w,iwz->iz", g1, cm.a2)
    r_i = lin1 + lin2
    n = cm.b.shape[0]
    diag = cm.b[np.arange(n), np.arange(n)]
    r_ii = (g1 * g2)[None, :] * diag[:, np.arange(len(g1)), np.arange(len(g1))]
    r_pair = cm.b * np.multiply.outer(g1, g2)[None, None, :, :]
    r_pair = r_pair.copy()
    r_pair[np.arange(n), np.arange(n)] = 0.0
    return RCoefficients(r, r_i, r_ii, r_pair)


def _assemble(y: np.ndarray, const: float, lin: np.ndarray, sq: np.ndarray, pair: np.ndarray) -> float:
    total = const
    total += float(np.sum(lin * y))
    total += float(np.sum(sq * y * y))
    total += float(np.einsum("ijzw,iz,jw->", pair, y, y))
    return total


def sampling_variance(table, mech, lue, c: Contrast) -> float:
    """Exact sampling variance of the contrast estimator under the mechanism."""
    _check_alignment(table, mech)
    cm = cross_moments(mech, lue)
    g = c.coefficients(mech.treatments)
    mc = m_coefficients(cm, g)
    y = _aligned_outcomes(table, mech)
    tau_bar = population_contrast(table, c)
    return _assemble(y, mc.m, mc.m_i, mc.m_ii, mc.m_pair) - tau_bar**2


def sampling_covariance(table, mech, lue, c1: Contrast, c2: Contrast) -> float:
    """Exact sampling covariance between two contrast estimators."""
    _check_alignment(table, mech)
    cm = cross_moments(mech, lue)
    g1 = c1.coefficients(mech.treatments)
    g2 = c2.coefficients(mech.treatments)
    rc = r_coefficients(cm, g1, g2)
    y = _aligned_outcomes(table, mech)
    tau1 = population_contrast(table, c1)
    tau2 = population_contrast(table, c2)
    return _assemble(y, rc.r, rc.r_i, rc.r_ii, rc.r_pair) - tau1 * tau2


# -- classical two-arm decomposition ------------------------------------------


@dataclass(frozen=True)
class NeymanDecomposition:
    """S(0,0)/r0 + S(1,1)/r1 - S(tau,tau)/N for a two-arm completely
    randomized design, with the three components."""

    s00: float
    s11: float
    s_tau_tau: float
    variance: float


def neyman_two_arm_variance(table: PotentialOutcomesTable, r0: int, r1: int) -> NeymanDecomposition:
    """Classical decomposition for the difference of means Ybar(z1) - Ybar(z0),
    where (z0, z1) are the table's two treatments in column order."""
    if len(table.treatments) != 2:
        raise ValueError("the classical decomposition applies to two-arm designs only")
    n = table.n_units
    if r0 + r1 != n or min(r0, r1) < 1:
        raise ValueError(f"arm sizes ({r0}, {r1}) must be positive and sum to {n}")
    y0 = table.y[:, 0]
    y1 = table.y[:, 1]
    s00 = float(np.var(y0, ddof=1))
    s11 = float(np.var(y1, ddof=1))
    tau = y1 - y0
    s_tau = float(np.var(tau, ddof=1))
    var = s00 / r0 + s11 / r1 - s_tau / n
    return NeymanDecomposition(s00, s11, s_tau, var)
