"""Variance-decomposition matrices and their estimators.

A Q matrix is symmetric psd with zero row sums and diagonal 1/N^2.  Every such
matrix splits the sampling variance of a contrast estimator into an estimable
upper bound minus a nonnegative quadratic-form bias, generalizing the
classical conservative two-arm decomposition.  This module provides the named
constructors, the additivity (GA) and second-order assignment probability
(SAP) condition checks, the bound and its plug-in estimator, the covariance
analogues, and minimax selection by largest eigenvalue.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import estimation
from .assignment import AssignmentMechanism, Partition, SplitPlot, Stratified, Unicluster
from .estimation import (
    ObservedOutcomes,
    cross_moments,
    m_coefficients,
    r_coefficients,
    _aligned_outcomes,
    _check_alignment,
)
from .linalg import jacobi_eigenvalues
from .population import Contrast, PotentialOutcomesTable, unit_contrasts

ROW_SUM_TOL = 1e-10
DIAG_REL_TOL = 1e-12
PSD_TOL = 1e-10
GA_DEFAULT_TOL = 1e-9
SAP_DIAG_TOL = 1e-12


class SAPViolationError(ValueError):
    """The plug-in bound estimator was refused: some required second-order
    assignment probability vanishes."""

    def __init__(self, witness: tuple):
        unit_i, unit_j, z, zstar = witness
        super().__init__(
            "second-order assignment probability condition fails at units "
            f"({unit_i!r}, {unit_j!r}) and treatments ({z!r}, {zstar!r})"
        )
        self.witness = witness


@dataclass(frozen=True)
class QValidationReport:
    """Residuals and flags for membership in the decomposition class."""

    n: int
    max_row_sum: float
    max_diag_deviation: float
    min_eigenvalue: float
    row_sums_ok: bool
    diagonal_ok: bool
    psd_ok: bool

    @property
    def ok(self) -> bool:
        return self.row_sums_ok and self.diagonal_ok and self.psd_ok


def validate_q(matrix) -> QValidationReport:
    """Check zero row sums, diagonal 1/N^2, and positive semidefiniteness."""
    arr = matrix.matrix if isinstance(matrix, QMatrix) else np.array(matrix, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {arr.shape}")
    n = arr.shape[0]
    max_row = float(np.max(np.abs(arr.sum(axis=1))))
    target = 1.0 / (n * n)
    max_diag = float(np.max(np.abs(np.diagonal(arr) - target)))
    min_eig = float(jacobi_eigenvalues(arr)[0])
    return QValidationReport(
        n=n,
        max_row_sum=max_row,
        max_diag_deviation=max_diag,
        min_eigenvalue=min_eig,
        row_sums_ok=max_row <= ROW_SUM_TOL,
        diagonal_ok=max_diag <= DIAG_REL_TOL * max(1.0, target) + DIAG_REL_TOL,
        psd_ok=min_eig >= -PSD_TOL,
    )


class QMatrix:
    """Symmetric psd matrix with zero row sums and diagonal 1/N^2."""

    def __init__(self, matrix, name: str = "custom"):
        arr = np.array(matrix, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {arr.shape}")
        n = arr.shape[0]
        if n < 2:
            raise ValueError("Q matrices need order at least 2")
        scale = max(1.0, float(np.max(np.abs(arr))))
        if float(np.max(np.abs(arr - arr.T))) > 1e-12 * scale:
            raise ValueError("matrix is not symmetric")
        arr = (arr + arr.T) / 2.0
        max_row = float(np.max(np.abs(arr.sum(axis=1))))
        if max_row > ROW_SUM_TOL:
            raise ValueError(f"row sums must vanish (largest magnitude {max_row:g})")
        target = 1.0 / (n * n)
        max_diag = float(np.max(np.abs(np.diagonal(arr) - target)))
        if max_diag > DIAG_REL_TOL * max(1.0, target) + DIAG_REL_TOL:
            raise ValueError(
                f"diagonal must equal 1/N^2 = {target:g} (largest deviation {max_diag:g})"
            )
        # psd gate: Q + tol*I must admit a Cholesky factor
        try:
            np.linalg.cholesky(arr + PSD_TOL * np.eye(n))
        except np.linalg.LinAlgError:
            raise ValueError("matrix is not positive semidefinite") from None
        arr.setflags(write=False)
        self.matrix = arr
        self.name = name

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def __repr__(self) -> str:
        return f"QMatrix(n={self.n}, name={self.name!r})"


def q_strict(n: int) -> QMatrix:
    """(N(N-1))^-1 (I - J/N): the classical conservative choice."""
    if n < 2:
        raise ValueError("need at least 2 units")
    off = -1.0 / (n * n * (n - 1))
    arr = np.full((n, n), off)
    np.fill_diagonal(arr, 1.0 / (n * n))
    return QMatrix(arr, name="strict")


def q_strat(stratum_sizes: Sequence[int]) -> QMatrix:
    """Block-diagonal matrix encoding within-stratum additivity."""
    sizes = [int(s) for s in stratum_sizes]
    if any(s < 2 for s in sizes):
        raise ValueError("every stratum needs at least 2 units")
    n = sum(sizes)
    arr = np.zeros((n, n))
    pos = 0
    for nh in sizes:
        block = slice(pos, pos + nh)
        arr[block, block] = -1.0 / (n * n * (nh - 1))
        pos += nh
    np.fill_diagonal(arr, 1.0 / (n * n))
    return QMatrix(arr, name="strat")


def q_wholeplot(n_wholeplots: int, wholeplot_size: int) -> QMatrix:
    """Between-whole-plot additivity: constant 1/N^2 blocks on the diagonal,
    constant -1/(N^2 (H-1)) blocks off it."""
    big_h, n0 = int(n_wholeplots), int(wholeplot_size)
    if big_h < 2:
        raise ValueError("need at least 2 whole-plots")
    if n0 < 1:
        raise ValueError("whole-plot size must be positive")
    n = big_h * n0
    arr = np.full((n, n), -1.0 / (n * n * (big_h - 1)))
    for h in range(big_h):
        block = slice(h * n0, (h + 1) * n0)
        arr[block, block] = 1.0 / (n * n)
    return QMatrix(arr, name="wholeplot")


def q_half(half_size: int) -> QMatrix:
    """Two matched halves: +-(1/N^2) blocks; bias vanishes when the halves
    share the same mean unit-level contrast."""
    n0 = int(half_size)
    if n0 < 1:
        raise ValueError("half size must be positive")
    return QMatrix(q_wholeplot(2, n0).matrix, name="half")


# -- condition checks ---------------------------------------------------------


def ga_residual(q: QMatrix, table: PotentialOutcomesTable) -> float:
    """max over treatment pairs of the infinity norm of Q (Y(z) - Y(z*))."""
    if q.n != table.n_units:
        raise ValueError(f"Q is {q.n}x{q.n} but the table has {table.n_units} units")
    qy = q.matrix @ table.y
    worst = 0.0
    nz = qy.shape[1]
    for a in range(nz - 1):
        for b in range(a + 1, nz):
            worst = max(worst, float(np.max(np.abs(qy[:, a] - qy[:, b]))))
    return worst


def ga_condition(q: QMatrix, table: PotentialOutcomesTable, tol: float = GA_DEFAULT_TOL) -> bool:
    """Generalized additivity: Q annihilates every Y(z) - Y(z*)."""
    return ga_residual(q, table) <= tol


def _sap_witness(q: QMatrix, mech: AssignmentMechanism, pair_matters) -> tuple | None:
    if q.n != mech.n_units:
        raise ValueError(f"Q is {q.n}x{q.n} but the mechanism has {mech.n_units} units")
    idx = {u: i for i, u in enumerate(mech.units)}
    target = 1.0 / (q.n * q.n)
    qm = q.matrix
    for unit_i, unit_j, z, zstar in mech.iter_zero_second_order():
        if not pair_matters(z, zstar):
            continue
        if abs(qm[idx[unit_i], idx[unit_j]] - target) > SAP_DIAG_TOL:
            return (unit_i, unit_j, z, zstar)
    return None


def sap_witness(q: QMatrix, mech: AssignmentMechanism, c: Contrast | None = None) -> tuple | None:
    """First violating (unit, unit, z, z*) of the SAP condition, or None.

    With a contrast, vanishing pair probabilities only matter where both
    coefficients are nonzero; without one, the g-free sufficient form applies.
    """
    if c is None:
        return _sap_witness(q, mech, lambda z, zstar: True)
    return _sap_witness(
        q, mech, lambda z, zstar: c.coefficient(z) * c.coefficient(zstar) != 0.0
    )


def sap_condition(q: QMatrix, mech: AssignmentMechanism, c: Contrast) -> bool:
    """Whenever pi_{ii*}(z, z*) = 0, g(z) g(z*) (q_{ii*} - 1/N^2) must vanish."""
    return sap_witness(q, mech, c) is None


def sap_sufficient(q: QMatrix, mech: AssignmentMechanism) -> bool:
    """Contrast-free sufficient form: blocked pairs force q_{ii*} = 1/N^2."""
    return sap_witness(q, mech, None) is None


def _sap_witness_two_contrasts(
    q: QMatrix, mech: AssignmentMechanism, c1: Contrast, c2: Contrast
) -> tuple | None:
    def matters(z, zstar):
        return (
            c1.coefficient(z) * c2.coefficient(zstar) != 0.0
            or c1.coefficient(zstar) * c2.coefficient(z) != 0.0
        )

    return _sap_witness(q, mech, matters)


# -- variance bound, estimator, covariance analogues --------------------------


def _offdiag_shift(q: QMatrix) -> np.ndarray:
    d = q.matrix - 1.0 / (q.n * q.n)
    d = d.copy()
    np.fill_diagonal(d, 0.0)
    return d


def v_q(table, mech, lue, c: Contrast, q: QMatrix) -> float:
    """The estimable component: Theorem-style assembly with the pair
    coefficients shifted by q_{ii*} - 1/N^2."""
    _check_alignment(table, mech)
    if q.n != mech.n_units:
        raise ValueError("Q order does not match the number of units")
    cm = cross_moments(mech, lue)
    g = c.coefficients(mech.treatments)
    mc = m_coefficients(cm, g)
    y = _aligned_outcomes(table, mech)
    tau = y @ g
    d = _offdiag_shift(q)
    total = mc.m
    total += float(np.sum(mc.m_i * y))
    total += float(np.sum(mc.m_ii * y * y))
    total += float(np.einsum("ijzw,iz,jw->", mc.m_pair, y, y))
    total += float(tau @ d @ tau)
    return total


def c_q(table, mech, lue, c1: Contrast, c2: Contrast, q: QMatrix) -> float:
    """Covariance analogue of the estimable component."""
    _check_alignment(table, mech)
    if q.n != mech.n_units:
        raise ValueError("Q order does not match the number of units")
    cm = cross_moments(mech, lue)
    g1 = c1.coefficients(mech.treatments)
    g2 = c2.coefficients(mech.treatments)
    rc = r_coefficients(cm, g1, g2)
    y = _aligned_outcomes(table, mech)
    d = _offdiag_shift(q)
    total = rc.r
    total += float(np.sum(rc.r_i * y))
    total += float(np.sum(rc.r_ii * y * y))
    total += float(np.einsum("ijzw,iz,jw->", rc.r_pair, y, y))
    total += float((y @ g1) @ d @ (y @ g2))
    return total


def _plugin_estimate(
    obs: ObservedOutcomes,
    mech: AssignmentMechanism,
    const: float,
    lin: np.ndarray,
    sq: np.ndarray,
    pair: np.ndarray,
    shift_pair: np.ndarray,
) -> float:
    arms = [obs.partition.arm_of(u) for u in mech.units]
    arm_idx = [mech.treatments.index(a) for a in arms]
    ys = np.array([obs.value(u, a) for u, a in zip(mech.units, arms)])
    pi = np.array([mech.first_order(u, a) for u, a in zip(mech.units, arms)])
    n = mech.n_units
    total = const
    for i in range(n):
        zi = arm_idx[i]
        total += (lin[i, zi] * ys[i] + sq[i, zi] * ys[i] * ys[i]) / pi[i]
    p2 = {}
    for i in range(n):
        zi = arm_idx[i]
        for j in range(n):
            if j == i:
                continue
            wj = arm_idx[j]
            coeff = pair[i, j, zi, wj] + shift_pair[i, j, zi, wj]
            if coeff == 0.0:
                continue
            key = (zi, wj)
            if key not in p2:
                p2[key] = mech.pair_probability_matrix(arms[i], arms[j])
            prob = p2[key][i, j]
            if prob <= 0.0:
                raise ValueError("partition has probability zero under the mechanism")
            total += coeff / prob * ys[i] * ys[j]
    return float(total)


def _pair_shift_tensor(d: np.ndarray, g1: np.ndarray, g2: np.ndarray) -> np.ndarray:
    return d[:, :, None, None] * np.multiply.outer(g1, g2)[None, None, :, :]


def v_q_hat(table, partition: Partition, mech, lue, c: Contrast, q: QMatrix) -> float:
    """Plug-in estimator of the bound from one realized partition.

    Refuses (raising :class:`SAPViolationError` with a witness) when the SAP
    condition fails, because the estimator's unbiasedness derivation then
    breaks down.  Reads observed cells only.
    """
    _check_alignment(table, mech)
    partition.validate_against(mech.treatments)
    witness = sap_witness(q, mech, c)
    if witness is not None:
        raise SAPViolationError(witness)
    obs = ObservedOutcomes.from_table(table, partition)
    return v_q_hat_from_observed(obs, mech, lue, c, q)


def v_q_hat_from_observed(obs: ObservedOutcomes, mech, lue, c: Contrast, q: QMatrix) -> float:
    """Same plug-in estimator, fed from observed values directly (the SAP
    refusal check is the caller's responsibility here)."""
    cm = cross_moments(mech, lue)
    g = c.coefficients(mech.treatments)
    mc = m_coefficients(cm, g)
    d = _offdiag_shift(q)
    return _plugin_estimate(
        obs, mech, mc.m, mc.m_i, mc.m_ii, mc.m_pair, _pair_shift_tensor(d, g, g)
    )


def c_q_hat(table, partition: Partition, mech, lue, c1: Contrast, c2: Contrast, q: QMatrix) -> float:
    """Plug-in estimator of the covariance bound from one realized partition."""
    _check_alignment(table, mech)
    partition.validate_against(mech.treatments)
    witness = _sap_witness_two_contrasts(q, mech, c1, c2)
    if witness is not None:
        raise SAPViolationError(witness)
    cm = cross_moments(mech, lue)
    g1 = c1.coefficients(mech.treatments)
    g2 = c2.coefficients(mech.treatments)
    rc = r_coefficients(cm, g1, g2)
    d = _offdiag_shift(q)
    obs = ObservedOutcomes.from_table(table, partition)
    return _plugin_estimate(
        obs, mech, rc.r, rc.r_i, rc.r_ii, rc.r_pair, _pair_shift_tensor(d, g1, g2)
    )


# -- bias, eigenvalues, minimax selection -------------------------------------


def bias(q: QMatrix, tau: Sequence[float]) -> float:
    """Quadratic-form bias tau' Q tau of the bound estimator."""
    tau = np.asarray(tau, dtype=float)
    if tau.shape != (q.n,):
        raise ValueError(f"contrast vector has length {tau.shape}, expected {q.n}")
    return float(tau @ q.matrix @ tau)


def lambda_max(q) -> float:
    """Largest eigenvalue: the worst-case bias over unit-norm contrast vectors."""
    arr = q.matrix if isinstance(q, QMatrix) else np.asarray(q, dtype=float)
    return float(jacobi_eigenvalues(arr)[-1])


def minimax_q(mech: AssignmentMechanism) -> QMatrix | None:
    """Q minimizing the worst-case bias, per mechanism family.

    All second-order probabilities positive: the strict matrix.  Split-plot:
    the whole-plot matrix (unique minimizer within the SAP-admissible
    Kronecker family).  Unicluster: no admissible Q exists, returns None.
    """
    if isinstance(mech, Unicluster):
        return None
    if isinstance(mech, SplitPlot):
        return q_wholeplot(mech.n_wholeplots, mech.wholeplot_size)
    if mech.has_positive_second_order():
        return q_strict(mech.n_units)
    raise ValueError(
        "minimax choice is only characterized for mechanisms with all-positive "
        "second-order probabilities, split-plot mechanisms, and unicluster "
        "mechanisms"
    )


# -- stratified closed forms (independent of the coefficient assembly) --------


def _stratum_slices(mech: Stratified) -> list[tuple[object, slice]]:
    out = []
    pos = 0
    for h, us in mech.strata.items():
        out.append((h, slice(pos, pos + len(us))))
        pos += len(us)
    return out


def vq_stratified_closed_form(table, mech: Stratified, c: Contrast) -> float:
    """Stratified Horvitz-Thompson bound with the stratum Q, computed from
    within-stratum variances directly."""
    _check_alignment(table, mech)
    g = c.coefficients(mech.treatments)
    y = _aligned_outcomes(table, mech)
    n = mech.n_units
    total = 0.0
    for h, rows in _stratum_slices(mech):
        nh = len(mech.strata[h])
        for zi, z in enumerate(mech.treatments):
            if g[zi] == 0.0:
                continue
            s_h = float(np.var(y[rows, zi], ddof=1))
            total += g[zi] ** 2 * nh * nh / mech.r[h][z] * s_h
    return total / (n * n)


def vq_hat_stratified_closed_form(table, partition: Partition, mech: Stratified, c: Contrast) -> float:
    """Plug-in version of the stratified closed form, from observed cells only;
    needs at least 2 observations per stratum and arm."""
    _check_alignment(table, mech)
    partition.validate_against(mech.treatments)
    obs = ObservedOutcomes.from_table(table, partition)
    g = c.coefficients(mech.treatments)
    n = mech.n_units
    total = 0.0
    for h, _ in _stratum_slices(mech):
        nh = len(mech.strata[h])
        stratum_units = set(mech.strata[h])
        for zi, z in enumerate(mech.treatments):
            if g[zi] == 0.0:
                continue
            r_hz = mech.r[h][z]
            if r_hz < 2:
                raise ValueError(
                    f"stratum {h!r} assigns {r_hz} unit(s) to {z!r}; the sample "
                    "variance needs at least 2"
                )
            vals = [obs.value(u, z) for u in partition.group(z) if u in stratum_units]
            total += g[zi] ** 2 * nh * nh / r_hz * float(np.var(vals, ddof=1))
    return total / (n * n)


def var_stratified_closed_form(table, mech: Stratified, c: Contrast) -> float:
    """Exact stratified Horvitz-Thompson sampling variance in closed form."""
    _check_alignment(table, mech)
    g = c.coefficients(mech.treatments)
    y = _aligned_outcomes(table, mech)
    tau = y @ g
    n = mech.n_units
    total = 0.0
    for h, rows in _stratum_slices(mech):
        nh = len(mech.strata[h])
        inner = 0.0
        for zi, z in enumerate(mech.treatments):
            if g[zi] == 0.0:
                continue
            inner += g[zi] ** 2 * nh / mech.r[h][z] * float(np.var(y[rows, zi], ddof=1))
        inner -= float(np.var(tau[rows], ddof=1))
        total += nh * inner
    return total / (n * n)


# -- reports -------------------------------------------------------------------


@dataclass(frozen=True)
class VarianceReport:
    """Everything the framework can say about one (table, mechanism, contrast, Q)."""

    var: float | None
    v_q: float | None
    bias: float | None
    v_q_hat: float | None
    tau_hat: float | None
    sap_ok: bool
    ga_ok: bool | None
    ga_residual: float | None
    sap_witness: tuple | None

    def to_dict(self) -> dict:
        witness = None
        if self.sap_witness is not None:
            unit_i, unit_j, z, zstar = self.sap_witness
            witness = {"unit_i": str(unit_i), "unit_j": str(unit_j), "z": z, "z_star": zstar}
        return {
            "var": self.var,
            "v_q": self.v_q,
            "bias": self.bias,
            "v_q_hat": self.v_q_hat,
            "tau_hat": self.tau_hat,
            "sap_ok": self.sap_ok,
            "ga_ok": self.ga_ok,
            "ga_residual": self.ga_residual,
            "sap_witness": witness,
        }


def variance_report(
    table,
    mech,
    lue,
    c: Contrast,
    q: QMatrix,
    partition: Partition | None = None,
    ga_tol: float = GA_DEFAULT_TOL,
) -> VarianceReport:
    """Full design-evaluation report; the plug-in estimate is included when a
    realized partition is given and the SAP condition holds."""
    _check_alignment(table, mech)
    witness = sap_witness(q, mech, c)
    var = estimation.sampling_variance(table, mech, lue, c)
    vq_val = v_q(table, mech, lue, c, q)
    tau = unit_contrasts(table, c)
    bias_val = bias(q, tau)
    resid = ga_residual(q, table)
    vhat = None
    tau_hat = None
    if partition is not None:
        obs = ObservedOutcomes.from_table(table, partition)
        means = {
            z: estimation.lue_mean_from_observed(obs, mech, lue, z) for z in mech.treatments
        }
        tau_hat = estimation.contrast_estimate(c, means)
        if witness is None:
            vhat = v_q_hat_from_observed(obs, mech, lue, c, q)
    return VarianceReport(
        var=var,
        v_q=vq_val,
        bias=bias_val,
        v_q_hat=vhat,
        tau_hat=tau_hat,
        sap_ok=witness is None,
        ga_ok=resid <= ga_tol,
        ga_residual=resid,
        sap_witness=witness,
    )


def bias_scenario_table(table, c: Contrast, q_alternative: QMatrix, ga_tol: float = GA_DEFAULT_TOL) -> dict:
    """Bias of the strict-Q and alternative-Q bound estimators under the three
    additivity scenarios, evaluated on one science table.

    The six cells give the estimation bias in each scenario row; the row that
    actually applies to this table is reported alongside.
    """
    n = table.n_units
    strict = q_strict(n)
    tau = unit_contrasts(table, c)
    bias_strict = bias(strict, tau)
    bias_alt = bias(q_alternative, tau)
    ga_strict = ga_condition(strict, table, ga_tol)
    ga_alt = ga_condition(q_alternative, table, ga_tol)
    if ga_strict:
        active = 0
    elif ga_alt:
        active = 1
    else:
        active = 2
    return {
        "ga_strict": ga_strict,
        "ga_alternative": ga_alt,
        "active_row": active,
        "scenario": ("strict additivity", "alternative additivity only", "neither")[active],
        "cells": [
            [0.0, 0.0],
            [bias_strict, 0.0],
            [bias_strict, bias_alt],
        ],
        "bias_strict": bias_strict,
        "bias_alternative": bias_alt,
    }


# -- random members of the class (for property sweeps) -------------------------


def _zero_sum_basis(n: int) -> np.ndarray:
    """Fixed orthonormal n x (n-1) basis with zero column sums."""
    basis = np.zeros((n, n - 1))
    for k in range(1, n):
        col = np.zeros(n)
        col[:k] = 1.0
        col[k] = -float(k)
        basis[:, k - 1] = col / np.sqrt(k * (k + 1.0))
    return basis


def random_zero_row_sum_psd(
    n: int,
    seed: int,
    diag_value: float,
    max_attempts: int = 50,
    max_iters: int = 500,
    tol: float = 1e-13,
) -> np.ndarray:
    """Random symmetric psd matrix with zero row sums and a constant diagonal.

    Gram construction on the zero-sum subspace, then alternating symmetric
    diagonal scaling and re-projection onto zero row sums until both hold to
    within ``tol``; non-converging attempts are rejected and retried on a
    fresh substream.
    """
    if n < 2:
        raise ValueError("order must be at least 2")
    target = float(diag_value)
    if target <= 0:
        raise ValueError("diagonal target must be positive")
    basis = _zero_sum_basis(n)
    for attempt in range(max_attempts):
        rng = np.random.Generator(
            np.random.Philox(np.random.SeedSequence(entropy=seed, spawn_key=(attempt,)))
        )
        gram = rng.standard_normal((n - 1, n - 1))
        s = basis @ (gram @ gram.T) @ basis.T
        for _ in range(max_iters):
            d = np.diagonal(s).copy()
            if np.any(d <= 0.0):
                break
            scale = np.sqrt(target / d)
            s = s * np.outer(scale, scale)
            row_means = s.mean(axis=1, keepdims=True)
            s = s - row_means - row_means.T + s.mean()
            if (
                float(np.max(np.abs(np.diagonal(s) - target))) <= tol
                and float(np.max(np.abs(s.sum(axis=1)))) <= tol
            ):
                s = (s + s.T) / 2.0
                np.fill_diagonal(s, target)
                return s
    raise RuntimeError(
        f"no zero-row-sum psd matrix of order {n} converged after {max_attempts} attempts"
    )


def random_q(n: int, seed: int) -> QMatrix:
    """Random member of the decomposition class, for property sweeps."""
    matrix = random_zero_row_sum_psd(n, seed, 1.0 / (n * n))
    return QMatrix(matrix, name=f"random-{seed}")
