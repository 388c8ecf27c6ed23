"""Exact brute-force verification over enumerated supports.

Expectations of any partition statistic are accumulated with exact rational
weights, so unbiasedness and variance identities can be checked to machine
precision.  Anything too large to enumerate is refused; Monte Carlo lives in
the simulation module, not here.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

from .assignment import AssignmentMechanism, DEFAULT_SUPPORT_CAP, Partition
from .estimation import (
    ObservedOutcomes,
    contrast_estimate,
    lue_mean_from_observed,
    sampling_covariance,
    sampling_variance,
)
from .population import Contrast, population_contrast
from .qframework import QMatrix, c_q, c_q_hat, v_q, v_q_hat


@dataclass(frozen=True)
class ExactMoment:
    """Expectation of a statistic over the full support."""

    value: float
    support_size: int
    weight_check: Fraction


def _relative(a: float, b: float) -> float:
    return abs(a - b) / max(1.0, abs(a), abs(b))


def _expect_fraction(
    mech: AssignmentMechanism,
    statistic: Callable[[Partition], float],
    cap: int = DEFAULT_SUPPORT_CAP,
) -> tuple[Fraction, int, Fraction]:
    total = Fraction(0)
    weight = Fraction(0)
    support = mech.enumerate_support(cap)
    for part, p in support:
        weight += p
        total += p * Fraction(statistic(part))
    return total, len(support), weight


def expectation(
    mech: AssignmentMechanism,
    statistic: Callable[[Partition], float],
    cap: int = DEFAULT_SUPPORT_CAP,
) -> ExactMoment:
    """Sum of p(T) * statistic(T) over the whole support, rational weights."""
    total, size, weight = _expect_fraction(mech, statistic, cap)
    return ExactMoment(value=float(total), support_size=size, weight_check=weight)


def _tau_hat_statistic(table, mech, lue, c: Contrast) -> Callable[[Partition], float]:
    def statistic(part: Partition) -> float:
        obs = ObservedOutcomes.from_table(table, part)
        means = {z: lue_mean_from_observed(obs, mech, lue, z) for z in mech.treatments}
        return contrast_estimate(c, means)

    return statistic


def verify_unbiasedness(table, mech, lue, c: Contrast, cap: int = DEFAULT_SUPPORT_CAP) -> float:
    """Relative residual between E[tau-hat] over the support and the estimand."""
    stat = _tau_hat_statistic(table, mech, lue, c)
    total, _, _ = _expect_fraction(mech, stat, cap)
    return _relative(float(total), population_contrast(table, c))


def verify_variance(table, mech, lue, c: Contrast, cap: int = DEFAULT_SUPPORT_CAP) -> float:
    """Relative residual between the coefficient-assembled sampling variance
    and the enumerated E[tau-hat^2] - E[tau-hat]^2."""
    stat = _tau_hat_statistic(table, mech, lue, c)
    first, _, _ = _expect_fraction(mech, stat, cap)
    second, _, _ = _expect_fraction(mech, lambda part: stat(part) ** 2, cap)
    enumerated = float(second - first * first)
    assembled = sampling_variance(table, mech, lue, c)
    return _relative(assembled, enumerated)


def verify_vq_estimator(
    table, mech, lue, c: Contrast, q: QMatrix, cap: int = DEFAULT_SUPPORT_CAP
) -> tuple[float, float]:
    """(residual of E[plug-in bound] against the bound, residual against the
    true variance).  The first should always vanish under the SAP condition;
    the second vanishes exactly when generalized additivity holds."""
    bound = v_q(table, mech, lue, c, q)
    var = sampling_variance(table, mech, lue, c)

    def stat(part: Partition) -> float:
        return v_q_hat(table, part, mech, lue, c, q)

    total, _, _ = _expect_fraction(mech, stat, cap)
    value = float(total)
    return _relative(value, bound), _relative(value, var)


@dataclass(frozen=True)
class CovarianceResiduals:
    """Residuals for the covariance-side identities."""

    covariance_vs_enumeration: float
    estimator_vs_bound: float
    estimator_vs_covariance: float


def verify_covariance(
    table, mech, lue, c1: Contrast, c2: Contrast, q: QMatrix, cap: int = DEFAULT_SUPPORT_CAP
) -> CovarianceResiduals:
    """Covariance analogues of the variance checks."""
    stat1 = _tau_hat_statistic(table, mech, lue, c1)
    stat2 = _tau_hat_statistic(table, mech, lue, c2)
    e1, _, _ = _expect_fraction(mech, stat1, cap)
    e2, _, _ = _expect_fraction(mech, stat2, cap)
    cross, _, _ = _expect_fraction(mech, lambda part: stat1(part) * stat2(part), cap)
    enumerated = float(cross - e1 * e2)
    assembled = sampling_covariance(table, mech, lue, c1, c2)
    bound = c_q(table, mech, lue, c1, c2, q)

    def stat_hat(part: Partition) -> float:
        return c_q_hat(table, part, mech, lue, c1, c2, q)

    total, _, _ = _expect_fraction(mech, stat_hat, cap)
    value = float(total)
    return CovarianceResiduals(
        covariance_vs_enumeration=_relative(assembled, enumerated),
        estimator_vs_bound=_relative(value, bound),
        estimator_vs_covariance=_relative(value, enumerated),
    )
