"""Estimators, masking, cross moments, variance and covariance assemblies."""

from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest

import randinf as ri
from randinf.estimation import (
    CustomLUE,
    ObservedOutcomes,
    UnobservedAccessError,
    cross_moments,
    cross_moments_via_support,
    expected_mean_product,
    lue_mean_from_observed,
    validate_lue,
)

from conftest import mechanism_grid, random_table, rel_err, two_arm_table_5_3, units_named


class TestObservedOutcomes:
    def test_traps_unobserved_cells(self, rng):
        table = random_table(rng, 4, ("0", "1"))
        part = ri.Partition(table.units, ("0", "0", "1", "1"))
        obs = ObservedOutcomes.from_table(table, part)
        assert obs.value("u1", "0") == table.outcome("u1", "0")
        with pytest.raises(UnobservedAccessError):
            obs.value("u1", "1")

    def test_rejects_values_for_unknown_units(self):
        part = ri.Partition(("u1", "u2"), ("0", "1"))
        with pytest.raises(ValueError, match="unknown units"):
            ObservedOutcomes(part, {"u1": 1.0, "u2": 2.0, "u9": 3.0})

    def test_estimator_paths_stay_on_observed_cells(self, rng):
        # estimators route every read through the trapping view, which raises
        # on any unobserved cell; clean runs prove they stay on observed data
        table = random_table(rng, 8, ("0", "1"), stratum_sizes=(4, 4))
        mech = ri.Stratified.from_table(table, {"1": {"0": 2, "1": 2}, "2": {"0": 2, "1": 2}})
        c = ri.Contrast({"0": -1.0, "1": 1.0})
        q = ri.q_strat((4, 4))
        for seed in range(5):
            part = mech.sample(seed)
            ri.ht_contrast_estimate(table, part, mech, c)
            ri.v_q_hat(table, part, mech, ri.HT, c, q)


class TestHTMeanEstimate:
    def test_equal_weight_example(self):
        # CR with r(z)=2 out of N=4: weights are 1/(N pi) = 1/2 each
        table = ri.PotentialOutcomesTable(
            units_named(4), ("0", "1"), [[9, 4], [9, 6], [1, 9], [2, 9]]
        )
        mech = ri.CompletelyRandomized(table.units, {"0": 2, "1": 2})
        part = ri.Partition(table.units, ("1", "1", "0", "0"))
        assert ri.ht_mean_estimate(table, part, mech, "1") == pytest.approx(5.0)

    def test_constant_column_reproduced_for_every_partition(self):
        table = ri.PotentialOutcomesTable(
            units_named(4), ("0", "1"), [[3.5, 1], [3.5, 2], [3.5, 3], [3.5, 4]]
        )
        mech = ri.CompletelyRandomized(table.units, {"0": 2, "1": 2})
        for part, _ in mech.enumerate_support():
            assert ri.ht_mean_estimate(table, part, mech, "0") == pytest.approx(3.5)

    def test_stratified_reduces_to_weighted_stratum_means(self, rng):
        sizes = (4, 3)
        table = random_table(rng, 7, ("0", "1"), stratum_sizes=sizes)
        mech = ri.Stratified.from_table(table, {"1": {"0": 2, "1": 2}, "2": {"0": 2, "1": 1}})
        n = table.n_units
        for seed in range(6):
            part = mech.sample(seed)
            for z in mech.treatments:
                direct = ri.ht_mean_estimate(table, part, mech, z)
                weighted = 0.0
                for h, us in mech.strata.items():
                    sample = [table.outcome(u, z) for u in part.group(z) if u in set(us)]
                    weighted += len(us) / n * float(np.mean(sample))
                assert rel_err(direct, weighted) < 1e-12


class TestContrastEstimate:
    def test_examples(self):
        c = ri.Contrast({"0": -1.0, "1": 1.0})
        assert ri.contrast_estimate(c, {"0": 3.0, "1": 5.0}) == pytest.approx(2.0)
        c3 = ri.Contrast({"1": 1.0, "2": -2.0, "3": 1.0})
        assert ri.contrast_estimate(c3, {"1": 1.0, "2": 2.0, "3": 3.0}) == pytest.approx(0.0)

    def test_missing_mean_rejected(self):
        c = ri.Contrast({"0": -1.0, "1": 1.0})
        with pytest.raises(ValueError, match="no mean estimate"):
            ri.contrast_estimate(c, {"0": 3.0})


class TestCrossMoments:
    def test_ht_stratified_closed_forms(self):
        # worked coefficient values for the stratified Horvitz-Thompson estimator
        sizes = (3, 3)
        rng = np.random.default_rng(5)
        table = random_table(rng, 6, ("0", "1"), stratum_sizes=sizes)
        mech = ri.Stratified.from_table(table, {"1": {"0": 2, "1": 1}, "2": {"0": 1, "1": 2}})
        cm = cross_moments(mech, ri.HT)
        n = 6
        assert np.all(cm.a == 0.0) and np.all(cm.a1 == 0.0) and np.all(cm.a2 == 0.0)
        z0 = mech.treatments.index("0")
        # same stratum (units u1, u2 in stratum 1), same arm "0" with r=2, N_h=3:
        expected = 3 * (2 - 1) / (n**2 * (3 - 1) * 2)
        assert cm.b[0, 1, z0, z0] == pytest.approx(expected, rel=1e-14)
        # different strata: 1/N^2
        assert cm.b[0, 4, z0, z0] == pytest.approx(1 / n**2, rel=1e-14)
        # same stratum, different arms: N_h / (N^2 (N_h - 1))
        z1 = mech.treatments.index("1")
        assert cm.b[0, 1, z0, z1] == pytest.approx(3 / (n**2 * 2), rel=1e-14)
        # diagonal: 1 / (N^2 pi)
        assert cm.b[0, 0, z0, z0] == pytest.approx(1 / (n**2 * (2 / 3)), rel=1e-14)
        assert cm.b[0, 0, z0, z1] == 0.0

    def test_ht_closed_form_matches_support_route(self):
        mech = ri.Stratified(
            {"1": units_named(5)[:3], "2": units_named(5)[3:]},
            {"1": {"0": 2, "1": 1}, "2": {"0": 1, "1": 1}},
        )
        closed = cross_moments(mech, ri.HT)
        support = cross_moments_via_support(mech, ri.HT)
        assert np.allclose(closed.b, support.b, rtol=1e-12, atol=1e-15)
        assert np.allclose(support.a, 0.0, atol=1e-15)

    @pytest.mark.parametrize("table,mech,c", mechanism_grid())
    def test_lemma_coefficients_reproduce_mean_products(self, table, mech, c):
        support = mech.enumerate_support()
        for z in mech.treatments:
            for zs in mech.treatments:
                assembled = expected_mean_product(table, mech, ri.HT, z, zs)
                total = Fraction(0)
                for part, p in support:
                    obs = ObservedOutcomes.from_table(table, part)
                    total += p * Fraction(
                        lue_mean_from_observed(obs, mech, ri.HT, z)
                    ) * Fraction(lue_mean_from_observed(obs, mech, ri.HT, zs))
                assert rel_err(assembled, float(total)) < 1e-12


class TestMCoefficients:
    def test_squared_terms_nonnegative_and_match_closed_form(self, rng):
        from randinf.estimation import m_coefficients

        sizes = (3, 3)
        table = random_table(rng, 6, ("0", "1"), stratum_sizes=sizes)
        mech = ri.Stratified.from_table(table, {"1": {"0": 2, "1": 1}, "2": {"0": 1, "1": 2}})
        c = ri.Contrast({"0": -1.0, "1": 1.0})
        cm = cross_moments(mech, ri.HT)
        g = c.coefficients(mech.treatments)
        mc = m_coefficients(cm, g)
        assert np.all(mc.m_ii >= 0.0)
        n = mech.n_units
        for i, u in enumerate(mech.units):
            for zi, z in enumerate(mech.treatments):
                expected = g[zi] ** 2 / (n * n * mech.first_order(u, z))
                assert mc.m_ii[i, zi] == pytest.approx(expected, rel=1e-13)


class TestSamplingVariance:
    def test_worked_two_arm_value(self):
        table = two_arm_table_5_3()
        mech = ri.CompletelyRandomized(table.units, {"0": 2, "1": 2})
        c = ri.Contrast({"0": -1.0, "1": 1.0})
        assert rel_err(ri.sampling_variance(table, mech, ri.HT, c), 5.0 / 3.0) < 1e-14

    def test_constant_table_has_zero_variance(self):
        table = ri.PotentialOutcomesTable(units_named(4), ("0", "1"), np.full((4, 2), 2.5))
        mech = ri.CompletelyRandomized(table.units, {"0": 2, "1": 2})
        c = ri.Contrast({"0": -1.0, "1": 1.0})
        assert abs(ri.sampling_variance(table, mech, ri.HT, c)) < 1e-14

    def test_matches_stratified_closed_form(self, rng):
        from randinf.qframework import var_stratified_closed_form

        for _ in range(10):
            sizes = (int(rng.integers(4, 7)), int(rng.integers(4, 7)))
            table = random_table(rng, sum(sizes), ("0", "1"), stratum_sizes=sizes)
            r = {
                "1": {"0": 2, "1": sizes[0] - 2},
                "2": {"0": sizes[1] - 2, "1": 2},
            }
            mech = ri.Stratified.from_table(table, r)
            c = ri.Contrast({"0": -1.0, "1": 1.0})
            assembled = ri.sampling_variance(table, mech, ri.HT, c)
            closed = var_stratified_closed_form(table, mech, c)
            assert rel_err(assembled, closed) < 1e-12

    def test_alignment_guard(self, rng):
        table = random_table(rng, 4, ("0", "1"))
        mech = ri.CompletelyRandomized(tuple(reversed(table.units)), {"0": 2, "1": 2})
        with pytest.raises(ValueError, match="same units"):
            ri.sampling_variance(table, mech, ri.HT, ri.Contrast({"0": -1.0, "1": 1.0}))


class TestNeymanDecomposition:
    def test_worked_example(self):
        nd = ri.neyman_two_arm_variance(two_arm_table_5_3(), 2, 2)
        assert nd.s00 == pytest.approx(5.0 / 3.0)
        assert nd.s11 == pytest.approx(5.0 / 3.0)
        assert nd.s_tau_tau == 0.0
        assert nd.variance == pytest.approx(5.0 / 3.0)

    def test_identical_arms_drop_the_correction(self, rng):
        y0 = rng.standard_normal(5)
        table = ri.PotentialOutcomesTable(units_named(5), ("0", "1"), np.column_stack([y0, y0]))
        nd = ri.neyman_two_arm_variance(table, 3, 2)
        assert nd.s_tau_tau == 0.0
        assert nd.variance == pytest.approx(nd.s00 / 3 + nd.s11 / 2)

    def test_agrees_with_assembled_variance(self, rng):
        for _ in range(8):
            n = int(rng.integers(4, 9))
            r0 = int(rng.integers(2, n - 1))
            table = random_table(rng, n, ("0", "1"))
            mech = ri.CompletelyRandomized(table.units, {"0": r0, "1": n - r0})
            c = ri.Contrast({"0": -1.0, "1": 1.0})
            assembled = ri.sampling_variance(table, mech, ri.HT, c)
            assert rel_err(ri.neyman_two_arm_variance(table, r0, n - r0).variance, assembled) < 1e-10

    def test_arity_guard(self, rng):
        table = random_table(rng, 4, ("0", "1", "2"))
        with pytest.raises(ValueError, match="two-arm"):
            ri.neyman_two_arm_variance(table, 2, 2)


class TestSamplingCovariance:
    def test_variance_special_case(self, rng):
        table = random_table(rng, 6, ("0", "1", "2"))
        mech = ri.CompletelyRandomized(table.units, {"0": 2, "1": 2, "2": 2})
        c = ri.Contrast({"0": 1.0, "1": -2.0, "2": 1.0})
        var = ri.sampling_variance(table, mech, ri.HT, c)
        cov = ri.sampling_covariance(table, mech, ri.HT, c, c)
        assert rel_err(var, cov) < 1e-12
        # identical inputs through the same code path are bit-identical
        assert cov == ri.sampling_covariance(table, mech, ri.HT, c, ri.Contrast(dict(c.g)))

    def test_constant_table(self):
        table = ri.PotentialOutcomesTable(units_named(4), ("0", "1"), np.full((4, 2), 1.5))
        mech = ri.CompletelyRandomized(table.units, {"0": 2, "1": 2})
        c1 = ri.Contrast({"0": -1.0, "1": 1.0})
        c2 = ri.Contrast({"0": 2.0, "1": -2.0})
        assert abs(ri.sampling_covariance(table, mech, ri.HT, c1, c2)) < 1e-14

    def test_bilinearity(self, rng):
        table = random_table(rng, 6, ("0", "1", "2"))
        mech = ri.CompletelyRandomized(table.units, {"0": 2, "1": 2, "2": 2})
        c1 = ri.Contrast({"0": 1.0, "1": -1.0})
        c1b = ri.Contrast({"1": 1.0, "2": -1.0})
        c2 = ri.Contrast({"0": 1.0, "1": -2.0, "2": 1.0})
        alpha, beta = 0.7, -1.3
        mixed = ri.Contrast(
            {z: alpha * c1.coefficient(z) + beta * c1b.coefficient(z) for z in ("0", "1", "2")}
        )
        lhs = ri.sampling_covariance(table, mech, ri.HT, mixed, c2)
        rhs = alpha * ri.sampling_covariance(table, mech, ri.HT, c1, c2) + beta * (
            ri.sampling_covariance(table, mech, ri.HT, c1b, c2)
        )
        assert rel_err(lhs, rhs) < 1e-12


class TestCustomLUE:
    def _with_intercept(self, mech, scale=0.3):
        anchor = mech.units[0]

        def a_fn(part, z):
            return scale * ((part.arm_of(anchor) == z) - mech.first_order(anchor, z))

        return CustomLUE.from_functions(mech, a_fn=a_fn)

    def test_structural_unbiasedness(self):
        mech = ri.CompletelyRandomized(units_named(4), {"0": 2, "1": 2})
        assert validate_lue(mech, self._with_intercept(mech)) <= 1e-12
        assert validate_lue(mech, ri.HT) <= 1e-12

    def test_broken_lue_rejected(self):
        mech = ri.CompletelyRandomized(units_named(4), {"0": 2, "1": 2})
        bad = CustomLUE.from_functions(mech, b_fn=lambda part, z, u: 0.25 if u != "u1" else 0.5)
        with pytest.raises(ValueError, match="not a linear unbiased estimator"):
            validate_lue(mech, bad)

    def test_nontrivial_intercept_coefficients(self, rng):
        table = random_table(rng, 4, ("0", "1"))
        mech = ri.CompletelyRandomized(table.units, {"0": 2, "1": 2})
        lue = self._with_intercept(mech)
        cm = cross_moments(mech, lue)
        assert np.max(np.abs(cm.a)) > 0.0
        assert np.max(np.abs(cm.a1)) > 0.0
        c = ri.Contrast({"0": -1.0, "1": 1.0})
        assert ri.verify_unbiasedness(table, mech, lue, c) < 1e-12
        assert ri.verify_variance(table, mech, lue, c) < 1e-12

    def test_missing_coefficient_is_an_error(self):
        mech = ri.CompletelyRandomized(units_named(4), {"0": 2, "1": 2})
        lue = CustomLUE({}, {})
        part = mech.sample(1)
        with pytest.raises(ValueError, match="no intercept"):
            lue.a(mech, part, "0")
