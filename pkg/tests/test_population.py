"""Tables, contrasts, factorial construction, estimands, CSV ingestion."""

from __future__ import annotations

import numpy as np
import pytest

import randinf as ri
from randinf.population import treatment_combination_labels

from conftest import random_table, units_named


class TestTableInvariants:
    def test_minimum_shape(self):
        with pytest.raises(ValueError):
            ri.PotentialOutcomesTable(["u1"], ["0", "1"], [[1.0, 2.0]])
        with pytest.raises(ValueError):
            ri.PotentialOutcomesTable(["u1", "u2"], ["0"], [[1.0], [2.0]])

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            ri.PotentialOutcomesTable(["u1", "u2"], ["0", "1"], [[1.0, 2.0]])

    def test_full_population_required(self):
        with pytest.raises(ValueError, match="fully populated"):
            ri.PotentialOutcomesTable(["u1", "u2"], ["0", "1"], [[1.0, np.nan], [2.0, 3.0]])

    def test_duplicate_ids_rejected(self):
        with pytest.raises(ValueError):
            ri.PotentialOutcomesTable(["u1", "u1"], ["0", "1"], [[1, 2], [3, 4]])
        with pytest.raises(ValueError):
            ri.PotentialOutcomesTable(["u1", "u2"], ["0", "0"], [[1, 2], [3, 4]])

    def test_singleton_stratum_rejected(self):
        with pytest.raises(ValueError, match="at least 2"):
            ri.PotentialOutcomesTable(
                units_named(3),
                ["0", "1"],
                np.ones((3, 2)),
                stratum_of={"u1": "a", "u2": "a", "u3": "b"},
            )

    def test_noncontiguous_strata_rejected(self):
        with pytest.raises(ValueError, match="contiguous"):
            ri.PotentialOutcomesTable(
                units_named(4),
                ["0", "1"],
                np.ones((4, 2)),
                stratum_of={"u1": "a", "u2": "b", "u3": "a", "u4": "b"},
            )

    def test_unequal_wholeplots_rejected(self):
        with pytest.raises(ValueError, match="same size"):
            ri.PotentialOutcomesTable(
                units_named(5),
                ["0", "1"],
                np.ones((5, 2)),
                wholeplot_of={"u1": "a", "u2": "a", "u3": "a", "u4": "b", "u5": "b"},
            )

    def test_group_accessors(self, rng):
        table = random_table(rng, 6, ("0", "1"), stratum_sizes=(4, 2))
        assert table.stratum_sizes == [4, 2]
        assert table.stratum_labels == ["1", "2"]
        table = random_table(rng, 6, ("0", "1"), cluster_sizes=(2, 2, 2))
        assert [lab for lab, _ in table.cluster_groups()] == ["1", "2", "3"]

    def test_outcomes_read_only(self, rng):
        table = random_table(rng, 4, ("0", "1"))
        with pytest.raises(ValueError):
            table.y[0, 0] = 7.0


class TestContrast:
    def test_sum_zero_enforced(self):
        with pytest.raises(ValueError, match="sum to zero"):
            ri.Contrast({"0": 1.0, "1": 1.0})

    def test_all_zero_rejected(self):
        with pytest.raises(ValueError, match="not all be zero"):
            ri.Contrast({"0": 0.0, "1": 0.0})

    def test_unknown_treatment_rejected_on_use(self):
        c = ri.Contrast({"0": -1.0, "9": 1.0})
        with pytest.raises(ValueError, match="unknown treatments"):
            c.coefficients(("0", "1"))

    def test_coefficients_fill_missing_with_zero(self):
        c = ri.Contrast({"0": -1.0, "1": 1.0})
        assert np.allclose(c.coefficients(("0", "1", "2")), [-1.0, 1.0, 0.0])


class TestEstimands:
    def test_treatment_means_examples(self):
        table = ri.PotentialOutcomesTable(["u1", "u2"], ["a", "b"], [[2, 7], [4, 7]])
        means = ri.treatment_means(table)
        assert means["a"] == 3.0
        assert means["b"] == 7.0  # constant column
        table = ri.PotentialOutcomesTable(units_named(4), ["0", "1"], [[1, 0], [2, 0], [3, 0], [4, 0]])
        assert ri.treatment_means(table)["0"] == 2.5

    def test_unit_contrast_examples(self):
        table = ri.PotentialOutcomesTable(["u1", "u2"], ["0", "1"], [[2, 5], [2, 5]])
        tau = ri.unit_contrasts(table, ri.Contrast({"0": -1.0, "1": 1.0}))
        assert np.allclose(tau, [3.0, 3.0])
        table = ri.PotentialOutcomesTable(["u1", "u2"], ["1", "2", "3"], [[1, 2, 3], [1, 2, 3]])
        tau = ri.unit_contrasts(table, ri.Contrast({"1": 1.0, "2": -2.0, "3": 1.0}))
        assert np.allclose(tau, [0.0, 0.0])

    def test_population_contrast_examples(self):
        table = ri.PotentialOutcomesTable(["u1", "u2"], ["0", "1"], [[0, 1], [0, 5]])
        c = ri.Contrast({"0": -1.0, "1": 1.0})
        assert ri.population_contrast(table, c) == pytest.approx(3.0)

    def test_population_contrast_matches_mean_of_unit_contrasts(self, rng):
        for _ in range(25):
            nz = int(rng.integers(2, 5))
            n = int(rng.integers(2, 9))
            treatments = tuple(str(j) for j in range(nz))
            table = random_table(rng, n, treatments)
            g = rng.standard_normal(nz)
            g[-1] -= g.sum()
            c = ri.Contrast(dict(zip(treatments, g)))
            via_means = ri.population_contrast(table, c)
            via_units = float(np.mean(ri.unit_contrasts(table, c)))
            assert abs(via_means - via_units) <= 1e-12 * max(1.0, abs(via_means))


class TestFactorial:
    def test_two_by_two_main_effect(self):
        fs = ri.FactorialStructure((2, 2), (1, 0), ((-1.0, 1.0), (0.5, 0.5)))
        c = ri.factorial_contrast(fs)
        assert c.treatments == ("00", "01", "10", "11")
        assert np.allclose(c.coefficients(c.treatments), [-0.5, -0.5, 0.5, 0.5])

    def test_two_by_three_second_factor(self):
        fs = ri.FactorialStructure((2, 3), (0, 1), ((0.5, 0.5), (-1.0, 0.0, 1.0)))
        c = ri.factorial_contrast(fs)
        assert c.treatments == ("00", "01", "02", "10", "11", "12")
        assert np.allclose(c.coefficients(c.treatments), [-0.5, 0.0, 0.5, -0.5, 0.0, 0.5])

    def test_output_sums_to_zero(self, rng):
        for _ in range(20):
            k = int(rng.integers(1, 4))
            levels = tuple(int(rng.integers(2, 4)) for _ in range(k))
            effect = tuple(int(b) for b in rng.integers(0, 2, size=k))
            if not any(effect):
                effect = (1,) + effect[1:]
            c = ri.factorial_contrast(ri.FactorialStructure(levels, effect))
            g = c.coefficients(c.treatments)
            assert abs(g.sum()) < 1e-12
            assert np.any(g != 0.0)

    def test_no_effect_selected_rejected(self):
        with pytest.raises(ValueError, match="no factorial effect"):
            ri.FactorialStructure((2, 2), (0, 0))

    def test_vector_constraints(self):
        with pytest.raises(ValueError, match="sum to zero"):
            ri.FactorialStructure((2,), (1,), ((1.0, 1.0),))
        with pytest.raises(ValueError, match="constant"):
            ri.FactorialStructure((2, 2), (1, 0), ((-1.0, 1.0), (0.5, 0.25)))
        with pytest.raises(ValueError, match="length"):
            ri.FactorialStructure((2, 3), (1, 0), ((-1.0, 1.0), (0.5, 0.5)))

    def test_distinct_effects_orthogonal(self):
        # different exponent vectors with shared per-factor vectors
        effects = [(1, 0), (0, 1), (1, 1)]
        contrasts = [
            ri.factorial_contrast(ri.FactorialStructure((2, 3), e)) for e in effects
        ]
        for a in range(len(effects)):
            for b in range(a + 1, len(effects)):
                ga = contrasts[a].coefficients(contrasts[a].treatments)
                gb = contrasts[b].coefficients(contrasts[b].treatments)
                assert abs(float(ga @ gb)) < 1e-12

    def test_positional_relabeling(self):
        fs = ri.FactorialStructure((2, 2), (1, 0))
        c = ri.factorial_contrast(fs, treatments=("a", "b", "c", "d"))
        assert c.treatments == ("a", "b", "c", "d")
        with pytest.raises(ValueError, match="expected 4"):
            ri.factorial_contrast(fs, treatments=("a", "b"))

    def test_label_order_is_lexicographic(self):
        assert treatment_combination_labels((2, 3)) == ["00", "01", "02", "10", "11", "12"]


class TestCsv:
    def test_round_trip(self, tmp_path, rng):
        table = random_table(rng, 6, ("0", "1", "2"), stratum_sizes=(3, 3))
        path = tmp_path / "pop.csv"
        ri.write_population_csv(table, path)
        back = ri.load_population_csv(path)
        assert back.units == table.units
        assert back.treatments == table.treatments
        assert np.array_equal(back.y, table.y)
        assert back.stratum_of == {u: table.stratum_of[u] for u in table.units}

    def test_header_required(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("u1,1.0,2.0\nu2,2.0,3.0\n")
        with pytest.raises(ValueError):
            ri.load_population_csv(path)

    def test_non_numeric_outcome(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("unit,0,1\nu1,1.0,x\nu2,2.0,3.0\n")
        with pytest.raises(ValueError, match="line 2"):
            ri.load_population_csv(path)

    def test_labels_parsed(self, tmp_path):
        path = tmp_path / "pop.csv"
        path.write_text(
            "unit,stratum,cluster,0,1\n"
            "u1,a,x,1.0,2.0\nu2,a,x,2.0,3.0\nu3,b,y,3.0,4.0\nu4,b,y,4.0,5.0\n"
        )
        table = ri.load_population_csv(path)
        assert table.stratum_sizes == [2, 2]
        assert table.cluster_of["u3"] == "y"
        assert table.treatments == ("0", "1")
