import tempfile
import unittest
from pathlib import Path

import numpy as np
import pandas as pd
from numpy.testing import assert_allclose

from odormap.core import DistanceMatrix, ItemSet, LabelMismatchError, OdorMapError
from odormap.stats import (
    Alternative,
    comparison_grid,
    mantel,
    pair_table,
    significance_stars,
    value_histogram,
)


def random_distance(n, seed, tag="d", labels=None):
    rng = np.random.default_rng(seed)
    values = rng.uniform(0.0, 1.0, size=(n, n))
    items = ItemSet.of(labels or [f"item{i}" for i in range(n)])
    return DistanceMatrix.from_array(items, values, tag)


class TestMantel(unittest.TestCase):
    def test_identity(self):
        d = random_distance(10, 1)
        for alternative in ("greater", "two-sided"):
            res = mantel(d, d, 999, alternative, rng_seed=5)
            self.assertAlmostEqual(res.r, 1.0, places=12)
            self.assertEqual(res.p_value, 1 / 1000)
            self.assertEqual(res.stars, "***")

    def test_scale_and_affine_invariance(self):
        a = random_distance(9, 2, "a")
        b = random_distance(9, 3, "b")
        base = mantel(a, b, 99).r
        scaled = DistanceMatrix.from_array(b.items, 3.0 * b.values, "b")
        shifted = DistanceMatrix.from_array(b.items, 2.5 * b.values + 0.75, "b")
        self.assertAlmostEqual(mantel(a, scaled, 99).r, base, delta=1e-12)
        self.assertAlmostEqual(mantel(a, shifted, 99).r, base, delta=1e-12)
        self.assertAlmostEqual(mantel(a, DistanceMatrix.from_array(b.items, 3.0 * b.values, "z"), 99).r,
                               base, delta=1e-12)

    def test_argument_order_canonical(self):
        a = random_distance(8, 4, "cosine-items")
        b = random_distance(8, 5, "gpt-4o-mini")
        ab = mantel(a, b, 199, rng_seed=3)
        ba = mantel(b, a, 199, rng_seed=3)
        self.assertEqual(ab, ba)
        self.assertEqual((ab.tag_a, ab.tag_b), ("cosine-items", "gpt-4o-mini"))

    def test_argument_order_with_equal_tags(self):
        # files named d.csv in two directories both get the tag "d"
        a = random_distance(9, 12, "d")
        b = random_distance(9, 13, "d")
        for alternative in Alternative:
            with self.subTest(alternative=alternative):
                self.assertEqual(
                    mantel(a, b, 199, alternative, rng_seed=4),
                    mantel(b, a, 199, alternative, rng_seed=4),
                )

    def test_reproducible(self):
        a, b = random_distance(12, 6, "a"), random_distance(12, 7, "b")
        self.assertEqual(mantel(a, b, 499, rng_seed=11), mantel(a, b, 499, rng_seed=11))

    def test_p_floor_and_range(self):
        a, b = random_distance(7, 8, "a"), random_distance(7, 9, "b")
        for alternative in Alternative:
            res = mantel(a, b, 50, alternative)
            self.assertGreaterEqual(res.p_value, 1 / 51)
            self.assertLessEqual(res.p_value, 1.0)
            self.assertLessEqual(abs(res.r), 1.0 + 1e-12)

    def test_matches_pearson(self):
        a, b = random_distance(11, 10, "a"), random_distance(11, 12, "b")
        expected = np.corrcoef(a.triangle(), b.triangle())[0, 1]
        self.assertAlmostEqual(mantel(a, b, 9).r, expected, places=12)

    def test_calibration(self):
        significant = 0
        for trial in range(100):
            a = random_distance(12, 1000 + 2 * trial, "a")
            b = random_distance(12, 1001 + 2 * trial, "b")
            if mantel(a, b, 999, rng_seed=trial).p_value <= 0.05:
                significant += 1
        self.assertLessEqual(significant, 10)

    def test_label_mismatch(self):
        a = random_distance(4, 1, labels=["a", "b", "c", "d"])
        b = random_distance(4, 2, labels=["a", "b", "d", "c"])
        with self.assertRaises(LabelMismatchError):
            mantel(a, b)

    def test_constant_matrix(self):
        a = random_distance(5, 1, "a")
        flat = np.ones((5, 5))
        np.fill_diagonal(flat, 0.0)
        with self.assertRaises(OdorMapError):
            mantel(a, DistanceMatrix(a.items, flat, "b"))

    def test_preconditions(self):
        d = random_distance(2, 1)
        with self.assertRaises(OdorMapError):
            mantel(d, d)
        d = random_distance(4, 1)
        with self.assertRaises(OdorMapError):
            mantel(d, d, permutations=0)


class TestStars(unittest.TestCase):
    def test_bands(self):
        self.assertEqual(significance_stars(0.001), "***")
        self.assertEqual(significance_stars(0.005), "**")
        self.assertEqual(significance_stars(0.04), "*")
        self.assertEqual(significance_stars(0.05), "*")
        self.assertEqual(significance_stars(0.5), "ns")


class TestGrid(unittest.TestCase):
    def test_seven_matrices(self):
        matrices = [random_distance(6, s, f"m{s}") for s in range(7)]
        grid = comparison_grid(matrices, 99)
        self.assertEqual(len(grid.results), 21)
        frame = grid.to_frame()
        self.assertEqual(list(frame.columns), ["tag_a", "tag_b", "r", "p", "permutations", "stars"])
        r = grid.r_frame().to_numpy()
        assert_allclose(r, r.T)
        assert_allclose(np.diag(r), 1.0)
        self.assertTrue(np.isnan(grid.p_frame().to_numpy()[0, 0]))

    def test_cell_equals_standalone(self):
        matrices = [random_distance(6, s, f"m{s}") for s in range(3)]
        grid = comparison_grid(matrices, 99, rng_seed=4)
        self.assertEqual(grid.get(2, 0), mantel(matrices[0], matrices[2], 99, rng_seed=4))

    def test_identity_pair(self):
        m = random_distance(8, 3, "m")
        res = comparison_grid([m, m], 999).get(0, 1)
        self.assertAlmostEqual(res.r, 1.0, places=12)
        self.assertEqual(res.p_value, 0.001)

    def test_needs_two(self):
        with self.assertRaises(OdorMapError):
            comparison_grid([random_distance(4, 1)])

    def test_save_csv(self):
        grid = comparison_grid([random_distance(5, s, f"m{s}") for s in range(3)], 19)
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "grid.csv"
            grid.save_csv(path)
            frame = pd.read_csv(path)
        self.assertEqual(len(frame), 3)
        self.assertEqual(list(frame["tag_a"]), ["m0", "m0", "m1"])


class TestPairTable(unittest.TestCase):
    def test_rows(self):
        a = random_distance(5, 1, "cos")
        b = random_distance(5, 2, "gpt")
        table = pair_table(a, b)
        self.assertEqual(len(table), 10)
        self.assertEqual(list(table.columns), ["item_a", "item_b", "cos", "gpt"])
        first = table.iloc[0]
        self.assertEqual((first.item_a, first.item_b), ("item0", "item1"))
        self.assertEqual(first.cos, a.values[1, 0])

    def test_histogram(self):
        hist = value_histogram(np.array([0.0, 0.1, 0.5, 1.0]), bins=2)
        self.assertEqual(list(hist["count"]), [2, 2])
        self.assertEqual(hist["bin_left"].iloc[0], 0.0)
        self.assertEqual(hist["bin_right"].iloc[-1], 1.0)


if __name__ == "__main__":
    unittest.main()
