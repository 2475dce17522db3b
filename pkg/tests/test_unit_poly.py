import math
import unittest

import numpy as np

from src.services.exceptions import DimensionMismatch, IndexOutOfRange
from src.services.poly import (
    Box,
    CompiledSystem,
    MultiPoly,
    PolySystem,
    coeff_bound_on_box,
    evaluate,
    monomials,
    partial,
    support,
    total_degree,
    weighted_norm,
)


def x(i: int, n: int = 2) -> MultiPoly:
    return MultiPoly.variable(n, i)


class TestMultiPoly(unittest.TestCase):

    def setUp(self) -> None:
        self.f1 = x(1) ** 2 - x(2) ** 2 - 1
        self.f2 = x(1) ** 2 + x(2) ** 2 - 2

    def test_evaluate_at_kearfott_root(self):
        root = (1.22474487139159, 0.70710678118655)
        self.assertAlmostEqual(evaluate(self.f1, root), 0.0, delta=1e-12)
        self.assertAlmostEqual(evaluate(self.f2, root), 0.0, delta=1e-12)

    def test_evaluate_constant_and_zero(self):
        self.assertEqual(MultiPoly.constant(3, 7.0).evaluate((1.0, -2.0, 5.0)), 7.0)
        self.assertEqual(MultiPoly.zero(2).evaluate((3.0, 4.0)), 0.0)

    def test_evaluate_dimension_mismatch(self):
        with self.assertRaises(DimensionMismatch):
            self.f1.evaluate((1.0, 2.0, 3.0))

    def test_partial(self):
        p = MultiPoly(2, {(3, 2): 1.0})
        self.assertEqual(partial(p, 1), MultiPoly(2, {(2, 2): 3.0}))
        self.assertEqual(partial(p, 2), MultiPoly(2, {(3, 1): 2.0}))
        self.assertFalse(partial(MultiPoly.constant(2, 5.0), 1))

    def test_partial_index_out_of_range(self):
        with self.assertRaises(IndexOutOfRange):
            partial(self.f1, 3)
        with self.assertRaises(IndexOutOfRange):
            partial(self.f1, 0)

    def test_weighted_norm(self):
        self.assertEqual(weighted_norm(x(1) * x(2) ** 2), 3.0)
        self.assertEqual(weighted_norm(MultiPoly(3, {(0, 2, 0): 1.0})), 2.0)
        self.assertEqual(weighted_norm(MultiPoly(2, {(2, 0): -2.0, (0, 1): 1.0})), 5.0)
        self.assertEqual(weighted_norm(MultiPoly.constant(2, 4.0)), 0.0)

    def test_coeff_bound_on_box(self):
        K = Box.cube(2, 2.0)
        self.assertEqual(coeff_bound_on_box(x(1) * x(2) ** 2, K), 8.0)
        self.assertEqual(coeff_bound_on_box(MultiPoly.constant(2, 0.5), K), 0.5)
        self.assertEqual(coeff_bound_on_box(x(1) - x(2), Box((-1.0, 0.0), (3.0, 0.5))), 3.5)

    def test_coeff_bound_dominates_samples(self):
        K = Box((-1.0, -0.5), (2.0, 1.5))
        points = K.sample(200, np.random.default_rng(1))
        bound = self.f1.coeff_bound_on_box(K)
        self.assertTrue(np.all(np.abs(self.f1.evaluate_many(points)) <= bound))

    def test_support_and_degree(self):
        self.assertEqual(support(self.f1), {(2, 0), (0, 2), (0, 0)})
        self.assertEqual(total_degree(self.f1), 2)
        self.assertIsNone(total_degree(MultiPoly.zero(2)))
        self.assertEqual(total_degree(MultiPoly.constant(2, 1.0)), 0)

    def test_arithmetic_cancels_terms(self):
        self.assertFalse(self.f1 - self.f1)
        self.assertEqual((self.f1 + self.f2), MultiPoly(2, {(2, 0): 2.0, (0, 0): -3.0}))
        self.assertEqual(len(MultiPoly(2, [((1, 0), 1.0), ((1, 0), -1.0)])), 0)

    def test_multiplication_and_power(self):
        p = (x(1) + x(2)) ** 2
        self.assertEqual(p, MultiPoly(2, {(2, 0): 1.0, (1, 1): 2.0, (0, 2): 1.0}))
        self.assertEqual(3 * x(1), x(1) * 3)
        self.assertEqual(x(1).shift((1, 2)), MultiPoly(2, {(2, 2): 1.0}))

    def test_canonical_grlex_order(self):
        p = MultiPoly(2, {(0, 0): 1.0, (0, 2): 1.0, (1, 1): 1.0, (2, 0): 1.0})
        self.assertEqual([e for e, _ in p.items()], [(2, 0), (1, 1), (0, 2), (0, 0)])

    def test_monomials(self):
        self.assertEqual(monomials(2, 2), [(2, 0), (1, 1), (0, 2)])
        self.assertEqual(len(monomials(3, 4)), math.comb(6, 2))
        self.assertEqual(monomials(3, 0), [(0, 0, 0)])

    def test_homogeneous_part(self):
        self.assertEqual(self.f1.homogeneous_part(2), x(1) ** 2 - x(2) ** 2)
        self.assertTrue(self.f1.homogeneous_part(2).is_homogeneous())
        self.assertFalse(self.f1.is_homogeneous())

    def test_substitute_last_and_embed(self):
        t = MultiPoly.variable(3, 3)
        family = x(1, 3) * t + t ** 2
        self.assertEqual(family.substitute_last(0.5), x(1) * 0.5 + 0.25)
        self.assertEqual(self.f1.embed(1).substitute_last(7.0), self.f1)

    def test_negative_exponent_rejected(self):
        with self.assertRaises(ValueError):
            MultiPoly(2, {(-1, 0): 1.0})

    def test_exponent_width_checked(self):
        with self.assertRaises(DimensionMismatch):
            MultiPoly(2, {(1, 0, 0): 1.0})


class TestBox(unittest.TestCase):

    def test_rejects_inverted_interval(self):
        with self.assertRaises(ValueError):
            Box((1.0,), (0.0,))

    def test_degenerate_box_is_allowed(self):
        K = Box((1.0, 2.0), (1.0, 2.0))
        self.assertTrue(K.contains((1.0, 2.0)))
        self.assertEqual(MultiPoly.variable(2, 1).coeff_bound_on_box(K), 1.0)

    def test_grid_and_containment(self):
        K = Box.cube(2, 2.0)
        grid = K.grid(4)
        self.assertEqual(grid.shape, (16, 2))
        self.assertTrue(np.all(K.contains_many(grid)))
        centers = K.grid(4, centers=True)
        self.assertTrue(np.all(np.abs(centers) < 2.0))
        self.assertEqual(K.radii, (2.0, 2.0))

    def test_around(self):
        K = Box.around((1.0, -1.0), 0.5)
        self.assertEqual(K.lo, (0.5, -1.5))
        self.assertEqual(K.hi, (1.5, -0.5))


class TestCompiledSystem(unittest.TestCase):

    def test_values_and_jacobian_match_sparse_evaluation(self):
        f1 = x(1) ** 2 - x(2) ** 2 - 1
        f2 = x(1) ** 4 + x(2) ** 2 - 1 + x(1) * x(2) ** 3
        system = CompiledSystem([f1, f2])
        points = np.array([[0.3, -1.2], [1.5, 0.25], [-0.7, 0.9]])
        values = system.values(points)
        jac = system.jacobian(points)
        for i, p in enumerate(points):
            self.assertAlmostEqual(values[i, 0], f1.evaluate(p), places=12)
            self.assertAlmostEqual(values[i, 1], f2.evaluate(p), places=12)
            for r, f in enumerate((f1, f2)):
                for c in range(2):
                    self.assertAlmostEqual(jac[i, r, c], f.partial(c + 1).evaluate(p), places=12)


class TestPolySystem(unittest.TestCase):

    def test_from_polys_sorts_degrees_and_tracks_ell(self):
        quartic = x(1) ** 4 + x(2) ** 2 - 1
        quadric = x(1) ** 2 - x(2) ** 2 - 1
        sys = PolySystem.from_polys([quartic, quadric], ell=1)
        self.assertEqual(sys.degrees, (2, 4))
        self.assertEqual(sys.ell, 2)
        self.assertEqual(sys.f_ell, quartic)

    def test_unsorted_degrees_rejected(self):
        with self.assertRaises(ValueError):
            PolySystem((x(1) ** 3, x(2)))

    def test_ell_out_of_range(self):
        with self.assertRaises(IndexOutOfRange):
            PolySystem((x(1), x(2)), ell=3)

    def test_dimension_mismatch(self):
        with self.assertRaises(DimensionMismatch):
            PolySystem((x(1), x(2), x(1) * x(2)))

    def test_empty_system(self):
        with self.assertRaises(ValueError):
            PolySystem(())

    def test_residual(self):
        sys = PolySystem((x(1) ** 2 - x(2) ** 2 - 1, x(1) ** 2 + x(2) ** 2 - 2))
        self.assertLess(sys.residual((math.sqrt(1.5), math.sqrt(0.5))), 1e-12)
        self.assertAlmostEqual(sys.residual((0.0, 0.0)), 2.0)


if __name__ == '__main__':
    unittest.main()
