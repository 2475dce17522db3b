import math
import unittest

import numpy as np

from src.services.exceptions import DimensionMismatch
from src.services.homotopy import match_points
from src.services.poly import Box, MultiPoly, PolySystem
from src.services.rootfind import (
    check_group_invariance,
    classify_q_jf,
    finite_difference_det,
    find_roots,
    jacobian_det,
    min_pairwise_distance,
    singularity_ratio,
)
from tests.conftest import expected_points, load_fixture

KEARFOTT_ROOTS = [
    (-1.22474487139159, -0.70710678118655),
    (-1.22474487139159, 0.70710678118655),
    (1.22474487139159, -0.70710678118655),
    (1.22474487139159, 0.70710678118655),
]


def x(i: int, n: int = 2) -> MultiPoly:
    return MultiPoly.variable(n, i)


def nearest(points: np.ndarray, target) -> float:
    return float(np.min(np.linalg.norm(points - np.asarray(target), axis=1)))


class TestJacobian(unittest.TestCase):

    def setUp(self) -> None:
        self.sys = PolySystem((x(1) ** 2 - x(2) ** 2 - 1, x(1) ** 2 + x(2) ** 2 - 2))

    def test_closed_form_at_root(self):
        root = (math.sqrt(1.5), math.sqrt(0.5))
        self.assertAlmostEqual(jacobian_det(self.sys, root), 8 * math.sqrt(0.75), places=12)

    def test_finite_difference_agrees(self):
        point = (0.3, -1.7)
        self.assertAlmostEqual(finite_difference_det(self.sys, point), jacobian_det(self.sys, point), places=6)

    def test_dimension_mismatch(self):
        with self.assertRaises(DimensionMismatch):
            jacobian_det(self.sys, (1.0, 2.0, 3.0))

    def test_singularity_ratio_is_scaled(self):
        J = np.array([[2.0, 0.0], [4.0, 0.0]])
        self.assertEqual(singularity_ratio(J), 0.0)
        self.assertEqual(singularity_ratio(np.eye(2)), 1.0)
        stacked = singularity_ratio(np.stack([np.eye(2), 3 * np.eye(2)]))
        self.assertEqual(stacked.shape, (2,))
        self.assertAlmostEqual(stacked[1], 1.0)


class TestFindRoots(unittest.TestCase):

    def test_kearfott_four_simple_roots(self):
        bundle = load_fixture("kearfott")
        roots = find_roots(bundle.system, bundle.resolve_box(), seed=0)
        self.assertEqual(len(roots), 4)
        self.assertEqual(len(roots.simple), 4)
        points = roots.points()
        for expected in KEARFOTT_ROOTS:
            self.assertLess(nearest(points, expected), 1e-8)
        for r in roots:
            self.assertLessEqual(r.residual, 1e-10)
            self.assertGreater(abs(r.jf_value), 1.0)

    def test_deterministic_for_seed(self):
        bundle = load_fixture("kearfott")
        a = find_roots(bundle.system, bundle.resolve_box(), seed=5)
        b = find_roots(bundle.system, bundle.resolve_box(), seed=5)
        self.assertEqual(a.points().tolist(), b.points().tolist())
        self.assertEqual(a.seed, 5)

    def test_ellipsoid_sixteen_roots(self):
        bundle = load_fixture("ellipsoid3d")
        roots = find_roots(bundle.system, bundle.resolve_box())
        self.assertEqual(len(roots), 16)
        self.assertFalse(roots.multiple)
        same, worst = match_points(roots.points(), expected_points("ellipsoid3d_roots")["before"])
        self.assertTrue(same)
        self.assertLess(worst, 1e-8)
        self.assertTrue(check_group_invariance(roots, bundle.generators))

    def test_double_roots_are_refined(self):
        bundle = load_fixture("mult2d")
        roots = find_roots(bundle.system, bundle.resolve_box())
        self.assertEqual(len(roots), 2)
        self.assertEqual(len(roots.multiple), 2)
        points = roots.points()
        self.assertLess(nearest(points, (1.0, 0.0)), 1e-6)
        self.assertLess(nearest(points, (-1.0, 0.0)), 1e-6)

    def test_box_without_roots(self):
        sys = PolySystem((x(1) ** 2 + x(2) ** 2 - 1, x(1) - x(2)))
        roots = find_roots(sys, Box((2.0, 2.0), (3.0, 3.0)))
        self.assertEqual(len(roots), 0)
        self.assertEqual(roots.points().shape, (0, 2))

    def test_box_dimension_checked(self):
        bundle = load_fixture("kearfott")
        with self.assertRaises(DimensionMismatch):
            find_roots(bundle.system, Box.cube(3, 2.0))

    def test_to_rows(self):
        bundle = load_fixture("kearfott")
        rows = find_roots(bundle.system, bundle.resolve_box()).to_rows(["a", "b"])
        self.assertEqual(len(rows), 4)
        self.assertEqual(set(rows[0]), {"a", "b", "residual", "jf", "kind", "multiplicity"})
        self.assertTrue(all(row["kind"] == "simple" for row in rows))


class TestClassify(unittest.TestCase):

    def test_kearfott_q_jf_empty(self):
        bundle = load_fixture("kearfott")
        roots = find_roots(bundle.system, bundle.resolve_box())
        partition = classify_q_jf(bundle.system, roots)
        self.assertTrue(partition.q_jf_empty)
        self.assertEqual(len(partition.simple), 4)

    def test_double_roots_are_in_q_jf(self):
        bundle = load_fixture("mult2d")
        roots = find_roots(bundle.system, bundle.resolve_box())
        partition = classify_q_jf(bundle.system, roots)
        self.assertFalse(partition.q_jf_empty)
        self.assertEqual(len(partition.multiple), 2)


class TestHelpers(unittest.TestCase):

    def test_group_invariance_detects_missing_image(self):
        points = [(1.0, 2.0), (-1.0, 2.0)]
        self.assertTrue(check_group_invariance(points, [(-1, 1)]))
        self.assertFalse(check_group_invariance(points, [(1, -1)]))
        self.assertTrue(check_group_invariance([], [(1, -1)]))

    def test_group_generator_width_checked(self):
        with self.assertRaises(DimensionMismatch):
            check_group_invariance([(1.0, 2.0)], [(1, 1, 1)])

    def test_min_pairwise_distance(self):
        self.assertEqual(min_pairwise_distance(np.array([[0.0, 0.0]])), math.inf)
        self.assertAlmostEqual(min_pairwise_distance(np.array([[0.0, 0.0], [3.0, 4.0], [0.0, 1.0]])), 1.0)


if __name__ == '__main__':
    unittest.main()
