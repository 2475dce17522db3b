import unittest

import numpy as np
import pytest

from src.services.exceptions import DimensionMismatch, RankDeficient, SplitFailed
from src.services.poly import Box, MultiPoly, PolySystem
from src.services.rootfind import check_group_invariance
from src.services.splitter import (
    Deformation,
    apply_deformation,
    check_kov_conditions,
    count_split_roots,
    default_support,
    multiplicity_probe,
    sample_ball,
    search_deformation,
    split_multiple_roots,
)
from tests.conftest import load_fixture


def x(i: int, n: int = 2) -> MultiPoly:
    return MultiPoly.variable(n, i)


def nearest(points: np.ndarray, target) -> float:
    return float(np.min(np.linalg.norm(points - np.asarray(target), axis=1)))


def expand(*pattern: float) -> list[tuple[float, ...]]:
    """
    All sign combinations of the nonzero coordinates.
    """
    points = [()]
    for v in pattern:
        points = [p + (s * v,) for p in points for s in ((1.0, -1.0) if v else (1.0,))]
    return points


class TestDeformation(unittest.TestCase):

    def test_family_is_evaluated_at_magnitude(self):
        bundle = load_fixture("mult2d")
        H = bundle.deformation
        self.assertEqual(H.magnitude, 0.5)
        self.assertFalse(H.H[0])
        self.assertEqual(H.H[1], x(1) * 0.5 - 1.0)
        self.assertEqual(H.at(0.1).H[1], x(1) * 0.1 - 0.2)

    def test_linear(self):
        H = Deformation.linear([x(1), x(2) ** 2], 0.25)
        self.assertEqual(H.n, 2)
        self.assertEqual(H.H, (x(1) * 0.25, x(2) ** 2 * 0.25))

    def test_support_is_enforced(self):
        with self.assertRaises(ValueError):
            Deformation.linear([x(1), x(2) ** 2], 0.25, support_spec=default_support(2))

    def test_apply_deformation(self):
        sys = PolySystem((x(1) ** 2 - 1, x(1) * x(2)))
        deformed = apply_deformation(sys, [MultiPoly.zero(2), x(2)])
        self.assertEqual(deformed.polys, (x(1) ** 2 - 1, x(1) * x(2) + x(2)))
        with self.assertRaises(DimensionMismatch):
            apply_deformation(sys, [x(1)])


class TestSplit(unittest.TestCase):

    def test_two_dimensional_split(self):
        bundle = load_fixture("mult2d")
        report = split_multiple_roots(bundle.system, bundle.deformation, bundle.resolve_box())
        self.assertEqual(len(report.before.multiple), 2)
        self.assertEqual(len(report.after), 4)
        self.assertFalse(report.after.multiple)
        points = report.after.points()
        for expected in expand(1.07123233675477, 0.38410769233261) + expand(-1.20970135357686, 0.68071827127359):
            self.assertLess(nearest(points, expected), 1e-8)
        self.assertIsNone(report.conservation)
        self.assertFalse(report.strays)
        self.assertEqual(sorted(len(v) for v in report.clusters.values()), [2, 2])

    def test_smaller_magnitudes_converge_to_double_roots(self):
        bundle = load_fixture("mult2d")
        K = bundle.resolve_box()
        cases = {
            0.025: ((1.00412951827050, 0.09097301502177), (-1.01237171332486, 0.15778620326351)),
            0.0125: ((1.00207398824224, 0.06443817123186), (-1.00621769007449, 0.11168724107454)),
        }
        for t, (right, left) in cases.items():
            report = split_multiple_roots(bundle.system, bundle.deformation.at(t), K)
            points = report.after.points()
            self.assertEqual(len(points), 4)
            for expected in expand(*right) + expand(*left):
                self.assertLess(nearest(points, expected), 1e-8, (t, expected))

    def test_three_dimensional_split(self):
        bundle = load_fixture("mult3d")
        report = split_multiple_roots(bundle.system, bundle.deformation, bundle.resolve_box())
        self.assertEqual(len(report.before.simple), 8)
        self.assertEqual(len(report.before.multiple), 8)
        before = report.before.points()
        for expected in expand(0.25926718242254, 1.21300057180546, 1.75418919109753):
            self.assertLess(nearest(before, expected), 1e-8)
        self.assertEqual(len(report.after.simple), 32)
        after = report.after.points()
        for pattern in (
            (0.27142016486929, 1.20645760731621, 1.74883324771051),
            (0.68824720161168, 0.68824720161168, 1.37649440322337),
            (0.78897550317143, 0.32932116069209, 1.20907797224513),
            (0.44474589932680, 1.07278013064881, 1.64234961179579),
        ):
            for expected in expand(*pattern):
                self.assertLess(nearest(after, expected), 1e-8)
        self.assertFalse(report.strays)
        self.assertTrue(check_group_invariance(report.before, bundle.generators))
        self.assertTrue(check_group_invariance(report.after, bundle.generators))

    @pytest.mark.slow
    def test_three_dimensional_split_conserves_count(self):
        bundle = load_fixture("mult3d")
        report = split_multiple_roots(bundle.system, bundle.deformation, bundle.resolve_box(), refine=True)
        self.assertTrue(report.multiplicities_known)
        self.assertEqual(len(report.probes), 8)
        self.assertTrue(all(p.count == 3 for p in report.probes))
        self.assertEqual(report.expected, 8 * 1 + 8 * 3)
        self.assertEqual(len(report.after), 32)
        self.assertTrue(report.conservation)

    def test_refined_multiplicities_conserve_count(self):
        bundle = load_fixture("fold1d")
        report = split_multiple_roots(bundle.system, bundle.deformation, bundle.resolve_box(), refine=True)
        self.assertTrue(report.multiplicities_known)
        self.assertEqual(report.expected, 3)
        self.assertTrue(report.conservation)
        self.assertEqual(len(report.probes), 1)
        self.assertTrue(report.probes[0].stable)
        self.assertLess(nearest(report.after.points(), (1.0,)), 1e-10)

    def test_no_multiple_root(self):
        bundle = load_fixture("kearfott")
        H = Deformation.linear([x(1), x(2)], 0.01)
        with self.assertRaises(SplitFailed):
            split_multiple_roots(bundle.system, H, bundle.resolve_box())

    def test_deformation_that_keeps_the_multiple_root(self):
        bundle = load_fixture("fold1d")
        H = Deformation.linear([MultiPoly.variable(1, 1) ** 3], 0.5)
        with self.assertRaises(SplitFailed):
            split_multiple_roots(bundle.system, H, bundle.resolve_box())

    def test_search_deformation(self):
        bundle = load_fixture("mult2d")
        report = search_deformation(bundle.system, bundle.resolve_box(), seed=3)
        self.assertFalse(report.after.multiple)
        self.assertEqual(len(report.before.multiple), 2)
        self.assertEqual(report.deformation.support_spec, default_support(2))
        self.assertEqual(report.deformation.seed, 3)


class TestProbe(unittest.TestCase):

    def test_cubic_splits_into_three(self):
        sys = load_fixture("fold1d").system
        H = Deformation.linear([MultiPoly.variable(1, 1) * -1.0], 0.01)
        self.assertEqual(count_split_roots(sys, H, (0.0,)), 3)
        self.assertEqual(count_split_roots(sys, H, (0.0,), radius=0.05), 1)

    def test_cubic_probe(self):
        sys = load_fixture("fold1d").system
        probe = multiplicity_probe(sys, (0.0,))
        self.assertEqual(probe.count, 3)
        self.assertEqual(int(probe), 3)
        self.assertTrue(probe.stable)

    def test_double_root_probe(self):
        sys = load_fixture("mult2d").system
        self.assertEqual(multiplicity_probe(sys, (1.0, 0.0)).count, 2)

    def test_triple_root_multiplicity(self):
        sys = load_fixture("mult3d").system
        probe = multiplicity_probe(sys, (0.68824720161168, 0.68824720161168, 1.37649440322337))
        self.assertEqual(probe.count, 3)


class TestKov(unittest.TestCase):

    def test_small_perturbation_passes(self):
        bundle = load_fixture("kov")
        report = check_kov_conditions(bundle.system, bundle.target, bundle.ball_r, samples=2000)
        self.assertEqual(report.roots_in_ball, 1)
        self.assertIsNotNone(report.boundary_distance)
        self.assertLess(report.eps, 0.05)
        self.assertTrue(report.passed)
        self.assertEqual(report.samples, 2000)

    def test_large_shift_fails(self):
        bundle = load_fixture("kov")
        target = [bundle.system.polys[0] + 10.0, bundle.system.polys[1]]
        report = check_kov_conditions(bundle.system, target, 1.0, samples=2000)
        self.assertGreater(report.eps, 5.0)
        self.assertFalse(report.passed)

    def test_singular_jacobian(self):
        sys = PolySystem((x(1) + x(2), x(1) + x(2) - 1))
        with self.assertRaises(RankDeficient):
            check_kov_conditions(sys, sys.polys, 1.0, samples=100)

    def test_target_shape_checked(self):
        bundle = load_fixture("kov")
        with self.assertRaises(DimensionMismatch):
            check_kov_conditions(bundle.system, bundle.target[:1], 1.0, samples=10)

    def test_sample_ball_stays_inside(self):
        points = sample_ball(3, 0.5, 1000, np.random.default_rng(0))
        self.assertEqual(points.shape, (1000, 3))
        self.assertTrue(np.all(np.linalg.norm(points, axis=1) <= 0.5 + 1e-12))


if __name__ == '__main__':
    unittest.main()
