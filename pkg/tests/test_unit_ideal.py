import math
import unittest

from src.conf.config import config
from src.services.exceptions import DegreeMismatch, NotInIdeal
from src.services.ideal import (
    certify_ideal_power,
    chain_identity_residual,
    convenient_check,
    lattice_necessary_check,
    minimal_k,
    mu,
    mu_recursive,
    verify_certificate,
)
from src.services.poly import MultiPoly, PolySystem
from tests.conftest import load_fixture


def x(i: int, n: int = 2) -> MultiPoly:
    return MultiPoly.variable(n, i)


class TestMu(unittest.TestCase):

    def test_closed_form(self):
        self.assertEqual(mu(2, 1), 2)
        self.assertEqual(mu(3, 1), 3)
        self.assertEqual(mu(2, 9), 10)
        self.assertEqual(mu(3, 2), 6)
        self.assertEqual(mu(1, 7), 1)

    def test_recurrence_matches_closed_form(self):
        for n in range(1, 7):
            for k in range(0, 13):
                self.assertEqual(mu_recursive(n, k), mu(n, k), (n, k))

    def test_invalid_arguments(self):
        with self.assertRaises(ValueError):
            mu(0, 1)


class TestLattice(unittest.TestCase):

    def test_counterexample_has_index_three(self):
        f = x(1) ** 6 + x(1) ** 3 * x(2) ** 3 + x(2) ** 6
        report = lattice_necessary_check(f)
        self.assertEqual(report.index, 3)
        self.assertFalse(report.passed)
        self.assertEqual(report.difference_vectors, ((3, -3), (6, -6)))

    def test_coprime_differences_pass(self):
        report = lattice_necessary_check(x(1) ** 5 + x(1) ** 2 * x(2) ** 3 + x(2) ** 5)
        self.assertEqual(report.difference_vectors, ((3, -3), (5, -5)))
        self.assertEqual(report.index, 1)
        self.assertTrue(report.passed)

    def test_constant_term_ignored(self):
        a = lattice_necessary_check(x(1) ** 2 + x(2) ** 2 - 2)
        b = lattice_necessary_check(x(1) ** 2 + x(2) ** 2)
        self.assertEqual(a, b)
        self.assertEqual(a.index, 2)

    def test_single_top_term_has_no_lattice(self):
        report = lattice_necessary_check(x(1) ** 3 + x(2))
        self.assertIsNone(report.index)
        self.assertFalse(report.passed)


class TestConvenient(unittest.TestCase):

    def test_kearfott(self):
        self.assertTrue(convenient_check(x(1) ** 2 - x(2) ** 2 - 1))

    def test_mixed_only(self):
        self.assertFalse(convenient_check(x(1) * x(2) + x(1) ** 2))


class TestCertificate(unittest.TestCase):

    def setUp(self) -> None:
        self.kearfott = PolySystem((x(1) ** 2 - x(2) ** 2 - 1, x(1) ** 2 + x(2) ** 2 - 2), ell=2)

    def test_kearfott_linear_certificate(self):
        cert = certify_ideal_power(self.kearfott, 1)
        self.assertEqual(cert.k, 1)
        self.assertEqual(cert.mu, 2)
        self.assertEqual(cert.monomials, ((1, 0), (0, 1)))
        h_x1, h_x2 = cert.cofactors
        self.assertAlmostEqual(h_x1[0].coeff((0, 0)), 0.5, places=12)
        self.assertFalse(h_x1[1])
        self.assertAlmostEqual(h_x2[1].coeff((0, 0)), 0.5, places=12)
        self.assertLessEqual(cert.residual, 1e-12)
        self.assertEqual(cert.cofactor_degree, 0)

    def test_reexpansion_agrees(self):
        cert = certify_ideal_power(self.kearfott, 3)
        self.assertEqual(cert.mu, 4)
        for residual in verify_certificate(cert, self.kearfott):
            self.assertLessEqual(residual, config.CERT_TOL)

    def test_k_below_degree_rejected(self):
        quartic = PolySystem((x(1) ** 2 - 1, x(1) ** 4 + x(2) ** 4 - 1), ell=2)
        with self.assertRaises(DegreeMismatch):
            certify_ideal_power(quartic, 2)

    def test_counterexample_not_in_ideal_below_nine(self):
        sys = load_fixture("counter6").system
        with self.assertRaises(NotInIdeal) as ctx:
            certify_ideal_power(sys, 8)
        self.assertEqual(sum(ctx.exception.monomial), 8)
        self.assertGreater(ctx.exception.residual, config.CERT_TOL)

    def test_counterexample_minimal_power(self):
        sys = load_fixture("counter6").system
        self.assertEqual(minimal_k(sys), 9)
        cert = certify_ideal_power(sys, 9)
        self.assertEqual(cert.mu, 10)
        self.assertLessEqual(cert.residual, config.CERT_TOL)

    def test_not_in_ideal_without_pure_powers(self):
        sys = PolySystem((x(1), x(1) ** 2 * x(2) ** 2), ell=2)
        self.assertIsNone(minimal_k(sys, cap=6))

    def test_ellipsoid_certificate(self):
        bundle = load_fixture("ellipsoid3d")
        self.assertEqual(minimal_k(bundle.system), 1)
        cert = certify_ideal_power(bundle.system, 1)
        self.assertEqual(cert.mu, 3)
        row_x3 = cert.cofactors[2]
        self.assertAlmostEqual(row_x3[2].coeff((0, 0, 0)), -1 / 18, places=12)


class TestChainIdentity(unittest.TestCase):

    def test_example_substitution_at_unit_coefficients(self):
        f = x(1) ** 5 + x(1) ** 2 * x(2) ** 3 + x(2) ** 5
        h1 = (x(1) * x(2) ** 5 * 2 - x(1) ** 4 * x(2) ** 2 * 5) * 27
        h2 = (x(1) ** 6 * 9 - x(1) ** 4 * x(2) ** 2 * 15 + x(1) ** 2 * x(2) ** 4 * 25) * 25
        lam = 2 ** 2 * 3 ** 3 + 5 ** 5
        self.assertEqual(lam, 3233)
        self.assertLessEqual(chain_identity_residual(f, [h1, h2], lam, (2, 8)), 1e-9)

    def test_wrong_sign_is_detected(self):
        f = x(1) ** 5 + x(1) ** 2 * x(2) ** 3 + x(2) ** 5
        h1 = (x(1) * x(2) ** 5 * 2 - x(1) ** 4 * x(2) ** 2 * 5) * 27
        h2 = (x(1) ** 6 * 9 - x(1) ** 4 * x(2) ** 2 * 15 - x(1) ** 2 * x(2) ** 4 * 25) * 25
        self.assertGreater(chain_identity_residual(f, [h1, h2], 3233, (2, 8)), 0.1)

    def test_numeric_certificate_covers_same_monomial(self):
        f = x(1) ** 5 + x(1) ** 2 * x(2) ** 3 + x(2) ** 5
        sys = PolySystem((f, f * x(1) + x(2) ** 6), ell=1)
        cert = certify_ideal_power(sys, 10)
        self.assertIn((2, 8), cert.monomials)
        self.assertTrue(math.isfinite(cert.residual))


if __name__ == '__main__':
    unittest.main()
