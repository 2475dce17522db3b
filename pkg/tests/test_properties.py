import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from src.services.bound import (
    PerturbationSpec,
    assemble_bound,
    compute_bound,
    deformation_matrix,
    lemma1_invertible,
    sampled_C,
)
from src.services.homotopy import verify_invariance
from src.services.ideal import mu, mu_recursive
from src.services.poly import Box, MultiPoly, PolySystem
from src.services.rootfind import find_roots

coefficient = st.floats(min_value=-0.5, max_value=0.5, allow_nan=False, allow_infinity=False)
diagonal = st.floats(min_value=1.0, max_value=2.0, allow_nan=False, allow_infinity=False)


def quadric(a: float, b: float, c: float, d: float) -> MultiPoly:
    return MultiPoly(2, {(2, 0): a, (1, 1): c, (0, 2): b, (0, 0): d})


@given(n=st.integers(min_value=1, max_value=6), k=st.integers(min_value=0, max_value=12))
def test_mu_recurrence(n, k):
    assert mu_recursive(n, k) == mu(n, k)


@given(
    size=st.integers(min_value=1, max_value=8),
    scale=st.floats(min_value=0.0, max_value=0.999),
    seed=st.integers(min_value=0, max_value=2 ** 32 - 1),
)
def test_small_entries_keep_identity_invertible(size, scale, seed):
    bound = scale / size ** 2
    A = np.random.default_rng(seed).uniform(-bound, bound, size=(size, size))
    check = lemma1_invertible(A)
    assert check
    assert check.decided_by == "hypothesis"
    assert np.linalg.det(np.eye(size) + A) > 0


@given(
    norm=st.floats(min_value=1e-3, max_value=1e3),
    C=st.floats(min_value=1e-3, max_value=1e3),
    m=st.integers(min_value=1, max_value=20),
)
def test_bound_scales_inversely(norm, C, m):
    t = compute_bound(norm, C, m)
    assert t > 0
    assert np.isclose(t * norm * C * m ** 2, 1.0)


@given(
    a1=diagonal, b1=diagonal, c1=coefficient, d1=coefficient,
    a2=diagonal, b2=diagonal, c2=coefficient, d2=coefficient,
)
@settings(max_examples=30, deadline=None)
def test_random_convenient_systems_stay_invertible_below_bound(a1, b1, c1, d1, a2, b2, c2, d2):
    sys = PolySystem((quadric(a1, -b1, c1, d1 - 1.0), quadric(a2, b2, c2, d2 - 2.0)), ell=2)
    pert = PerturbationSpec.on_rows(MultiPoly(2, {(1, 2): 1.0}), [1, 2])
    K = Box.cube(2, 2.0)
    report, cert = assemble_bound(sys, pert, K)
    assert report.k == 1
    assert report.C_sampled <= report.C + 1e-9
    assert sampled_C(cert, K, report.k, report.k_prime) <= report.C + 1e-9
    tau = 0.9 * report.t_star
    for point in K.sample(20, np.random.default_rng(0)):
        assert lemma1_invertible(tau * deformation_matrix(cert, pert, point))


@given(
    a1=diagonal, b1=diagonal, c1=coefficient, d1=coefficient,
    a2=diagonal, b2=diagonal, c2=coefficient, d2=coefficient,
)
@settings(max_examples=100, deadline=None)
@pytest.mark.slow
def test_random_convenient_systems_keep_root_count_below_bound(a1, b1, c1, d1, a2, b2, c2, d2):
    sys = PolySystem((quadric(a1, -b1, c1, d1 - 1.0), quadric(a2, b2, c2, d2 - 2.0)), ell=2)
    pert = PerturbationSpec.on_rows(MultiPoly(2, {(1, 2): 1.0}), [1, 2])
    K = Box.cube(2, 2.0)
    # skip near-tangent intersections
    assume(all(abs(r.jf_value) > 0.05 for r in find_roots(sys, K)))
    report, _ = assemble_bound(sys, pert, K)
    t = 0.9 * report.t_star
    invariance = verify_invariance(sys, pert, t, K, t_star=report.t_star)
    assert invariance.counts_equal
    assert not invariance.crashes
    assert invariance.below_bound
