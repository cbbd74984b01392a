import math

import numpy as np
import pytest
import scipy.integrate as sint
from hypothesis import given, strategies as st

from hartreelab import cutoff as C


@pytest.fixture(scope="module")
def prof():
    return C.make_profile()


def test_rho_is_normalized_bump(prof):
    total, _ = sint.quad(lambda x: float(prof.rho(x)), 1, 3)
    assert math.isclose(total, 1.0, rel_tol=1e-14)
    assert prof.rho(0.5) == 0 and prof.rho(3.5) == 0
    assert math.isclose(float(prof.rho(2.0)), 35 / 32)


def test_psi_pieces(prof):
    x = np.linspace(0, 1, 501)
    assert np.max(np.abs(prof.psi(x) - x)) <= 1e-14
    y = np.linspace(3, 100, 501)
    assert np.max(np.abs(prof.psi(y) - 2.0)) <= 1e-14


def test_psi_second_derivative_is_minus_rho(prof):
    x = np.linspace(0, 5, 5001)
    assert np.max(np.abs(prof.psi_deriv(x, 2) + prof.rho(x))) <= 1e-14


def test_psi_is_smooth_at_breakpoints(prof):
    # psi is C^4 at 1 and 3 since rho vanishes to third order there
    for b in (1.0, 3.0):
        for m in (1, 2, 3, 4):
            lo, hi = prof.psi_deriv(b - 1e-9, m), prof.psi_deriv(b + 1e-9, m)
            assert abs(lo - hi) < 1e-6


def test_psi_monotone_concave(prof):
    x = np.linspace(0, 4, 4001)
    assert np.all(prof.psi_deriv(x, 1) >= -1e-15)
    assert np.all(prof.psi_deriv(x, 2) <= 1e-15)


def test_derivative_order_range(prof):
    with pytest.raises(ValueError):
        prof.psi_deriv(1.0, 5)


@given(st.floats(0.01, 1e3), st.floats(0.0, 100.0))
def test_F_R_in_unit_interval(R, r):
    prof = C.make_profile()
    v = float(C.F_R(prof, r, R))
    assert -1e-15 <= v <= 1 + 1e-15


def test_F_R_monotone_and_rejects_nonpositive_R(prof):
    F = C.F_R(prof, np.linspace(0, 20, 4001), 10.0)
    assert np.all(np.diff(F) >= 0)
    with pytest.raises(ValueError):
        C.F_R(prof, 1.0, 0.0)


@given(st.floats(0.5, 50.0), st.lists(st.floats(-6, 6), min_size=3, max_size=3))
def test_psi_R_derivatives_against_finite_differences(R, x):
    prof = C.make_profile()
    x = np.array(x)
    D = C.psi_R_derivs(prof, x, R)
    h = 1e-5
    fd = np.array([(C.psi_R_derivs(prof, x + h * e, R).value - C.psi_R_derivs(prof, x - h * e, R).value)
                   / (2 * h) for e in np.eye(3)])
    assert np.allclose(D.gradient, fd, atol=1e-6 * max(1.0, R))
    Hs = C.psi_R_hessian(prof, x, R)
    assert math.isclose(np.trace(Hs), float(D.laplacian), abs_tol=1e-12)


def test_bilaplacian_against_finite_differences(prof):
    R = 4.0
    d = 3
    rr = np.linspace(0.25, 3.9, 20)   # keeps the stencils off s = 1 and s = 3
    h = 1e-3

    def lap(r):
        x = np.zeros((r.size, d))
        x[:, 0] = r
        return C.psi_R_derivs(prof, x, R).laplacian

    # radial Laplacian of the radial function lap(r): f'' + (d-1) f'/r
    fd = (lap(rr + h) - 2 * lap(rr) + lap(rr - h)) / h**2 + (d - 1) / rr * (lap(rr + h) - lap(rr - h)) / (2 * h)
    x = np.zeros((rr.size, d))
    x[:, 0] = rr
    assert np.allclose(C.psi_R_derivs(prof, x, R).bilaplacian, fd, rtol=1e-4, atol=1e-6)


@pytest.mark.parametrize("R", [1.0, 10.0, 100.0])
def test_pair_bound(prof, R):
    res = C.lemma18_check(prof, R, 10_000, 3, 0)
    assert res.violations == 0
    assert math.isfinite(res.max_ratio) and res.max_ratio > 0


def test_pair_bound_is_seeded(prof):
    a = C.lemma18_check(prof, 10.0, 2000, 3, 7)
    b = C.lemma18_check(prof, 10.0, 2000, 3, 7)
    assert a == b


def test_a_vector_vanishes_inside_unit_ball(prof):
    # psi'(s) = 1 for s <= 1, so a(x, y) = 0 when both points are inside
    x = np.array([0.3, 0.1, 0.0])
    y = np.array([-0.2, 0.4, 0.1])
    assert np.allclose(C.a_vector(prof, x, y, 10.0), 0)
