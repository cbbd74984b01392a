import math

import numpy as np
import pytest
import scipy.integrate as sint
import scipy.special as sp
from hypothesis import given, strategies as st

from hartreelab import potentials as P
from hartreelab import hierarchy as H
from hartreelab.grid import GridSpec
from hartreelab.potentials import GridKernel, Potential


def lorentz_table(c=5.0):
    r = np.linspace(0, 20, 401)
    return Potential.table(r, c / (1 + r**2))


def test_config_roundtrip():
    for V in (Potential.zero(), Potential.power(2.2, 1.5), lorentz_table()):
        W = Potential.from_config(V.to_config())
        assert W.family == V.family and W.a == V.a and W.c == V.c and W.table_r == V.table_r


@pytest.mark.parametrize("bad", [
    {"family": "cubic"}, {"family": "power", "a": -1.0}, {"family": "power", "a": 1.0, "c": 0.0}])
def test_bad_configs(bad):
    with pytest.raises(ValueError):
        Potential.from_config(bad)


def test_table_validation():
    with pytest.raises(ValueError):
        Potential.table([0.1, 0.2, 0.3, 0.4], [1, 1, 1, 1])
    with pytest.raises(ValueError):
        Potential.table([0, 1, 1, 2], [1, 1, 1, 1])


def test_power_singular_origin():
    with pytest.raises(P.SingularOriginError):
        Potential.power(2.0).radial(0.0)


def test_table_spline_matches_profile():
    V = lorentz_table()
    r = np.linspace(0, 19.9, 777)
    assert np.max(np.abs(V.radial(r) - 5 / (1 + r**2))) < 1e-4
    assert np.max(np.abs(V.radial_derivative(r) + 10 * r / (1 + r**2) ** 2)) < 1e-3


def test_gradient_matches_finite_difference():
    V = Potential.power(2.2)
    x = np.array([0.7, -0.3, 1.1])
    g = P.gradient(V, x)
    h = 1e-6
    fd = [(P.evaluate(V, x + h * e) - P.evaluate(V, x - h * e)) / (2 * h) for e in np.eye(3)]
    assert np.allclose(g, fd, rtol=1e-7)


@given(st.floats(0.1, 4.0), st.floats(0.1, 10.0), st.floats(0.05, 50.0))
def test_virial_defect_sign_follows_exponent(a, c, r):
    # V + x.grad V / 2 = c r^{-a} (1 - a/2)
    V = Potential.power(a, c)
    val = float(P.virial_defect(V, np.array([r, 0.0, 0.0])))
    assert math.isclose(val, c * r**-a * (1 - a / 2), rel_tol=1e-10, abs_tol=1e-13 * c * r**-a)


def test_sphere_areas():
    assert P.sphere_area(1) == 2.0
    assert math.isclose(P.sphere_area(2), 2 * math.pi)
    assert math.isclose(P.sphere_area(3), 4 * math.pi)


@pytest.mark.parametrize("a,d,region", [(2.2, 3, "inner"), (3.5, 3, "outer"), (1.5, 2, "inner"),
                                        (2.5, 2, "outer")])
def test_tail_quadrature_matches_closed_form(a, d, region):
    V = Potential.power(a, 1.3)
    for R in (1e2, 1e4):
        assert math.isclose(P.tail_l1(V, d, R, region), P.tail_l1_closed_form(V, d, R, region),
                            rel_tol=1e-9)


def test_divergent_tails_are_reported():
    with pytest.raises(P.NonIntegrableTailError):
        P.tail_l1(Potential.power(2.2), 3, 100.0, "outer")
    with pytest.raises(P.NonIntegrableTailError):
        P.tail_l1_closed_form(Potential.power(3.5), 3, 100.0, "inner")


def test_table_tail_against_direct_quadrature():
    V = lorentz_table()
    ref, _ = sint.quad(lambda r: 4 * math.pi * r**3 * 10 * r / (1 + r**2) ** 2, 0, 3.0)
    assert math.isclose(P.tail_l1(V, 3, 9.0, "inner"), ref, rel_tol=1e-3)


def test_sup_tail_power():
    V = Potential.power(2.2, 2.0)
    assert math.isclose(P.sup_tail(V, 10.0), 2.2 * 2.0 * 10.0**-2.2)


def test_hypotheses_power22():
    rep = P.check_hypotheses(Potential.power(2.2), 3, [1e2, 1e4, 1e6])
    assert rep.defect_ok
    assert rep.sup_tail_decays and rep.inner_decays
    # |x||grad V| ~ r^{-2.2} is not integrable at infinity in three dimensions
    assert rep.outer_decays is None and rep.rows[0].outer_ratio is None


def test_hypotheses_flag_subcritical_power():
    rep = P.check_hypotheses(Potential.power(1.0), 3, [1e2, 1e4])
    assert not rep.defect_ok


def test_hypotheses_zero_trivial():
    rep = P.check_hypotheses(Potential.zero(), 3, [1e2, 1e4])
    assert rep.defect_ok


def test_hypotheses_reject_bad_sequence():
    with pytest.raises(ValueError):
        P.check_hypotheses(Potential.power(2.2), 3, [1e4, 1e2])


@pytest.mark.parametrize("a", [1.0, 2.0, 2.2])
def test_spectral_kernel_gaussian_interaction(a):
    # rho = |phi_0|^2 for the unit Gaussian: x - y is a standard normal, so
    # int int rho rho |x-y|^{-a} = E|Z|^{-a} = 2^{-a/2} Gamma((3-a)/2) / Gamma(3/2)
    grid = GridSpec(3, 48, 16.0)
    ens = H.Ensemble.singleton(H.gaussian(grid))
    K = GridKernel(Potential.power(a), grid)
    exact = 2 ** (-a / 2) * sp.gamma((3 - a) / 2) / sp.gamma(1.5)
    assert abs(H.interaction_trace(ens, K) - exact) < 1e-10


def test_cell_average_kernel_is_an_approximation():
    grid = GridSpec(3, 32, 16.0)
    ens = H.Ensemble.singleton(H.gaussian(grid))
    K = GridKernel(Potential.power(2.0), grid, "cell_average")
    exact = 0.5 * sp.gamma(0.5) / sp.gamma(1.5)
    assert 0 < abs(H.interaction_trace(ens, K) - exact) < 0.2


def test_unknown_regularization():
    with pytest.raises(ValueError):
        GridKernel(Potential.power(2.0), GridSpec(1, 16, 4.0), "smooth")


def test_table_kernel_matches_free_space_convolution():
    grid = GridSpec(1, 256, 40.0)
    V = lorentz_table()
    rho = np.exp(-grid.radius_squared()) / math.sqrt(math.pi)
    W = GridKernel(V, grid).field(rho)
    x = grid.coords()[0]
    for i in (128, 140, 110):
        ref, _ = sint.quad(lambda y: float(V.radial(abs(x[i] - y))) * math.exp(-y * y) / math.sqrt(math.pi),
                           -10, 10, points=[x[i]], limit=200, epsabs=1e-13)
        assert abs(W[i] - ref) < 1e-6


def test_power2_dilation_multiplier():
    grid = GridSpec(3, 16, 8.0)
    K = GridKernel(Potential.power(2.0), grid)
    assert np.allclose(K.dilation_hat(), -2.0 * K.hat)
    assert K.dilation_hat() is K.dilation_hat()


def test_kernel_samples_are_even():
    grid = GridSpec(2, 16, 8.0)
    s = P.kernel_samples(Potential.power(1.0), grid)
    assert P.even_part_error(s) < 1e-14
