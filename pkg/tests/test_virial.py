import math

import numpy as np
import pytest
import scipy.integrate as sint
from hypothesis import given, strategies as st

from hartreelab import cutoff as C
from hartreelab import hierarchy as H
from hartreelab import virial as Vr
from hartreelab.grid import GridSpec
from hartreelab.potentials import GridKernel, Potential


@pytest.fixture(scope="module")
def grid3():
    return GridSpec(3, 48, 16.0)


@pytest.fixture(scope="module")
def prof():
    return C.make_profile()


@pytest.fixture(scope="module")
def mix(grid3):
    return H.Ensemble.mixture([(0.5, H.gaussian(grid3, 1.0)), (0.5, H.gaussian(grid3, 1.5))], radial=True)


@pytest.mark.parametrize("w", [0.8, 1.0, 1.5])
def test_variance_of_gaussian(grid3, w):
    ens = H.Ensemble.singleton(H.gaussian(grid3, w))
    assert math.isclose(Vr.variance(ens), 3 * w * w / 2, rel_tol=1e-10)


def test_variance_rate_of_chirp(grid3):
    # phi = g e^{i b |x|^2}: the current is 4 b |g|^2 x, so V1' = 8 b V1
    ens = H.Ensemble.singleton(H.gaussian(grid3, 1.0, chirp=0.1))
    assert math.isclose(Vr.variance_rate(ens), 0.8 * Vr.variance(ens), rel_tol=1e-8)


def test_free_virial_rhs(grid3):
    ens = H.Ensemble.singleton(H.gaussian(grid3))
    assert math.isclose(Vr.virial_rhs(ens, GridKernel(Potential.zero(), grid3), 1), 12.0, rel_tol=1e-10)


def test_symmetric_and_direct_forms_agree(grid3, mix):
    K = GridKernel(Potential.power(2.2), grid3)
    for mu in (-1, 1):
        a = Vr.virial_rhs(mix, K, mu, "symmetric")
        b = Vr.virial_rhs(mix, K, mu, "direct")
        # the truncated kernel jumps at |z| = L/2; the direct form's spectral gradient sees
        # that surface term, weighted by the e^{-14} pair density of the wide member there
        assert abs(a - b) < 1e-6 * abs(a)


def test_power2_rhs_is_sixteen_E1(grid3, mix):
    # z.grad V = -2 V makes the pair term 4 mu int int rho rho V, the energy's own
    K = GridKernel(Potential.power(2.0), grid3)
    assert abs(Vr.virial_rhs(mix, K, -1) - 16 * H.energy_E1(mix, K, -1)) < 1e-10


def radial_reference(f, w):
    # int f(|x|) |phi_w|^2 dx for the normalized 3D Gaussian of width w
    dens = lambda r: (math.pi * w * w) ** -1.5 * math.exp(-r * r / (w * w))
    return sint.quad(lambda r: f(r) * dens(r) * 4 * math.pi * r * r, 0, 12 * w, limit=200,
                     points=[], epsabs=1e-14, epsrel=1e-13)[0]


@pytest.mark.parametrize("R", [1.0, 4.0])
def test_truncated_variance_against_radial_quadrature(grid3, prof, R):
    ens = H.Ensemble.singleton(H.gaussian(grid3, 1.0))
    ref = radial_reference(lambda r: R * float(prof.psi(r * r / R)), 1.0)
    assert abs(Vr.truncated_variance(ens, prof, R, "exact") - ref) < 1e-10
    # plain grid sums only see a C^3 weight at h = 1/3
    assert abs(Vr.truncated_variance(ens, prof, R, "grid") - ref) < 5e-3


def test_exact_method_refuses_oversized_R(grid3, prof, mix):
    with pytest.raises(ValueError):
        Vr.truncated_variance(mix, prof, 64.0, "exact")
    with pytest.raises(ValueError):
        Vr.truncated_variance(mix, prof, 4.0, "fancy")


@pytest.mark.parametrize("R", [1.0, 4.0, 16.0])
def test_bilaplacian_identity(mix, prof, R):
    assert Vr.lemma40_check(mix, prof, R).residual < 1e-10


def test_localized_rhs_grid_and_exact_agree_roughly(mix, prof):
    K = GridKernel(Potential.power(2.2), mix.grid)
    a = Vr.localized_virial_rhs(mix, K, -1, prof, 4.0, "exact")
    b = Vr.localized_virial_rhs(mix, K, -1, prof, 4.0, "grid")
    assert abs(a - b) < 2e-2 * abs(a)


def test_localized_rhs_free_field_inside_unit_ball(grid3, prof):
    # with psi_R = |x|^2 on the support of a narrow Gaussian the localized rhs is 8 K
    ens = H.Ensemble.singleton(H.gaussian(grid3, 0.8))
    K = GridKernel(Potential.zero(), grid3)
    assert abs(Vr.localized_virial_rhs(ens, K, 1, prof, 16.0, "exact") - Vr.virial_rhs(ens, K, 1)) < 1e-8


@given(st.lists(st.floats(-3, 3), min_size=5, max_size=5), st.floats(0.01, 0.5))
def test_fd2_exact_on_quartics(coef, dt):
    t = np.arange(9) * dt
    f = np.polyval(coef, t)
    d2 = np.polyval(np.polyder(coef, 2), t)
    out = Vr.fd2(f, dt)
    assert np.all(np.isnan(out[:2])) and np.all(np.isnan(out[-2:]))
    assert np.allclose(out[2:-2], d2[2:-2], atol=1e-7 * (1 + np.max(np.abs(f))) / dt**2)


def test_fd2_uniform_skips_irregular_stencils():
    t = np.array([0, 0.1, 0.2, 0.3, 0.4, 0.45, 0.5, 0.55, 0.6])
    out = Vr.fd2_uniform(t, t**2)
    assert np.allclose(out[2], 2.0)
    assert np.isnan(out[3]) and np.isnan(out[4]) and np.allclose(out[6], 2.0)


def test_glassey_envelope():
    env = Vr.glassey_envelope(1.0, 0.0, -1.0)
    assert math.isclose(env.root, 1 / math.sqrt(8))
    assert abs(env(env.root)) < 1e-14
    assert Vr.glassey_envelope(1.0, 0.5, 1.0).root is None


def test_cutoff_constants(prof):
    L = Vr.lipschitz_constant(prof)
    s = np.linspace(0, 3, 30001)
    assert 1.0 <= L < 6.0
    assert L >= np.max(prof.Phi(s) + 2 * s * prof.rho(s)) - 1e-12
    assert 0 < Vr.pair_constant(prof, 3, 5000) < 10


def test_lemma43_terms_signs(mix, prof):
    K = GridKernel(Potential.power(2.2), mix.grid)
    T = Vr.lemma43_terms(mix, K, prof, 4.0)
    assert T.II <= 0 and T.D <= 0
    assert T.IIIa >= 0 and T.IIIb >= 0
    assert T.bound == pytest.approx(T.sixteenE1 + T.II + T.IIIa + T.IIIb + T.IV)
    with pytest.raises(ValueError):
        Vr.lemma43_terms(mix, K, prof, 4.0, mu=1)
    with pytest.raises(H.NonRadialEnsembleError):
        shifted = H.Ensemble.singleton(H.gaussian(mix.grid, 1.0, center=[1, 0, 0]))
        Vr.lemma43_terms(shifted, K, prof, 4.0)


def test_third_term_bounds_dominate_reference(prof):
    grid = GridSpec(3, 16, 12.0)
    ens = H.Ensemble.singleton(H.gaussian(grid, 1.0), radial=True)
    V = Potential.power(2.2)
    ref = Vr.third_term_reference(ens, V, prof, 1.0)
    a, b = Vr.third_term_bounds(ens, V, prof, 1.0, Vr.pair_constant(prof, 3))
    assert a >= ref["IIIa"] - 1e-12 and b >= ref["IIIb"] - 1e-12
    assert abs(Vr.third_term_signed(ens, V, prof, 1.0) - ref["III"]) < 1e-3 * max(1e-12, abs(ref["III"]))
