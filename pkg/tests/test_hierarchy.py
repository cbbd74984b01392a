import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hartreelab import hierarchy as H
from hartreelab.experiments import random_band_limited
from hartreelab.grid import GridSpec
from hartreelab.potentials import GridKernel, Potential


@pytest.fixture(scope="module")
def grid3():
    return GridSpec(3, 32, 16.0)


@pytest.fixture(scope="module")
def mix(grid3):
    return H.Ensemble.mixture([(0.3, H.gaussian(grid3, 1.0)), (0.7, H.gaussian(grid3, 1.5))])


def test_gaussian_normalized_and_radial(grid3):
    phi = H.gaussian(grid3, 0.8)
    assert math.isclose(phi.norm(), 1.0, rel_tol=1e-13)
    assert H.is_radial(phi)
    assert not H.is_radial(H.gaussian(grid3, 1.0, center=[0.5, 0, 0]))


def test_mixture_detects_radial(grid3, mix):
    assert H.Ensemble.from_config(grid3, [{"weight": 1.0, "profile": {"gaussian": {"width": 1.0}}}]).radial
    with pytest.raises(H.EnsembleError):
        H.Ensemble.singleton(H.gaussian(grid3, 1.0, center=[1, 0, 0]), radial=True)


@pytest.mark.parametrize("weights", [(0.5, 0.6), (1.2, -0.2)])
def test_bad_weights(grid3, weights):
    phi = H.gaussian(grid3)
    with pytest.raises(H.EnsembleError):
        H.Ensemble(weights, (phi, phi))


def test_unnormalized_member(grid3):
    phi = H.gaussian(grid3).scaled(1.1)
    with pytest.raises(H.EnsembleError):
        H.Ensemble.singleton(phi)


def test_mass_and_kinetic_closed_forms(grid3, mix):
    # ||grad phi||^2 = d / (2 w^2) for a normalized Gaussian of width w
    assert math.isclose(H.mass(mix), 1.0, rel_tol=1e-13)
    exact = 0.3 * 1.5 + 0.7 * 1.5 / 1.5**2
    assert math.isclose(H.kinetic_trace(mix), exact, rel_tol=1e-10)


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_energy_hierarchy(grid3, mix, k):
    K = GridKernel(Potential.power(2.2), grid3)
    E1 = H.energy_E1(mix, K, -1)
    assert abs(H.energy_Ek(mix, K, -1, k) - k * E1) < 1e-12 * k


def test_partial_trace_and_positivity(mix):
    assert H.partial_trace_residual(mix, 20, 3) < 1e-12
    assert H.gamma2_diagonal_min(mix) >= 0


def test_gamma2_diagonal_factorizes_for_singletons(grid3):
    ens = H.Ensemble.singleton(H.gaussian(grid3))
    g1 = H.gamma1_diagonal(ens)
    ix, iy = (16, 16, 16), (18, 15, 16)
    assert math.isclose(float(H.gamma2_diagonal(ens, ix, iy)), g1[ix] * g1[iy], rel_tol=1e-12)


def band_limited(grid, seed):
    return random_band_limited(grid, np.random.default_rng(seed))


def test_band_limited_fields_have_no_nyquist_content():
    grid = GridSpec(2, 16, 6.0)
    spec = band_limited(grid, 0).spectrum
    assert np.all(spec[8, :] == 0) and np.all(spec[:, 8] == 0)


@given(st.integers(0, 2**32 - 1), st.integers(0, 2**32 - 1))
def test_trace_identity_property(s1, s2):
    grid = GridSpec(1, 32, 9.0)
    tr = H.check_trace_identity(band_limited(grid, s1), band_limited(grid, s2))
    assert tr.max_disagreement() <= 1e-8 * max(1.0, abs(tr.lap_x))


@given(st.integers(0, 2**32 - 1))
def test_hermitian_property(seed):
    grid = GridSpec(2, 16, 6.0)
    ens = H.Ensemble.singleton(H.normalized(band_limited(grid, seed)))
    pts = tuple(np.random.default_rng(seed).integers(0, 16, size=10) for _ in range(2))
    assert H.check_hermitian_derivs(ens, pts) <= 1e-10


def test_evolve_keeps_weights(grid3, mix):
    from hartreelab.solver import PropagatorConfig

    snaps, out = H.evolve_snapshots(mix, GridKernel(Potential.zero(), grid3), PropagatorConfig(0.05, 0.1, 1))
    assert out.status == "ok" and len(snaps) == 3
    assert all(e.weights == mix.weights for _, e in snaps)


def test_derived_cache_follows_kernel(grid3):
    ens = H.Ensemble.singleton(H.gaussian(grid3))
    a = H.interaction_trace(ens, GridKernel(Potential.power(1.0), grid3))
    b = H.interaction_trace(ens, GridKernel(Potential.power(2.0), grid3))
    assert a != b
