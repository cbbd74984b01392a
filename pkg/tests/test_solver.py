import math

import numpy as np
import pytest

from hartreelab import hierarchy as H
from hartreelab import solver as S
from hartreelab.grid import GridSpec
from hartreelab.potentials import GridKernel, Potential


def test_config_validation():
    with pytest.raises(ValueError):
        S.PropagatorConfig(dt=0.0, t_end=1.0, mu=1)
    with pytest.raises(ValueError):
        S.PropagatorConfig(dt=0.1, t_end=1.0, mu=0)


def test_free_gaussian_exact_solution():
    # |phi(t,x)|^2 for phi_0 = pi^{-1/4} e^{-x^2/2}: pi^{-1/2} e^{-x^2/(1+4t^2)} / sqrt(1+4t^2)
    grid = GridSpec(1, 256, 40.0)
    phi0 = H.gaussian(grid)
    recs, out = S.propagate(phi0, GridKernel(Potential.zero(), grid), S.PropagatorConfig(0.1, 1.0, 1))
    t, phi = recs[-1]
    s = 1 + 4 * t * t
    exact = np.exp(-grid.radius_squared() / s) / math.sqrt(math.pi * s)
    assert out.status == S.OK and math.isclose(t, 1.0)
    assert np.max(np.abs(phi.density() - exact)) < 1e-12


def test_mass_conservation_and_time_reversal():
    grid = GridSpec(1, 128, 30.0)
    K = GridKernel(Potential.power(0.5), grid)
    phi0 = H.gaussian(grid, 1.0, phase_momentum=[0.7])
    cfg = S.PropagatorConfig(0.01, 0.5, -1, record_every=10)
    recs, _ = S.propagate(phi0, K, cfg)
    assert max(abs(p.norm() - 1) for _, p in recs) < 1e-12
    # the split-step scheme is symmetric, so conjugate, evolve, conjugate undoes the run
    back, _ = S.propagate(S.time_reversed(recs[-1][1]), K, cfg)
    assert np.max(np.abs(S.time_reversed(back[-1][1]).values - phi0.values)) < 1e-10


def test_energy_drift_second_order():
    grid = GridSpec(1, 256, 40.0)
    r = np.linspace(0, 20, 401)
    K = GridKernel(Potential.table(r, 5 / (1 + r**2)), grid)
    ens = H.Ensemble.singleton(H.gaussian(grid))

    def drift(dt):
        E = []
        H.evolve(ens, K, S.PropagatorConfig(dt, 0.5, 1, record_every=int(0.05 / dt)),
                 [lambda t, e: E.append(H.energy_E1(e, K, 1))])
        return max(abs(x - E[0]) for x in E)

    ratio = drift(2e-3) / drift(1e-3)
    assert 3.0 < ratio < 5.0


def test_blowup_detection_reports_crossing():
    grid = GridSpec(1, 64, 20.0)
    cfg = S.PropagatorConfig(0.01, 1.0, 1, blowup_gradient_threshold=1.0, dt_floor=1e-3)
    # the free Gaussian has ||grad phi|| = sqrt(1/2) < 1, a narrower one crosses at once
    _, out = S.propagate(H.gaussian(grid, 0.5), GridKernel(Potential.zero(), grid), cfg)
    assert out.status == S.BLOWUP and out.crossing_time is not None and out.final_dt < 1e-3
    _, ok = S.propagate(H.gaussian(grid, 1.0), GridKernel(Potential.zero(), grid), cfg)
    assert ok.status == S.OK


def test_gradient_norm_from_spectrum():
    grid = GridSpec(3, 32, 16.0)
    phi = H.gaussian(grid)
    assert math.isclose(S.gradient_norm_from_spectrum(grid, phi.spectrum), math.sqrt(1.5), rel_tol=1e-10)
