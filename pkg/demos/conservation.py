"""Mass and energy under a defocusing tabulated interaction in 1D.

Mass is conserved to roundoff by every substep.  The energy drift is a
splitting error, so halving dt should cut it by about 4.
"""
import numpy as np

from hartreelab import hierarchy as H
from hartreelab.grid import GridSpec
from hartreelab.potentials import GridKernel, Potential
from hartreelab.solver import PropagatorConfig

grid = GridSpec(1, 512, 40.0)
r = np.linspace(0, 20, 401)
K = GridKernel(Potential.table(r, 5 / (1 + r**2)), grid)

def drifts(dt):
    ens = H.Ensemble.singleton(H.gaussian(grid))
    mass, E = [], []

    def observe(t, e):
        mass.append(H.mass(e))
        E.append(H.energy_E1(e, K, +1))

    H.evolve(ens, K, PropagatorConfig(dt, 1.0, +1, record_every=int(round(0.01 / dt))), [observe])
    mass, E = np.array(mass), np.array(E)
    return np.max(np.abs(mass - 1)), np.max(np.abs(E - E[0])) / abs(E[0])

m1, e1 = drifts(1e-3)
m2, e2 = drifts(5e-4)
print(f"dt=1e-3   mass error {m1:.2e}  relative energy drift {e1:.3e}")
print(f"dt=5e-4   mass error {m2:.2e}  relative energy drift {e2:.3e}")
print(f"drift ratio {e1 / e2:.2f} (second order gives 4)")
