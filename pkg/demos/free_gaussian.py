"""Free spreading of the unit Gaussian in 1D.

The variance follows V1(t) = (1 + 4t^2)/2 exactly, its second derivative is
16 E1 = 4, and the virial right-hand side reproduces both.
"""
import numpy as np

from hartreelab import hierarchy as H
from hartreelab import virial as Vr
from hartreelab.grid import GridSpec
from hartreelab.potentials import GridKernel, Potential
from hartreelab.solver import PropagatorConfig

grid = GridSpec(1, 256, 40.0)
K = GridKernel(Potential.zero(), grid)
ens = H.Ensemble.singleton(H.gaussian(grid))
dt = 0.01
rows = []

def observe(t, e):
    rows.append((t, Vr.variance(e), H.energy_E1(e, K, +1), Vr.virial_rhs(e, K, +1)))

H.evolve(ens, K, PropagatorConfig(dt, 1.0, +1), [observe])
t, V1, E1, rhs = map(np.array, zip(*rows))
fd = Vr.fd2(V1, dt)

print("E1 =", E1[0], "(exact 0.25)")
print("max |V1 - (1+4t^2)/2| =", np.max(np.abs(V1 - (1 + 4 * t**2) / 2)))
print("max |FD2[V1] - 4|     =", np.nanmax(np.abs(fd - 4)))
print("max |rhs - 16 E1|     =", np.max(np.abs(rhs - 16 * E1)))
for k in range(0, len(t), 20):
    print(f"t={t[k]:.2f}  V1={V1[k]:.10f}  exact={(1 + 4 * t[k]**2) / 2:.10f}")
