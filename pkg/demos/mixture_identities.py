"""Static identities for a two-member radial mixture in 3D.

A de Finetti mixture of factorized states is an admissible hierarchy state:
its marginals are consistent under partial trace, E_k = k E1, and the
localized virial right-hand side is finite for every cutoff radius.
"""
from hartreelab import cutoff as C
from hartreelab import hierarchy as H
from hartreelab import virial as Vr
from hartreelab.grid import GridSpec
from hartreelab.potentials import GridKernel, Potential

grid = GridSpec(3, 32, 16.0)
K = GridKernel(Potential.power(2.2), grid)
ens = H.Ensemble.mixture([(0.5, H.gaussian(grid, 1.0)), (0.5, H.gaussian(grid, 1.5))], radial=True)
prof = C.make_profile()

print("mass                  ", H.mass(ens))
print("partial trace residual", H.partial_trace_residual(ens))
E1 = H.energy_E1(ens, K, -1)
for k in (1, 2, 3):
    print(f"E_{k} - {k} E1           ", H.energy_Ek(ens, K, -1, k) - k * E1)
print("virial rhs            ", Vr.virial_rhs(ens, K, -1), " 16 E1 =", 16 * E1)
for R in (1.0, 4.0, 16.0):
    rhs = Vr.localized_virial_rhs(ens, K, -1, prof, R)
    res = Vr.lemma40_check(ens, prof, R).residual
    print(f"R={R:<4g} truncated variance {Vr.truncated_variance(ens, prof, R):.6f}  "
          f"localized rhs {rhs:.6f}  bilaplacian residual {res:.1e}")
