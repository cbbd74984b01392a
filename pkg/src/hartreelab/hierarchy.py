"""Finite de Finetti mixtures as admissible hierarchy solutions.

An ensemble {(w_i, phi_i)} with sum w_i = 1 and ||phi_i|| = 1 represents

    gamma^(k)(x, x') = sum_i w_i prod_j phi_i(x_j) conj(phi_i(x'_j)),

which is Hermitian, symmetric, positive and consistent under partial trace by
construction.  Kernels are never materialized; every trace below reduces to
single-member integrals, summed over members in index order.
"""
from __future__ import annotations

import itertools
import weakref
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import grid as G
from .grid import GridSpec, SpectralField, integrate
from .potentials import GridKernel
from .solver import PropagatorConfig, StepOutcome, propagate_many


class EnsembleError(ValueError):
    pass


class NonRadialEnsembleError(ValueError):
    pass


# ---------------------------------------------------------------- derived data

class Derived:
    """Lazily computed derivatives of one member field."""

    def __init__(self, phi: SpectralField):
        # a strong reference would keep the cache key alive forever
        self._phi = weakref.ref(phi)
        self._grad = None
        self._hess = {}
        self._density = None
        self._interaction = {}
        self.extra = {}      # consumers cache their own derived spectra here

    @property
    def phi(self) -> SpectralField:
        return self._phi()

    @property
    def density(self) -> np.ndarray:
        if self._density is None:
            self._density = self.phi.density()
        return self._density

    @property
    def grad(self) -> list[np.ndarray]:
        if self._grad is None:
            self._grad = [g.values for g in G.gradient(self.phi)]
        return self._grad

    def hess(self, i: int, j: int) -> np.ndarray:
        key = (min(i, j), max(i, j))
        if key not in self._hess:
            self._hess[key] = G.partial(self.phi, key).values
        return self._hess[key]

    def interaction(self, kernel: GridKernel) -> tuple[np.ndarray, list[np.ndarray]]:
        """W = V * |phi|^2 and its spectral gradient."""
        # ids can be reused once a kernel is freed, so hold the kernel and compare
        key = id(kernel)
        hit = self._interaction.get(key)
        if hit is None or hit[0] is not kernel:
            if kernel.is_zero:
                W = np.zeros(self.phi.grid.shape)
                gW = [W] * self.phi.grid.d
            else:
                W = kernel.field(self.density)
                gW = G.real_gradient(self.phi.grid, W)
            hit = (kernel, W, gW)
            self._interaction[key] = hit
        return hit[1], hit[2]


_derived_cache: "weakref.WeakKeyDictionary[SpectralField, Derived]" = weakref.WeakKeyDictionary()


def derived(phi: SpectralField) -> Derived:
    d = _derived_cache.get(phi)
    if d is None:
        d = Derived(phi)
        _derived_cache[phi] = d
    return d


# ---------------------------------------------------------------- profiles

def gaussian(grid: GridSpec, width: float = 1.0, center=None, phase_momentum=None,
             chirp: float = 0.0) -> SpectralField:
    """exp(-|x-c|^2 / (2 width^2) + i p.x + i chirp |x|^2), normalized on the grid.

    width = 1 and c = 0 gives the unit Gaussian pi^{-d/4} exp(-|x|^2/2).
    A scalar ``phase_momentum`` is applied along every axis.
    """
    d = grid.d
    c = np.zeros(d) if center is None else np.broadcast_to(np.asarray(center, float), (d,))
    p = np.zeros(d) if phase_momentum is None else np.broadcast_to(np.asarray(phase_momentum, float), (d,))
    xs = grid.coords()
    r2c = sum((x - ci) ** 2 for x, ci in zip(xs, c))
    phase = sum(pi * x for x, pi in zip(xs, p)) + chirp * grid.radius_squared()
    vals = np.exp(-r2c / (2 * width**2) + 1j * phase)
    vals = np.broadcast_to(vals, grid.shape)
    return normalized(SpectralField(grid, vals))


def normalized(phi: SpectralField) -> SpectralField:
    return phi.scaled(1.0 / phi.norm())


def is_radial(phi: SpectralField, tol: float = 1e-8) -> bool:
    """Compare phi with its images under the lattice symmetries of the cube.

    Reflections x_i -> -x_i and axis permutations map the box-centered grid
    onto itself (up to the wrap seam at index 0, which is excluded).
    """
    v = phi.values
    d = v.ndim
    scale = np.max(np.abs(v))
    core = (slice(1, None),) * d
    base = v[core]
    for ax in range(d):
        flipped = np.flip(v[core], axis=ax)
        if np.max(np.abs(flipped - base)) > tol * scale:
            return False
    for perm in itertools.permutations(range(d)):
        if np.max(np.abs(np.transpose(base, perm) - base)) > tol * scale:
            return False
    return True


# ---------------------------------------------------------------- ensemble

@dataclass(frozen=True)
class Ensemble:
    weights: tuple[float, ...]
    members: tuple[SpectralField, ...]
    radial: bool = False

    def __post_init__(self):
        if len(self.weights) != len(self.members) or not self.members:
            raise EnsembleError("need one weight per member and at least one member")
        if any(w <= 0 for w in self.weights):
            raise EnsembleError("weights must be positive")
        if abs(sum(self.weights) - 1.0) > 1e-12:
            raise EnsembleError(f"weights sum to {sum(self.weights)!r}, not 1")
        grid = self.members[0].grid
        for i, m in enumerate(self.members):
            if m.grid != grid:
                raise EnsembleError("members live on different grids")
            if abs(m.norm() - 1.0) > 1e-8:
                raise EnsembleError(f"member {i} has norm {m.norm()!r}")
        if self.radial:
            for i, m in enumerate(self.members):
                if not is_radial(m):
                    raise EnsembleError(f"member {i} is flagged radial but is not")

    @classmethod
    def singleton(cls, phi: SpectralField, radial: bool = False) -> "Ensemble":
        return cls((1.0,), (phi,), radial)

    @classmethod
    def mixture(cls, pairs: Iterable[tuple[float, SpectralField]], radial: bool = False) -> "Ensemble":
        pairs = list(pairs)
        return cls(tuple(float(w) for w, _ in pairs), tuple(f for _, f in pairs), radial)

    @classmethod
    def from_config(cls, grid: GridSpec, entries: Sequence[dict], radial: bool | None = None) -> "Ensemble":
        pairs = []
        for e in entries:
            prof = e["profile"]["gaussian"]
            phi = gaussian(grid, prof.get("width", 1.0), prof.get("center"),
                           prof.get("phase_momentum"), prof.get("chirp", 0.0))
            pairs.append((float(e["weight"]), phi))
        if radial is None:
            radial = all(is_radial(f) for _, f in pairs)
        return cls.mixture(pairs, radial)

    @property
    def grid(self) -> GridSpec:
        return self.members[0].grid

    def __iter__(self):
        return iter(zip(self.weights, self.members))

    def with_members(self, members: Sequence[SpectralField]) -> "Ensemble":
        # weights are untouched by the flow; skip re-validation of a fresh snapshot
        new = object.__new__(Ensemble)
        object.__setattr__(new, "weights", self.weights)
        object.__setattr__(new, "members", tuple(members))
        object.__setattr__(new, "radial", self.radial)
        return new


def _wsum(ens: Ensemble, per_member) -> float:
    total = 0.0
    for w, phi in ens:
        total += w * per_member(phi)
    return total


# ---------------------------------------------------------------- evolution

def evolve(ensemble: Ensemble, kernel: GridKernel, config: PropagatorConfig,
           observers: Iterable = ()) -> StepOutcome:
    """Evolve every member under the Hartree flow, in lockstep.

    Mixtures of factorized solutions solve the (linear) hierarchy, so the
    weights never change.  Observers get (t, Ensemble) at each record.
    """
    observers = list(observers)

    def relay(t, fields):
        snap = ensemble.with_members(fields)
        for ob in observers:
            ob(t, snap)

    return propagate_many(list(ensemble.members), kernel, config, [relay])


def evolve_snapshots(ensemble: Ensemble, kernel: GridKernel, config: PropagatorConfig):
    """Like :func:`evolve` but returns the list of (t, Ensemble) snapshots."""
    snaps = []
    outcome = evolve(ensemble, kernel, config, [lambda t, e: snaps.append((t, e))])
    return snaps, outcome


# ---------------------------------------------------------------- traces

def mass(ens: Ensemble) -> float:
    return _wsum(ens, lambda phi: integrate(ens.grid, derived(phi).density))


def kinetic_trace(ens: Ensemble) -> float:
    """Tr(-Lap gamma^(1)) = sum_i w_i ||grad phi_i||^2."""
    return _wsum(ens, G.kinetic_density_integral)


def interaction_trace(ens: Ensemble, kernel: GridKernel) -> float:
    """Tr(B+_{1,2} gamma^(2)) = sum_i w_i int (V * |phi_i|^2) |phi_i|^2."""
    if kernel.is_zero:
        return 0.0

    def one(phi):
        D = derived(phi)
        W, _ = D.interaction(kernel)
        return integrate(ens.grid, W * D.density)

    return _wsum(ens, one)


def energy_E1(ens: Ensemble, kernel: GridKernel, mu: int) -> float:
    return 0.5 * kinetic_trace(ens) + mu / 4 * interaction_trace(ens, kernel)


def energy_Ek(ens: Ensemble, kernel: GridKernel, mu: int, k: int) -> float:
    """E_k from its definition as a sum over the k particle slots.

    For a factorized member the j-th slot contributes the one-particle term
    times the squared norms of the other k-1 factors.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    total = 0.0
    for w, phi in ens:
        D = derived(phi)
        nrm2 = integrate(ens.grid, D.density)
        kin = G.kinetic_density_integral(phi)
        inter = 0.0
        if not kernel.is_zero:
            W, _ = D.interaction(kernel)
            inter = integrate(ens.grid, W * D.density)
        for _ in range(k):
            total += w * (0.5 * kin * nrm2 ** (k - 1) + mu / 4 * inter * nrm2 ** (k - 1))
    return total


def gamma1_diagonal(ens: Ensemble) -> np.ndarray:
    """gamma^(1)(x, x) on the grid."""
    return sum(w * derived(phi).density for w, phi in ens)


def gamma2_diagonal(ens: Ensemble, ix, iy) -> np.ndarray:
    """gamma^(2)(x, y, x, y) for grid indices ix, iy (tuples or index arrays)."""
    out = 0.0
    for w, phi in ens:
        rho = derived(phi).density
        out = out + w * rho[ix] * rho[iy]
    return out


def partial_trace_residual(ens: Ensemble, n_points: int = 20, rng=0) -> float:
    """max |int gamma^(2)(x,y,x,y) dy - gamma^(1)(x,x)| over random grid x."""
    rng = np.random.default_rng(rng)
    idx = tuple(rng.integers(0, ens.grid.n, size=n_points) for _ in range(ens.grid.d))
    lhs = 0.0
    for w, phi in ens:
        rho = derived(phi).density
        lhs = lhs + w * rho[idx] * integrate(ens.grid, rho)
    return float(np.max(np.abs(lhs - gamma1_diagonal(ens)[idx])))


def gamma2_diagonal_min(ens: Ensemble) -> float:
    """min over grid pairs of gamma^(2)(x,y,x,y) = sum_i w_i rho_i(x) rho_i(y).

    Each term is a product of nonnegative densities, so the minimum over pairs
    is attained where it is smallest for all members; evaluate it exactly via
    the outer product for small grids and via member minima otherwise.
    """
    N = ens.grid.n**ens.grid.d
    if N <= 4096:
        tot = sum(w * np.multiply.outer(derived(phi).density.ravel(), derived(phi).density.ravel())
                  for w, phi in ens)
        return float(np.min(tot))
    return float(sum(w * np.min(derived(phi).density) ** 2 for w, phi in ens))


# ---------------------------------------------------------------- identities

@dataclass
class TraceTriple:
    lap_x: complex
    lap_xprime: complex
    mixed: complex

    def max_disagreement(self) -> float:
        v = [self.lap_x, self.lap_xprime, self.mixed]
        return max(abs(a - b) for a, b in itertools.combinations(v, 2))


def check_trace_identity(g: SpectralField, h: SpectralField) -> TraceTriple:
    """Traces of Lap_x A, Lap_x' A and -grad_x . grad_x' A for A(x,x') = g(x) conj(h(x'))."""
    grid = g.grid
    lap_x = integrate(grid, G.laplacian(g).values * np.conj(h.values))
    # derivative in x' acts on conj(h(x')), so differentiate the conjugate field
    hbar = h.conj()
    lap_xp = integrate(grid, g.values * G.laplacian(hbar).values)
    mixed = 0
    for dg, dhbar in zip(G.gradient(g), G.gradient(hbar)):
        mixed = mixed - integrate(grid, dg.values * dhbar.values)
    return TraceTriple(complex(lap_x), complex(lap_xp), complex(mixed))


def check_hermitian_derivs(ens: Ensemble, points) -> float:
    """Largest violation of the diagonal Hermitian identities at grid indices ``points``.

    First order:  d_{x_i} gamma(x,x) = conj(d_{x'_i} gamma(x,x))
    Second order: d_{x_i} d_{x_j} gamma = conj(d_{x'_i} d_{x'_j} gamma)
                  d_{x_i} d_{x'_j} gamma = conj(d_{x'_i} d_{x_j} gamma)
    x' derivatives are taken on the conjugated member field.
    """
    points = tuple(np.asarray(p) for p in points)
    d = ens.grid.d
    worst = 0.0
    for w, phi in ens:
        D = derived(phi)
        bar = phi.conj()
        dbar = [g.values for g in G.gradient(bar)]
        v, vb = phi.values, bar.values
        for i in range(d):
            lhs = w * D.grad[i] * vb
            rhs = w * v * dbar[i]
            worst = max(worst, float(np.max(np.abs(lhs[points] - np.conj(rhs[points])))))
            for j in range(d):
                hb = G.partial(bar, (i, j)).values
                lhs2 = w * D.hess(i, j) * vb
                rhs2 = w * v * hb
                worst = max(worst, float(np.max(np.abs(lhs2[points] - np.conj(rhs2[points])))))
                lhs3 = w * D.grad[i] * dbar[j]
                rhs3 = w * D.grad[j] * dbar[i]
                worst = max(worst, float(np.max(np.abs(lhs3[points] - np.conj(rhs3[points])))))
    return worst
