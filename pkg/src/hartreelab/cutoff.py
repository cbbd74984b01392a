"""Truncation data for the localized virial argument.

The bump is rho(x) = (35/32) (x-1)^3 (3-x)^3 on (1, 3).  With u = x - 2 it reads
(35/32) (1 - u^2)^3, so every piece is stored as a polynomial in u, which keeps
the coefficients O(1) and the evaluation free of cancellation.

    Phi(x) = int_0^x rho          psi'   = 1 - Phi
    M1(x)  = int_0^x y rho(y) dy  psi''  = -rho
    psi(x) = x - x Phi(x) + M1(x)

psi is the identity on [0, 1] and equals 2 on [3, inf).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import Polynomial as P

RHO_NORMALIZATION = 35.0 / 32.0


@dataclass(frozen=True, eq=False)   # identity hashing, so profiles can key caches
class CutoffProfile:
    rho_u: P      # rho on (1, 3) in the variable u = x - 2
    phi_u: P      # cumulative integral of rho
    m1_u: P       # first moment
    psi_u: P      # psi on [1, 3]

    def _piecewise(self, x, inner, middle: P, outer):
        x = np.asarray(x, float)
        mid = middle(x - 2.0)
        out = np.where(x <= 1.0, inner(x) if callable(inner) else inner, mid)
        return np.where(x >= 3.0, outer(x) if callable(outer) else outer, out)

    def rho(self, x):
        return self._piecewise(x, 0.0, self.rho_u, 0.0)

    def rho_deriv(self, x, m: int = 1):
        """m-th derivative of rho; one-sided (interior) values at the breakpoints."""
        return self._piecewise(x, 0.0, self.rho_u.deriv(m), 0.0)

    def Phi(self, x):
        return self._piecewise(x, 0.0, self.phi_u, 1.0)

    def M1(self, x):
        return self._piecewise(x, 0.0, self.m1_u, 2.0)

    def psi(self, x):
        return self._piecewise(x, lambda t: t, self.psi_u, 2.0)

    def psi_deriv(self, x, m: int):
        """m-th derivative of psi (m = 1..4) from the psi polynomial itself."""
        if m < 1 or m > 4:
            raise ValueError("derivative order must be 1..4")
        inner = 1.0 if m == 1 else 0.0
        return self._piecewise(x, inner, self.psi_u.deriv(m), 0.0)


def make_profile() -> CutoffProfile:
    u = P([0.0, 1.0])
    rho_u = RHO_NORMALIZATION * (1 - u**2) ** 3
    phi_u = rho_u.integ(lbnd=-1.0)
    m1_u = ((u + 2) * rho_u).integ(lbnd=-1.0)
    psi_u = (u + 2) - (u + 2) * phi_u + m1_u
    return CutoffProfile(rho_u=rho_u, phi_u=phi_u, m1_u=m1_u, psi_u=psi_u)


def F_R(profile: CutoffProfile, r, R: float):
    """int_0^{r^2/R} rho(s) ds."""
    if not R > 0:
        raise ValueError("R must be positive")
    r = np.asarray(r, float)
    return profile.Phi(r * r / R)


def weight_w(profile: CutoffProfile, r, R: float):
    """F_R(r) + (r^2/R) rho(r^2/R), the bracket of the pairwise truncation bound."""
    s = np.asarray(r, float) ** 2 / R
    return profile.Phi(s) + s * profile.rho(s)


@dataclass
class PsiRDerivs:
    value: np.ndarray
    gradient: np.ndarray      # shape (..., d)
    laplacian: np.ndarray
    bilaplacian: np.ndarray


def psi_R_derivs(profile: CutoffProfile, x, R: float) -> PsiRDerivs:
    """psi_R(x) = R psi(|x|^2/R) with gradient, Laplacian and bilaplacian.

    With s = |x|^2/R:
        grad      = 2 x psi'(s)
        lap       = 2 d psi'(s) + 4 s psi''(s)
        bilap     = (16 s^2 psi''''(s) + 16 (d+2) s psi'''(s) + 4 d (d+2) psi''(s)) / R
    """
    x = np.asarray(x, float)
    d = x.shape[-1]
    s = np.sum(x * x, axis=-1) / R
    p1 = profile.psi_deriv(s, 1)
    p2 = profile.psi_deriv(s, 2)
    p3 = profile.psi_deriv(s, 3)
    p4 = profile.psi_deriv(s, 4)
    return PsiRDerivs(
        value=R * profile.psi(s),
        gradient=2 * x * p1[..., None],
        laplacian=2 * d * p1 + 4 * s * p2,
        bilaplacian=(16 * s**2 * p4 + 16 * (d + 2) * s * p3 + 4 * d * (d + 2) * p2) / R,
    )


def psi_R_hessian(profile: CutoffProfile, x, R: float) -> np.ndarray:
    """Hessian of psi_R: 2 delta_ij psi'(s) + 4 x_i x_j psi''(s) / R, shape (..., d, d)."""
    x = np.asarray(x, float)
    d = x.shape[-1]
    s = np.sum(x * x, axis=-1) / R
    p1 = profile.psi_deriv(s, 1)
    p2 = profile.psi_deriv(s, 2)
    eye = np.eye(d)
    return 2 * p1[..., None, None] * eye + 4 / R * p2[..., None, None] * x[..., :, None] * x[..., None, :]


def a_vector(profile: CutoffProfile, x, y, R: float) -> np.ndarray:
    """(x - y) - (psi'(|x|^2/R) x - psi'(|y|^2/R) y)."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    px = profile.psi_deriv(np.sum(x * x, axis=-1) / R, 1)[..., None]
    py = profile.psi_deriv(np.sum(y * y, axis=-1) / R, 1)[..., None]
    return (x - y) - (px * x - py * y)


class DegenerateSampleError(ValueError):
    pass


@dataclass
class Lemma18Result:
    R: float
    max_ratio: float
    violations: int
    n_pairs: int
    n_skipped: int


def sample_lemma18_pairs(R: float, samples: int, d: int, rng: np.random.Generator):
    """Random pairs with max(|x|,|y|) >= sqrt(R) and |x - y| <= sqrt(R).

    The outer point is drawn with |x|^2/R uniform on [1, 4] and uniform direction;
    the offset is uniform in the ball of radius sqrt(R).  Everything is drawn in
    units of sqrt(R), so a fixed seed gives the same pairs up to scaling.
    """
    rs = np.sqrt(R)
    dirs = rng.normal(size=(samples, d))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    s = rng.uniform(1.0, 4.0, size=samples)
    x = dirs * np.sqrt(s)[:, None]
    off = rng.normal(size=(samples, d))
    off /= np.linalg.norm(off, axis=1, keepdims=True)
    off *= rng.uniform(0, 1, size=samples)[:, None] ** (1.0 / d)
    y = x + off
    swap = rng.uniform(size=samples) < 0.5
    x[swap], y[swap] = y[swap], x[swap].copy()
    return x * rs, y * rs


def lemma18_check(profile: CutoffProfile, R: float, samples: int, d: int = 3,
                  rng: np.random.Generator | int | None = 0) -> Lemma18Result:
    """Empirical constant of the pairwise truncation bound.

    Returns max |a(x,y)| / (bracket * |x - y|) over sampled admissible pairs, where
    bracket = w(|x|) + w(|y|), and counts pairs where the bracket vanishes but
    |a| does not.
    """
    if R < 1:
        raise ValueError("R must be >= 1")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    x, y = sample_lemma18_pairs(R, samples, d, rng)
    dist = np.linalg.norm(x - y, axis=1)
    if np.any(dist < 1e-10):
        raise DegenerateSampleError("sampled pair with |x - y| < 1e-10")
    a = np.linalg.norm(a_vector(profile, x, y, R), axis=1)
    bracket = weight_w(profile, np.linalg.norm(x, axis=1), R) + weight_w(profile, np.linalg.norm(y, axis=1), R)
    zero = bracket == 0
    violations = int(np.sum(zero & (a > 1e-12)))
    ok = ~zero
    ratio = a[ok] / (bracket[ok] * dist[ok])
    return Lemma18Result(R=R, max_ratio=float(np.max(ratio)) if ratio.size else 0.0,
                         violations=violations, n_pairs=samples, n_skipped=int(np.sum(zero)))
