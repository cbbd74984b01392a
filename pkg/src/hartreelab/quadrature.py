"""Exact integrals of band-limited products against compactly supported radial weights.

A grid field is identified with its trigonometric interpolant (modes -n/2 .. n/2-1,
the same modes the spectral derivatives and the kinetic propagator act on).  A
product of m such interpolants is again a trigonometric polynomial with at most
m times the band, so zero-padding to a grid of m*n points samples it without
aliasing.  Its integral against a weight B supported inside the box is then

    int B F dx = (1/N^d) sum_k F_hat(k) B_tilde(k),    B_tilde(k) = int B(x) e^{i k.x} dx,

and for radial B, B_tilde is a one-dimensional Hankel-type integral, computed
with Gauss-Legendre rules on the smooth pieces of the radial profile.  This
removes the quadrature error that plain grid sums make on weights that are
only a few times differentiable.
"""
from __future__ import annotations

from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
import scipy.special as sp

from .grid import GridSpec, fft, ifft
from .potentials import sphere_area


def pad_spectrum(spec: np.ndarray, N: int) -> np.ndarray:
    """Zero-pad an FFT-ordered spectrum from n to N points per axis, keeping values."""
    n = spec.shape[0]
    d = spec.ndim
    out = np.zeros((N,) * d, dtype=complex)
    half = n // 2
    # index ranges of modes 0..n/2-1 and -n/2..-1 in both orderings
    src = [slice(0, half), slice(n - half, n)]
    dst = [slice(0, half), slice(N - half, N)]
    for choice in np.ndindex(*(2,) * d):
        out[tuple(dst[c] for c in choice)] = spec[tuple(src[c] for c in choice)]
    return out * (N / n) ** d


def fine_values(spec: np.ndarray, N: int) -> np.ndarray:
    """Interpolant samples on the N-point grid sharing the box origin -L/2."""
    return ifft(pad_spectrum(spec, N))


def centered_spectrum(values: np.ndarray) -> np.ndarray:
    """Spectrum of a fine-grid sample array with the phase referenced to x = 0."""
    return fft(np.fft.ifftshift(values))


# ---------------------------------------------------------------- radial transforms

def _kernels(d: int):
    """K(x), K'(x), K''(x), K'(x)/x for the d-dimensional radial Fourier kernel."""
    if d == 1:
        def K(x):
            return np.cos(x)

        def K1(x):
            return -np.sin(x)

        def K2(x):
            return -np.cos(x)
    elif d == 2:
        def K(x):
            return sp.j0(x)

        def K1(x):
            return -sp.j1(x)

        def K2(x):
            with np.errstate(invalid="ignore", divide="ignore"):
                return np.where(x > 1e-8, -sp.j0(x) + sp.j1(x) / np.where(x > 0, x, 1), -0.5)
    else:
        def K(x):
            return sp.spherical_jn(0, x)

        def K1(x):
            return -sp.spherical_jn(1, x)

        def K2(x):
            with np.errstate(invalid="ignore", divide="ignore"):
                return np.where(x > 1e-8, -sp.spherical_jn(0, x)
                                + 2 * sp.spherical_jn(1, x) / np.where(x > 0, x, 1), -1.0 / 3)

    def K1_over_x(x):
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(x > 1e-8, K1(x) / np.where(x > 0, x, 1), -1.0 / d)

    return K, K1, K2, K1_over_x


class FrequencyGrid:
    """Angular frequencies of an N^d grid of box length L, with |k|^2 labels."""

    def __init__(self, d: int, N: int, L: float):
        self.d, self.N, self.L = d, N, L
        m = np.fft.fftfreq(N, 1.0 / N).astype(np.int64)
        mesh = np.meshgrid(*([m] * d), indexing="ij", sparse=True)
        msq = sum(c * c for c in mesh)
        self.labels, self.inverse = np.unique(np.broadcast_to(msq, (N,) * d), return_inverse=True)
        self.inverse = self.inverse.reshape((N,) * d)
        self.unit = 2 * np.pi / L
        self.kappa = self.unit * np.sqrt(self.labels.astype(float))
        kap = self.unit * np.sqrt(np.broadcast_to(msq, (N,) * d).astype(float))
        with np.errstate(invalid="ignore", divide="ignore"):
            self.khat = [np.where(kap > 0, self.unit * c / np.where(kap > 0, kap, 1), 0.0) for c in mesh]

    def expand(self, per_label: np.ndarray) -> np.ndarray:
        return per_label[self.inverse]


@lru_cache(maxsize=8)
def frequency_grid(d: int, N: int, L: float) -> FrequencyGrid:
    return FrequencyGrid(d, N, L)


@lru_cache(maxsize=64)
def _leggauss(m: int):
    return np.polynomial.legendre.leggauss(m)


def _nodes(breaks: Sequence[float], kappa_max: float):
    xs, ws = [], []
    for a, b in zip(breaks[:-1], breaks[1:]):
        if b <= a:
            continue
        m = int(kappa_max * (b - a) * 0.6) + 96
        x, w = _leggauss(m)
        xs.append(0.5 * (b - a) * x + 0.5 * (b + a))
        ws.append(0.5 * (b - a) * w)
    return np.concatenate(xs), np.concatenate(ws)


def _radial_moments(fg: FrequencyGrid, profile: Callable, breaks, which: str, chunk: int = 512):
    """omega_d int f(r) r^p Kern(kappa r) r^{d-1} dr for every |k| label.

    which: "F" (p=0, K), "dF" (p=1, K'), "ddF" (p=2, K''), "dF_over_k" (p=2, K'(x)/x).
    """
    d = fg.d
    K, K1, K2, K1x = _kernels(d)
    r, w = _nodes(breaks, float(fg.kappa.max()))
    f = np.asarray(profile(r), float) * w * r ** (d - 1) * sphere_area(d)
    kern, p = {"F": (K, 0), "dF": (K1, 1), "ddF": (K2, 2), "dF_over_k": (K1x, 2)}[which]
    f = f * r**p
    out = np.empty(fg.kappa.size)
    for s in range(0, fg.kappa.size, chunk):
        kap = fg.kappa[s:s + chunk]
        out[s:s + chunk] = kern(np.outer(kap, r)) @ f
    return out


def radial_transform(fg: FrequencyGrid, profile: Callable, breaks, power: float = 0.0,
                     chunk: int = 512) -> np.ndarray:
    """omega_d int profile(r) r^power K(kappa r) r^{d-1} dr per |k| label.

    A nonzero ``power`` (e.g. -a for c|x|^{-a}) is integrated exactly on the
    first piece by a Gauss-Jacobi rule, so integrable singularities at r = 0
    cost nothing.
    """
    d = fg.d
    K = _kernels(d)[0]
    kmax = float(fg.kappa.max())
    r, w = _nodes(breaks[1:], kmax) if len(breaks) > 2 else (np.empty(0), np.empty(0))
    f = np.asarray(profile(r), float) * r ** (power + d - 1) * w if r.size else r
    beta = power + d - 1
    a0, b0 = breaks[0], breaks[1]
    m = int(kmax * (b0 - a0) * 0.6) + 96
    if beta == 0:
        x, wj = _leggauss(m)
    else:
        x, wj = sp.roots_jacobi(m, 0.0, beta)
    half = 0.5 * (b0 - a0)
    r0 = half * (x + 1) + a0
    # (1+x)^beta weight maps to (r/half)^beta when a0 = 0
    w0 = wj * half ** (beta + 1) if beta != 0 else wj * half
    f0 = np.asarray(profile(r0), float) * w0
    r = np.concatenate([r0, r])
    f = np.concatenate([f0, f]) * sphere_area(d)
    out = np.empty(fg.kappa.size)
    for s in range(0, fg.kappa.size, chunk):
        out[s:s + chunk] = K(np.outer(fg.kappa[s:s + chunk], r)) @ f
    return out


def scalar_weight(fg: FrequencyGrid, profile: Callable, breaks) -> np.ndarray:
    """B_tilde(k) for B(x) = profile(|x|)."""
    return fg.expand(_radial_moments(fg, profile, breaks, "F"))


def vector_weight(fg: FrequencyGrid, profile: Callable, breaks) -> list[np.ndarray]:
    """Transforms of x_i f(|x|): -i F'(|k|) k_i/|k| (zero at k = 0)."""
    dF = fg.expand(_radial_moments(fg, profile, breaks, "dF"))
    return [-1j * dF * kh for kh in fg.khat]


def tensor_weight(fg: FrequencyGrid, profile: Callable, breaks) -> dict:
    """Transforms of x_i x_j f(|x|) = -d_{k_i} d_{k_j} F(|k|), keyed by (i, j), i <= j."""
    ddF = fg.expand(_radial_moments(fg, profile, breaks, "ddF"))
    dFk = fg.expand(_radial_moments(fg, profile, breaks, "dF_over_k"))
    out = {}
    for i in range(fg.d):
        for j in range(i, fg.d):
            kk = fg.khat[i] * fg.khat[j]
            delta = 1.0 if i == j else 0.0
            out[(i, j)] = -(ddF * kk + dFk * (delta - kk))
    return out


def pair_with(F_hat: np.ndarray, B_tilde: np.ndarray, L: float) -> complex:
    """int B F over the box, from the centered spectrum of F and the weight transform."""
    N = F_hat.shape[0]
    d = F_hat.ndim
    del L
    return np.sum(F_hat * B_tilde) / N**d


def product_spectrum(grid: GridSpec, factors: Sequence[np.ndarray], conj: Sequence[bool] = ()) -> np.ndarray:
    """Centered spectrum of a product of interpolants given by their grid spectra.

    The padded size is len(factors) * n, enough to hold the product band.
    """
    N = len(factors) * grid.n
    conj = list(conj) + [False] * (len(factors) - len(conj))
    prod = 1.0
    for s, c in zip(factors, conj):
        v = fine_values(s, N)
        prod = prod * (np.conj(v) if c else v)
    return centered_spectrum(np.broadcast_to(prod, (N,) * grid.d))
