"""Uniform periodic grids with spectral calculus.

Coordinates are box-centered: along each axis x_j = -L/2 + j*h.  The forward
transform is the unscaled DFT and the inverse carries 1/n^d (numpy/scipy
convention); physical integrals always go through :func:`integrate` so the
normalization lives in one place.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Sequence

import numpy as np
import scipy.fft as sfft


class ConvolutionResidueError(ValueError):
    """Raised when a convolution of real inputs comes back with a large imaginary part."""


@dataclass(frozen=True)
class GridSpec:
    d: int
    n: int
    L: float

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise ValueError(f"dimension must be 1, 2 or 3, got {self.d}")
        if self.n < 8 or not _fft_friendly(self.n):
            raise ValueError(f"n must be an even 5-smooth integer >= 8 (e.g. 32, 48, 64), got {self.n}")
        if not self.L > 0:
            raise ValueError(f"box length must be positive, got {self.L}")

    @property
    def h(self) -> float:
        return self.L / self.n

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.d

    @property
    def cell_volume(self) -> float:
        return self.h**self.d

    @property
    def axis(self) -> np.ndarray:
        return _axis(self.n, self.L)

    @property
    def freq_axis(self) -> np.ndarray:
        return _freq_axis(self.n, self.L)

    def coords(self) -> list[np.ndarray]:
        """Open-mesh coordinate arrays, one per axis, broadcastable to ``shape``."""
        return _open_mesh(self.axis, self.d)

    def freqs(self) -> list[np.ndarray]:
        """Open-mesh angular frequencies xi_i = 2*pi*k/L in FFT order."""
        return _open_mesh(self.freq_axis, self.d)

    def radius_squared(self) -> np.ndarray:
        return _radius_squared(self.n, self.L, self.d)

    def freq_squared(self) -> np.ndarray:
        return _freq_squared(self.n, self.L, self.d)

    def points(self) -> np.ndarray:
        """All grid points as an array of shape ``shape + (d,)``."""
        return np.stack(np.broadcast_arrays(*self.coords()), axis=-1)

    def index_of_origin(self) -> tuple[int, ...]:
        return (self.n // 2,) * self.d


def _fft_friendly(n: int) -> bool:
    # even keeps the origin on the grid; 5-smooth keeps the transforms fast
    if n % 2:
        return False
    for p in (2, 3, 5):
        while n % p == 0:
            n //= p
    return n == 1


# Cached per (n, L, d); lru_cache lookups are thread safe.
@lru_cache(maxsize=64)
def _axis(n: int, L: float) -> np.ndarray:
    x = -L / 2 + np.arange(n) * (L / n)
    x.flags.writeable = False
    return x


@lru_cache(maxsize=64)
def _freq_axis(n: int, L: float) -> np.ndarray:
    xi = 2 * np.pi * np.fft.fftfreq(n, d=L / n)
    xi.flags.writeable = False
    return xi


def _open_mesh(axis: np.ndarray, d: int) -> list[np.ndarray]:
    out = []
    for i in range(d):
        shape = [1] * d
        shape[i] = axis.size
        out.append(axis.reshape(shape))
    return out


@lru_cache(maxsize=16)
def _radius_squared(n: int, L: float, d: int) -> np.ndarray:
    r2 = sum(c**2 for c in _open_mesh(_axis(n, L), d))
    r2 = np.broadcast_to(r2, (n,) * d).copy()
    r2.flags.writeable = False
    return r2


@lru_cache(maxsize=16)
def _freq_squared(n: int, L: float, d: int) -> np.ndarray:
    k2 = sum(k**2 for k in _open_mesh(_freq_axis(n, L), d))
    k2 = np.broadcast_to(k2, (n,) * d).copy()
    k2.flags.writeable = False
    return k2


# transforms are deterministic for any worker count; scipy splits along axes
_WORKERS = -1


def fft(values: np.ndarray) -> np.ndarray:
    return sfft.fftn(values, workers=_WORKERS)


def ifft(spectrum: np.ndarray) -> np.ndarray:
    return sfft.ifftn(spectrum, workers=_WORKERS)


class SpectralField:
    """A complex wavefunction sampled on a grid, with a lazily computed spectrum.

    Instances are immutable: both arrays are marked read-only.
    """

    __slots__ = ("grid", "_values", "_spectrum", "__weakref__")

    def __init__(self, grid: GridSpec, values=None, spectrum=None):
        if values is None and spectrum is None:
            raise ValueError("need values or spectrum")
        self.grid = grid
        self._values = _frozen(values, grid)
        self._spectrum = _frozen(spectrum, grid)

    @classmethod
    def from_spectrum(cls, grid: GridSpec, spectrum: np.ndarray) -> "SpectralField":
        return cls(grid, spectrum=spectrum)

    @property
    def values(self) -> np.ndarray:
        if self._values is None:
            self._values = _frozen(ifft(self._spectrum), self.grid)
        return self._values

    @property
    def spectrum(self) -> np.ndarray:
        if self._spectrum is None:
            self._spectrum = _frozen(fft(self._values), self.grid)
        return self._spectrum

    def density(self) -> np.ndarray:
        v = self.values
        return v.real**2 + v.imag**2

    def norm(self) -> float:
        return float(np.sqrt(integrate(self.grid, self.density())))

    def conj(self) -> "SpectralField":
        return SpectralField(self.grid, np.conj(self.values))

    def scaled(self, factor: complex) -> "SpectralField":
        return SpectralField(self.grid, self.values * factor)

    def __repr__(self):
        return f"SpectralField({self.grid})"


def _frozen(arr, grid: GridSpec):
    if arr is None:
        return None
    arr = np.asarray(arr, dtype=complex)
    if arr.shape != grid.shape:
        raise ValueError(f"array shape {arr.shape} does not match grid {grid.shape}")
    if arr.flags.writeable:
        arr = arr.copy() if arr.base is not None else arr
        arr.flags.writeable = False
    return arr


def integrate(grid: GridSpec, f) -> complex | float:
    """Trapezoidal (= rectangle, on a periodic grid) quadrature h^d * sum(f)."""
    total = np.sum(f) * grid.cell_volume
    return total.item() if isinstance(total, np.generic) else total


def spectral_integral(grid: GridSpec, spectrum: np.ndarray) -> float:
    """Parseval side of integrate(|f|^2): h^d / n^d * sum |f_hat|^2."""
    return float(np.sum(np.abs(spectrum) ** 2) * grid.cell_volume / grid.n**grid.d)


def _as_field(grid, f):
    return f if isinstance(f, SpectralField) else SpectralField(grid, f)


def gradient(phi: SpectralField) -> tuple[SpectralField, ...]:
    grid = phi.grid
    spec = phi.spectrum
    return tuple(SpectralField.from_spectrum(grid, 1j * xi * spec) for xi in grid.freqs())


def partial(phi: SpectralField, axes: Sequence[int]) -> SpectralField:
    """Mixed spectral derivative, one factor (i xi_a) per entry of ``axes``."""
    grid = phi.grid
    xis = grid.freqs()
    mult = 1.0
    for a in axes:
        mult = mult * (1j * xis[a])
    return SpectralField.from_spectrum(grid, mult * phi.spectrum)


def laplacian(phi: SpectralField) -> SpectralField:
    grid = phi.grid
    return SpectralField.from_spectrum(grid, -grid.freq_squared() * phi.spectrum)


def divergence(components: Sequence[SpectralField]) -> SpectralField:
    grid = components[0].grid
    spec = sum(1j * xi * c.spectrum for xi, c in zip(grid.freqs(), components))
    return SpectralField.from_spectrum(grid, spec)


def real_gradient(grid: GridSpec, f: np.ndarray) -> list[np.ndarray]:
    """Spectral gradient of a real sampled function, returned as real arrays."""
    spec = fft(f)
    return [ifft(1j * xi * spec).real for xi in grid.freqs()]


def kinetic_density_integral(phi: SpectralField) -> float:
    """||grad phi||^2 evaluated on the spectral side."""
    grid = phi.grid
    s = phi.spectrum
    return float(np.sum(grid.freq_squared() * (s.real**2 + s.imag**2)) * grid.cell_volume / grid.n**grid.d)


def kernel_transform(grid: GridSpec, kernel_samples: np.ndarray) -> np.ndarray:
    """Transform of box-centered kernel samples, moved so z = 0 sits at index 0."""
    return fft(np.fft.ifftshift(kernel_samples))


def convolve(grid: GridSpec, kernel_samples: np.ndarray, density: np.ndarray,
             kernel_hat: np.ndarray | None = None) -> np.ndarray:
    """h^d-weighted circular convolution (K * rho)(x_i) = h^d sum_j K(x_i - x_j) rho(x_j).

    ``kernel_samples`` are given at box-centered points (the origin at index n/2
    along each axis).  Pass a precomputed ``kernel_hat`` to skip one transform.
    """
    if kernel_hat is None:
        kernel_hat = kernel_transform(grid, kernel_samples)
    out = ifft(kernel_hat * fft(density)) * grid.cell_volume
    scale = np.max(np.abs(out))
    resid = np.max(np.abs(out.imag))
    if scale > 0 and resid > 1e-8 * scale:
        raise ConvolutionResidueError(f"imaginary residue {resid:.3e} relative to {scale:.3e}")
    return out.real
