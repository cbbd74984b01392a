import math

import numpy as np
import pytest

from hartreelab import quadrature as Q
from hartreelab.grid import GridSpec, SpectralField, integrate


def test_pad_spectrum_preserves_samples():
    grid = GridSpec(1, 32, 10.0)
    x = grid.coords()[0]
    f = np.exp(-x**2) * (1 + 0.3j * x)
    fine = Q.fine_values(SpectralField(grid, f).spectrum, 96)
    assert np.allclose(fine[::3], f, atol=1e-13)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_gaussian_radial_transform(d):
    # int e^{-|x|^2/2} e^{i k.x} dx = (2 pi)^{d/2} e^{-|k|^2/2}; a cutoff at r = 9 costs e^{-40}
    fg = Q.frequency_grid(d, 16, 12.0)
    got = Q.radial_transform(fg, lambda r: np.exp(-r * r / 2), [0.0, 9.0])
    assert np.max(np.abs(got - (2 * math.pi) ** (d / 2) * np.exp(-fg.kappa**2 / 2))) < 1e-12


def test_singular_radial_transform_at_zero_frequency():
    # int_{|x|<1} |x|^{-2.2} dx = 4 pi / 0.8 in three dimensions
    fg = Q.frequency_grid(3, 8, 10.0)
    got = Q.radial_transform(fg, lambda r: np.ones_like(r), [0.0, 1.0], power=-2.2)
    assert math.isclose(got[0], 4 * math.pi / 0.8, rel_tol=1e-12)


def test_vector_and_tensor_weights_against_gaussian_moments():
    # weight x_i x_j e^{-|x|^2/2}: transform is (delta_ij - k_i k_j)(2pi)^{3/2} e^{-k^2/2}
    d = 3
    fg = Q.frequency_grid(d, 8, 12.0)
    T = Q.tensor_weight(fg, lambda r: np.exp(-r * r / 2), [0.0, 9.0])
    k = np.meshgrid(*[np.fft.fftfreq(8, 1 / 8) * fg.unit] * 3, indexing="ij")
    g = (2 * math.pi) ** 1.5 * np.exp(-sum(c * c for c in k) / 2)
    for (i, j), w in T.items():
        assert np.max(np.abs(w - ((i == j) - k[i] * k[j]) * g)) < 1e-11
    Vw = Q.vector_weight(fg, lambda r: np.exp(-r * r / 2), [0.0, 9.0])
    for i in range(d):
        assert np.max(np.abs(Vw[i] - 1j * k[i] * g)) < 1e-11


def test_exact_pairing_beats_grid_sum_on_rough_weight():
    # int_{|x|<2} |f|^2 for a band-limited f, exact pairing vs the grid sum
    grid = GridSpec(1, 32, 16.0)
    x = grid.coords()[0]
    f = np.exp(-x**2 / 2) + 0j
    spec = SpectralField(grid, f).spectrum
    F = Q.product_spectrum(grid, [spec, spec], conj=[False, True])
    fg = Q.frequency_grid(1, F.shape[0], grid.L)
    B = Q.scalar_weight(fg, lambda r: np.ones_like(r), [0.0, 2.0])
    exact = math.sqrt(math.pi) * math.erf(2.0)
    got = Q.pair_with(F, B, grid.L).real
    grid_sum = integrate(grid, np.abs(f) ** 2 * (np.abs(x) < 2))
    assert abs(got - exact) < 1e-8
    assert abs(grid_sum - exact) > 100 * abs(got - exact)
