"""Virial functionals, localized virial terms and the Glassey envelope.

All traces are mixture sums over members.  psi_R(x) = R psi(|x|^2/R) is the
truncated weight from :mod:`hartreelab.cutoff`; its derivatives are analytic
while the member derivatives are spectral.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np

from . import grid as G
from .cutoff import CutoffProfile, a_vector, lemma18_check, psi_R_derivs, psi_R_hessian, weight_w
from . import quadrature as Q
from .grid import GridSpec, integrate
from .hierarchy import Ensemble, NonRadialEnsembleError, derived, energy_E1, interaction_trace, kinetic_trace
from .potentials import GridKernel, Potential, dilation_kernel_samples, kernel_samples


# ---------------------------------------------------------------- basic functionals

def momentum_density(ens: Ensemble) -> np.ndarray:
    """P = sum_i w_i 2 Im(conj(phi_i) grad phi_i), shape (d,) + grid shape."""
    P = np.zeros((ens.grid.d,) + ens.grid.shape)
    for w, phi in ens:
        vb = np.conj(phi.values)
        for i, g in enumerate(derived(phi).grad):
            P[i] += w * 2 * np.imag(vb * g)
    return P


def variance(ens: Ensemble) -> float:
    r2 = ens.grid.radius_squared()
    return sum(w * integrate(ens.grid, r2 * derived(phi).density) for w, phi in ens)


def variance_rate(ens: Ensemble) -> float:
    P = momentum_density(ens)
    xs = ens.grid.coords()
    return 2 * integrate(ens.grid, sum(x * p for x, p in zip(xs, P)))


@lru_cache(maxsize=32)
def _psi_data_cached(grid: GridSpec, profile: CutoffProfile, R: float):
    x = grid.points()
    return psi_R_derivs(profile, x, R), psi_R_hessian(profile, x, R)


def _psi_data(grid, profile, R):
    return _psi_data_cached(grid, profile, float(R))[0]


def _psi_hess(grid, profile, R):
    return _psi_data_cached(grid, profile, float(R))[1]


# ---------------------------------------------------------------- exact weights

class ExactWeights:
    """Fourier transforms of the psi_R weights for band-limited quadrature.

    psi_R - 2R, grad psi_R, the Hessian of psi_R and its bilaplacian all vanish
    for |x|^2 >= 3R, so their transforms are finite radial integrals.  Two-factor
    products live on the 2n grid, the three-factor interaction product on 3n.
    """

    def __init__(self, grid: GridSpec, profile: CutoffProfile, R: float):
        self.grid, self.R = grid, R
        d, n, L = grid.d, grid.n, grid.L
        breaks = [0.0, math.sqrt(R), math.sqrt(3 * R)]

        def s(r):
            return r * r / R

        def bilap(r):
            pts = np.zeros(np.shape(r) + (d,))
            pts[..., 0] = r
            return psi_R_derivs(profile, pts, R).bilaplacian

        fg2 = Q.frequency_grid(d, 2 * n, L)
        self.rest = Q.scalar_weight(fg2, lambda r: R * (2.0 - profile.psi(s(r))), breaks)
        self.diag = Q.scalar_weight(fg2, lambda r: 2 * profile.psi_deriv(s(r), 1), breaks)
        self.outer = Q.tensor_weight(fg2, lambda r: 4 * profile.psi_deriv(s(r), 2) / R, breaks)
        self.bilap = Q.scalar_weight(fg2, bilap, breaks)
        self._profile = profile
        self._breaks = breaks
        self._grad = None

    @property
    def grad(self):
        if self._grad is None:
            fg3 = Q.frequency_grid(self.grid.d, 3 * self.grid.n, self.grid.L)
            prof = self._profile
            R = self.R
            self._grad = Q.vector_weight(fg3, lambda r: 2 * prof.psi_deriv(r * r / R, 1), self._breaks)
        return self._grad

    def hessian_pair(self, spectra: dict) -> complex:
        """int H(psi_R)_ij G_ij summed over i, j, for symmetric G given by i <= j spectra."""
        d = self.grid.d
        total = 0.0
        for i in range(d):
            total += Q.pair_with(spectra[(i, i)], self.diag, self.grid.L)
        for (i, j), T in self.outer.items():
            total += (1 if i == j else 2) * Q.pair_with(spectra[(i, j)], T, self.grid.L)
        return total


def exact_supported(grid: GridSpec, R: float) -> bool:
    """The band-limited path needs the psi_R transition region inside the box."""
    return math.sqrt(3 * R) < grid.L / 2


@lru_cache(maxsize=16)
def exact_weights(grid: GridSpec, profile: CutoffProfile, R: float) -> ExactWeights:
    return ExactWeights(grid, profile, float(R))


def _member_spectra(phi, key: str) -> dict:
    """Centered spectra of the quadratic products used by the localized identity."""
    D = derived(phi)
    if key in D.extra:
        return D.extra[key]
    grid = phi.grid
    d = grid.d
    N = 2 * grid.n
    spec = phi.spectrum
    xis = grid.freqs()
    pairs = [(i, j) for i in range(d) for j in range(i, d)]
    out = {}
    if key == "rho":
        v = Q.fine_values(spec, N)
        out = Q.centered_spectrum(v.real**2 + v.imag**2)
    elif key in ("mixed", "swapped"):
        # d_i phi conj(d_j phi); "swapped" is d_j phi conj(d_i phi)
        g = [Q.fine_values(1j * xi * spec, N) for xi in xis]
        for i, j in pairs:
            a, b = (i, j) if key == "mixed" else (j, i)
            out[(i, j)] = Q.centered_spectrum(g[a] * np.conj(g[b]))
    elif key == "hxx":          # d_i d_j phi conj(phi)
        vb = np.conj(Q.fine_values(spec, N))
        for i, j in pairs:
            out[(i, j)] = Q.centered_spectrum(Q.fine_values(-xis[i] * xis[j] * spec, N) * vb)
    else:
        raise KeyError(key)
    D.extra[key] = out
    return out


def _real_hessian_pair(W: ExactWeights, spectra: dict) -> float:
    # H is real and symmetric, so int H : Re(G) = Re int H : G
    return float(np.real(W.hessian_pair(spectra)))


def truncated_variance(ens: Ensemble, profile: CutoffProfile, R: float, method: str = "auto") -> float:
    """Tr(psi_R gamma^(1))."""
    if _use_exact(ens.grid, R, method):
        W = exact_weights(ens.grid, profile, R)
        total = 0.0
        for w, phi in ens:
            m = integrate(ens.grid, derived(phi).density)
            total += w * (2 * R * m - float(np.real(Q.pair_with(_member_spectra(phi, "rho"), W.rest, ens.grid.L))))
        return total
    psi = _psi_data(ens.grid, profile, R).value
    return sum(w * integrate(ens.grid, psi * derived(phi).density) for w, phi in ens)


def _use_exact(grid, R, method):
    if method == "exact":
        if not exact_supported(grid, R):
            raise ValueError(f"R = {R} puts the cutoff transition outside the box")
        return True
    if method == "grid":
        return False
    if method == "auto":
        return exact_supported(grid, R)
    raise ValueError(f"unknown method {method!r}")


# ---------------------------------------------------------------- virial identity

def dilation_interaction(ens: Ensemble, kernel: GridKernel) -> float:
    """sum_i w_i int int rho_i(x) rho_i(y) (x - y).grad V(x - y) via the z.grad V kernel."""
    grid = ens.grid
    if kernel.is_zero:
        return 0.0
    hat = kernel.dilation_hat()
    total = 0.0
    for w, phi in ens:
        rho = derived(phi).density
        total += w * integrate(grid, rho * G.convolve(grid, None, rho, kernel_hat=hat))
    return total


def virial_rhs(ens: Ensemble, kernel: GridKernel, mu: int, form: str = "symmetric") -> float:
    """8 Tr(-Lap gamma^(1)) - 4 mu int gamma^(2)(x,y,x,y) x.grad V(x-y).

    form="symmetric" uses the antisymmetrized pair integral
    -2 mu sum w int int rho rho (x-y).grad V(x-y) with the z.grad V kernel;
    form="direct" uses -4 mu sum w int rho x.grad(V * rho) with the spectral
    gradient of the same grid convolution that drives the flow.
    """
    kin = 8 * kinetic_trace(ens)
    if kernel.is_zero:
        return kin
    if form == "symmetric":
        return kin - 2 * mu * dilation_interaction(ens, kernel)
    if form == "direct":
        xs = ens.grid.coords()
        s = 0.0
        for w, phi in ens:
            D = derived(phi)
            _, gW = D.interaction(kernel)
            s += w * integrate(ens.grid, D.density * sum(x * g for x, g in zip(xs, gW)))
        return kin - 4 * mu * s
    raise ValueError(f"unknown form {form!r}")


# ---------------------------------------------------------------- localized identity

def _hessian_contractions(ens: Ensemble, H: np.ndarray):
    """Grid sums (2 Re int H:H_xx', 2 Re int H:H_xx, 2 Re int H:H_x'x) as mixture sums."""
    d = ens.grid.d
    mixed = hxx = xpx = 0.0
    for w, phi in ens:
        D = derived(phi)
        vb = np.conj(phi.values)
        gb = [np.conj(g) for g in D.grad]
        for i in range(d):
            for j in range(d):
                Hij = H[..., i, j]
                mixed += w * 2 * integrate(ens.grid, Hij * np.real(D.grad[i] * gb[j]))
                hxx += w * 2 * integrate(ens.grid, Hij * np.real(D.hess(i, j) * vb))
                xpx += w * 2 * integrate(ens.grid, Hij * np.real(D.grad[j] * gb[i]))
    return mixed, hxx, xpx


def _exact_contraction(ens: Ensemble, W: ExactWeights, key: str) -> float:
    return sum(w * 2 * _real_hessian_pair(W, _member_spectra(phi, key)) for w, phi in ens)


def _force_spectra(phi, kernel: GridKernel, gW) -> list:
    """Centered spectra of rho d_i(V * rho) on the 3n grid; independent of R, so cached."""
    D = derived(phi)
    hit = D.extra.get(("force", id(kernel)))
    if hit is not None and hit[0] is kernel:
        return hit[1]
    N = 3 * phi.grid.n
    v = Q.fine_values(phi.spectrum, N)
    rho_f = v.real**2 + v.imag**2
    del v
    out = [Q.centered_spectrum(rho_f * Q.fine_values(G.fft(g), N)) for g in gW]
    D.extra[("force", id(kernel))] = (kernel, out)
    return out


def localized_interaction(ens: Ensemble, kernel: GridKernel, profile: CutoffProfile, R: float,
                          method: str = "auto") -> float:
    """sum_i w_i int rho_i grad psi_R . grad(V * rho_i)."""
    if kernel.is_zero:
        return 0.0
    grid = ens.grid
    d = grid.d
    exact = _use_exact(grid, R, method)
    if exact:
        Wt = exact_weights(grid, profile, R)
    else:
        gpsi = _psi_data(grid, profile, R).gradient
    total = 0.0
    for w, phi in ens:
        D = derived(phi)
        _, gW = D.interaction(kernel)
        if exact:
            acc = sum(Q.pair_with(F, Wt.grad[i], grid.L) for i, F in enumerate(_force_spectra(phi, kernel, gW)))
            total += w * float(np.real(acc))
        else:
            total += w * integrate(grid, D.density * sum(gpsi[..., i] * gW[i] for i in range(d)))
    return total


def localized_virial_rhs(ens: Ensemble, kernel: GridKernel, mu: int, profile: CutoffProfile, R: float,
                         method: str = "auto") -> float:
    """2 Re int H(psi_R) : (H_xx' - H_xx) - 2 mu int gamma^(2) grad psi_R(x) . grad V(x - y).

    With method="auto" the band-limited quadrature is used whenever the cutoff
    transition fits in the box, otherwise plain grid sums.
    """
    if _use_exact(ens.grid, R, method):
        W = exact_weights(ens.grid, profile, R)
        kin = _exact_contraction(ens, W, "mixed") - _exact_contraction(ens, W, "hxx")
    else:
        mixed, hxx, _ = _hessian_contractions(ens, _psi_hess(ens.grid, profile, R))
        kin = mixed - hxx
    return kin - 2 * mu * localized_interaction(ens, kernel, profile, R, method)


@dataclass
class Lemma40Result:
    lhs: float        # 2 Re int H(psi) : H_xx
    bilaplacian: float
    cross: float      # 2 Re int H(psi) : H_x'x
    residual: float


def bilaplacian_term(ens: Ensemble, profile: CutoffProfile, R: float, method: str = "auto") -> float:
    """int Lap^2(psi_R) gamma^(1)(x, x)."""
    if _use_exact(ens.grid, R, method):
        W = exact_weights(ens.grid, profile, R)
        return sum(w * float(np.real(Q.pair_with(_member_spectra(phi, "rho"), W.bilap, ens.grid.L)))
                   for w, phi in ens)
    bil = _psi_data(ens.grid, profile, R).bilaplacian
    return sum(w * integrate(ens.grid, bil * derived(phi).density) for w, phi in ens)


def lemma40_check(ens: Ensemble, profile: CutoffProfile, R: float, method: str = "auto") -> Lemma40Result:
    """Evaluate both sides of the bilaplacian integration-by-parts identity independently."""
    b = bilaplacian_term(ens, profile, R, method)
    if _use_exact(ens.grid, R, method):
        W = exact_weights(ens.grid, profile, R)
        hxx = _exact_contraction(ens, W, "hxx")
        xpx = _exact_contraction(ens, W, "swapped")
    else:
        _, hxx, xpx = _hessian_contractions(ens, _psi_hess(ens.grid, profile, R))
    return Lemma40Result(hxx, b, xpx, abs(hxx - (b - xpx)))


# ---------------------------------------------------------------- localized bound terms

@lru_cache(maxsize=4)
def lipschitz_constant(profile: CutoffProfile) -> float:
    """sup_s Phi(s) + 2 s rho(s): the Lipschitz constant of x Phi(|x|^2/R), any R."""
    s = np.linspace(0.0, 3.0, 300001)
    return float(np.max(profile.Phi(s) + 2 * s * profile.rho(s)))


@lru_cache(maxsize=8)
def pair_constant(profile: CutoffProfile, d: int, samples: int = 100_000, seed: int = 0) -> float:
    """Sampled constant C with |a(x,y)| <= C (w(x) + w(y)) |x - y| near the diagonal."""
    res = lemma18_check(profile, 1.0, samples, d, seed)
    if res.violations:
        raise ArithmeticError(f"{res.violations} pairs with vanishing bracket but nonzero a")
    return res.max_ratio


def gradient_kernel_samples(V: Potential, grid: GridSpec) -> list[np.ndarray]:
    """grad V sampled at box-centered points; zero at the origin and on the wrap seam
    so that each component is exactly odd on the torus."""
    from .potentials import gradient as grad_V

    x = grid.points()
    r2 = grid.radius_squared()
    origin = grid.index_of_origin()
    xs = x.copy()
    xs[origin] = 1.0
    g = grad_V(V, xs)
    g[origin] = 0.0
    out = []
    for i in range(grid.d):
        c = g[..., i].copy()
        sl = [slice(None)] * grid.d
        sl[i] = 0
        c[tuple(sl)] = 0.0
        out.append(c)
    return out


def third_term_signed(ens: Ensemble, V: Potential, profile: CutoffProfile, R: float) -> float:
    """(III) = -2 int a . grad V gamma^(2), via a(x,y) = g(x) - g(y), g(x) = x Phi(|x|^2/R).

    Oddness of grad V turns the pair integral into -4 sum w int rho g . (grad V * rho).
    """
    grid = ens.grid
    if V.family == "zero":
        return 0.0
    comps = gradient_kernel_samples(V, grid)
    hats = [G.kernel_transform(grid, c) for c in comps]
    Phi = profile.Phi(grid.radius_squared() / R)
    xs = grid.coords()
    total = 0.0
    for w, phi in ens:
        rho = derived(phi).density
        acc = 0.0
        for x, c, hat in zip(xs, comps, hats):
            acc = acc + x * Phi * G.convolve(grid, c, rho, kernel_hat=hat)
        total += w * integrate(grid, rho * acc)
    return -4 * total


def third_term_bounds(ens: Ensemble, V: Potential, profile: CutoffProfile, R: float,
                      pair_c: float | None = None) -> tuple[float, float]:
    """FFT upper bounds for (IIIa) and (IIIb).

    (IIIa) <= 2 L_g int int_{|z| > sqrt R} |z| |grad V(z)| gamma^(2), L_g the Lipschitz constant;
    (IIIb) <= 2 C int int_{|z| <= sqrt R} (w(x) + w(y)) |z| |grad V(z)| gamma^(2)
           = 4 C sum w int w rho (K_in * rho),  C the sampled pair constant.
    """
    grid = ens.grid
    if V.family == "zero":
        return 0.0, 0.0
    if pair_c is None:
        pair_c = pair_constant(profile, grid.d)
    K = np.abs(dilation_kernel_samples(V, grid))
    inside = grid.radius_squared() <= R
    K_out = np.where(inside, 0.0, K)
    K_in = np.where(inside, K, 0.0)
    hat_out = G.kernel_transform(grid, K_out)
    hat_in = G.kernel_transform(grid, K_in)
    wgt = weight_w(profile, np.sqrt(grid.radius_squared()), R)
    a_part = b_part = 0.0
    for w, phi in ens:
        rho = derived(phi).density
        a_part += w * integrate(grid, rho * G.convolve(grid, K_out, rho, kernel_hat=hat_out))
        b_part += w * integrate(grid, wgt * rho * G.convolve(grid, K_in, rho, kernel_hat=hat_in))
    return 2 * lipschitz_constant(profile) * a_part, 4 * pair_c * b_part


def third_term_reference(ens: Ensemble, V: Potential, profile: CutoffProfile, R: float,
                         periodic: bool = True, chunk: int = 256) -> dict:
    """Direct O(N^2) pair sums for (III) and the exact |.| integrals (IIIa), (IIIb).

    Intended for coarse grids (n <= 16 in d = 3).  With ``periodic`` the pair
    separation is the minimal periodic image, matching the FFT paths.
    """
    from .potentials import gradient as grad_V

    grid = ens.grid
    pts = grid.points().reshape(-1, grid.d)
    N = pts.shape[0]
    dens = [derived(phi).density.ravel() for _, phi in ens]
    signed = ia = ib = 0.0
    sqrtR = math.sqrt(R)
    outer = np.sum(pts**2, axis=1) >= R
    for start in range(0, N, chunk):
        x = pts[start:start + chunk, None, :]
        z = x - pts[None, :, :]
        if periodic:
            z = z - grid.L * np.round(z / grid.L)
            # the seam separation -L/2 has no odd partner; the FFT kernel zeroes it
            seam = np.any(np.isclose(z, -grid.L / 2), axis=-1)
        else:
            seam = np.zeros(z.shape[:2], bool)
        y = x - z
        dist = np.linalg.norm(z, axis=-1)
        diag = dist == 0
        zz = np.where(diag[..., None], 1.0, z)
        gv = grad_V(V, zz)
        gv[diag] = 0.0
        gv[seam] = 0.0
        a = a_vector(profile, np.broadcast_to(x, z.shape), y, R)
        integrand = np.sum(a * gv, axis=-1)
        in_A = outer[start:start + chunk, None] | (np.sum(y**2, axis=-1) >= R)
        near = dist <= sqrtR
        for w, rho in zip(ens.weights, dens):
            pair = rho[start:start + chunk, None] * rho[None, :]
            signed += w * np.sum(integrand * pair)
            ab = np.abs(integrand) * pair * in_A
            ia += w * np.sum(ab[~near])
            ib += w * np.sum(ab[near])
    c = grid.cell_volume**2
    return {"III": -2 * signed * c, "IIIa": 2 * ia * c, "IIIb": 2 * ib * c}


@dataclass
class Lemma43Terms:
    R: float
    sixteenE1: float
    II: float
    III: float        # signed value, for reference
    IIIa: float
    IIIb: float
    IV: float
    D: float          # the dropped nonpositive defect term
    bound: float
    exact_sum: float  # 16E1 + II + D + III + IV, which equals the second derivative

    def as_dict(self):
        return asdict(self)


def lemma43_terms(ens: Ensemble, kernel: GridKernel, profile: CutoffProfile, R: float,
                  mu: int = -1, pair_c: float | None = None) -> Lemma43Terms:
    if mu != -1:
        raise ValueError("the localized bound is stated for the focusing case mu = -1")
    if not ens.radial:
        raise NonRadialEnsembleError("lemma43_terms needs a radial ensemble")
    grid = ens.grid
    V = kernel.potential
    E1 = energy_E1(ens, kernel, mu)
    s = grid.radius_squared() / R
    weight = profile.Phi(s) + 2 * s * profile.rho(s)
    II = -8 * sum(w * integrate(grid, weight * sum(np.abs(g) ** 2 for g in derived(phi).grad))
                  for w, phi in ens)
    IV = -bilaplacian_term(ens, profile, R)
    if kernel.is_zero:
        III = IIIa = IIIb = D = 0.0
    else:
        III = third_term_signed(ens, V, profile, R)
        IIIa, IIIb = third_term_bounds(ens, V, profile, R, pair_c)
        # 4 int int rho rho (V + z.grad V / 2)
        D = 4 * interaction_trace(ens, kernel) + 2 * dilation_interaction(ens, kernel)
    bound = 16 * E1 + II + IIIa + IIIb + IV
    return Lemma43Terms(R, 16 * E1, II, III, IIIa, IIIb, IV, D, bound, 16 * E1 + II + D + III + IV)


# ---------------------------------------------------------------- Strauss-type bound

@dataclass
class StraussResult:
    ratio: float
    lhs: list
    rhs: list
    f_grad_f_scaled: float   # sup |f grad f| * R^{1/2}


def f_grad_f_sup(profile: CutoffProfile, R: float, n: int = 200001) -> float:
    """sup_x |f grad f| for f^2 = Phi(s) + s rho(s), s = |x|^2/R.

    f grad f = grad(f^2)/2 = (2 rho + s rho') x / R, so |f grad f| = |2 rho + s rho'| sqrt(s/R).
    """
    s = np.linspace(0.0, 3.0, n)
    return float(np.max(np.abs(2 * profile.rho(s) + s * profile.rho_deriv(s, 1)) * np.sqrt(s / R)))


def _axis_line_interpolant(phi, r):
    """Trigonometric interpolation of phi along the positive first axis."""
    grid = phi.grid
    line = phi.values[(slice(None),) + (grid.n // 2,) * (grid.d - 1)]
    c = np.fft.fft(np.fft.ifftshift(line)) / grid.n
    k = 2 * np.pi * np.fft.fftfreq(grid.n, d=grid.h)
    k[grid.n // 2] = 0.0   # drop the unresolved Nyquist mode
    return np.exp(1j * np.outer(r, k)) @ c


def strauss_ratio(ens: Ensemble, profile: CutoffProfile, R: float, radii) -> StraussResult:
    grid = ens.grid
    if grid.d < 2:
        raise ValueError("the radial bound needs d >= 2")
    if not ens.radial:
        raise NonRadialEnsembleError("strauss_ratio needs a radial ensemble")
    radii = np.asarray(radii, float)
    fgf = f_grad_f_sup(profile, R)
    wgrid = weight_w(profile, np.sqrt(grid.radius_squared()), R)
    wr = weight_w(profile, radii, R)
    lhs, rhs = [], []
    for _, phi in ens:
        g = _axis_line_interpolant(phi, radii)
        lhs.append(float(np.max(radii ** (grid.d - 1) * wr * np.abs(g) ** 2)))
        D = derived(phi)
        rhs.append(fgf * integrate(grid, D.density) + integrate(grid, wgrid * D.density)
                   + integrate(grid, wgrid * sum(np.abs(q) ** 2 for q in D.grad)))
    ratio = max((l / r if r > 0 else (0.0 if l == 0 else math.inf)) for l, r in zip(lhs, rhs))
    return StraussResult(ratio, lhs, rhs, fgf * math.sqrt(R))


# ---------------------------------------------------------------- envelope and differences

@dataclass(frozen=True)
class GlasseyEnvelope:
    V1_0: float
    V1_dot_0: float
    E1: float
    root: float | None

    def __call__(self, t):
        return self.V1_0 + self.V1_dot_0 * np.asarray(t) + 8 * self.E1 * np.asarray(t) ** 2


def glassey_envelope(V1_0: float, V1_dot_0: float, E1: float) -> GlasseyEnvelope:
    """Smallest positive zero of V1_0 + V1_dot_0 t + 8 E1 t^2, if any."""
    roots = np.roots([8 * E1, V1_dot_0, V1_0]) if (E1 != 0 or V1_dot_0 != 0) else []
    pos = [float(r.real) for r in np.atleast_1d(roots) if abs(r.imag) < 1e-14 and r.real > 0]
    return GlasseyEnvelope(V1_0, V1_dot_0, E1, min(pos) if pos else None)


FD2_ORDER = 4


def fd2(values, dt: float) -> np.ndarray:
    """Fourth-order 5-point second difference; NaN on the two edge records at each end."""
    f = np.asarray(values, float)
    out = np.full(f.shape, np.nan)
    if f.size >= 5:
        out[2:-2] = (-f[:-4] + 16 * f[1:-3] - 30 * f[2:-2] + 16 * f[3:-1] - f[4:]) / (12 * dt * dt)
    return out


def fd2_uniform(times, values) -> np.ndarray:
    """fd2 restricted to stencils whose five times are equally spaced."""
    t = np.asarray(times, float)
    f = np.asarray(values, float)
    out = np.full(f.shape, np.nan)
    for k in range(2, len(t) - 2):
        steps = np.diff(t[k - 2:k + 3])
        if np.allclose(steps, steps[0], rtol=1e-9, atol=0):
            dt = steps[0]
            out[k] = (-f[k - 2] + 16 * f[k - 1] - 30 * f[k] + 16 * f[k + 1] - f[k + 2]) / (12 * dt * dt)
    return out


@dataclass
class VirialRecord:
    t: float
    V1: float
    V1_dot: float
    trunc_V: dict = field(default_factory=dict)        # R -> Tr(psi_R gamma)
    rhs_virial: float = float("nan")
    rhs_localized: dict = field(default_factory=dict)  # R -> value
    terms: dict = field(default_factory=dict)          # R -> Lemma43Terms
