"""Even interaction potentials V(x) = v(|x|) and checks of the blowup hypotheses.

Three families are provided:

* ``zero``   V = 0
* ``power``  V(x) = c |x|^{-a}
* ``table``  radial samples (r_k, v_k) joined by a clamped cubic spline, held
             constant beyond the last sample

Grid kernels are sampled at box-centered points.  A power kernel cannot be
sampled at the origin, so that one cell gets the average of V over the ball of
radius h/2, which is finite when a < d.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import integrate as sint
from scipy.interpolate import CubicSpline

from .grid import GridSpec


class SingularOriginError(ValueError):
    pass


class NonIntegrableTailError(ValueError):
    pass


FAMILIES = ("zero", "power", "table")


@dataclass(frozen=True)
class Potential:
    family: str
    a: float = 0.0
    c: float = 0.0
    table_r: tuple[float, ...] = ()
    table_v: tuple[float, ...] = ()
    _spline: CubicSpline | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown potential family {self.family!r}")
        if self.family == "power" and not (self.a > 0 and self.c > 0):
            raise ValueError("power family needs a > 0 and c > 0")
        if self.family == "table":
            r = np.asarray(self.table_r, float)
            v = np.asarray(self.table_v, float)
            if r.ndim != 1 or r.size < 4 or r.size != v.size:
                raise ValueError("table needs matching radial samples (at least 4)")
            if r[0] != 0.0 or np.any(np.diff(r) <= 0):
                raise ValueError("table radii must start at 0 and increase")
            # zero slope at r = 0 keeps the extension to R^d smooth and even
            spline = CubicSpline(r, v, bc_type=((1, 0.0), "not-a-knot"))
            object.__setattr__(self, "_spline", spline)

    @property
    def even(self) -> bool:
        return True

    @classmethod
    def zero(cls) -> "Potential":
        return cls("zero")

    @classmethod
    def power(cls, a: float, c: float = 1.0) -> "Potential":
        return cls("power", a=float(a), c=float(c))

    @classmethod
    def table(cls, r: Sequence[float], v: Sequence[float]) -> "Potential":
        return cls("table", table_r=tuple(map(float, r)), table_v=tuple(map(float, v)))

    @classmethod
    def from_config(cls, spec: dict) -> "Potential":
        fam = spec.get("family")
        if fam == "zero":
            return cls.zero()
        if fam == "power":
            return cls.power(spec["a"], spec.get("c", 1.0))
        if fam == "table":
            return cls.table(spec["r"], spec["v"])
        raise ValueError(f"unknown potential family {fam!r}")

    def to_config(self) -> dict:
        if self.family == "power":
            return {"family": "power", "a": self.a, "c": self.c}
        if self.family == "table":
            return {"family": "table", "r": list(self.table_r), "v": list(self.table_v)}
        return {"family": "zero"}

    # radial profile v(r) and v'(r)
    def radial(self, r) -> np.ndarray:
        r = np.asarray(r, float)
        if self.family == "zero":
            return np.zeros_like(r)
        if self.family == "power":
            if np.any(r == 0):
                raise SingularOriginError("power potential is singular at the origin")
            return self.c * r ** (-self.a)
        rmax = self.table_r[-1]
        return np.where(r <= rmax, self._spline(np.minimum(r, rmax)), self.table_v[-1])

    def radial_derivative(self, r) -> np.ndarray:
        r = np.asarray(r, float)
        if self.family == "zero":
            return np.zeros_like(r)
        if self.family == "power":
            if np.any(r == 0):
                raise SingularOriginError("power potential is singular at the origin")
            return -self.a * self.c * r ** (-self.a - 1)
        rmax = self.table_r[-1]
        return np.where(r <= rmax, self._spline(np.minimum(r, rmax), 1), 0.0)

    def __call__(self, x) -> np.ndarray:
        return evaluate(self, x)


def _norm(x) -> np.ndarray:
    x = np.asarray(x, float)
    return np.sqrt(np.sum(x * x, axis=-1))


def evaluate(V: Potential, x) -> np.ndarray:
    """V at points ``x`` (last axis = coordinates)."""
    return V.radial(_norm(x))


def gradient(V: Potential, x) -> np.ndarray:
    x = np.asarray(x, float)
    r = _norm(x)
    if V.family == "power":
        if np.any(r == 0):
            raise SingularOriginError("power potential is singular at the origin")
        return (-V.a * V.c * r ** (-V.a - 2))[..., None] * x
    dv = V.radial_derivative(r)
    with np.errstate(invalid="ignore", divide="ignore"):
        unit = np.where(r[..., None] > 0, x / r[..., None], 0.0)
    return dv[..., None] * unit


def virial_defect(V: Potential, x) -> np.ndarray:
    """V(x) + x . grad V(x) / 2; nonpositive everywhere is the blowup hypothesis."""
    r = _norm(x)
    return V.radial(r) + 0.5 * r * V.radial_derivative(r)


def sphere_area(d: int) -> float:
    """Surface measure of the unit sphere in R^d."""
    return 2 * math.pi ** (d / 2) / math.gamma(d / 2)


def _radial_weight(V: Potential, d: int):
    # |x| |grad V| integrated over spheres
    area = sphere_area(d)
    return lambda r: area * r * abs(float(V.radial_derivative(r))) * r ** (d - 1)


def tail_l1(V: Potential, d: int, R: float, region: str) -> float:
    """|| |x| |grad V| ||_{L^1} over |x| >= sqrt(R) ("outer") or |x| <= sqrt(R) ("inner").

    Evaluated by adaptive radial quadrature.  Raises NonIntegrableTailError when
    the integral diverges.
    """
    rs = math.sqrt(R)
    if V.family == "zero":
        return 0.0
    if V.family == "power":
        if region == "outer" and V.a <= d:
            raise NonIntegrableTailError(f"outer L1 norm diverges for a={V.a} <= d={d}")
        if region == "inner" and V.a >= d:
            raise NonIntegrableTailError(f"inner L1 norm diverges for a={V.a} >= d={d}")
        # radial integrand a c area r^{d-1-a} dr; with r = e^u it becomes a c area e^{(d-a)u} du
        k = d - V.a
        coef = V.a * V.c * sphere_area(d)
        lo, hi = (-math.inf, math.log(rs)) if region == "inner" else (math.log(rs), math.inf)
        val, _ = sint.quad(lambda u: coef * math.exp(k * u), lo, hi,
                           epsabs=0, epsrel=1e-12, limit=200)
        return val
    rmax = V.table_r[-1]
    w = _radial_weight(V, d)
    knots = [r for r in V.table_r if 0 < r < rmax]
    if region == "inner":
        hi = min(rs, rmax)
        pts = [r for r in knots if r < hi]
        val, _ = sint.quad(w, 0.0, hi, points=pts or None, epsabs=0, epsrel=1e-11, limit=400)
        return val
    if rs >= rmax:
        return 0.0
    pts = [r for r in knots if r > rs]
    val, _ = sint.quad(w, rs, rmax, points=pts or None, epsabs=0, epsrel=1e-11, limit=400)
    return val


def tail_l1_closed_form(V: Potential, d: int, R: float, region: str) -> float:
    """Closed form of :func:`tail_l1` for the power family."""
    if V.family == "zero":
        return 0.0
    if V.family != "power":
        raise ValueError("closed form only exists for the power family")
    k = d - V.a
    if region == "inner":
        if k <= 0:
            raise NonIntegrableTailError("inner L1 norm diverges")
        return V.a * V.c * sphere_area(d) * R ** (k / 2) / k
    if k >= 0:
        raise NonIntegrableTailError("outer L1 norm diverges")
    return V.a * V.c * sphere_area(d) * R ** (k / 2) / (-k)


def sup_tail(V: Potential, R: float) -> float:
    """sup_{|x| >= R} |x| |grad V(x)|."""
    if V.family == "zero":
        return 0.0
    if V.family == "power":
        # r |v'(r)| = a c r^{-a} is decreasing, so the sup sits at r = R
        return V.a * V.c * R ** (-V.a)
    rmax = V.table_r[-1]
    if R >= rmax:
        return 0.0
    r = np.linspace(R, rmax, 4001)
    return float(np.max(r * np.abs(V.radial_derivative(r))))


@dataclass
class HypothesisRow:
    R: float
    defect_max: float
    sup_tail: float
    outer_ratio: float | None
    inner_ratio: float | None


@dataclass
class HypothesisReport:
    d: int
    potential: dict
    rows: list[HypothesisRow]
    defect_ok: bool
    sup_tail_decays: bool
    outer_decays: bool | None
    inner_decays: bool | None
    divergent: list[str]

    def as_dict(self) -> dict:
        return {
            "d": self.d,
            "potential": self.potential,
            "rows": [r.__dict__ for r in self.rows],
            "defect_ok": self.defect_ok,
            "sup_tail_decays": self.sup_tail_decays,
            "outer_decays": self.outer_decays,
            "inner_decays": self.inner_decays,
            "divergent": self.divergent,
        }


def _strictly_decreasing(vals) -> bool:
    return all(b < a for a, b in zip(vals, vals[1:]))


def radial_sample(V: Potential) -> np.ndarray:
    if V.family == "table":
        return np.linspace(0.0, V.table_r[-1], 20001)
    return np.logspace(-4, 8, 20001)


def check_hypotheses(V: Potential, d: int, R_sequence: Sequence[float]) -> HypothesisReport:
    """Tabulate the three blowup hypotheses on V along an increasing R sequence.

    Per R the report holds the largest virial defect over a radial sample, the
    supremum tail sup_{|x|>=R} |x||grad V|, and both normalized L^1 tail ratios
    (outer |x| >= sqrt(R) and inner |x| <= sqrt(R), divided by R^{(d-1)/2}).
    A divergent variant is reported as None and listed in ``divergent``.
    """
    Rs = [float(R) for R in R_sequence]
    if any(R < 1 for R in Rs) or any(b <= a for a, b in zip(Rs, Rs[1:])):
        raise ValueError("R_sequence must be increasing and >= 1")
    r = radial_sample(V)
    defect = virial_defect(V, r[:, None])
    dmax = float(np.max(defect))

    rows = []
    divergent = set()
    for R in Rs:
        ratios = {}
        for region in ("outer", "inner"):
            try:
                ratios[region] = tail_l1(V, d, R, region) / R ** ((d - 1) / 2)
            except NonIntegrableTailError:
                ratios[region] = None
                divergent.add(region)
        rows.append(HypothesisRow(R, dmax, sup_tail(V, R), ratios["outer"], ratios["inner"]))

    def decays(vals):
        if any(v is None for v in vals):
            return None
        if all(v == 0 for v in vals):
            return True
        return _strictly_decreasing(vals)

    return HypothesisReport(
        d=d,
        potential=V.to_config(),
        rows=rows,
        defect_ok=dmax <= 0.0,
        sup_tail_decays=decays([row.sup_tail for row in rows]),
        outer_decays=decays([row.outer_ratio for row in rows]),
        inner_decays=decays([row.inner_ratio for row in rows]),
        divergent=sorted(divergent),
    )


def origin_cell_average(V: Potential, d: int, h: float) -> float:
    """Average of V over the ball |x| <= h/2."""
    if V.family == "zero":
        return 0.0
    if V.family == "power":
        if V.a >= d:
            raise SingularOriginError(f"cell average of |x|^-{V.a} diverges in d={d}")
        return V.c * d / ((d - V.a) * (h / 2) ** V.a)
    rho = h / 2
    num, _ = sint.quad(lambda r: float(V.radial(r)) * r ** (d - 1), 0, rho, epsrel=1e-12)
    return num * d / rho**d


def kernel_samples(V: Potential, grid: GridSpec) -> np.ndarray:
    """V sampled at box-centered grid points, origin cell regularized."""
    r = np.sqrt(grid.radius_squared())
    origin = grid.index_of_origin()
    if V.family == "zero":
        return np.zeros(grid.shape)
    if V.family == "power":
        rr = r.copy()
        rr[origin] = 1.0
        out = V.c * rr ** (-V.a)
        out[origin] = origin_cell_average(V, grid.d, grid.h)
        return out
    return V.radial(r)


def dilation_kernel_samples(V: Potential, grid: GridSpec) -> np.ndarray:
    """Samples of z . grad V(z); for the power family this is -a V(z), origin included."""
    if V.family == "power":
        return -V.a * kernel_samples(V, grid)
    r = np.sqrt(grid.radius_squared())
    return r * V.radial_derivative(r)


def even_part_error(samples: np.ndarray) -> float:
    """max |K(x) - K(-x)| over grid points off the wrap seam (index 0 on any axis)."""
    inner = tuple(slice(1, None) for _ in range(samples.ndim))
    core = samples[inner]
    return float(np.max(np.abs(core - np.flip(core))))


REGULARIZATIONS = ("spectral", "cell_average")


class GridKernel:
    """A potential bound to a grid: the Fourier multiplier used for V * rho.

    ``regularization="cell_average"`` transforms :func:`kernel_samples`.
    ``regularization="spectral"`` (default) uses the exact Fourier transform of
    V restricted to the ball |z| <= L/2.  For densities supported in
    |x| <= L/4 that multiplier gives the free-space convolution of the
    density's trigonometric interpolant with no periodic images, and it keeps
    identities such as z.grad V = -a V intact on the grid.
    """

    def __init__(self, V: Potential, grid: GridSpec, regularization: str = "spectral"):
        from .grid import ifft, kernel_transform

        if regularization not in REGULARIZATIONS:
            raise ValueError(f"unknown regularization {regularization!r}")
        self.potential = V
        self.grid = grid
        self.regularization = regularization
        self.is_zero = V.family == "zero"
        self.cutoff_radius = grid.L / 2
        if regularization == "cell_average" or self.is_zero:
            self.samples = kernel_samples(V, grid)
            self.hat = kernel_transform(grid, self.samples)
        else:
            # convolve() applies h^d, so store the continuous transform divided by it
            self.hat = self._ball_transform(lambda r: V.radial(r), -V.a if V.family == "power" else 0.0,
                                            V.c if V.family == "power" else None) / grid.cell_volume
            self.samples = np.fft.fftshift(ifft(self.hat).real) / grid.cell_volume

    def _ball_transform(self, profile, power, const):
        from . import quadrature as Q

        grid = self.grid
        fg = Q.frequency_grid(grid.d, grid.n, grid.L)
        breaks = [0.0, self.cutoff_radius]
        if self.potential.family == "table":
            knots = [r for r in self.potential.table_r if 0 < r < self.cutoff_radius]
            breaks = [0.0] + knots + [self.cutoff_radius]
        if const is not None:
            # power family: profile is the constant c times r^power
            return fg.expand(Q.radial_transform(fg, lambda r: np.full_like(r, const), breaks, power))
        return fg.expand(Q.radial_transform(fg, profile, breaks, 0.0))

    def dilation_hat(self) -> np.ndarray:
        """Multiplier for the z.grad V(z) kernel, realized like the kernel itself (cached)."""
        if getattr(self, "_dilation_hat", None) is None:
            self._dilation_hat = self._make_dilation_hat()
        return self._dilation_hat

    def _make_dilation_hat(self) -> np.ndarray:
        from .grid import kernel_transform

        V = self.potential
        if self.is_zero:
            return np.zeros(self.grid.shape)
        if self.regularization == "cell_average":
            return kernel_transform(self.grid, dilation_kernel_samples(V, self.grid))
        if V.family == "power":
            return -V.a * self.hat
        return self._ball_transform(lambda r: r * V.radial_derivative(r), 0.0, None) / self.grid.cell_volume

    def field(self, density: np.ndarray) -> np.ndarray:
        """V * density on the grid."""
        from .grid import convolve

        if self.is_zero:
            return np.zeros(self.grid.shape)
        return convolve(self.grid, self.samples, density, kernel_hat=self.hat)
