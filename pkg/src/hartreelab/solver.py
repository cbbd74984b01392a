"""Strang splitting for i d_t phi + Lap phi = mu (V * |phi|^2) phi, with blowup monitoring."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .grid import GridSpec, SpectralField, fft, ifft
from .potentials import GridKernel

log = logging.getLogger(__name__)

OK = "ok"
BLOWUP = "blowup_detected"
UNDERFLOW = "dt_underflow"


class NonFiniteError(FloatingPointError):
    def __init__(self, message: str, member: int | None = None):
        super().__init__(message if member is None else f"member {member}: {message}")
        self.member = member


@dataclass(frozen=True)
class PropagatorConfig:
    dt: float
    t_end: float
    mu: int
    blowup_gradient_threshold: float = np.inf
    dt_floor: float = 0.0
    record_every: int = 1

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.mu not in (-1, 1):
            raise ValueError("mu must be -1 or +1")
        if not self.dt_floor < self.dt:
            raise ValueError("dt_floor must be below dt")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")
        if self.t_end < 0:
            raise ValueError("t_end must be nonnegative")


@dataclass(frozen=True)
class StepOutcome:
    status: str
    time: float               # last stable (recorded) time
    gradient_norm: float      # max over members of ||grad phi||
    crossing_time: float | None = None
    final_dt: float | None = None
    member: int | None = None     # member that went non-finite, for dt_underflow
    first_halving: float | None = None  # time at which dt was first reduced


def gradient_norm_from_spectrum(grid: GridSpec, spectrum: np.ndarray) -> float:
    e = np.sum(grid.freq_squared() * (spectrum.real**2 + spectrum.imag**2))
    return float(np.sqrt(e * grid.cell_volume / grid.n**grid.d))


def _kinetic_phase(grid: GridSpec, tau: float) -> np.ndarray:
    return np.exp(-1j * grid.freq_squared() * tau)


def _step_arrays(values: np.ndarray, kernel: GridKernel, half_phase: np.ndarray,
                 dt: float, mu: int) -> tuple[np.ndarray, np.ndarray]:
    """One Strang step on raw arrays; returns (values, spectrum) after the step."""
    psi = ifft(half_phase * fft(values))
    if not kernel.is_zero:
        dens = psi.real**2 + psi.imag**2
        W = kernel.field(dens)
        psi = psi * np.exp(-1j * mu * dt * W)
    spec = half_phase * fft(psi)
    return ifft(spec), spec


def strang_step(phi: SpectralField, kernel: GridKernel, dt: float, mu: int) -> SpectralField:
    """Half kinetic step, exact potential phase rotation, half kinetic step."""
    vals, spec = _step_arrays(phi.values, kernel, _kinetic_phase(phi.grid, dt / 2), dt, mu)
    if not (np.all(np.isfinite(vals))):
        raise NonFiniteError("non-finite value after Strang step")
    return SpectralField(phi.grid, vals, spec)


Observer = Callable[[float, Sequence[SpectralField]], None]


def propagate_many(fields: Sequence[SpectralField], kernel: GridKernel, config: PropagatorConfig,
                   observers: Iterable[Observer] = ()) -> StepOutcome:
    """Advance several fields in lockstep (members of one mixture).

    Observers are called with (t, fields) at t = 0 and after every accepted
    segment of ``record_every`` steps.  A segment in which the largest gradient
    norm reaches the threshold, or a value turns non-finite, is rolled back to
    its checkpoint and redone with half the step.  Once dt drops below the
    floor a persisting threshold crossing is reported as blowup, while a
    persisting non-finite state is reported as dt underflow.
    """
    observers = list(observers)
    grid = fields[0].grid
    cfg = config
    dt = cfg.dt
    t = 0.0
    n_total = int(round(cfg.t_end / cfg.dt))
    # time measured in units of the finest step taken so far keeps t exact
    ticks_per_step = 1
    ticks_done = 0
    ticks_end = n_total

    state = [f.values for f in fields]
    spectra = [f.spectrum for f in fields]
    gnorm = max(gradient_norm_from_spectrum(grid, s) for s in spectra)
    for ob in observers:
        ob(t, fields)

    # a zero floor would never stop the halving
    floor = max(cfg.dt_floor, cfg.dt * 2.0**-30)
    half_phase = _kinetic_phase(grid, dt / 2)
    first_halving = None
    while ticks_done < ticks_end:
        nsteps = min(cfg.record_every, (ticks_end - ticks_done) // ticks_per_step)
        trial = list(state)
        failure = None
        crossing_t = None
        g_seen = gnorm
        for k in range(nsteps):
            new = []
            g_step = 0.0
            for m, v in enumerate(trial):
                vals, spec = _step_arrays(v, kernel, half_phase, dt, cfg.mu)
                if not np.all(np.isfinite(vals)):
                    failure = ("nonfinite", m)
                    break
                g_step = max(g_step, gradient_norm_from_spectrum(grid, spec))
                new.append((vals, spec))
            if failure:
                break
            trial = [v for v, _ in new]
            trial_spec = [s for _, s in new]
            if g_step >= cfg.blowup_gradient_threshold:
                failure = ("threshold", None)
                g_seen = g_step
                crossing_t = t + (k + 1) * dt
                break
        if failure is None:
            state, spectra = trial, trial_spec
            ticks_done += nsteps * ticks_per_step
            t = ticks_done * (cfg.dt / ticks_per_step)
            gnorm = max(gradient_norm_from_spectrum(grid, s) for s in spectra)
            snapshot = [SpectralField(grid, v, s) for v, s in zip(state, spectra)]
            for ob in observers:
                ob(t, snapshot)
            continue

        if first_halving is None:
            first_halving = t
        dt /= 2
        ticks_per_step *= 2
        ticks_done *= 2
        ticks_end *= 2
        half_phase = _kinetic_phase(grid, dt / 2)
        log.debug("segment at t=%.6g failed (%s); dt -> %.3g", t, failure[0], dt)
        if dt < floor:
            if failure[0] == "threshold":
                return StepOutcome(BLOWUP, t, g_seen, crossing_time=crossing_t, final_dt=dt,
                                   first_halving=first_halving)
            return StepOutcome(UNDERFLOW, t, gnorm, final_dt=dt, member=failure[1],
                                   first_halving=first_halving)

    return StepOutcome(OK, t, gnorm, final_dt=dt, first_halving=first_halving)


def propagate(phi0: SpectralField, kernel: GridKernel, config: PropagatorConfig,
              observers: Iterable[Callable[[float, SpectralField], None]] = (),
              keep_records: bool = True) -> tuple[list, StepOutcome]:
    """Evolve one wavefunction.

    Returns the (t, field) records seen by the observers and the outcome.  Each
    kept record holds a full array; on large grids pass ``keep_records=False``
    and collect what is needed through observers.
    """
    records: list = []
    keep = [lambda t, fs: records.append((t, fs[0]))] if keep_records else []
    wrapped = [lambda t, fs, ob=ob: ob(t, fs[0]) for ob in observers]
    outcome = propagate_many([phi0], kernel, config, keep + wrapped)
    return records, outcome


def time_reversed(phi: SpectralField) -> SpectralField:
    """Complex conjugation, which reverses the flow of the Hartree equation."""
    return phi.conj()
