"""Experiment drivers behind the command line: runs, series and pass/fail reports."""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import cutoff as C
from . import hierarchy as H
from . import potentials as P
from . import virial as Vr
from .config import ConfigError, ExperimentConfig
from .grid import GridSpec, SpectralField
from .potentials import GridKernel
from .solver import BLOWUP, OK, UNDERFLOW, StepOutcome

log = logging.getLogger(__name__)


class SolverFailure(RuntimeError):
    pass


class PositiveEnergyError(ValueError):
    def __init__(self, E1: float):
        super().__init__(f"blowup run refused: E1(0) = {E1:.6g} is not negative")
        self.E1 = E1


# ---------------------------------------------------------------- reports

@dataclass
class Report:
    name: str
    checks: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)

    def add(self, name: str, anchor: str, value, tol, passed: bool):
        self.checks[name] = {"anchor": anchor, "value": _clean(value), "tol": _clean(tol), "pass": bool(passed)}

    @property
    def passed(self) -> bool:
        return all(c["pass"] for c in self.checks.values())

    def as_dict(self) -> dict:
        return {"name": self.name, "overall_pass": self.passed, "summary": _clean(self.summary),
                "checks": self.checks}

    def write(self, path: Path):
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.as_dict(), indent=2) + "\n")

    def lines(self):
        for name, c in self.checks.items():
            yield f"{'PASS' if c['pass'] else 'FAIL'}  {name}: value={c['value']} tol={c['tol']}"


def _clean(v):
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else repr(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


# ---------------------------------------------------------------- series

BASE_COLUMNS = ["t", "mass", "E1", "kinetic", "interaction", "V1", "V1_dot", "FD2_V1", "virial_rhs"]
R_COLUMNS = ["truncV", "FD2_truncV", "locrhs", "II", "IIIa", "IIIb", "IV", "bound"]


def _rlabel(R: float) -> str:
    return f"{R:g}"


def columns(R_list) -> list[str]:
    cols = list(BASE_COLUMNS)
    for R in R_list:
        cols += [f"{c}_{_rlabel(R)}" for c in R_COLUMNS]
    return cols


def write_series(path: Path, rows: list[dict], R_list):
    path.parent.mkdir(parents=True, exist_ok=True)
    cols = columns(R_list)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for row in rows:
            w.writerow([repr(float(row.get(c, math.nan))) for c in cols])


def observe(ens: H.Ensemble, kernel: GridKernel, mu: int, profile, R_list, terms: bool) -> dict:
    """All per-record observables of one snapshot (FD2 columns are filled in later)."""
    kin = H.kinetic_trace(ens)
    inter = H.interaction_trace(ens, kernel)
    row = {
        "mass": H.mass(ens), "kinetic": kin, "interaction": inter,
        "E1": 0.5 * kin + mu / 4 * inter,
        "V1": Vr.variance(ens), "V1_dot": Vr.variance_rate(ens),
        "virial_rhs": Vr.virial_rhs(ens, kernel, mu),
    }
    for R in R_list:
        lab = _rlabel(R)
        row[f"truncV_{lab}"] = Vr.truncated_variance(ens, profile, R)
        row[f"locrhs_{lab}"] = Vr.localized_virial_rhs(ens, kernel, mu, profile, R)
        if terms:
            T = Vr.lemma43_terms(ens, kernel, profile, R, mu)
            for name in ("II", "IIIa", "IIIb", "IV", "bound"):
                row[f"{name}_{lab}"] = getattr(T, name)
    return row


def run_series(cfg: ExperimentConfig, ens: H.Ensemble, kernel: GridKernel, terms: bool):
    profile = C.make_profile()
    rows = []

    def ob(t, e):
        row = observe(e, kernel, cfg.propagator.mu, profile, cfg.cutoff_R_list, terms)
        row["t"] = t
        rows.append(row)
        log.info("t=%.6g E1=%.10g V1=%.8g", t, row["E1"], row["V1"])

    outcome = H.evolve(ens, kernel, cfg.propagator, [ob])
    if outcome.status == UNDERFLOW:
        raise SolverFailure(f"non-finite state in member {outcome.member} at t={outcome.time:.6g} "
                            f"(dt reduced to {outcome.final_dt:.3g}) in run {cfg.name!r}")
    t = np.array([r["t"] for r in rows])
    if outcome.first_halving is not None:
        # records after a step reduction come from a different discrete flow,
        # so stencils reaching past it are dropped
        t = np.where(t > outcome.first_halving + 1e-12, np.nan, t)
    fd = Vr.fd2_uniform(t, [r["V1"] for r in rows])
    for r, v in zip(rows, fd):
        r["FD2_V1"] = v
    for R in cfg.cutoff_R_list:
        lab = _rlabel(R)
        fd = Vr.fd2_uniform(t, [r[f"truncV_{lab}"] for r in rows])
        for r, v in zip(rows, fd):
            r[f"FD2_truncV_{lab}"] = v
    return rows, outcome


def _col(rows, name):
    return np.array([r.get(name, math.nan) for r in rows], float)


def _max_abs_diff(a, b):
    d = np.abs(a - b)
    d = d[np.isfinite(d)]
    return float(d.max()) if d.size else math.nan


def setup(cfg: ExperimentConfig):
    kernel = GridKernel(cfg.potential, cfg.grid, cfg.regularization)
    try:
        ens = H.Ensemble.from_config(cfg.grid, cfg.ensemble)
    except H.EnsembleError as exc:
        raise ConfigError("ensemble", str(exc)) from None
    return ens, kernel


def _is_free_unit_gaussian(cfg: ExperimentConfig) -> bool:
    if cfg.potential.family != "zero" or len(cfg.ensemble) != 1:
        return False
    g = cfg.ensemble[0]["profile"]["gaussian"]
    return (float(g.get("width", 1.0)) == 1.0 and not np.any(g.get("center") or 0)
            and not np.any(g.get("phase_momentum") or 0) and not g.get("chirp", 0))


# ---------------------------------------------------------------- subcommands

def simulate(cfg: ExperimentConfig, output_dir: Path | None = None) -> Report:
    out = Path(output_dir or cfg.output_dir)
    ens, kernel = setup(cfg)
    rows, outcome = run_series(cfg, ens, kernel, terms=ens.radial and cfg.propagator.mu == -1)
    write_series(out / "series.csv", rows, cfg.cutoff_R_list)
    tol = cfg.tolerances
    rep = Report(cfg.name)
    rep.summary = {"status": outcome.status, "final_time": outcome.time, "records": len(rows)}
    mass = _col(rows, "mass")
    rep.add("mass_conservation", "mass conservation along the flow",
            float(np.max(np.abs(mass - mass[0]))), tol["mass"], np.max(np.abs(mass - mass[0])) <= tol["mass"])
    E = _col(rows, "E1")
    scale = abs(E[0]) if E[0] != 0 else 1.0
    drift = float(np.max(np.abs(E - E[0])) / scale)
    rep.add("energy_conservation", "energy conservation along the flow (relative drift)",
            drift, tol["energy"], drift <= tol["energy"])
    res = _max_abs_diff(_col(rows, "FD2_V1"), _col(rows, "virial_rhs"))
    rep.add("virial_identity", "second time derivative of the variance",
            res, tol["virial"], res <= tol["virial"])
    for R in cfg.cutoff_R_list:
        lab = _rlabel(R)
        res = _max_abs_diff(_col(rows, f"FD2_truncV_{lab}"), _col(rows, f"locrhs_{lab}"))
        rep.add(f"localized_virial_identity_R{lab}", "second time derivative of the truncated variance",
                res, tol["localized"], res <= tol["localized"])
    if _is_free_unit_gaussian(cfg):
        t = _col(rows, "t")
        err = float(np.max(np.abs(_col(rows, "V1") - cfg.grid.d * (1 + 4 * t * t) / 2)))
        rep.add("free_gaussian_variance", "closed-form variance of the free Gaussian",
                err, tol["free_variance"], err <= tol["free_variance"])
    rep.add("run_completed", "flow reached t_end without blowup detection",
            outcome.status, OK, outcome.status == OK)
    rep.write(out / "report.json")
    return rep


def blowup(cfg: ExperimentConfig, output_dir: Path | None = None) -> Report:
    out = Path(output_dir or cfg.output_dir)
    if cfg.propagator.mu != -1:
        raise ConfigError("propagator.mu", "blowup runs need the focusing sign mu = -1")
    ens, kernel = setup(cfg)
    E0 = H.energy_E1(ens, kernel, -1)
    if not E0 < 0:
        rep = Report(cfg.name)
        rep.summary = {"E1_0": E0, "refused": True}
        rep.add("negative_energy", "negative energy hypothesis", E0, 0.0, False)
        rep.write(out / "report.json")
        raise PositiveEnergyError(E0)

    rows, outcome = run_series(cfg, ens, kernel, terms=ens.radial)
    write_series(out / "series.csv", rows, cfg.cutoff_R_list)
    return blowup_report(cfg, rows, outcome, out)


def blowup_report(cfg: ExperimentConfig, rows, outcome: StepOutcome, out: Path | None = None) -> Report:
    tol = cfg.tolerances
    t = _col(rows, "t")
    V1 = _col(rows, "V1")
    E0 = rows[0]["E1"]
    env = Vr.glassey_envelope(rows[0]["V1"], rows[0]["V1_dot"], E0)
    rep = Report(cfg.name)
    rep.summary = {"E1_0": E0, "glassey_root": env.root, "status": outcome.status,
                   "detection_time": outcome.crossing_time, "last_stable_time": outcome.time,
                   "slack": tol["blowup_slack"]}
    rep.add("negative_energy", "negative energy hypothesis", E0, 0.0, E0 < 0)

    fd = _col(rows, "FD2_V1")
    # identity residuals are diagnostics only; the inequalities get a fixed slack
    rep.summary["virial_identity_residual"] = _max_abs_diff(fd, _col(rows, "virial_rhs"))
    excess = np.nanmax(fd - 16 * _col(rows, "E1")) if np.any(np.isfinite(fd)) else math.nan
    rep.add("virial_below_16E1", "second derivative of the variance bounded by 16 E1",
            excess, tol["bound"], bool(excess <= tol["bound"]))
    gap = float(np.max(V1 - env(t)))
    rep.add("envelope_domination", "variance below the quadratic envelope",
            gap, tol["envelope"], gap <= tol["envelope"])
    detected = outcome.status == BLOWUP and env.root is not None
    when = outcome.crossing_time if detected else math.nan
    limit = tol["blowup_slack"] * env.root if env.root is not None else math.nan
    rep.add("blowup_detected", "blowup detected before slack times the envelope root",
            when, limit, bool(detected and when <= limit))

    terms_present = any(f"bound_{_rlabel(R)}" in rows[0] for R in cfg.cutoff_R_list)
    if terms_present:
        IV0 = []
        for R in cfg.cutoff_R_list:
            lab = _rlabel(R)
            fdR = _col(rows, f"FD2_truncV_{lab}")
            rep.summary[f"localized_identity_residual_R{lab}"] = _max_abs_diff(fdR, _col(rows, f"locrhs_{lab}"))
            ex = np.nanmax(fdR - _col(rows, f"bound_{lab}")) if np.any(np.isfinite(fdR)) else math.nan
            rep.add(f"localized_bound_R{lab}", "truncated variance second derivative below the term bound",
                    ex, tol["bound"], bool(ex <= tol["bound"]))
            II = _col(rows, f"II_{lab}")
            rep.add(f"II_nonpositive_R{lab}", "gradient term is nonpositive", float(np.max(II)), 0.0,
                    bool(np.max(II) <= 0))
            IV0.append(abs(rows[0][f"IV_{lab}"]))
        if len(IV0) > 1:
            Rs = cfg.cutoff_R_list
            mono = all(b < a for a, b in zip(IV0, IV0[1:]))
            trend = [(a / b) / (R2 / R1) if b > 0 else math.inf
                     for a, b, R1, R2 in zip(IV0, IV0[1:], Rs, Rs[1:])]
            ok = mono and all(0.5 <= x <= 2.0 for x in trend)
            rep.add("IV_inverse_R_trend", "bilaplacian term decays like 1/R (ratio within factor 2)",
                    trend, [0.5, 2.0], ok)
    if out is not None:
        rep.write(Path(out) / "report.json")
    return rep


def random_band_limited(grid: GridSpec, rng: np.random.Generator, band: float = 0.25) -> SpectralField:
    """Random field whose modes are nonzero only for |k_i| < band * n/2 on every axis."""
    m = np.fft.fftfreq(grid.n, 1.0 / grid.n)
    mask = np.abs(m) < band * grid.n / 2
    full = np.ones(grid.shape, bool)
    for i in range(grid.d):
        shape = [1] * grid.d
        shape[i] = grid.n
        full = full & mask.reshape(shape)
    spec = (rng.normal(size=grid.shape) + 1j * rng.normal(size=grid.shape)) * full
    return SpectralField.from_spectrum(grid, spec)


def cutoff_checks(rep: Report, cfg: ExperimentConfig):
    tol = cfg.tolerances
    prof = C.make_profile()
    x01 = np.linspace(0, 1, 1001)
    x3 = np.linspace(3, 50, 1001)
    e = max(np.max(np.abs(prof.psi(x01) - x01)), np.max(np.abs(prof.psi(x3) - 2.0)))
    rep.add("cutoff_psi_pieces", "psi is the identity on [0,1] and 2 on [3,inf)", e, tol["cutoff"], e <= tol["cutoff"])
    x = np.linspace(0, 4, 4001)
    e = float(np.max(np.abs(prof.psi_deriv(x, 2) + prof.rho(x))))
    rep.add("cutoff_psi2_plus_rho", "psi'' + rho = 0", e, tol["cutoff"], e <= tol["cutoff"])
    F = C.F_R(prof, np.linspace(0, 10, 2001), 4.0)
    ok = bool(np.all(F >= -tol["cutoff"]) and np.all(F <= 1 + tol["cutoff"]) and np.all(np.diff(F) >= -tol["cutoff"]))
    rep.add("cutoff_F_R_monotone", "F_R takes values in [0,1] and is monotone",
            [float(F.min()), float(F.max())], tol["cutoff"], ok)
    for R in (1.0, 10.0, 100.0):
        res = C.lemma18_check(prof, R, 10_000, 3, cfg.seed)
        rep.add(f"pair_bound_R{R:g}", "pairwise truncation bound: no violations, finite constant",
                {"violations": res.violations, "max_ratio": res.max_ratio}, 0,
                res.violations == 0 and math.isfinite(res.max_ratio))


def check_identities(cfg: ExperimentConfig, output_dir: Path | None = None) -> Report:
    tol = cfg.tolerances
    rep = Report(cfg.name)
    rng = np.random.default_rng(cfg.seed)
    small = GridSpec(cfg.grid.d, min(cfg.grid.n, 16 if cfg.grid.d == 3 else 32), cfg.grid.L)
    worst = herm = 0.0
    for _ in range(100):
        g = random_band_limited(small, rng)
        h = random_band_limited(small, rng)
        tr = H.check_trace_identity(g, h)
        scale = max(1.0, abs(tr.lap_x))
        worst = max(worst, tr.max_disagreement() / scale)
        pts = tuple(rng.integers(0, small.n, size=20) for _ in range(small.d))
        herm = max(herm, H.check_hermitian_derivs(H.Ensemble.singleton(H.normalized(g)), pts))
    rep.add("trace_identity", "three forms of the kinetic trace agree (relative)", worst,
            tol["identity"], worst <= tol["identity"])
    rep.add("hermitian_derivatives", "Hermitian symmetry of diagonal derivatives, band-limited kernels",
            herm, tol["hermitian"], herm <= tol["hermitian"])

    ens, kernel = setup(cfg)
    # grid fields keep an unpaired Nyquist mode, whose odd derivatives do not commute
    # with conjugation, so the configured ensemble is held to the identity tolerance
    pts = tuple(rng.integers(0, cfg.grid.n, size=20) for _ in range(cfg.grid.d))
    herm = H.check_hermitian_derivs(ens, pts)
    rep.add("hermitian_derivatives_ensemble", "Hermitian symmetry of diagonal derivatives, configured ensemble",
            herm, tol["identity"], herm <= tol["identity"])
    pt = H.partial_trace_residual(ens, 20, rng)
    rep.add("partial_trace", "consistency of gamma^(2) and gamma^(1) under partial trace", pt,
            tol["identity"], pt <= tol["identity"])
    g2 = H.gamma2_diagonal_min(ens)
    rep.add("gamma2_diagonal_nonnegative", "gamma^(2)(x,y,x,y) >= 0", g2, 0.0, g2 >= 0)
    E1 = H.energy_E1(ens, kernel, cfg.propagator.mu)
    eks = max(abs(H.energy_Ek(ens, kernel, cfg.propagator.mu, k) - k * E1) for k in (1, 2, 3))
    rep.add("energy_hierarchy", "E_k = k E_1 for factorized mixtures", eks, tol["identity"],
            eks <= tol["identity"] * max(1.0, abs(E1)))
    prof = C.make_profile()
    for R in cfg.cutoff_R_list:
        r = Vr.lemma40_check(ens, prof, R)
        rep.add(f"bilaplacian_identity_R{R:g}", "bilaplacian integration by parts", r.residual,
                tol["lemma40"], r.residual <= tol["lemma40"])
    cutoff_checks(rep, cfg)
    rep.write(Path(output_dir or cfg.output_dir) / "report.json")
    return rep


def check_cutoff(cfg: ExperimentConfig, output_dir: Path | None = None) -> Report:
    rep = Report(cfg.name)
    cutoff_checks(rep, cfg)
    rep.write(Path(output_dir or cfg.output_dir) / "report.json")
    return rep


def check_potential(cfg: ExperimentConfig, output_dir: Path | None = None) -> Report:
    V = cfg.potential
    d = cfg.grid.d
    Rs = [float(r) for r in cfg.raw.get("hypothesis_R", [1e2, 1e4, 1e6])]
    hr = P.check_hypotheses(V, d, Rs)
    rep = Report(cfg.name)
    rep.summary = hr.as_dict()
    rep.add("virial_defect_nonpositive", "V + x.grad V / 2 <= 0", hr.rows[0].defect_max, 0.0, hr.defect_ok)
    rep.add("sup_tail_decays", "sup_{|x|>=R} |x||grad V| decreases to 0",
            [r.sup_tail for r in hr.rows], None, bool(hr.sup_tail_decays))
    for region, flag in (("outer", hr.outer_decays), ("inner", hr.inner_decays)):
        vals = [getattr(r, f"{region}_ratio") for r in hr.rows]
        rep.add(f"{region}_tail_ratio_decays", f"{region} L1 tail ratio decreases",
                [v if v is not None else "divergent" for v in vals], None, bool(flag))
    if V.family == "power":
        worst = 0.0
        for row in hr.rows:
            for region in ("outer", "inner"):
                num = getattr(row, f"{region}_ratio")
                try:
                    ref = P.tail_l1_closed_form(V, d, row.R, region) / row.R ** ((d - 1) / 2)
                except P.NonIntegrableTailError:
                    ref = None
                if (num is None) != (ref is None):
                    worst = math.inf
                elif num is not None:
                    worst = max(worst, abs(num - ref) / abs(ref))
        rep.add("tail_closed_form", "quadrature tails match closed-form radial integrals", worst, 1e-6,
                worst <= 1e-6)
    rep.write(Path(output_dir or cfg.output_dir) / "report.json")
    return rep
