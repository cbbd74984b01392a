"""Experiment configuration: one YAML file per experiment, plus key=value overrides."""
from __future__ import annotations

import copy
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .grid import GridSpec
from .potentials import Potential
from .solver import PropagatorConfig


class ConfigError(ValueError):
    """A config problem, tagged with the dotted path of the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


DEFAULT_TOLERANCES = {
    "mass": 1e-10,            # |mass(t) - mass(0)|
    "energy": 1e-5,           # relative E1 drift
    "virial": 1e-3,           # |FD2[V1] - virial rhs|
    "localized": 1e-3,        # |FD2[Tr(psi_R gamma)] - localized rhs|
    "free_variance": 1e-6,    # variance against the free Gaussian closed form
    "identity": 1e-8,         # static algebraic identities
    "hermitian": 1e-10,
    "cutoff": 1e-14,
    "lemma40": 1e-6,
    "bound": 1e-6,            # slack in the localized bound comparison
    "envelope": 1e-6,
    "blowup_slack": 2.0,      # detection must come before slack * envelope root
}


@dataclass
class ExperimentConfig:
    name: str
    grid: GridSpec
    potential: Potential
    regularization: str
    ensemble: list
    propagator: PropagatorConfig
    cutoff_R_list: list
    tolerances: dict
    seed: int
    output_dir: Path
    raw: dict = field(repr=False, default_factory=dict)


def _get(tree: dict, path: str, kind=None, required=True, default=None):
    node: Any = tree
    for part in path.split("."):
        if not isinstance(node, dict) or part not in node:
            if required:
                raise ConfigError(path, "missing required field")
            return default
        node = node[part]
    if node is None:
        if required:
            raise ConfigError(path, "must not be null")
        return default
    if kind is not None:
        try:
            if kind is int and (isinstance(node, bool) or float(node) != int(node)):
                raise ValueError
            node = kind(node)
        except (TypeError, ValueError):
            raise ConfigError(path, f"expected {kind.__name__}, got {node!r}") from None
    return node


def _parse_scalar(text: str):
    return yaml.safe_load(text)


def apply_overrides(tree: dict, overrides) -> dict:
    """Apply ``a.b.c=value`` strings; values are parsed as YAML scalars or lists."""
    tree = copy.deepcopy(tree)
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(item, "override must look like key=value")
        key, value = item.split("=", 1)
        parts = key.strip().split(".")
        node = tree
        for p in parts[:-1]:
            nxt = node.setdefault(p, {})
            if not isinstance(nxt, dict):
                raise ConfigError(key, "cannot descend into a non-mapping")
            node = nxt
        node[parts[-1]] = _parse_scalar(value)
    return tree


def load_tree(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError("<file>", str(exc)) from None
    try:
        tree = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("<file>", f"not valid YAML: {exc}") from None
    if not isinstance(tree, dict):
        raise ConfigError("<root>", "config must be a mapping")
    return tree


def parse(tree: dict) -> ExperimentConfig:
    d = _get(tree, "grid.d", int)
    n = _get(tree, "grid.n", int)
    L = _get(tree, "grid.L", float)
    try:
        grid = GridSpec(d, n, L)
    except ValueError as exc:
        raise ConfigError("grid", str(exc)) from None

    pot = _get(tree, "potential", dict, required=False, default={"family": "zero"})
    try:
        potential = Potential.from_config(pot)
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError("potential", str(exc)) from None
    regularization = str(pot.get("regularization", "spectral"))
    if regularization not in ("spectral", "cell_average"):
        raise ConfigError("potential.regularization", f"unknown value {regularization!r}")

    ens = _get(tree, "ensemble", list)
    if not ens:
        raise ConfigError("ensemble", "need at least one member")
    for i, e in enumerate(ens):
        base = f"ensemble[{i}]"
        if not isinstance(e, dict):
            raise ConfigError(base, "expected a mapping")
        if "weight" not in e:
            raise ConfigError(base + ".weight", "missing required field")
        try:
            g = e["profile"]["gaussian"]
        except (KeyError, TypeError):
            raise ConfigError(base + ".profile.gaussian", "missing required field") from None
        if not isinstance(g, dict):
            raise ConfigError(base + ".profile.gaussian", "expected a mapping")
        if "width" in g and not float(g["width"]) > 0:
            raise ConfigError(base + ".profile.gaussian.width", "must be positive")

    try:
        prop = PropagatorConfig(
            dt=_get(tree, "propagator.dt", float),
            t_end=_get(tree, "propagator.t_end", float),
            mu=_get(tree, "propagator.mu", int),
            blowup_gradient_threshold=_get(tree, "propagator.blowup_gradient_threshold", float,
                                           required=False, default=float("inf")),
            dt_floor=_get(tree, "propagator.dt_floor", float, required=False, default=0.0),
            record_every=_get(tree, "propagator.record_every", int, required=False, default=1),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("propagator", str(exc)) from None

    R_list = [float(r) for r in (_get(tree, "cutoff_R_list", list, required=False, default=[]) or [])]
    if any(r <= 0 for r in R_list):
        raise ConfigError("cutoff_R_list", "radii must be positive")
    tol = dict(DEFAULT_TOLERANCES)
    given = _get(tree, "tolerances", dict, required=False, default={}) or {}
    for k, v in given.items():
        if k not in DEFAULT_TOLERANCES:
            raise ConfigError(f"tolerances.{k}", "unknown tolerance")
        try:
            tol[k] = float(v)
        except (TypeError, ValueError):
            raise ConfigError(f"tolerances.{k}", f"expected a number, got {v!r}") from None
    return ExperimentConfig(
        name=str(tree.get("name", "experiment")),
        grid=grid,
        potential=potential,
        regularization=regularization,
        ensemble=ens,
        propagator=prop,
        cutoff_R_list=R_list,
        tolerances=tol,
        seed=_get(tree, "seed", int, required=False, default=0),
        output_dir=Path(str(tree.get("output_dir", "out"))),
        raw=tree,
    )


def load(path, overrides=()) -> ExperimentConfig:
    return parse(apply_overrides(load_tree(path), overrides))
