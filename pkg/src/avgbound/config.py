"""Flat ``section.key = value`` run configuration.

Example::

    example.id = rigid_body
    example.figure = a          # preset, individual keys below override it
    example.epsilon = 1e-3
    family.kind = component     # or: partition, with family.blocks = 1,2; 3
    n_op.abs_tol = 1e-10
    l_op.steps_per_period = 50
    sweep.epsilon = 1e-2, 1e-3

Unknown keys are rejected.  Partition blocks are written with 1-based
indices and stored 0-based.
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ConfigError, ParameterError
from .ode import IntegratorConfig
from .registry import get_example

__all__ = ["RunConfig", "parse_config", "load_config", "SWEEP_PARAMS"]

SWEEP_PARAMS = ("mu", "lambda1", "lambda2", "epsilon", "U")

_FLOAT_KEYS = {"mu", "lambda1", "lambda2", "epsilon", "U", "theta0"}
_KNOWN = {
    "example": {"id", "figure", "I0"} | _FLOAT_KEYS,
    "family": {"kind", "blocks"},
    "n_op": {"method", "abs_tol", "rel_tol", "max_step", "initial_step", "step", "max_steps"},
    "fixed_point": {"ell_star", "sigma", "A", "tol", "max_iter"},
    "flow": {"source"},
    "l_op": {"steps_per_period", "step"},
    "samples": {"verify", "windows", "check", "family"},
    "audit": {"nodes", "tol"},
    "output": {"dir"},
    "sweep": set(SWEEP_PARAMS) | {"workers"},
    "debug": {"corrupt", "corrupt_factor"},
    "": {"seed"},
}


@dataclass
class RunConfig:
    example_id: str = "rigid_body"
    params_block: dict = field(default_factory=dict)
    params: object = None
    family_kind: str = "component"
    blocks: Optional[tuple] = None
    n_cfg: Optional[IntegratorConfig] = None
    fixed_point: dict = field(default_factory=dict)
    flow_source: Optional[str] = None
    steps_per_period: int = 50
    l_step: Optional[float] = None
    n_samples: int = 100_000
    n_windows: int = 20
    check_samples: int = 1000
    family_trials: int = 10_000
    audit_nodes: int = 10_001
    audit_tol: float = 1e-6
    out_dir: str = "out"
    seed: int = 0
    sweep: dict = field(default_factory=dict)
    workers: int = 1
    corrupt: Optional[str] = None
    corrupt_factor: float = 2.0

    def with_params(self, **updates) -> "RunConfig":
        """Copy with parameter entries replaced and re-validated."""
        block = dict(self.params_block, **updates)
        return dataclasses.replace(self, params_block=block,
                                   params=get_example(self.example_id).make_params(block))


def _float(key, text):
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {text!r}") from None


def _int(key, text):
    val = _float(key, text)
    if val != int(val):
        raise ConfigError(f"{key}: expected an integer, got {text!r}")
    return int(val)


def _floats(key, text, sep=","):
    text = text.strip()
    if not text:
        return []
    return [_float(key, t.strip()) for t in text.split(sep)]


def _matrix(key, text):
    rows = [_floats(key, r) for r in text.split(";") if r.strip()]
    if not rows or len({len(r) for r in rows}) != 1:
        raise ConfigError(f"{key}: expected rows of equal length separated by ';'")
    return np.array(rows)


def _blocks(text):
    blocks = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        idx = [_int("family.blocks", t.strip()) for t in chunk.split(",")]
        if any(i < 1 for i in idx):
            raise ConfigError("family.blocks: indices are 1-based")
        blocks.append(tuple(i - 1 for i in idx))
    if not blocks:
        raise ConfigError("family.blocks: no blocks given")
    return tuple(blocks)


def parse_config(text: str) -> RunConfig:
    """Parse and validate configuration text (parameters checked for admissibility)."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",), delimiters=("=",))
    cp.optionxform = str
    try:
        cp.read_string("[root]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed configuration: {exc}") from None
    raw = dict(cp["root"])

    cfg = RunConfig()
    example, n_op = {}, {}
    for key, val in raw.items():
        section, _, name = key.rpartition(".")
        if section not in _KNOWN or name not in _KNOWN[section]:
            raise ConfigError(f"unknown configuration key {key!r}")
        if section == "example":
            example[name] = val
        elif section == "n_op":
            n_op[name] = val
        elif section == "sweep":
            if name == "workers":
                cfg.workers = _int(key, val)
            else:
                cfg.sweep[name] = _floats(key, val)
        elif key == "family.kind":
            cfg.family_kind = val.strip()
        elif key == "family.blocks":
            cfg.blocks = _blocks(val)
        elif section == "fixed_point":
            if name == "A":
                cfg.fixed_point[name] = _matrix(key, val)
            elif name in ("tol",):
                cfg.fixed_point[name] = _float(key, val)
            elif name == "max_iter":
                cfg.fixed_point[name] = _int(key, val)
            else:
                cfg.fixed_point[name] = np.array(_floats(key, val))
        elif key == "flow.source":
            cfg.flow_source = val.strip()
        elif key == "l_op.steps_per_period":
            cfg.steps_per_period = _int(key, val)
        elif key == "l_op.step":
            cfg.l_step = _float(key, val)
        elif key == "samples.verify":
            cfg.n_samples = _int(key, val)
        elif key == "samples.windows":
            cfg.n_windows = _int(key, val)
        elif key == "samples.check":
            cfg.check_samples = _int(key, val)
        elif key == "samples.family":
            cfg.family_trials = _int(key, val)
        elif key == "audit.nodes":
            cfg.audit_nodes = _int(key, val)
        elif key == "audit.tol":
            cfg.audit_tol = _float(key, val)
        elif key == "output.dir":
            cfg.out_dir = val.strip()
        elif key == "seed":
            cfg.seed = _int(key, val)
        elif key == "debug.corrupt":
            cfg.corrupt = val.strip() or None
        elif key == "debug.corrupt_factor":
            cfg.corrupt_factor = _float(key, val)

    cfg.example_id = example.pop("id", "rigid_body").strip()
    block = {}
    if "figure" in example:
        from .rigid_body import FIGURES

        fig = example.pop("figure").strip()
        if cfg.example_id != "rigid_body" or fig not in FIGURES:
            raise ConfigError(f"example.figure = {fig!r} is only defined for the rigid_body presets a-d")
        block.update(FIGURES[fig])
    for name, val in example.items():
        block[name] = _floats("example.I0", val) if name == "I0" else _float(f"example.{name}", val)
    cfg.params_block = block
    try:
        cfg.params = get_example(cfg.example_id).make_params(block)
    except ParameterError as exc:
        raise ConfigError(f"inadmissible parameters ({exc.condition}): {exc}") from None

    if cfg.family_kind not in ("component", "partition"):
        raise ConfigError(f"family.kind must be component or partition, got {cfg.family_kind!r}")
    if cfg.family_kind == "partition" and cfg.blocks is None:
        raise ConfigError("family.kind = partition needs family.blocks")
    if cfg.flow_source not in (None, "closed_form", "numeric"):
        raise ConfigError(f"flow.source must be closed_form or numeric, got {cfg.flow_source!r}")
    if cfg.n_samples < 2 or cfg.n_windows < 1 or cfg.steps_per_period < 1 or cfg.workers < 1:
        raise ConfigError("sample counts, windows, steps_per_period and workers must be positive")
    if n_op:
        kw = {}
        for name, val in n_op.items():
            if name == "method":
                kw["method"] = val.strip()
            elif name == "max_steps":
                kw[name] = _int(f"n_op.{name}", val)
            else:
                kw[name] = _float(f"n_op.{name}", val)
        try:
            cfg.n_cfg = IntegratorConfig(**kw)
        except ValueError as exc:
            raise ConfigError(f"invalid n_op settings: {exc}") from None
    if cfg.fixed_point and not {"ell_star", "sigma", "A"} <= set(cfg.fixed_point):
        raise ConfigError("fixed_point needs ell_star, sigma and A together")
    return cfg


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read configuration {path}: {exc}") from None
    return parse_config(text)
