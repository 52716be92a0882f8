"""Run configuration: plain-text config files with sections, plus defaults.

A run config names the problem preset, the input variant, grids, scheme
options, reference options, and training hyperparameters. Flag overrides use
``section.key=value`` strings.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .stencils import VARIANTS

DEFAULT_TRAIN_DELTAS = (0.02, -0.02, 0.04, -0.04, 0.06, -0.06, 0.08, -0.08, 0.10, -0.10)
DEFAULT_EVAL_1D = (0.0, 0.03, -0.03, 0.05, -0.05, 0.07, -0.07)
DEFAULT_EVAL_2D = (0.0, 0.03, -0.03, 0.05, -0.05)


@dataclass
class RunConfig:
    preset: str = ""
    variant: str = "cg1d"
    eval_deltas: tuple = ()
    train_deltas: tuple = DEFAULT_TRAIN_DELTAS
    coarse_cells: int = 50
    cfl: float = 0.4
    cfl_margin: float = 1.0
    input_solver: str = "leapfrog_diffusion"
    alpha_factor: float = 1.0
    diffusion_ratio: float = 4.0
    reference_cells: int | None = None
    reference_flux: str = "hll"
    hidden_layers: int | None = None
    width: int | None = None
    activation: str = "tanh"
    adam_iters: int = 4000
    lbfgs_iters: int = 1000
    adam_lr: float = 1e-3
    seed: int | None = None
    precision: str = "f64"
    tolerance: float = 1e-10
    cross_presets: tuple = ()
    intermediate_dt: int = 0
    out_dir: str = "runs/out"
    cross_sections: tuple = ()  # y-values to export for 2D runs
    raw: dict = field(default_factory=dict)

    @property
    def dtype(self):
        return np.float32 if self.precision == "f32" else np.float64


_SCHEMA = {
    ("problem", "preset"): ("preset", str),
    ("problem", "eval_deltas"): ("eval_deltas", "floats"),
    ("problem", "cross_presets"): ("cross_presets", "strs"),
    ("variant", "kind"): ("variant", str),
    ("grids", "coarse_cells"): ("coarse_cells", int),
    ("grids", "cfl"): ("cfl", float),
    ("grids", "cfl_margin"): ("cfl_margin", float),
    ("scheme", "input_solver"): ("input_solver", str),
    ("scheme", "alpha_factor"): ("alpha_factor", float),
    ("scheme", "diffusion_ratio"): ("diffusion_ratio", float),
    ("reference", "cells"): ("reference_cells", int),
    ("reference", "flux"): ("reference_flux", str),
    ("training", "deltas"): ("train_deltas", "floats"),
    ("training", "hidden_layers"): ("hidden_layers", int),
    ("training", "width"): ("width", int),
    ("training", "activation"): ("activation", str),
    ("training", "adam_iters"): ("adam_iters", int),
    ("training", "lbfgs_iters"): ("lbfgs_iters", int),
    ("training", "adam_lr"): ("adam_lr", float),
    ("training", "seed"): ("seed", int),
    ("training", "precision"): ("precision", str),
    ("training", "tolerance"): ("tolerance", float),
    ("training", "intermediate_dt"): ("intermediate_dt", int),
    ("output", "dir"): ("out_dir", str),
    ("output", "cross_sections"): ("cross_sections", "floats"),
}


def _convert(value: str, kind):
    if kind == "floats":
        return tuple(float(v) for v in value.replace(",", " ").split())
    if kind == "strs":
        return tuple(v for v in value.replace(",", " ").split())
    return kind(value)


def load_config(path=None, overrides=(), text=None) -> RunConfig:
    """Read a config file (or literal text) and apply section.key=value overrides."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        if text is not None:
            parser.read_string(text)
        elif path is not None:
            if not parser.read(str(path)):
                raise ConfigError(f"cannot read config file {path}")
        for item in overrides:
            if "=" not in item or "." not in item.split("=", 1)[0]:
                raise ConfigError(f"override {item!r} is not section.key=value")
            target, value = item.split("=", 1)
            section, key = target.split(".", 1)
            if not parser.has_section(section.strip()):
                parser.add_section(section.strip())
            parser.set(section.strip(), key.strip(), value.strip())
    except (configparser.Error, ValueError) as err:
        raise ConfigError(f"bad config: {err}") from err

    cfg = RunConfig()
    seen = {}
    for section in parser.sections():
        for key, value in parser.items(section):
            spec = _SCHEMA.get((section, key))
            if spec is None:
                raise ConfigError(f"unknown config key [{section}] {key}")
            attr, kind = spec
            try:
                seen[attr] = _convert(value, kind)
            except ValueError as err:
                raise ConfigError(f"bad value for [{section}] {key}: {err}") from err
    for attr, value in seen.items():
        setattr(cfg, attr, value)
    cfg.raw = seen
    validate_config(cfg)
    return cfg


def validate_config(cfg: RunConfig) -> None:
    if not cfg.preset and not cfg.cross_presets:
        raise ConfigError("config must name a preset (or cross_presets)")
    if cfg.variant not in VARIANTS:
        raise ConfigError(f"variant must be one of {VARIANTS}, got {cfg.variant!r}")
    if cfg.input_solver not in ("leapfrog_diffusion", "rusanov", "reference"):
        raise ConfigError(f"unknown input_solver {cfg.input_solver!r}")
    if cfg.reference_flux not in ("hll", "hllc"):
        raise ConfigError("reference flux must be hll or hllc")
    if cfg.precision not in ("f64", "f32"):
        raise ConfigError("precision must be f64 or f32")
    if not 0.0 < cfg.cfl < 1.0:
        raise ConfigError("cfl must lie in (0, 1)")
    if cfg.coarse_cells < 4:
        raise ConfigError("coarse_cells must be at least 4")
    if not cfg.train_deltas:
        raise ConfigError("training deltas must be nonempty")
    overlap = set(cfg.train_deltas) & set(cfg.eval_deltas or ())
    if overlap:
        raise ConfigError(
            f"training and evaluation perturbations must be disjoint, share {sorted(overlap)}"
        )


def default_eval_deltas(dim: int) -> tuple:
    return DEFAULT_EVAL_1D if dim == 1 else DEFAULT_EVAL_2D


def default_architecture(dim: int, preset_names, dt_in_input: bool) -> tuple[int, int]:
    """(hidden layers, width) defaults per problem family."""
    names = set(preset_names)
    if dim == 1:
        if len(names) > 1:  # cross-training over several problems
            return (6, 255) if dt_in_input else (5, 66)
        return 6, 180
    if "config4" in names:
        return 9, 360
    if names & {"config6", "config8"}:
        return 8, 360
    return 8, 320
