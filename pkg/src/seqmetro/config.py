"""Strict INI configuration for the experiment runner."""
from __future__ import annotations

import configparser
import math
import os
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import SeqMetroError

EXPERIMENTS = (
    "qfi-sweep",
    "scaling-map",
    "two-param-compare",
    "cfi-saturation",
    "crb-map",
    "decoherence",
    "validate",
    "sample",
)


class ConfigError(SeqMetroError):
    def __init__(self, message: str, key: str | None = None, line: int | None = None):
        where = ""
        if key is not None:
            where = f" [key '{key}'" + (f", line {line}]" if line is not None else "]")
        super().__init__(message + where)
        self.key = key
        self.line = line


def _ints(text):
    return [int(v) for v in _split(text)]


def _floats(text):
    return [float(v) for v in _split(text)]


def _split(text):
    parts = [p.strip() for p in str(text).split(",")]
    if not parts or any(p == "" for p in parts):
        raise ValueError("empty list entry")
    return parts


def _bool(text):
    v = str(text).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _words(text):
    return [p.lower() for p in _split(text)]


# section -> key -> parser
SCHEMA = {
    "run": {
        "experiment": str,
        "out": str,
        "format": str,
        "workers": int,
        "seed": int,
        "count": int,
        "full_scale": _bool,
    },
    "grid": {
        "n": _ints,
        "alpha": _floats,
        "alpha_min": float,
        "alpha_max": float,
        "alpha_steps": int,
        "alpha_spacing": str,
        "beta": _floats,
        "beta1": _floats,
        "beta2": _floats,
        "beta_abs_min": float,
        "beta_abs_max": float,
        "beta_abs_steps": int,
        "beta_phase_min": float,
        "beta_phase_max": float,
        "beta_phase_steps": int,
        "n_min": int,
        "n_max": int,
        "rounds_max": int,
        "protocols": _words,
        "eps_eig": float,
        "method": str,
    },
    "noise": {
        "gamma": float,
        "gamma_d": float,
        "n_th": float,
        "t_round": float,
        "g": float,
        "tau_eff": float,
    },
}

# defaults per experiment (desk scale)
DEFAULTS = {
    "qfi-sweep": {"n": [410, 450, 500], "alpha_min": 0.05, "alpha_max": 1.0, "alpha_steps": 40, "protocols": ["single", "seq"]},
    "scaling-map": {"n_min": 10, "n_max": 200, "alpha_min": 0.005, "alpha_max": 1.0, "alpha_steps": 40, "alpha_spacing": "log"},
    "two-param-compare": {"n": [24], "alpha_min": 0.02, "alpha_max": 1.0, "alpha_steps": 50, "beta": [0.0, 0.0]},
    "cfi-saturation": {"n_min": 1, "n_max": 120, "alpha": [0.2], "beta1": [0.05, 0.1], "protocols": ["seq", "single"]},
    "crb-map": {
        "n": [20],
        "alpha": [0.2],
        "beta_abs_min": 0.05,
        "beta_abs_max": 1.0,
        "beta_abs_steps": 21,
        "beta_phase_min": 0.0,
        "beta_phase_max": math.pi / 2,
        "beta_phase_steps": 21,
    },
    "decoherence": {"n": [7], "alpha": [0.4], "beta": [0.3536, 0.3536], "method": "symmetric", "protocols": ["two-param"]},
    "validate": {},
    "sample": {"n": [6], "alpha": [0.3], "beta": [0.1, 0.0], "protocols": ["seq"]},
}

DESK_TWO_PARAM_N = 24


@dataclass
class ExperimentConfig:
    experiment: str
    grid: dict = field(default_factory=dict)
    noise: dict = field(default_factory=dict)
    out: str | None = None
    format: str = "csv"
    workers: int = 1
    seed: int = 0
    count: int = 100000
    full_scale: bool = False
    source: str | None = None

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; choose from {', '.join(EXPERIMENTS)}", "experiment")
        if self.format not in ("csv", "json"):
            raise ConfigError(f"format must be csv or json, got {self.format!r}", "format")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1", "workers")
        if self.count < 1:
            raise ConfigError("count must be at least 1", "count")
        if self.experiment == "decoherence" and not self.noise:
            # default rates: tau_eff ~ 0.15 per round at |beta| = 0.5
            t = 15.92e-6
            self.noise = {"gamma": 1.89e4, "t_round": t, "g": math.sqrt(2.0) * 0.5 / t}
        merged = dict(DEFAULTS[self.experiment])
        merged.update(self.grid)
        self.grid = merged
        self._validate_grid()

    def _validate_grid(self):
        g = self.grid
        for key in ("alpha_steps", "beta_abs_steps", "beta_phase_steps"):
            if key in g and g[key] < 1:
                raise ConfigError("steps must be positive", key)
        for key in ("n", "alpha", "beta1", "beta2", "protocols"):
            if key in g and len(g[key]) == 0:
                raise ConfigError("grid must be nonempty", key)
        if "n" in g and any(n < 1 for n in g["n"]):
            raise ConfigError("round counts must be positive", "n")
        if "n_min" in g and "n_max" in g and not 1 <= g["n_min"] <= g["n_max"]:
            raise ConfigError("need 1 <= n_min <= n_max", "n_min")
        if g.get("alpha_spacing", "linear") not in ("linear", "log"):
            raise ConfigError("alpha_spacing must be linear or log", "alpha_spacing")
        if "beta" in g and len(g["beta"]) != 2:
            raise ConfigError("beta takes two values: beta1, beta2", "beta")

    # grid helpers --------------------------------------------------------
    def alphas(self) -> np.ndarray:
        g = self.grid
        if "alpha" in g:
            return np.asarray(g["alpha"], dtype=float)
        return np.linspace(g["alpha_min"], g["alpha_max"], g["alpha_steps"])

    def n_values(self) -> list[int]:
        g = self.grid
        if "n" in g:
            return list(g["n"])
        return list(range(g["n_min"], g["n_max"] + 1))

    def beta(self) -> complex:
        b = self.grid.get("beta", [0.0, 0.0])
        return complex(b[0], b[1])

    def resolved(self) -> dict:
        return {
            "experiment": self.experiment,
            "grid": {k: v for k, v in sorted(self.grid.items())},
            "noise": dict(sorted(self.noise.items())),
            "format": self.format,
            "workers": self.workers,
            "seed": self.seed,
            "count": self.count,
            "full_scale": self.full_scale,
            "source": self.source,
        }


def _line_numbers(path: str) -> dict:
    """Map ``(section, key)`` to the line it appears on."""
    lines = {}
    section = None
    with open(path, encoding="utf-8") as fh:
        for no, raw in enumerate(fh, start=1):
            s = raw.strip()
            m = re.match(r"^\[([^\]]+)\]$", s)
            if m:
                section = m.group(1).strip().lower()
                lines[(section, None)] = no
                continue
            m = re.match(r"^([^=:#;\s][^=:]*?)\s*[=:]", s)
            if m and section is not None:
                lines.setdefault((section, m.group(1).strip().lower()), no)
    return lines


def load_config(path: str | None, experiment: str | None = None, overrides: dict | None = None) -> ExperimentConfig:
    """Parse ``path`` strictly and apply command-line and environment overrides.

    Environment variables ``SEQMETRO_OUT`` and ``SEQMETRO_WORKERS`` override
    only the output path and worker count; explicit command-line values win.
    """
    run, grid, noise = {}, {}, {}
    if path is not None:
        if not os.path.exists(path):
            raise ConfigError(f"config file {path!r} not found")
        parser = configparser.ConfigParser(strict=True, interpolation=None, inline_comment_prefixes=("#", ";"))
        parser.optionxform = str.lower
        try:
            parser.read(path, encoding="utf-8")
        except configparser.Error as exc:
            line = getattr(exc, "lineno", None)
            key = getattr(exc, "option", None) or getattr(exc, "section", None)
            raise ConfigError(f"cannot parse config: {exc.message if hasattr(exc, 'message') else exc}", key, line) from exc
        lines = _line_numbers(path)
        targets = {"run": run, "grid": grid, "noise": noise}
        for section in parser.sections():
            sec = section.lower()
            if sec not in SCHEMA:
                raise ConfigError(f"unknown section [{section}]", section, lines.get((sec, None)))
            for key, raw in parser.items(section):
                if key not in SCHEMA[sec]:
                    raise ConfigError(f"unknown key in [{section}]", key, lines.get((sec, key)))
                try:
                    targets[sec][key] = SCHEMA[sec][key](raw)
                except ValueError as exc:
                    raise ConfigError(f"bad value {raw!r}: {exc}", key, lines.get((sec, key))) from exc
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    env_out = os.environ.get("SEQMETRO_OUT")
    env_workers = os.environ.get("SEQMETRO_WORKERS")
    if env_out:
        run["out"] = env_out
    if env_workers:
        try:
            run["workers"] = int(env_workers)
        except ValueError as exc:
            raise ConfigError(f"SEQMETRO_WORKERS must be an integer, got {env_workers!r}", "workers") from exc
    run.update(overrides)
    exp = experiment or run.pop("experiment", None)
    run.pop("experiment", None)
    if exp is None:
        raise ConfigError("no experiment given", "experiment")
    return ExperimentConfig(experiment=exp, grid=grid, noise=noise, source=path, **run)
