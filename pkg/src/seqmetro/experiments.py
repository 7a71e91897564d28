"""Experiment recipes: grid points, per-point evaluation and row checks.

Every experiment expands its config into an ordered list of picklable tasks;
``evaluate`` turns one task into long-format rows.  Rows are assembled in
task order, so output never depends on worker scheduling.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .config import DESK_TWO_PARAM_N, ConfigError, ExperimentConfig
from .constants import MAX_N
from .errors import NumericalError, ResourceError

PROTOCOLS = ("single", "seq", "two-param")


@dataclass(frozen=True)
class Experiment:
    name: str
    columns: tuple[str, ...]
    tasks: Callable[[ExperimentConfig], list]
    evaluate: Callable[[tuple], list]
    check: Callable[[dict], None] | None = None


def _noise(cfg: ExperimentConfig):
    from .decoherence import NoiseModel

    n = dict(cfg.noise)
    if not n:
        return NoiseModel.standard_rates()
    if "tau_eff" in n:
        if "gamma" in n or "gamma_d" in n:
            raise ConfigError("give either tau_eff or gamma/gamma_d, not both", "tau_eff")
        tau = n.pop("tau_eff")
        return NoiseModel.from_tau_eff(tau, t_round=n.pop("t_round", 1.0), **n)
    if "t_round" not in n:
        raise ConfigError("noise section needs t_round", "t_round")
    return NoiseModel(gamma=n.pop("gamma", 0.0), t_round=n.pop("t_round"), **n)


def _noise_fields(noise) -> tuple:
    return (noise.gamma, noise.t_round, noise.gamma_d, noise.n_th, noise.g)


def _rebuild_noise(fields):
    from .decoherence import NoiseModel

    gamma, t, gd, nth, g = fields
    return NoiseModel(gamma=gamma, t_round=t, gamma_d=gd, n_th=nth, g=g)


def _guard_n(values, limit=MAX_N, name="n"):
    for n in values:
        if n > limit:
            raise ResourceError(f"N={n} exceeds the limit {limit}", parameter=name)


def _protocols(cfg, allowed=PROTOCOLS):
    ps = cfg.grid.get("protocols", ["seq"])
    for p in ps:
        if p not in allowed:
            raise ConfigError(f"unknown protocol {p!r}; choose from {', '.join(allowed)}", "protocols")
    return ps


# ---------------------------------------------------------------------------
# qfi-sweep
# ---------------------------------------------------------------------------

def _qfi_sweep_tasks(cfg):
    _guard_n(cfg.n_values())
    ps = _protocols(cfg, ("single", "seq"))
    return [(p, N, float(a)) for p in ps for N in cfg.n_values() for a in cfg.alphas()]


def _qfi_sweep_eval(task):
    from .fisher import protocol_qfi
    from .protocols import ProtocolSpec

    p, N, a = task
    spec = getattr(ProtocolSpec, p)(N, 1j * a, 0.0)
    return [(p, N, a, protocol_qfi(spec, "beta1"))]


def _check_qfi_row(row):
    if not row["qfi"] >= 0:
        raise NumericalError(f"negative QFI in row {row}")


# ---------------------------------------------------------------------------
# scaling-map
# ---------------------------------------------------------------------------

def _scaling_tasks(cfg):
    Ns = cfg.n_values()
    if "n" not in cfg.grid:
        Ns = sorted(set(np.unique(np.geomspace(cfg.grid["n_min"], cfg.grid["n_max"], 12).round().astype(int)).tolist()))
    _guard_n([n + 1 for n in Ns])
    if min(Ns) < 2:
        raise ConfigError("scaling exponents need N >= 2", "n_min")
    alphas = cfg.alphas()
    if "alpha" not in cfg.grid and cfg.grid.get("alpha_spacing") == "log":
        alphas = np.geomspace(cfg.grid["alpha_min"], cfg.grid["alpha_max"], cfg.grid["alpha_steps"])
    return [(int(N), float(a)) for N in Ns for a in alphas]


def _scaling_eval(task):
    from .fisher import protocol_qfi, scaling_exponent
    from .protocols import ProtocolSpec

    N, a = task
    F = [(n, protocol_qfi(ProtocolSpec.seq(n, 1j * a, 0.0), "beta1")) for n in (N - 1, N, N + 1)]
    p = float(scaling_exponent(F)[1][0])
    return [(N, a, N * a * a, F[1][1], p)]


# ---------------------------------------------------------------------------
# two-param-compare
# ---------------------------------------------------------------------------

def _two_param_tasks(cfg):
    Ns = cfg.n_values()
    big = [n for n in Ns if n > DESK_TWO_PARAM_N]
    if big and not cfg.full_scale:
        raise ResourceError(
            f"two-parameter N={max(big)} exceeds the desk-scale limit {DESK_TWO_PARAM_N}; pass --full-scale",
            parameter="n",
        )
    if big:
        dim = (max(big) + 1) ** 2
        warnings.warn(f"full-scale two-parameter run: dense eigensolves of dimension {dim} may take hours", RuntimeWarning, stacklevel=2)
    _guard_n([2 * n for n in Ns])
    return [(N, float(a)) for N in Ns for a in cfg.alphas()]


def _two_param_eval(task):
    from .fisher import protocol_qfi, qfi_matrix
    from .protocols import ProtocolSpec, build_rho, d_rho

    N, a = task
    st = build_rho(ProtocolSpec.two_param(N, a, 0.0))
    rep = qfi_matrix(st, d_rho(st, "beta1"), d_rho(st, "beta2"))
    F = rep.qfi
    return [
        ("seq-N", N, a, "11", protocol_qfi(ProtocolSpec.seq(N, 1j * a, 0.0), "beta1")),
        ("seq-2N", 2 * N, a, "11", protocol_qfi(ProtocolSpec.seq(2 * N, 1j * a, 0.0), "beta1")),
        ("two-param", N, a, "11", float(F[0, 0])),
        ("two-param", N, a, "22", float(F[1, 1])),
        ("two-param", N, a, "12", float(F[0, 1])),
    ]


def _check_two_param_row(row):
    if row["entry"] != "12" and not row["qfi"] >= 0:
        raise NumericalError(f"negative QFI in row {row}")


# ---------------------------------------------------------------------------
# cfi-saturation
# ---------------------------------------------------------------------------

def _cfi_tasks(cfg):
    _guard_n(cfg.n_values())
    ps = _protocols(cfg, ("single", "seq"))
    return [(p, float(b), N, float(a)) for p in ps for b in cfg.grid["beta1"] for a in cfg.alphas() for N in cfg.n_values()]


def _cfi_eval(task):
    from .fisher import outcome_distribution, protocol_report
    from .protocols import ProtocolSpec, build_rho

    p, b, N, a = task
    spec = getattr(ProtocolSpec, p)(N, 1j * a, b)
    rep = protocol_report(spec, "beta1")
    q, c = float(rep.qfi[0, 0]), float(rep.cfi[0, 0])
    mean = outcome_distribution(build_rho(spec)).mean_excitation
    return [(p, b, N, a, c, q, c / q if q > 0 else math.nan, mean)]


def _check_cfi_row(row):
    q, c = row["qfi"], row["cfi"]
    if c < -1e-12 or c > q * (1 + 1e-8) + 1e-12:
        raise NumericalError(f"CFI outside [0, QFI] in row {row}")
    if not 0.0 <= row["mean_excitation"] <= 1.0 + 1e-12:
        raise NumericalError(f"mean excitation outside [0, 1] in row {row}")


# ---------------------------------------------------------------------------
# crb-map
# ---------------------------------------------------------------------------

def _crb_tasks(cfg):
    g = cfg.grid
    _guard_n(cfg.n_values())
    mags = np.linspace(g["beta_abs_min"], g["beta_abs_max"], g["beta_abs_steps"])
    phases = np.linspace(g["beta_phase_min"], g["beta_phase_max"], g["beta_phase_steps"])
    return [(N, float(a), float(m), float(ph)) for N in cfg.n_values() for a in cfg.alphas() for m in mags for ph in phases]


def _crb_eval(task):
    from .fisher import crb_min_over_rounds, single_two_quadrature_crb
    from .protocols import ProtocolSpec

    N, a, m, ph = task
    beta = m * complex(math.cos(ph), math.sin(ph))
    seq = crb_min_over_rounds(ProtocolSpec.two_param(N, a, beta))
    single = single_two_quadrature_crb(N, a, beta)[0]
    common = (N, a, m, ph, beta.real, beta.imag)
    return [("seq-min", *common, seq.crb), ("single", *common, single)]


def _check_crb_row(row):
    if not (row["crb"] > 0 or math.isinf(row["crb"])):
        raise NumericalError(f"CRB must be positive in row {row}")


# ---------------------------------------------------------------------------
# decoherence
# ---------------------------------------------------------------------------

def _decoherence_tasks(cfg):
    noise = _noise(cfg)
    ps = _protocols(cfg, ("seq", "two-param"))
    method = cfg.grid.get("method", "symmetric")
    if method not in ("symmetric", "exact"):
        raise ConfigError(f"method must be symmetric or exact, got {method!r}", "method")
    rounds_max = cfg.grid.get("rounds_max")
    tasks = []
    for p in ps:
        for N in cfg.n_values():
            for a in cfg.alphas():
                R = 2 * N if p == "two-param" else N
                R = R if rounds_max is None else min(R, rounds_max)
                if method == "exact" and R > 12:
                    raise ResourceError(f"exact branches over {R} rounds exceed the dense limit 12", parameter="rounds_max")
                tasks.append((p, N, float(a), cfg.beta(), R, method, _noise_fields(noise)))
    return tasks


def _decoherence_eval(task):
    from .decoherence import noisy_crb_curve
    from .protocols import ProtocolSpec

    p, N, a, beta, R, method, fields = task
    noise = _rebuild_noise(fields)
    spec = ProtocolSpec.two_param(N, a, beta) if p == "two-param" else ProtocolSpec.seq(N, 1j * a, beta)
    curves = noisy_crb_curve(spec, noise, R, method=method)
    rows = []
    for label, key in ((p, "seq"), ("single", "single")):
        c = curves[key]
        for i in range(len(c["round"])):
            rows.append((label, int(c["round"][i]), float(c["time"][i]), float(c["crb"][i]), float(c["crb_running_min"][i])))
    return rows


# ---------------------------------------------------------------------------
# validate
# ---------------------------------------------------------------------------

def _validate_tasks(cfg):
    from .validation import CHECKS

    return [(name,) for name in CHECKS]


def _validate_eval(task):
    from .validation import run_check

    return [run_check(task[0]).row()]


# ---------------------------------------------------------------------------
# sample
# ---------------------------------------------------------------------------

def _sample_tasks(cfg):
    ps = _protocols(cfg)
    if len(ps) != 1 or len(cfg.n_values()) != 1 or len(cfg.alphas()) != 1:
        raise ConfigError("sample takes exactly one protocol, one N and one alpha", "protocols")
    N = cfg.n_values()[0]
    if N > 22:
        raise ResourceError(f"sampling is limited to 22 rounds, got N={N}", parameter="n")
    noise = _noise_fields(_noise(cfg)) if cfg.noise else None
    return [(ps[0], N, float(cfg.alphas()[0]), cfg.beta(), cfg.seed, cfg.count, noise)]


def _sample_eval(task):
    from .oracle import sample_trajectories
    from .protocols import ProtocolSpec

    p, N, a, beta, seed, count, fields = task
    if p == "two-param":
        spec = ProtocolSpec.two_param(N, a, beta)
    else:
        spec = getattr(ProtocolSpec, p)(N, 1j * a, beta)
    noise = _rebuild_noise(fields) if fields is not None else None
    bits = sample_trajectories(spec, noise, seed=seed, count=count)
    real = bits[:, 0::2] if p == "two-param" else bits
    imag = bits[:, 1::2] if p == "two-param" else bits[:, :0]
    rows = []
    for i, row in enumerate(bits):
        rows.append((i, "".join("1" if v else "0" for v in row), int(real[i].sum()), int(imag[i].sum())))
    return rows


EXPERIMENTS = {
    "qfi-sweep": Experiment("qfi-sweep", ("protocol", "N", "alpha", "qfi"), _qfi_sweep_tasks, _qfi_sweep_eval, _check_qfi_row),
    "scaling-map": Experiment("scaling-map", ("N", "alpha", "N_alpha2", "qfi", "p"), _scaling_tasks, _scaling_eval, _check_qfi_row),
    "two-param-compare": Experiment(
        "two-param-compare", ("protocol", "N", "alpha", "entry", "qfi"), _two_param_tasks, _two_param_eval, _check_two_param_row
    ),
    "cfi-saturation": Experiment(
        "cfi-saturation",
        ("protocol", "beta1", "N", "alpha", "cfi", "qfi", "ratio", "mean_excitation"),
        _cfi_tasks,
        _cfi_eval,
        _check_cfi_row,
    ),
    "crb-map": Experiment(
        "crb-map", ("protocol", "N", "alpha", "beta_abs", "beta_phase", "beta1", "beta2", "crb"), _crb_tasks, _crb_eval, _check_crb_row
    ),
    "decoherence": Experiment(
        "decoherence", ("protocol", "round", "time", "crb", "crb_running_min"), _decoherence_tasks, _decoherence_eval, _check_crb_row
    ),
    "validate": Experiment("validate", ("check", "value", "tolerance", "status"), _validate_tasks, _validate_eval),
    "sample": Experiment("sample", ("trajectory", "bitstring", "k_real", "k_imag"), _sample_tasks, _sample_eval),
}
