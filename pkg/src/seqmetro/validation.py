"""Fast oracle-equivalence and closed-form checks behind ``validate``."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .protocols import Kind, ProtocolSpec, build_rho, d_rho, joint_qfi_closed_form, prefix_state


@dataclass(frozen=True)
class CheckResult:
    check: str
    value: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.value) and self.value <= self.tolerance)

    def row(self) -> tuple:
        return (self.check, float(self.value), float(self.tolerance), "pass" if self.passed else "fail")


def _rel(a, b) -> float:
    return float(abs(a - b) / max(abs(b), 1e-300))


def _random_spec(rng, kind: str, R: int) -> ProtocolSpec:
    alpha = rng.uniform(0.05, 0.8) * np.exp(1j * rng.uniform(0, 2 * np.pi))
    beta = complex(*rng.uniform(-0.3, 0.3, size=2))
    if kind == "seq":
        return ProtocolSpec.seq(R, alpha, beta)
    if kind == "single":
        return ProtocolSpec.single(R, alpha, beta)
    return ProtocolSpec.two_param(-(-R // 2), abs(alpha), beta)


def check_closed_form_qfi() -> CheckResult:
    from .fisher import protocol_qfi

    worst = 0.0
    for N in (1, 10, 100):
        for a in (0.1, 0.5, 1.0):
            q = protocol_qfi(ProtocolSpec.single(N, 1j * a, 0.0), "beta1")
            worst = max(worst, _rel(q, 4 * N**2 * a**2 * math.exp(-4 * a**2)))
    return CheckResult("closed_form_single_qfi", worst, 1e-8)


def check_joint_qfi() -> CheckResult:
    from .oracle import joint_qfi_oracle

    worst = 0.0
    for N in (1, 7, 50, 200):
        for a in (0.1, 0.5):
            spec = ProtocolSpec.seq(N, 1j * a, 0.03 + 0.02j)
            worst = max(worst, _rel(joint_qfi_oracle(spec, "beta1"), joint_qfi_closed_form(Kind.SEQ, N, spec.schedule)))
    ramp = ProtocolSpec.seq_schedule([1j * 0.05 * (n + 1) for n in range(8)], 0.01)
    worst = max(worst, _rel(joint_qfi_oracle(ramp, "beta1"), joint_qfi_closed_form(Kind.SEQ, 8, ramp.schedule)))
    return CheckResult("joint_pure_state_qfi", worst, 1e-10)


def check_brute_force(seed: int = 7) -> CheckResult:
    from .oracle import brute_force_seq

    rng = np.random.default_rng(seed)
    worst = 0.0
    for kind in ("single", "seq", "two-param"):
        for R in (1, 3, 6, 8):
            spec = _random_spec(rng, kind, R)
            for r in ({"single": [None]}.get(kind) or range(1, spec.rounds + 1)):
                ref = brute_force_seq(spec, rounds=r).grouped()
                fast = build_rho(spec) if r is None else prefix_state(spec, r)
                worst = max(worst, float(np.abs(ref - fast.entries).max()))
    return CheckResult("brute_force_vs_dicke", worst, 1e-12)


def check_transfer_unitary() -> CheckResult:
    from .fisher import transfer_matrix

    V = transfer_matrix(500)
    return CheckResult("transfer_unitary_N500", float(np.abs(V @ V.conj().T - np.eye(501)).max()), 1e-10)


def check_binary_cfi() -> CheckResult:
    """Single protocol at ``2 N beta1 |alpha| = pi/2``: CFI equals QFI."""
    from .fisher import protocol_report

    N, a = 10, 0.2
    b1 = math.pi / (4 * N * a)
    rep = protocol_report(ProtocolSpec.single(N, 1j * a, b1), "beta1")
    p = 0.5 * (1 + math.exp(-2 * a**2) * math.cos(2 * N * b1 * a))
    dp = -0.5 * math.exp(-2 * a**2) * math.sin(2 * N * b1 * a) * 2 * N * a
    oracle = dp**2 / (p * (1 - p))
    return CheckResult("binary_outcome_cfi", max(_rel(rep.cfi[0, 0], oracle), _rel(rep.qfi[0, 0], oracle)), 1e-10)


def check_two_param_structure() -> CheckResult:
    from .fisher import qfi_matrix

    worst = 0.0
    for N in (2, 6):
        st = build_rho(ProtocolSpec.two_param(N, 0.2, 0.07 - 0.03j))
        rep = qfi_matrix(st, d_rho(st, "beta1"), d_rho(st, "beta2"))
        F = rep.qfi
        worst = max(worst, abs(F[0, 1]) / F[0, 0], _rel(F[1, 1], F[0, 0]), rep.sld_residual)
    return CheckResult("two_param_qfi_structure", worst, 1e-10)


def check_derivatives(seed: int = 11) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    h = 1e-6
    for kind in ("single", "seq", "two-param"):
        spec = _random_spec(rng, kind, 6)
        st = build_rho(spec)
        for q, dz in (("beta1", h), ("beta2", 1j * h)):
            fd = (build_rho(spec.with_beta(spec.beta + dz)).entries - build_rho(spec.with_beta(spec.beta - dz)).entries) / (2 * h)
            an = d_rho(st, q).entries
            scale = max(np.abs(an).max(), 1e-12)
            worst = max(worst, float(np.abs(fd - an).max() / scale))
    return CheckResult("analytic_vs_fd_derivative", worst, 1e-6)


def check_zero_noise() -> CheckResult:
    from .decoherence import NoiseModel, evolve_noisy_branches, symmetric_noisy_approx
    from .oracle import brute_force_seq

    quiet = NoiseModel(0.0, 1.0)
    worst = 0.0
    for spec in (ProtocolSpec.seq(5, 0.3j, 0.1 + 0.02j), ProtocolSpec.two_param(2, 0.3, 0.05 - 0.1j)):
        worst = max(worst, float(np.abs(symmetric_noisy_approx(spec, quiet).entries - build_rho(spec).entries).max()))
        ens = evolve_noisy_branches(spec, quiet).reduced_matrix()
        worst = max(worst, float(np.abs(ens - brute_force_seq(spec).rho).max()))
    return CheckResult("zero_noise_reduction", worst, 1e-12)


def check_fock_agreement() -> CheckResult:
    from .decoherence import NoiseModel, evolve_noisy_branches
    from .oracle import fock_protocol_matrix

    noise = NoiseModel.standard_rates()
    worst = 0.0
    for spec in (ProtocolSpec.seq(2, 0.4j, 0.3536 + 0.3536j), ProtocolSpec.two_param(1, 0.4, 0.3536 + 0.3536j)):
        F = fock_protocol_matrix(spec, noise)
        B = evolve_noisy_branches(spec, noise, operator_phases=True).reduced_matrix()
        m = np.abs(F) > 1e-8
        worst = max(worst, float((np.abs(F - B)[m] / np.abs(F)[m]).max()))
    return CheckResult("branch_vs_fock_lindblad", worst, 1e-3)


def check_sampler() -> CheckResult:
    """Determinism plus a coarse histogram check against brute force."""
    from .oracle import brute_force_seq, sample_trajectories

    spec = ProtocolSpec.seq(5, 0.3j, 0.1)
    a = sample_trajectories(spec, seed=5, count=20000)
    b = sample_trajectories(spec, seed=5, count=20000)
    if not np.array_equal(a, b):
        return CheckResult("sampler_tv_and_determinism", math.inf, 0.02)
    h = np.bincount(a.sum(1), minlength=6) / a.shape[0]
    tv = 0.5 * float(np.abs(h - brute_force_seq(spec).weight_distribution()).sum())
    return CheckResult("sampler_tv_and_determinism", tv, 0.02)


def check_grid_commutator() -> CheckResult:
    from .oracle import commutator_coefficient

    worst = max(abs(commutator_coefficient(math.sqrt(n * math.pi))) for n in (1, 2, 3, 4))
    return CheckResult("grid_commutator_vanishes", worst, 1e-12)


CHECKS = {
    "closed_form_single_qfi": check_closed_form_qfi,
    "joint_pure_state_qfi": check_joint_qfi,
    "brute_force_vs_dicke": check_brute_force,
    "transfer_unitary_N500": check_transfer_unitary,
    "binary_outcome_cfi": check_binary_cfi,
    "two_param_qfi_structure": check_two_param_structure,
    "analytic_vs_fd_derivative": check_derivatives,
    "zero_noise_reduction": check_zero_noise,
    "branch_vs_fock_lindblad": check_fock_agreement,
    "sampler_tv_and_determinism": check_sampler,
    "grid_commutator_vanishes": check_grid_commutator,
}


def run_check(name: str) -> CheckResult:
    return CHECKS[name]()
