"""Noisy protocols under amplitude decay at the effective rate ``Gamma``.

Model
-----
Round ``n`` lasts ``t_round``: the signal drive ``eps = beta / t_round`` acts
while the oscillator decays at ``Gamma = gamma + gamma_d``, then the ancilla
kick ``+/-alpha_n`` is applied instantaneously.  The single-measurement
protocol has one kick after all ``N`` drive rounds.

Loss is a passive linear channel, so every branch stays a coherent state of
the oscillator plus its reservoir.  Writing ``v_n`` for the field injected by
kick ``n`` and ``sigma`` for the accumulated drive,
``<v_n, v_m> = exp(-Gamma |t_n - t_m| / 2)`` and branch ``a`` carries
``T_a = sum_n a_n alpha_n v_n + sigma``.  The ancilla matrix is

    rho[a, b] = 2**-R exp(<T_b, T_a> - |T_a|^2/2 - |T_b|^2/2).

Expanding around the oscillator amplitudes ``mu`` this is the dyad rule
``|mu><nu| -> f |mu x><nu x|`` with
``log f = (1 - x^2)(-|mu - nu|^2/2 + i Im(conj(nu) mu))`` plus the drive
term, ``x = exp(-Gamma t / 2)``.  As for the noiseless states, displacement
composition phases are dropped; ``operator_phases=True`` restores them for
comparison with a Fock-space master-equation solver.

Dephasing is folded into ``Gamma`` rather than modelled as its own channel.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import _kernels
from .constants import MAX_BRANCH_ROUNDS, MAX_DENSE_ROUNDS
from .core import HammingIndex, log_dicke_weights
from .errors import DomainError, NumericalError, ResourceError
from .protocols import AncillaState, Kind, ProtocolSpec, _materialize, prefix_state

FD_STEP = 1e-5


@dataclass(frozen=True)
class NoiseModel:
    """Loss ``gamma``, dephasing ``gamma_d`` (1/s), thermal occupation and
    round duration ``t_round`` (s).  ``g`` is the signal coupling rate."""

    gamma: float
    t_round: float
    gamma_d: float = 0.0
    n_th: float = 0.0
    g: float | None = None

    def __post_init__(self):
        for name in ("gamma", "gamma_d", "n_th"):
            v = float(getattr(self, name))
            if not math.isfinite(v) or v < 0:
                raise DomainError(f"{name} must be finite and non-negative, got {v!r}")
            object.__setattr__(self, name, v)
        if not (math.isfinite(self.t_round) and self.t_round > 0):
            raise DomainError(f"t_round must be positive, got {self.t_round!r}")
        object.__setattr__(self, "t_round", float(self.t_round))
        if self.g is not None and not (math.isfinite(self.g) and self.g > 0):
            raise DomainError(f"g must be positive, got {self.g!r}")

    @property
    def Gamma(self) -> float:
        return self.gamma + self.gamma_d

    @property
    def tau_eff(self) -> float:
        return 0.5 * self.Gamma * self.t_round

    @property
    def decay(self) -> float:
        """Amplitude factor ``exp(-Gamma t / 2)`` per round."""
        return math.exp(-self.tau_eff)

    def drive(self, beta) -> complex:
        return complex(beta) / self.t_round

    def check_beta(self, beta, rtol: float = 1e-3) -> None:
        """Raise if ``t_round = sqrt(2)|beta|/g`` is violated."""
        if self.g is None:
            return
        expect = math.sqrt(2.0) * abs(complex(beta)) / self.g
        if abs(expect - self.t_round) > rtol * self.t_round:
            raise DomainError(f"t_round={self.t_round!r} inconsistent with sqrt(2)|beta|/g = {expect!r}")

    @classmethod
    def from_tau_eff(cls, tau_eff: float, t_round: float = 1.0, **kw) -> "NoiseModel":
        return cls(gamma=2.0 * tau_eff / t_round, t_round=t_round, **kw)

    @classmethod
    def standard_rates(cls) -> "NoiseModel":
        """Gamma = 1.89e4 /s, t = 15.92 us, |beta| = 0.5 (tau_eff ~ 0.15)."""
        t = 15.92e-6
        return cls(gamma=1.89e4, t_round=t, g=math.sqrt(2.0) * 0.5 / t)

    def without_loss(self) -> "NoiseModel":
        return NoiseModel(0.0, self.t_round, 0.0, self.n_th, self.g)


def displaced_amplitude(g: float, Gamma: float, t: float) -> float:
    """``sqrt(2) g / Gamma (1 - exp(-Gamma t / 2))``, the driven amplitude under decay."""
    if Gamma < 0 or t < 0:
        raise DomainError("Gamma and t must be non-negative")
    return g / math.sqrt(2.0) * _decay_integral(Gamma, t)


def _decay_integral(Gamma: float, t: float) -> float:
    """``int_0^t exp(-Gamma s / 2) ds`` with the ``Gamma -> 0`` limit."""
    z = 0.5 * Gamma * t
    if z < 1e-8:
        return t * (1.0 - 0.5 * z)
    return -math.expm1(-z) / (0.5 * Gamma)


# ---------------------------------------------------------------------------
# kick geometry
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class _Geometry:
    times: np.ndarray  # kick times in units of t_round
    total: float  # final time in units of t_round
    schedule: np.ndarray  # kick amplitudes alpha_n
    K: np.ndarray  # <v_n, v_m>
    before: np.ndarray  # int_{s < t_n} exp(-Gamma (t_n - s)/2) ds  (seconds)
    after: np.ndarray  # int_{s > t_n} exp(-Gamma (s - t_n)/2) ds
    to_end: np.ndarray  # exp(-Gamma (T - t_n) / 2)
    signal_gain: float  # int_0^T exp(-Gamma (T - s)/2) ds


def _geometry(spec: ProtocolSpec, noise: NoiseModel, rounds: int | None = None) -> _Geometry:
    G, t = noise.Gamma, noise.t_round
    if spec.kind is Kind.SINGLE:
        n_sig = spec.N if rounds is None else rounds
        times = np.array([float(n_sig)])
        sched = np.array([spec.alpha])
        total = float(n_sig)
    else:
        R = spec.rounds if rounds is None else rounds
        if not 1 <= R <= spec.rounds:
            raise DomainError(f"prefix of {R} rounds outside 1..{spec.rounds}")
        times = np.arange(1, R + 1, dtype=float)
        sched = np.asarray(spec.schedule[:R], dtype=complex)
        total = float(R)
    K = np.exp(-0.5 * G * t * np.abs(np.subtract.outer(times, times)))
    before = np.array([_decay_integral(G, s * t) for s in times])
    after = np.array([_decay_integral(G, (total - s) * t) for s in times])
    to_end = np.exp(-0.5 * G * t * (total - times))
    return _Geometry(times, total, sched, K, before, after, to_end, _decay_integral(G, total * t))


def _operator_phase(coef: np.ndarray, geo: _Geometry, eps: complex) -> np.ndarray:
    """Displacement-composition phase of every branch (drive-drive part dropped)."""
    ph = coef @ (np.conj(eps) * geo.before) + np.conj(coef) @ (eps * geo.after)
    ph = ph.imag.copy()
    R = coef.shape[1]
    for j in range(R):
        for m in range(j + 1, R):
            ph += np.imag(np.conj(coef[:, j]) * coef[:, m]) * geo.K[j, m]
    return ph


# ---------------------------------------------------------------------------
# exact branch enumeration
# ---------------------------------------------------------------------------

def _bit_table(R: int) -> np.ndarray:
    """All ``R``-bit strings, first round as the most significant bit."""
    idx = np.arange(2**R, dtype=np.int64)
    return ((idx[:, None] >> np.arange(R - 1, -1, -1)) & 1).astype(np.int8)


@dataclass(frozen=True, eq=False)
class BranchEnsemble:
    """Every ancilla record with its final oscillator amplitude.

    ``bits[a, n] = 1`` means a ``+`` label in round ``n``.  Pair coherences
    are assembled lazily from the kick geometry.
    """

    spec: ProtocolSpec
    noise: NoiseModel | None
    bits: np.ndarray
    mu: np.ndarray
    _coef: np.ndarray
    _geo: _Geometry
    _eps: complex
    operator_phases: bool = False

    @property
    def rounds(self) -> int:
        return self.bits.shape[1]

    def __len__(self) -> int:
        return self.bits.shape[0]

    def _dense_guard(self):
        if self.rounds > MAX_DENSE_ROUNDS:
            raise ResourceError(
                f"pair matrix over {self.rounds} rounds exceeds the dense limit {MAX_DENSE_ROUNDS}; "
                "use symmetric_noisy_approx",
                parameter="rounds",
            )

    @cached_property
    def log_matrix(self) -> np.ndarray:
        """``log(2**R rho)``: the branch-pair exponent."""
        self._dense_guard()
        drive = self._eps * (self._geo.before + self._geo.after)
        E = _kernels.branch_exponent(self._coef, self._geo.K, drive)
        if self.operator_phases:
            th = _operator_phase(self._coef, self._geo, self._eps)
            E = E + 1j * np.subtract.outer(th, th)
        return E

    def reduced_matrix(self) -> np.ndarray:
        """Dense ``2**R`` ancilla matrix in the label basis."""
        return np.exp(self.log_matrix - self.rounds * math.log(2.0))

    def coherence_factors(self) -> np.ndarray:
        """``f[a, b] = 2**R rho[a, b] / <mu_b|mu_a>``."""
        mu = self.mu
        log_ov = -0.5 * (np.abs(mu[:, None]) ** 2 + np.abs(mu[None, :]) ** 2) + np.conj(mu[None, :]) * mu[:, None]
        return np.exp(self.log_matrix - log_ov)

    def records(self):
        """Yield ``(bitstring, mu_a, coherence factors to every branch)``."""
        f = self.coherence_factors()
        for a in range(len(self)):
            yield tuple(int(b) for b in self.bits[a]), complex(self.mu[a]), f[a]

    def outcome_probabilities(self, u=None) -> np.ndarray:
        """Probability of every readout bitstring (same bit ordering)."""
        from .fisher import MEASUREMENT_U

        u = MEASUREMENT_U if u is None else np.asarray(u, dtype=complex)
        return measure_bitstrings(self.reduced_matrix(), self.rounds, u)

    def outcome_distribution(self, u=None):
        """Readout probabilities aggregated by Hamming weight(s)."""
        from .fisher import OutcomeDistribution, _clean_probabilities

        p = _clean_probabilities(self.outcome_probabilities(u))
        labels, index = hamming_labels(self.spec, self.bits)
        return OutcomeDistribution(np.bincount(labels, weights=p, minlength=index.dim), index)

    def grouped_state(self) -> AncillaState:
        """Coarse-grain onto normalized Dicke labels (exact only when symmetric)."""
        labels, index = hamming_labels(self.spec, self.bits)
        counts = np.bincount(labels, minlength=index.dim).astype(float)
        G = _kernels.group_pairs(self.reduced_matrix(), labels, index.dim)
        return AncillaState(G / np.sqrt(np.outer(counts, counts)), index, self.spec)


def hamming_labels(spec: ProtocolSpec, bits: np.ndarray) -> tuple[np.ndarray, HammingIndex]:
    """Dicke label of each bitstring; odd rounds are real kicks for two parameters."""
    R = bits.shape[1]
    if spec.kind is Kind.TWO_PARAM:
        Nr, Ni = (R + 1) // 2, R // 2
        index = HammingIndex(Nr, 2, Ni)
        kr = bits[:, 0::2].sum(1).astype(np.int64)
        ki = bits[:, 1::2].sum(1).astype(np.int64)
        return kr * (Ni + 1) + ki, index
    return bits.sum(1).astype(np.int64), HammingIndex(R, 1)


def measure_bitstrings(rho: np.ndarray, R: int, u: np.ndarray) -> np.ndarray:
    """``diag(U rho U^dagger)`` with ``U = u`` on every qubit."""
    X = np.asarray(rho, dtype=complex).reshape((2,) * (2 * R))
    for q in range(R):
        X = np.moveaxis(np.tensordot(u, X, axes=([1], [q])), 0, q)
        X = np.moveaxis(np.tensordot(u.conj(), X, axes=([1], [R + q])), 0, R + q)
    return np.real(np.diagonal(X.reshape(2**R, 2**R))).copy()


def evolve_noisy_branches(
    spec: ProtocolSpec,
    noise: NoiseModel | None,
    rounds: int | None = None,
    operator_phases: bool = False,
) -> BranchEnsemble:
    """Enumerate all branches of ``spec`` (or its first ``rounds`` kicks) under ``noise``."""
    noise = noise if noise is not None else NoiseModel(0.0, 1.0)
    if spec.kind is Kind.SINGLE:
        R = 1
    else:
        R = spec.rounds if rounds is None else rounds
    if R > MAX_BRANCH_ROUNDS:
        raise ResourceError(
            f"{R} rounds exceed the branch limit {MAX_BRANCH_ROUNDS}; use symmetric_noisy_approx",
            parameter="rounds",
        )
    geo = _geometry(spec, noise, rounds)
    eps = noise.drive(spec.beta)
    bits = _bit_table(R)
    coef = (2.0 * bits - 1.0) * geo.schedule[None, :]
    mu = coef @ geo.to_end + eps * geo.signal_gain
    return BranchEnsemble(spec, noise, bits, mu, coef, geo, eps, operator_phases)


def amplitude_history(spec: ProtocolSpec, noise: NoiseModel, bits) -> np.ndarray:
    """Oscillator amplitude after each round for one record (label convention)."""
    eps = noise.drive(spec.beta)
    x = noise.decay
    gain = _decay_integral(noise.Gamma, noise.t_round)
    a = 2 * np.asarray(bits) - 1
    mu, out = 0.0j, []
    for n, alpha in enumerate(spec.schedule[: len(a)]):
        mu = mu * x + eps * gain + a[n] * alpha
        out.append(mu)
    return np.array(out)


# ---------------------------------------------------------------------------
# Hamming-symmetric approximation
# ---------------------------------------------------------------------------

def _classes(spec: ProtocolSpec, R: int) -> list[np.ndarray]:
    if spec.kind is Kind.TWO_PARAM:
        return [np.arange(0, R, 2), np.arange(1, R, 2)]
    return [np.arange(R)]


def symmetric_noisy_approx(spec: ProtocolSpec, noise: NoiseModel | None, rounds: int | None = None) -> AncillaState:
    """Dicke-compressed noisy state with class-averaged kick overlaps.

    The kick-overlap kernel ``exp(-Gamma |t_n - t_m| / 2)`` is split into its
    unit diagonal and its off-diagonal part.  Off-diagonal overlaps between
    quadrature classes ``c, c'`` and the drive overlap of each kick are
    replaced by class means, so the collective part depends on records only
    through Hamming weights.  Cross-class means are capped at the geometric
    mean of the in-class ones, which keeps the averaged kernel positive
    semidefinite and the result a legal state.  The leftover diagonal excess
    ``(1 - Kbar_cc) |alpha|^2`` acts on every ancilla separately as
    dephasing in the label basis, which the readout sees as independent bit
    flips with probability ``meta["readout_flip"][c]``;
    :func:`seqmetro.fisher.outcome_distribution` applies them.  Exact when
    ``Gamma = 0``.
    """
    if noise is None or noise.Gamma == 0.0:
        if spec.kind is Kind.SINGLE:
            return prefix_state(spec, spec.N)
        return prefix_state(spec, spec.rounds if rounds is None else rounds)
    geo = _geometry(spec, noise, rounds)
    eps = noise.drive(spec.beta)
    R = geo.times.size
    cls = _classes(spec, R)
    off = ~np.eye(R, dtype=bool)
    Kbar = np.empty((len(cls), len(cls)))
    for i, c in enumerate(cls):
        for j, d in enumerate(cls):
            block = geo.K[np.ix_(c, d)]
            mask = off[np.ix_(c, d)]
            Kbar[i, j] = block[mask].mean() if mask.any() else 1.0
    # cap cross-class overlaps so the averaged kernel stays positive semidefinite
    cap = np.sqrt(np.outer(np.diag(Kbar), np.diag(Kbar)))
    Kbar = np.where(np.eye(len(cls), dtype=bool), Kbar, np.minimum(Kbar, cap))
    drive = eps * (geo.before + geo.after)
    # an odd two-parameter prefix leaves the imaginary class empty
    sbar = np.array([drive[c].mean() if c.size else 0.0 for c in cls])
    amp = np.array([geo.schedule[c[0]] if c.size else 0.0 for c in cls])
    sizes = [c.size for c in cls]
    flips = tuple(float(-0.5 * np.expm1(-2.0 * (1.0 - Kbar[i, i]) * abs(amp[i]) ** 2)) for i in range(len(cls)))
    if spec.kind is Kind.TWO_PARAM:
        index = HammingIndex(sizes[0], 2, sizes[1])
        weights = index.weights()
        lw = log_dicke_weights(sizes[0])[weights[0]] + log_dicke_weights(sizes[1])[weights[1]]
    else:
        index = HammingIndex(R, 1)
        weights = index.weights()
        lw = log_dicke_weights(R)
    # per-class kick sums A_c = alpha_c (2 k_c - N_c)
    A = np.stack([amp[c] * (2.0 * w - sizes[c]) for c, w in enumerate(weights)], axis=1)
    cross = A.conj() @ Kbar @ A.T  # [b, a]
    norms = np.real(np.diag(cross))
    lin = np.imag(A @ sbar.conj())
    E = cross.T - 0.5 * (norms[:, None] + norms[None, :]) + 1j * np.subtract.outer(lin, lin)
    log_mag = 0.5 * np.add.outer(lw, lw) + E.real
    rho = _materialize(log_mag, E.imag)
    meta = {"method": "symmetric", "tau_eff": noise.tau_eff, "readout_flip": flips}
    return AncillaState(rho, index, spec, meta=meta)


# ---------------------------------------------------------------------------
# noisy Fisher information
# ---------------------------------------------------------------------------

def noisy_distribution(spec: ProtocolSpec, noise: NoiseModel | None, rounds: int | None = None, method: str = "symmetric"):
    """Readout distribution of a (prefix of a) noisy protocol."""
    from .fisher import outcome_distribution

    if method == "symmetric":
        return outcome_distribution(symmetric_noisy_approx(spec, noise, rounds))
    if method == "exact":
        return evolve_noisy_branches(spec, noise, rounds).outcome_distribution()
    raise DomainError(f"unknown noisy method {method!r}")


def _params(spec: ProtocolSpec) -> tuple[str, ...]:
    from .fisher import sensitive_param

    return ("beta1", "beta2") if spec.kind is Kind.TWO_PARAM else (sensitive_param(spec),)


def _fd(spec, noise, rounds, method, param, h):
    step = h if param == "beta1" else 1j * h
    plus = noisy_distribution(spec.with_beta(spec.beta + step), noise, rounds, method).p
    minus = noisy_distribution(spec.with_beta(spec.beta - step), noise, rounds, method).p
    return (plus - minus) / (2.0 * h)


def noisy_cfi(spec: ProtocolSpec, noise: NoiseModel | None, rounds: int | None = None, method: str = "symmetric", h: float = FD_STEP):
    """CFI report with central-difference derivatives and a step-halving check."""
    from .fisher import cfi_matrix

    dist = noisy_distribution(spec, noise, rounds, method)
    dps = []
    for q in _params(spec):
        d1 = _fd(spec, noise, rounds, method, q, h)
        d2 = _fd(spec, noise, rounds, method, q, 0.5 * h)
        scale = np.abs(d2).max()
        if np.abs(d1 - d2).max() > 1e-4 * scale + 1e-9:
            raise NumericalError(f"finite-difference derivative for {q} not converged")
        dps.append(d2)
    return cfi_matrix(dist, dps)


def noisy_prefix_crb(spec: ProtocolSpec, noise: NoiseModel | None, rounds: int, method: str = "symmetric") -> float:
    return noisy_cfi(spec, noise, rounds, method).crb


def single_baseline_crb(spec: ProtocolSpec, noise: NoiseModel | None, n: int, method: str = "symmetric") -> float:
    """Single-measurement CRB after ``n`` drive rounds.

    For a two-parameter ``spec`` this is ``1/F_1 + 1/F_2`` from two
    independent runs probing each quadrature.
    """
    mag = abs(spec.alpha)
    if spec.kind is Kind.TWO_PARAM:
        total = 0.0
        for alpha in (1j * mag, mag):
            single = ProtocolSpec.single(n, alpha, spec.beta)
            F = noisy_cfi(single, noise, method=method).cfi[0, 0]
            total += 1.0 / F if F > 0 else math.inf
        return total
    single = ProtocolSpec.single(n, spec.alpha, spec.beta)
    return noisy_cfi(single, noise, method=method).crb


def noisy_crb_curve(spec: ProtocolSpec, noise: NoiseModel | None, rounds_max: int | None = None, method: str = "symmetric") -> dict:
    """CRB against interrogation time for the sequential and single protocols.

    Returns a mapping ``protocol -> dict(round, time, crb, crb_running_min)``.
    Sequential prefixes are counted in kicks (one per ``t_round``); the
    single-measurement series uses ``n`` drive rounds before its kick.
    """
    from .fisher import crb_min_over_rounds

    R = spec.rounds if rounds_max is None else min(rounds_max, spec.rounds)
    seq_spec = spec if spec.kind is not Kind.SINGLE else ProtocolSpec.seq(spec.N, spec.alpha, spec.beta)
    if R < seq_spec.rounds:
        per = 2 if seq_spec.kind is Kind.TWO_PARAM else 1
        seq_spec = seq_spec.prefix(-(-R // per))
    t = noise.t_round if noise is not None else 1.0
    rep = crb_min_over_rounds(seq_spec, noise, method=method)
    n_seq = rep.history["rounds"][:R]
    single = np.array([single_baseline_crb(spec, noise, int(n), method) for n in range(1, R + 1)])
    return {
        "seq": {
            "round": n_seq,
            "time": n_seq * t,
            "crb": rep.history["crb"][:R],
            "crb_running_min": rep.history["running_min"][:R],
        },
        "single": {
            "round": np.arange(1, R + 1),
            "time": np.arange(1, R + 1) * t,
            "crb": single,
            "crb_running_min": np.minimum.accumulate(single),
        },
    }
