"""Ancilla-reduced density matrices for the three sensing protocols.

Conventions
-----------
* Every ancilla outcome ``a_n = +/-1`` kicks the oscillator by ``a_n * alpha_n``;
  after ``R`` rounds branch ``a`` holds the coherent state
  ``|R_s * beta + sum_n a_n alpha_n>`` where ``R_s`` is the number of signal
  displacements.
* Matrix entries are ``rho[j, j'] = sqrt(w_j w_j') <mu_j'|mu_j>``, the partial
  trace of the joint pure state.  For the one-parameter protocols this gives
  the phase ``exp(+2i N (k - k') Im(alpha conj(beta)))``: with ``alpha`` real the
  protocol reads ``-beta_2``; with ``alpha = i|alpha|`` it reads ``+beta_1``.
  The sign is fixed by the brute-force branch enumeration in
  :mod:`seqmetro.oracle`; flipping it conjugates the matrix and leaves every
  Fisher information unchanged.
* Single measurement: a 2x2 matrix indexed by ``k`` = number of ``+`` outcomes
  (row 0 is ``|->``, row 1 is ``|+>``).
* Two parameters: rounds alternate ``alpha_{2j-1} = |alpha|`` and
  ``alpha_{2j} = i|alpha|``; ``k_r`` counts ``+`` on the odd (real-kick) rounds,
  ``k_i`` on the even ones.  Ordering is row-major with ``k_r`` outer.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .constants import EPS_NORM, MAX_N, UNDERFLOW
from .core import HammingIndex, as_amplitude, log_dicke_weights
from .errors import DomainError, ResourceError, UsageError


class Kind(str, enum.Enum):
    SINGLE = "single"
    SEQ = "seq"
    TWO_PARAM = "two-param"


PARAMS = ("beta1", "beta2")


def _param_name(param) -> str:
    if param in (1, "1", "beta1", "b1"):
        return "beta1"
    if param in (2, "2", "beta2", "b2"):
        return "beta2"
    raise UsageError(f"unknown parameter {param!r}; use 'beta1' or 'beta2'")


@dataclass(frozen=True)
class ProtocolSpec:
    """Protocol kind, rounds per quadrature ``N``, signal ``beta`` and the
    per-round coupling displacements."""

    kind: Kind
    N: int
    beta: complex
    schedule: tuple[complex, ...]

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if int(self.N) != self.N or self.N < 1:
            raise DomainError(f"N must be a positive integer, got {self.N!r}")
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "beta", as_amplitude(self.beta, "beta"))
        sched = tuple(as_amplitude(a, "alpha") for a in self.schedule)
        object.__setattr__(self, "schedule", sched)
        if len(sched) != self.rounds:
            raise UsageError(
                f"{self.kind.value} protocol with N={self.N} needs {self.rounds} "
                f"schedule entries, got {len(sched)}"
            )
        if self.kind is Kind.TWO_PARAM:
            mag = abs(sched[0])
            expected = np.tile([mag, 1j * mag], self.N)
            if not np.allclose(sched, expected, rtol=0, atol=1e-12 * max(mag, 1.0)):
                raise UsageError(
                    "two-parameter schedule must alternate |alpha|, i|alpha| "
                    "with constant magnitude"
                )

    # constructors -------------------------------------------------------
    @classmethod
    def single(cls, N, alpha, beta=0.0):
        return cls(Kind.SINGLE, N, beta, (complex(alpha),) * int(N))

    @classmethod
    def seq(cls, N, alpha, beta=0.0):
        return cls(Kind.SEQ, N, beta, (complex(alpha),) * int(N))

    @classmethod
    def seq_schedule(cls, schedule, beta=0.0):
        return cls(Kind.SEQ, len(schedule), beta, tuple(schedule))

    @classmethod
    def two_param(cls, N, alpha, beta=0.0):
        mag = abs(complex(alpha))
        return cls(Kind.TWO_PARAM, N, beta, tuple(np.tile([mag, 1j * mag], int(N))))

    # derived quantities ---------------------------------------------------
    @property
    def rounds(self) -> int:
        """Number of coupling kicks (ancilla qubits)."""
        return 2 * self.N if self.kind is Kind.TWO_PARAM else self.N

    @property
    def signal_rounds(self) -> int:
        return self.rounds

    @property
    def alpha(self) -> complex:
        """The (first) coupling displacement."""
        return self.schedule[0]

    @property
    def is_constant(self) -> bool:
        return all(abs(a - self.schedule[0]) <= 1e-15 * (1 + abs(a)) for a in self.schedule)

    def with_beta(self, beta) -> "ProtocolSpec":
        return ProtocolSpec(self.kind, self.N, beta, self.schedule)

    def prefix(self, n: int) -> "ProtocolSpec":
        """The same protocol truncated to its first ``n`` rounds per quadrature."""
        if not 1 <= n <= self.N:
            raise DomainError(f"prefix length {n} outside 1..{self.N}")
        per = 2 if self.kind is Kind.TWO_PARAM else 1
        return ProtocolSpec(self.kind, n, self.beta, self.schedule[: per * n])


@dataclass(frozen=True, eq=False)
class AncillaState:
    """Hermitian, unit-trace ancilla matrix in a Hamming-weight basis."""

    entries: np.ndarray
    index: HammingIndex
    spec: ProtocolSpec | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        m = np.asarray(self.entries, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] != self.index.dim:
            raise DomainError(f"entries shape {m.shape} does not match index dim {self.index.dim}")
        m.setflags(write=False)
        object.__setattr__(self, "entries", m)

    @property
    def dim(self) -> int:
        return self.index.dim

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.entries - self.entries.conj().T)))

    def trace_error(self) -> float:
        return abs(complex(np.trace(self.entries)) - 1.0)

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.entries)[0])

    def check(self, psd: bool = True) -> None:
        """Raise :class:`DomainError` if an invariant is violated."""
        from .constants import EPS_PSD

        if self.hermiticity_error() > EPS_NORM:
            raise DomainError(f"state not Hermitian (error {self.hermiticity_error():.2e})")
        if self.trace_error() > EPS_NORM:
            raise DomainError(f"state trace off by {self.trace_error():.2e}")
        if psd and self.min_eigenvalue() < EPS_PSD:
            raise DomainError(f"state not PSD (min eigenvalue {self.min_eigenvalue():.2e})")


@dataclass(frozen=True, eq=False)
class StateDerivative:
    entries: np.ndarray
    param: str

    def __post_init__(self):
        m = np.asarray(self.entries, dtype=complex)
        m.setflags(write=False)
        object.__setattr__(self, "entries", m)


def _materialize(log_mag: np.ndarray, phase: np.ndarray) -> np.ndarray:
    mag = np.exp(log_mag)
    mag[mag < UNDERFLOW] = 0.0
    return mag * np.exp(1j * phase)


def _require(spec: ProtocolSpec, kind: Kind) -> None:
    if spec.kind is not kind:
        raise UsageError(f"expected a {kind.value} protocol, got {spec.kind.value}")
    if spec.N > MAX_N:
        raise ResourceError(f"N={spec.N} exceeds the configured maximum {MAX_N}", parameter="N")
    if not spec.is_constant and kind is not Kind.TWO_PARAM:
        raise UsageError("Dicke-compressed builders need a constant coupling schedule")


def _one_param_phase_rate(spec: ProtocolSpec) -> float:
    """``2 N Im(alpha conj(beta))``: phase per unit of ``k - k'``."""
    return 2.0 * spec.N * (spec.alpha * spec.beta.conjugate()).imag


def build_single_rho(spec: ProtocolSpec) -> AncillaState:
    """2x2 ancilla state after ``N`` signal rounds and one coupling kick."""
    _require(spec, Kind.SINGLE)
    dk = np.subtract.outer(np.arange(2), np.arange(2))
    log_mag = np.log(0.5) - 2.0 * abs(spec.alpha) ** 2 * dk**2
    rho = _materialize(log_mag, _one_param_phase_rate(spec) * dk)
    return AncillaState(rho, HammingIndex(1, 1), spec)


def build_seq_rho(spec: ProtocolSpec) -> AncillaState:
    """(N+1)x(N+1) Dicke-basis state of the one-parameter sequential protocol."""
    _require(spec, Kind.SEQ)
    N = spec.N
    lg = log_dicke_weights(N)
    k = np.arange(N + 1)
    dk = np.subtract.outer(k, k)
    log_mag = 0.5 * np.add.outer(lg, lg) - 2.0 * abs(spec.alpha) ** 2 * dk**2
    rho = _materialize(log_mag, _one_param_phase_rate(spec) * dk)
    return AncillaState(rho, HammingIndex(N, 1), spec)


def two_param_phase(Nr, Ni, alpha_abs, beta, kr, ki, krp, kip):
    """Accumulated phase of ``<lambda_{kr',ki'}|lambda_{kr,ki}>``.

    ``Nr``/``Ni`` are the kick counts on each quadrature; the signal has been
    applied ``Nr + Ni`` times.  For ``Nr == Ni == N`` this is
    ``4N|a|[b1 (ki - ki') + b2 (kr' - kr)]
    + |a|^2 [4 (ki kr' - ki' kr) + 2N (ki' - ki + kr - kr')]``.
    """
    b1, b2 = beta.real, beta.imag
    R = Nr + Ni
    return 2 * R * alpha_abs * (b1 * (ki - kip) + b2 * (krp - kr)) + alpha_abs**2 * (
        4 * (ki * krp - kip * kr) + 2 * Nr * (kip - ki) + 2 * Ni * (kr - krp)
    )


def two_quadrature_rho(Nr: int, Ni: int, alpha_abs: float, beta: complex, spec=None) -> AncillaState:
    """Two-index state after ``Nr`` real-axis and ``Ni`` imaginary-axis kicks."""
    idx = HammingIndex(Nr, 2, Ni)
    kr, ki = idx.weights()
    lw = log_dicke_weights(Nr)[kr] + log_dicke_weights(Ni)[ki]
    dr = np.subtract.outer(kr, kr)
    di = np.subtract.outer(ki, ki)
    log_mag = 0.5 * np.add.outer(lw, lw) - 2.0 * alpha_abs**2 * (dr**2 + di**2)
    phase = two_param_phase(
        Nr, Ni, alpha_abs, complex(beta), kr[:, None], ki[:, None], kr[None, :], ki[None, :]
    )
    return AncillaState(_materialize(log_mag, phase), idx, spec)


def build_two_param_rho(spec: ProtocolSpec) -> AncillaState:
    """(N+1)^2-dimensional state of the alternating two-quadrature protocol."""
    _require(spec, Kind.TWO_PARAM)
    return two_quadrature_rho(spec.N, spec.N, abs(spec.alpha), spec.beta, spec)


def build_rho(spec: ProtocolSpec) -> AncillaState:
    """Dispatch to the builder matching ``spec.kind``."""
    return {
        Kind.SINGLE: build_single_rho,
        Kind.SEQ: build_seq_rho,
        Kind.TWO_PARAM: build_two_param_rho,
    }[spec.kind](spec)


def phase_gradient(spec: ProtocolSpec, index: HammingIndex, param) -> np.ndarray:
    """Matrix of ``d(phase)/d(param)`` for every entry of the built state."""
    param = _param_name(param)
    if spec.kind is Kind.TWO_PARAM:
        kr, ki = index.weights()
        c = 2.0 * (index.N + index.N_i) * abs(spec.alpha)
        if param == "beta1":
            return c * np.subtract.outer(ki, ki)
        return -c * np.subtract.outer(kr, kr)
    (k,) = index.weights()
    # d/d beta of Im(alpha conj(beta)): beta1 -> Im(alpha), beta2 -> -Re(alpha)
    slope = spec.alpha.imag if param == "beta1" else -spec.alpha.real
    return 2.0 * spec.N * slope * np.subtract.outer(k, k).astype(float)


def prefix_state(spec: ProtocolSpec, rounds: int) -> AncillaState:
    """State after the first ``rounds`` kicks of ``spec`` (signal included).

    For the two-parameter protocol an odd prefix ends on a real-axis kick and
    has one more real than imaginary round.
    """
    if not 1 <= rounds <= spec.rounds:
        raise DomainError(f"prefix of {rounds} rounds outside 1..{spec.rounds}")
    if spec.kind is Kind.TWO_PARAM:
        return two_quadrature_rho((rounds + 1) // 2, rounds // 2, abs(spec.alpha), spec.beta, spec)
    return build_rho(spec.prefix(rounds))


def d_rho(state: AncillaState, param) -> StateDerivative:
    """Analytic derivative of a built state with respect to ``beta1``/``beta2``.

    Only the phases depend on ``beta``, so the derivative is the entrywise
    product of the state with ``i * d(phase)``.  A quadrature the protocol is
    insensitive to yields the zero matrix.
    """
    if state.spec is None:
        raise UsageError("d_rho needs a state built by this module")
    param = _param_name(param)
    grad = phase_gradient(state.spec, state.index, param)
    return StateDerivative(1j * grad * state.entries, param)


def joint_qfi_closed_form(kind, N: int, schedule) -> float:
    """Closed-form QFI of the full oscillator+ancilla pure state.

    Assumes the coupling displacements lie along the quadrature that carries
    the estimated parameter's information (e.g. ``alpha = i|alpha|`` for
    ``beta1``).  ``SINGLE``: ``4N^2 (1 + |alpha|^2)``; ``SEQ``:
    ``4N^2 (1 + sum |alpha_n|^2)``; ``TWO_PARAM`` (per quadrature, ``2N``
    signal rounds with ``N`` aligned kicks): ``16 N^2 (1 + N |alpha|^2)``.
    """
    kind = Kind(kind)
    schedule = np.asarray(list(schedule), dtype=complex)
    if schedule.size == 0:
        raise DomainError("schedule must be nonempty")
    if kind is Kind.SINGLE:
        return 4.0 * N**2 * (1.0 + abs(schedule[0]) ** 2)
    if kind is Kind.SEQ:
        return 4.0 * N**2 * (1.0 + float(np.sum(np.abs(schedule) ** 2)))
    return 16.0 * N**2 * (1.0 + N * abs(schedule[0]) ** 2)
