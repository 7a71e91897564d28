"""Quantum and classical Fisher information for ancilla states.

Measurement basis
-----------------
Each ancilla is read out with ``u = exp(i pi sigma_y / 4)``, whose entries are
``u[z, x] = <z|x>`` (``x = 0`` is the ``-`` label, ``x = 1`` the ``+`` label,
``z = 0`` is ``|down>``).  The uncoupled state ``|x=+ ... +>`` then reads
all-down.  :func:`transfer_matrix` returns ``V`` with
``V[k, k'] = <D^z_{k'}| u^{(x)N} |D^x_k>``, so outcome probabilities are
``P(k') = sum_{m,m'} V[m,k'] rho[m,m'] conj(V[m',k'])``.  For ``N = 1`` this
makes ``V = u^T``.

Binary-outcome CFI
------------------
For the single-measurement state the readout is a two-outcome POVM with
``p = (1 + c cos phi) / 2``, ``c = exp(-2|alpha|^2)``,
``phi = 2 N |alpha| beta_1``.  Its Fisher information is
``4 N^2 |alpha|^2 c^2 sin^2(phi) / (1 - c^2 cos^2(phi))``; the prefactor is 4,
which is what makes it reach ``4 N^2 |alpha|^2 exp(-4|alpha|^2)`` at
``phi = pi/2``.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.stats

from . import _kernels
from .constants import CFI_SKIP, EPS_EIG, PROB_FAIL
from .core import HammingIndex
from .errors import DomainError, NumericalError, UsageError
from .protocols import (
    AncillaState,
    Kind,
    ProtocolSpec,
    StateDerivative,
    _param_name,
    build_rho,
    d_rho,
    prefix_state,
)

MEASUREMENT_U = np.array([[1.0, 1.0], [-1.0, 1.0]], dtype=complex) / math.sqrt(2.0)


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class OutcomeDistribution:
    """Probabilities over Hamming weights of the readout record."""

    p: np.ndarray
    index: HammingIndex

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        p.setflags(write=False)
        object.__setattr__(self, "p", p)

    @property
    def N(self) -> int:
        return self.index.N

    @property
    def rounds(self) -> int:
        return self.index.N if self.index.params == 1 else self.index.N + self.index.N_i

    @property
    def mean_per_quadrature(self) -> tuple[float, ...]:
        w = self.index.weights()
        tops = (self.index.N,) if self.index.params == 1 else (self.index.N, self.index.N_i)
        return tuple(float(np.dot(self.p, k)) / top if top else 0.0 for k, top in zip(w, tops))

    @property
    def mean_excitation(self) -> float:
        """``<k> / N`` summed over both quadratures for two-index records."""
        total = sum(np.dot(self.p, k) for k in self.index.weights())
        return float(total) / self.rounds

    def as_grid(self) -> np.ndarray:
        return self.p.reshape(self.index.shape)


@dataclass(frozen=True, eq=False)
class FisherReport:
    qfi: np.ndarray | None = None
    cfi: np.ndarray | None = None
    sld_residual: float = float("nan")
    sld_commutator: float = float("nan")
    crb: float = float("nan")
    used_matrix: str = "QFI"
    singular: bool = False
    history: dict = field(default_factory=dict)

    def check(self, tol: float = 1e-10) -> None:
        """Raise if the PSD or CFI-below-QFI invariants fail."""
        for name in ("qfi", "cfi"):
            m = getattr(self, name)
            if m is not None and np.linalg.eigvalsh(m)[0] < -tol * max(1.0, np.abs(m).max()):
                raise NumericalError(f"{name} matrix is not positive semidefinite")
        if self.qfi is not None and self.cfi is not None and not self.singular:
            bound = _trace_inverse(self.qfi)[0]
            if self.crb < bound - 1e-9 * max(1.0, abs(bound)):
                raise NumericalError(f"CFI bound {self.crb!r} below QFI bound {bound!r}")


def _trace_inverse(F: np.ndarray, rcond: float = 1e-12) -> tuple[float, bool]:
    F = np.atleast_2d(np.asarray(F, dtype=float))
    w = np.linalg.eigvalsh(F)
    if w[-1] <= 0 or w[0] <= rcond * w[-1]:
        return math.inf, True
    return float(np.trace(np.linalg.inv(F))), False


# ---------------------------------------------------------------------------
# basis transfer
# ---------------------------------------------------------------------------

def _check_unitary(u: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    u = np.asarray(u, dtype=complex)
    if u.shape != (2, 2):
        raise DomainError(f"single-qubit unitary must be 2x2, got {u.shape}")
    if np.max(np.abs(u @ u.conj().T - np.eye(2))) > tol:
        raise DomainError("u is not unitary to 1e-12")
    return u


def _spin_transfer(N: int, u: np.ndarray) -> np.ndarray:
    """``M[k', k] = <D_k'|u^{(x)N}|D_k>`` from the exponentiated collective generator."""
    T, Z = scipy.linalg.schur(u, output="complex")
    h = Z @ np.diag(np.angle(np.diag(T))) @ Z.conj().T  # u = exp(i h)
    h = 0.5 * (h + h.conj().T)
    k = np.arange(N + 1)
    coll = np.diag(h[0, 0] * (N - k) + h[1, 1] * k).astype(complex)
    up = h[1, 0] * np.sqrt((k[:-1] + 1.0) * (N - k[:-1]))
    coll[k[1:], k[:-1]] = up
    coll[k[:-1], k[1:]] = np.conj(up)
    w, Q = np.linalg.eigh(coll)
    return (Q * np.exp(1j * w)) @ Q.conj().T


def transfer_matrix(N: int, u=MEASUREMENT_U, method: str = "spin") -> np.ndarray:
    """Map from the ``x``-label Dicke basis to the readout Dicke basis.

    ``method="spin"`` exponentiates the spin-``N/2`` generator of ``u`` and is
    stable for large ``N``.  ``method="direct"`` sums the shared-excitation
    series term by term; it is exact in exact arithmetic but cancels badly
    beyond a few dozen rounds.
    """
    if int(N) != N or N < 0:
        raise DomainError(f"N must be a non-negative integer, got {N!r}")
    u = _check_unitary(u)
    if method == "spin":
        M = _spin_transfer(int(N), u)
    elif method == "direct":
        M = _kernels.direct_transfer(int(N), u)
    else:
        raise UsageError(f"unknown transfer method {method!r}")
    return M.T


@functools.lru_cache(maxsize=64)
def _default_transfer(N: int) -> np.ndarray:
    V = transfer_matrix(N)
    V.setflags(write=False)
    return V


def _measure_diag(entries: np.ndarray, index: HammingIndex, Ms: tuple[np.ndarray, ...]) -> np.ndarray:
    """``Re diag(M rho M^dagger)`` with ``M`` a Kronecker product of ``Ms``."""
    if index.params == 1:
        (M,) = Ms
        return np.real(np.einsum("km,mn,kn->k", M, entries, M.conj(), optimize=True))
    Mr, Mi = Ms
    dr, di = index.shape
    r4 = entries.reshape(dr, di, dr, di)
    X = np.einsum("ar,rist->aist", Mr, r4, optimize=True)
    X = np.einsum("bi,aist->abst", Mi, X, optimize=True)
    P = np.einsum("abst,as,bt->ab", X, Mr.conj(), Mi.conj(), optimize=True)
    return np.real(P).ravel()


def _transfers_for(index: HammingIndex, V) -> tuple[np.ndarray, ...]:
    """Readout maps ``M = V^T`` per index axis."""
    if V is None:
        Vs = tuple(_default_transfer(s - 1) for s in index.shape)
    elif isinstance(V, (tuple, list)):
        Vs = tuple(np.asarray(v, dtype=complex) for v in V)
    else:
        V = np.asarray(V, dtype=complex)
        if index.params == 2 and V.shape == (index.dim, index.dim):
            raise UsageError("pass per-quadrature transfer matrices as a tuple for two-index states")
        Vs = (V,) if index.params == 1 else (V, V)
    if len(Vs) != index.params or any(v.shape != (s, s) for v, s in zip(Vs, index.shape)):
        raise DomainError(
            f"transfer matrix shapes {[v.shape for v in Vs]} incompatible with state index {index.shape}"
        )
    return tuple(v.T for v in Vs)


def _clean_probabilities(p: np.ndarray) -> np.ndarray:
    low = p.min()
    if low < PROB_FAIL:
        raise NumericalError(f"negative outcome probability {low:.3e}")
    return np.where(p < 0, 0.0, p)


def flip_channel(N: int, f: float) -> np.ndarray:
    """``B[k, j]``: probability that weight ``j`` reads as ``k`` when every bit
    flips independently with probability ``f``."""
    B = np.zeros((N + 1, N + 1))
    for j in range(N + 1):
        keep = scipy.stats.binom.pmf(np.arange(j + 1), j, 1.0 - f)
        gain = scipy.stats.binom.pmf(np.arange(N - j + 1), N - j, f)
        B[:, j] = np.convolve(keep, gain)
    return B


def _apply_flips(p: np.ndarray, index: HammingIndex, flips) -> np.ndarray:
    grid = p.reshape(index.shape)
    for axis, (size, f) in enumerate(zip(index.shape, flips)):
        if f > 0:
            grid = np.moveaxis(np.tensordot(flip_channel(size - 1, f), grid, axes=([1], [axis])), 0, axis)
    return grid.ravel()


def outcome_distribution(state: AncillaState, V=None) -> OutcomeDistribution:
    """Hamming-weight outcome probabilities of ``state`` read out through ``V``.

    ``V`` defaults to :func:`transfer_matrix` of the measurement unitary.  For
    two-index states pass a ``(V_r, V_i)`` pair or a single matrix used for
    both quadratures.  Per-quadrature readout flips recorded in
    ``state.meta["readout_flip"]`` are applied after the readout.
    """
    Ms = _transfers_for(state.index, V)
    p = _clean_probabilities(_measure_diag(state.entries, state.index, Ms))
    flips = state.meta.get("readout_flip")
    if flips:
        p = _apply_flips(p, state.index, flips)
    total = p.sum()
    if abs(total - 1.0) > 1e-10:
        raise NumericalError(f"outcome distribution sums to {total!r}")
    return OutcomeDistribution(p, state.index)


def distribution_derivative(state: AncillaState, d: StateDerivative, V=None) -> np.ndarray:
    """``dP(k)/d param`` pushed through the same readout as the state."""
    Ms = _transfers_for(state.index, V)
    return _measure_diag(d.entries, state.index, Ms)


# ---------------------------------------------------------------------------
# quantum Fisher information
# ---------------------------------------------------------------------------

def _eig(state: AncillaState):
    try:
        return np.linalg.eigh(state.entries)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise NumericalError(f"eigensolver failed: {exc}") from exc


def _sld_weights(p: np.ndarray, eps: float) -> np.ndarray:
    s = p[:, None] + p[None, :]
    w = np.zeros_like(s)
    keep = s > eps
    w[keep] = 2.0 / s[keep]
    return w


def qfi_scalar(state: AncillaState, d: StateDerivative, eps: float = EPS_EIG) -> float:
    """``sum_{j,k} 2 |<j|d rho|k>|^2 / (p_j + p_k)`` over eigenpairs above ``eps``."""
    p, U = _eig(state)
    D = U.conj().T @ np.asarray(d.entries) @ U
    return float(np.sum(_sld_weights(p, eps) * np.abs(D) ** 2))


def qfi_matrix(state: AncillaState, d1: StateDerivative, d2: StateDerivative, eps: float = EPS_EIG) -> FisherReport:
    """Two-parameter QFI matrix plus SLD diagnostics from one eigenbasis.

    ``sld_residual`` is ``max |Im 1/2 Tr(rho {L_a, L_b})|``; ``sld_commutator``
    is ``max |Im Tr(rho L_a L_b)|``, the weak-commutativity measure
    ``|Tr(rho [L_a, L_b])| / 2``.
    """
    p, U = _eig(state)
    W = _sld_weights(p, eps)
    Ds = [U.conj().T @ np.asarray(d.entries) @ U for d in (d1, d2)]
    Ls = [W * D for D in Ds]  # SLDs in the eigenbasis
    F = np.empty((2, 2))
    resid = comm = 0.0
    for a in range(2):
        for b in range(2):
            F[a, b] = float(np.real(np.sum(W * Ds[a] * Ds[b].T)))
            t_ab = np.sum(p[:, None] * Ls[a] * Ls[b].T)
            t_ba = np.sum(p[:, None] * Ls[b] * Ls[a].T)
            resid = max(resid, abs(np.imag(0.5 * (t_ab + t_ba))))
            comm = max(comm, abs(np.imag(t_ab)))
    F = 0.5 * (F + F.T)
    crb, singular = _trace_inverse(F)
    return FisherReport(qfi=F, sld_residual=float(resid), sld_commutator=float(comm), crb=crb, used_matrix="QFI", singular=singular)


# ---------------------------------------------------------------------------
# classical Fisher information
# ---------------------------------------------------------------------------

def cfi_matrix(dist: OutcomeDistribution, dps, qfi: np.ndarray | None = None) -> FisherReport:
    """``F_ab = sum_k dP_a(k) dP_b(k) / P(k)``, skipping ``P(k) < 1e-14``.

    A singular matrix yields ``crb = inf`` and ``singular = True``.
    """
    dps = [np.asarray(d, dtype=float) for d in dps]
    p = dist.p
    keep = p >= CFI_SKIP
    m = len(dps)
    F = np.empty((m, m))
    for a in range(m):
        for b in range(a, m):
            F[a, b] = F[b, a] = float(np.sum(dps[a][keep] * dps[b][keep] / p[keep]))
    crb, singular = _trace_inverse(F)
    return FisherReport(qfi=qfi, cfi=F, crb=crb, used_matrix="CFI", singular=singular)


def sensitive_param(spec: ProtocolSpec) -> str:
    """The quadrature a one-parameter protocol reads (``alpha = i|a|`` reads beta1)."""
    a = spec.alpha
    return "beta1" if abs(a.imag) >= abs(a.real) else "beta2"


def _params_for(spec: ProtocolSpec, param=None) -> tuple[str, ...]:
    if spec.kind is Kind.TWO_PARAM:
        return ("beta1", "beta2")
    return (_param_name(param) if param is not None else sensitive_param(spec),)


def fd_distribution_derivative(spec: ProtocolSpec, param, rounds: int | None = None, h: float = 1e-6) -> np.ndarray:
    """Central-difference ``dP/d param`` (cross-check path)."""
    step = h if _param_name(param) == "beta1" else 1j * h
    rounds = spec.rounds if rounds is None else rounds
    plus = outcome_distribution(prefix_state(spec.with_beta(spec.beta + step), rounds)).p
    minus = outcome_distribution(prefix_state(spec.with_beta(spec.beta - step), rounds)).p
    return (plus - minus) / (2.0 * h)


def protocol_report(
    spec: ProtocolSpec,
    param=None,
    rounds: int | None = None,
    derivative: str = "analytic",
    with_qfi: bool = True,
    eps: float = EPS_EIG,
) -> FisherReport:
    """QFI and readout CFI of ``spec`` (or its first ``rounds`` kicks)."""
    rounds = spec.rounds if rounds is None else rounds
    state = prefix_state(spec, rounds)
    params = _params_for(spec, param)
    dist = outcome_distribution(state)
    derivs = [d_rho(state, q) for q in params]
    if derivative == "analytic":
        dps = [distribution_derivative(state, d) for d in derivs]
    elif derivative == "fd":
        dps = [fd_distribution_derivative(spec, q, rounds) for q in params]
    else:
        raise UsageError(f"unknown derivative mode {derivative!r}")
    qfi = None
    extra = {}
    if with_qfi:
        if len(params) == 2:
            qrep = qfi_matrix(state, *derivs, eps=eps)
            qfi = qrep.qfi
            extra = dict(sld_residual=qrep.sld_residual, sld_commutator=qrep.sld_commutator)
        else:
            qfi = np.array([[qfi_scalar(state, derivs[0], eps=eps)]])
    rep = cfi_matrix(dist, dps, qfi=qfi)
    if extra:
        rep = FisherReport(qfi=rep.qfi, cfi=rep.cfi, crb=rep.crb, used_matrix="CFI", singular=rep.singular, **extra)
    return rep


def protocol_qfi(spec: ProtocolSpec, param=None, eps: float = EPS_EIG) -> float:
    """Scalar ancilla QFI of a one-parameter protocol for its sensitive quadrature."""
    if spec.kind is Kind.TWO_PARAM:
        raise UsageError("use qfi_matrix for the two-parameter protocol")
    state = build_rho(spec)
    (q,) = _params_for(spec, param)
    return qfi_scalar(state, d_rho(state, q), eps=eps)


def single_two_quadrature_crb(N: int, alpha_abs: float, beta) -> tuple[float, float, float]:
    """Baseline from two independent single-measurement runs, one per quadrature.

    Returns ``(crb, F_1, F_2)`` with ``crb = 1/F_1 + 1/F_2``.
    """
    F1 = protocol_report(ProtocolSpec.single(N, 1j * alpha_abs, beta), "beta1", with_qfi=False).cfi[0, 0]
    F2 = protocol_report(ProtocolSpec.single(N, alpha_abs, beta), "beta2", with_qfi=False).cfi[0, 0]
    # a quadrature whose information is roundoff relative to the other is unresolved
    floor = 1e-12 * max(F1, F2, 0.0)
    crb = (1.0 / F1 if F1 > floor else math.inf) + (1.0 / F2 if F2 > floor else math.inf)
    return float(crb), float(F1), float(F2)


# ---------------------------------------------------------------------------
# rounds and scaling
# ---------------------------------------------------------------------------

def crb_min_over_rounds(spec: ProtocolSpec, noise=None, method: str = "symmetric") -> FisherReport:
    """CFI-based CRB after every kick plus its running minimum.

    Prefixes are counted in kicks: for the two-parameter protocol prefix
    ``2n`` is the ``N = n`` protocol and odd prefixes carry one extra
    real-axis kick.  With ``noise`` the states come from
    :mod:`seqmetro.decoherence` and derivatives are central differences.
    """
    R = spec.rounds
    series = np.empty(R)
    if noise is None:
        for n in range(1, R + 1):
            series[n - 1] = protocol_report(spec, rounds=n, with_qfi=False).crb
    else:
        from .decoherence import noisy_prefix_crb

        for n in range(1, R + 1):
            series[n - 1] = noisy_prefix_crb(spec, noise, n, method=method)
    running = np.minimum.accumulate(series)
    final = float(running[-1])
    return FisherReport(
        crb=final,
        used_matrix="CFI",
        singular=not math.isfinite(final),
        history={"rounds": np.arange(1, R + 1), "crb": series, "running_min": running},
    )


def scaling_exponent(samples) -> tuple[np.ndarray, np.ndarray]:
    """Local slope ``d log F / d log N`` at the interior sample points.

    ``samples`` is a sequence of ``(N, F)`` with strictly increasing ``N``;
    returns ``(N_interior, p)``.
    """
    arr = np.asarray(list(samples), dtype=float)
    if arr.ndim != 2 or arr.shape[0] < 3:
        raise UsageError("scaling_exponent needs at least three (N, F) samples")
    N, F = arr[:, 0], arr[:, 1]
    if np.any(np.diff(N) <= 0):
        raise UsageError("N must be strictly increasing")
    if np.any(F <= 0):
        raise DomainError("Fisher information samples must be positive")
    lN, lF = np.log(N), np.log(F)
    p = (lF[2:] - lF[:-2]) / (lN[2:] - lN[:-2])
    return N[1:-1], p
