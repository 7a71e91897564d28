"""Reference implementations used to validate the fast paths.

Nothing here reuses the Dicke-compressed builders or the Fisher routines:
states are built bitstring by bitstring or in a truncated Fock basis, and
the only shared helpers are :func:`seqmetro.core.as_amplitude` and
:func:`seqmetro.core.coherent_overlap`.  The trajectory sampler and the
grid-state fixture also live here.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.special import gammaln

from .constants import MAX_BRANCH_ROUNDS
from .core import as_amplitude, coherent_overlap
from .errors import DomainError, NumericalError, ResourceError

# readout unitary <z|x>, x = (-, +) labels; shared convention, not shared code
READOUT_U = np.array([[1.0, 1.0], [-1.0, 1.0]], dtype=complex) / math.sqrt(2.0)


# ---------------------------------------------------------------------------
# brute-force branch enumeration
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BruteForceResult:
    bits: np.ndarray  # (2**R, R), 1 = '+' label, first round most significant
    mu: np.ndarray  # branch amplitudes
    rho: np.ndarray  # 2**R x 2**R ancilla matrix in the label basis
    probabilities: np.ndarray  # readout probability of each bitstring
    labels: np.ndarray  # Dicke label of each bitstring
    grid_shape: tuple

    def grouped(self) -> np.ndarray:
        """Ancilla matrix on normalized Dicke labels."""
        dim = int(np.prod(self.grid_shape))
        out = np.zeros((dim, dim), dtype=complex)
        np.add.at(out, (self.labels[:, None], self.labels[None, :]), self.rho)
        counts = np.bincount(self.labels, minlength=dim).astype(float)
        return out / np.sqrt(np.outer(counts, counts))

    def weight_distribution(self) -> np.ndarray:
        dim = int(np.prod(self.grid_shape))
        return np.bincount(self.labels, weights=self.probabilities, minlength=dim)


def _kinds(spec):
    return getattr(spec.kind, "value", spec.kind)


def branch_amplitudes(spec, rounds: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """All label records and ``mu_a = R beta + sum_n a_n alpha_n``."""
    kind = _kinds(spec)
    sched = [as_amplitude(a) for a in spec.schedule]
    beta = as_amplitude(spec.beta)
    if kind == "single":
        R, n_sig, sched = 1, spec.N, sched[:1]
    else:
        R = len(sched) if rounds is None else rounds
        n_sig, sched = R, sched[:R]
    if R > MAX_BRANCH_ROUNDS:
        raise ResourceError(f"{R} rounds exceed the enumeration limit {MAX_BRANCH_ROUNDS}", parameter="rounds")
    bits = np.array(list(itertools.product((0, 1), repeat=R)), dtype=np.int8)
    mu = n_sig * beta + (2 * bits - 1) @ np.array(sched)
    return bits, mu


def readout_probabilities(rho: np.ndarray, u: np.ndarray = READOUT_U) -> np.ndarray:
    """Diagonal of ``U rho U^dagger`` with ``U`` the ``R``-fold tensor power of ``u``."""
    R = int(round(math.log2(rho.shape[0])))
    U = np.ones((1, 1), dtype=complex)
    for _ in range(R):
        U = np.kron(U, u)
    return np.real(np.einsum("ij,jk,ik->i", U, rho, U.conj()))


def brute_force_seq(spec, rounds: int | None = None, u: np.ndarray = READOUT_U) -> BruteForceResult:
    """Enumerate every branch and build the exact reduced ancilla matrix."""
    bits, mu = branch_amplitudes(spec, rounds)
    R = bits.shape[1]
    rho = coherent_overlap(mu[None, :], mu[:, None]) / 2.0**R
    probs = readout_probabilities(rho, u) if R <= 12 else None
    if _kinds(spec) == "two-param":
        kr, ki = bits[:, 0::2].sum(1), bits[:, 1::2].sum(1)
        Ni = R // 2
        labels = (kr * (Ni + 1) + ki).astype(np.int64)
        shape = ((R + 1) // 2 + 1, Ni + 1)
    else:
        labels = bits.sum(1).astype(np.int64)
        shape = (R + 1,)
    return BruteForceResult(bits, mu, rho, probs, labels, shape)


def permute_qubits(rho: np.ndarray, perm) -> np.ndarray:
    """Reorder the qubits of a ``2**R`` matrix."""
    R = len(perm)
    t = rho.reshape((2,) * (2 * R))
    axes = list(perm) + [R + p for p in perm]
    return t.transpose(axes).reshape(rho.shape)


# ---------------------------------------------------------------------------
# pure-state and mixed-state QFI references
# ---------------------------------------------------------------------------

def _fock_cutoff(mu: np.ndarray) -> int:
    m = float(np.max(np.abs(mu))) if mu.size else 0.0
    return int(math.ceil(m * m + 14.0 * m + 40.0))


def fock_amplitudes(mu: np.ndarray, nmax: int) -> np.ndarray:
    """``c[a, n] = exp(-|mu|^2/2) mu^n / sqrt(n!)`` evaluated in log space."""
    mu = np.asarray(mu, dtype=complex)
    n = np.arange(nmax + 1)
    out = np.zeros((mu.size, nmax + 1), dtype=complex)
    nz = np.abs(mu) > 0
    logmu = np.log(mu[nz])
    lg = -0.5 * np.abs(mu[nz, None]) ** 2 + n[None, :] * logmu[:, None] - 0.5 * gammaln(n + 1.0)[None, :]
    out[nz] = np.exp(lg)
    out[~nz, 0] = 1.0
    return out


def _fock_derivative(c: np.ndarray, mu: np.ndarray, dmu: np.ndarray) -> np.ndarray:
    """Derivative of coherent amplitudes when ``mu`` moves by ``dmu``."""
    n = np.arange(c.shape[1])
    shifted = np.zeros_like(c)
    shifted[:, 1:] = np.sqrt(n[1:])[None, :] * c[:, :-1]
    radial = np.real(np.conj(dmu) * mu)
    return -radial[:, None] * c + dmu[:, None] * shifted


def pure_state_qfi(weights, mu, dmu) -> float:
    """``4 (<d psi|d psi> - |<psi|d psi>|^2)`` for ``sum_j sqrt(w_j)|j>|mu_j>``.

    ``dmu`` is ``d mu_j / d theta``; Fock amplitudes are truncated well past
    the largest ``|mu|``.
    """
    w = np.asarray(weights, dtype=float)
    mu = np.asarray(mu, dtype=complex)
    dmu = np.broadcast_to(np.asarray(dmu, dtype=complex), mu.shape)
    c = fock_amplitudes(mu, _fock_cutoff(mu))
    dc = _fock_derivative(c, mu, dmu)
    dd = np.sum(w * np.sum(np.abs(dc) ** 2, axis=1))
    ov = np.sum(w * np.sum(np.conj(c) * dc, axis=1))
    return float(4.0 * (dd - abs(ov) ** 2))


def joint_qfi_oracle(spec, param: str = "beta1") -> float:
    """Full oscillator+ancilla QFI, enumerating records (Dicke-grouped when constant)."""
    d = 1.0 if param == "beta1" else 1j
    kind = _kinds(spec)
    sched = np.array([as_amplitude(a) for a in spec.schedule])
    beta = as_amplitude(spec.beta)
    if kind == "single":
        N = spec.N
        mu = N * beta + np.array([-1.0, 1.0]) * sched[0]
        return pure_state_qfi([0.5, 0.5], mu, N * d)
    R = sched.size
    if np.allclose(sched, sched[0]) and kind == "seq":
        k = np.arange(R + 1)
        w = np.exp(gammaln(R + 1.0) - gammaln(k + 1.0) - gammaln(R - k + 1.0) - R * math.log(2.0))
        mu = R * beta + (2 * k - R) * sched[0]
        return pure_state_qfi(w, mu, R * d)
    bits, mu = branch_amplitudes(spec)
    return pure_state_qfi(np.full(mu.size, 2.0**-R), mu, R * d)


def purification(spec, rounds: int | None = None, nmax: int | None = None) -> tuple[np.ndarray, int]:
    """Joint amplitudes ``psi[a, n]`` over label records and Fock levels."""
    bits, mu = branch_amplitudes(spec, rounds)
    nmax = _fock_cutoff(mu) if nmax is None else nmax
    c = fock_amplitudes(mu, nmax)
    return c / math.sqrt(mu.size), nmax


def dense_sld_qfi(rho: np.ndarray, drho: np.ndarray) -> float:
    """Solve ``d rho = (L rho + rho L)/2`` as a dense linear system."""
    d = rho.shape[0]
    I = np.eye(d)
    A = np.kron(I, rho) + np.kron(rho.T, I)
    vecL = np.linalg.lstsq(A, 2.0 * drho.reshape(-1, order="F"), rcond=1e-13)[0]
    L = vecL.reshape(d, d, order="F")
    return float(np.real(np.trace(drho @ L)))


def ancilla_qfi_dense(spec, param: str = "beta1", rounds: int | None = None) -> float:
    """Ancilla QFI from an explicit partial trace of the joint pure state."""
    psi, nmax = purification(spec, rounds)
    bits, mu = branch_amplitudes(spec, rounds)
    R = bits.shape[1]
    n_sig = spec.N if _kinds(spec) == "single" else R
    dmu = n_sig * (1.0 if param == "beta1" else 1j)
    c = fock_amplitudes(mu, nmax)
    dpsi = _fock_derivative(c, mu, np.full(mu.shape, dmu)) / math.sqrt(mu.size)
    rho = psi @ psi.conj().T
    drho = dpsi @ psi.conj().T + psi @ dpsi.conj().T
    return dense_sld_qfi(rho, drho)


STENCIL_8 = np.array([-1 / 560, 8 / 315, -1 / 5, 8 / 5, -205 / 72, 8 / 5, -1 / 5, 8 / 315, -1 / 560])


def _grouped_purification(spec, beta) -> np.ndarray:
    """``sqrt(w_j) c_n(mu_j)`` over Dicke labels of the two-quadrature protocol."""
    N = spec.N
    a = abs(as_amplitude(spec.schedule[0]))
    k = np.arange(N + 1)
    lw = gammaln(N + 1.0) - gammaln(k + 1.0) - gammaln(N - k + 1.0) - N * math.log(2.0)
    kr, ki = np.meshgrid(k, k, indexing="ij")
    w = np.exp(lw[kr] + lw[ki]).ravel()
    mu = (2 * N * beta + a * (2 * kr - N) + 1j * a * (2 * ki - N)).ravel()
    return mu, w


def fidelity_qfi(spec, param: str = "beta1", h: float = 0.025, nmax: int | None = None) -> float:
    """QFI from the curvature of the root fidelity ``||A^dagger B||_*``.

    ``A``, ``B`` are purifications of the two-quadrature ancilla state at
    ``beta`` and ``beta + j h``; the second derivative uses a nine-point
    central stencil.
    """
    beta = as_amplitude(spec.beta)
    step = h if param == "beta1" else 1j * h
    mu0, w = _grouped_purification(spec, beta)
    span = np.abs(mu0).max() + 8 * spec.N * h
    nmax = int(math.ceil(span * span + 14 * span + 40)) if nmax is None else nmax

    def purif(b):
        mu, w = _grouped_purification(spec, b)
        return np.sqrt(w)[:, None] * fock_amplitudes(mu, nmax)

    A = purif(beta)
    RA = np.linalg.qr(A.conj().T, mode="r")
    vals = []
    for j in range(-4, 5):
        if j == 0:
            vals.append(1.0)
            continue
        B = purif(beta + j * step)
        RB = np.linalg.qr(B.conj().T, mode="r")
        vals.append(float(np.sum(np.linalg.svd(RA @ RB.conj().T, compute_uv=False))))
    curv = float(np.dot(STENCIL_8, vals)) / h**2
    return -4.0 * curv


# ---------------------------------------------------------------------------
# truncated-Fock master equation
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FockState:
    """Qubit (outer) times oscillator density matrix, ``2 dim`` square."""

    dim: int
    rho: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rho, dtype=complex)
        if r.shape != (2 * self.dim, 2 * self.dim):
            raise DomainError(f"joint matrix must be {2 * self.dim} square, got {r.shape}")
        object.__setattr__(self, "rho", r)

    @classmethod
    def product(cls, qubit, mu: complex, dim: int = 60) -> "FockState":
        q = np.asarray(qubit, dtype=complex)
        q = np.outer(q, q.conj()) if q.ndim == 1 else q
        c = fock_amplitudes(np.array([as_amplitude(mu)]), dim - 1)[0]
        return cls(dim, np.kron(q, np.outer(c, c.conj())))

    def blocks(self) -> np.ndarray:
        d = self.dim
        return self.rho.reshape(2, d, 2, d).transpose(0, 2, 1, 3).reshape(4, d, d)

    @classmethod
    def from_blocks(cls, X: np.ndarray) -> "FockState":
        d = X.shape[-1]
        return cls(d, X.reshape(2, 2, d, d).transpose(0, 2, 1, 3).reshape(2 * d, 2 * d))

    def oscillator(self) -> np.ndarray:
        X = self.blocks()
        return X[0] + X[3]

    def mean_amplitude(self) -> complex:
        osc = self.oscillator()
        n = np.arange(1, self.dim)
        return complex(np.sum(np.sqrt(n) * np.diagonal(osc, -1)))  # Tr(rho a)

    def top_population(self, frac: float = 0.1) -> float:
        start = self.dim - max(1, int(math.ceil(frac * self.dim)))
        return float(np.real(np.trace(self.oscillator()[start:, start:])))

    def check(self, tol: float = 1e-10) -> None:
        r = self.rho
        if np.abs(r - r.conj().T).max() > tol:
            raise NumericalError("Fock state not Hermitian")
        if abs(np.trace(r) - 1.0) > 1e-9:
            raise NumericalError("Fock state trace drifted")
        if np.linalg.eigvalsh(0.5 * (r + r.conj().T))[0] < -tol:
            raise NumericalError("Fock state not positive semidefinite")


@dataclass(frozen=True)
class _Rates:
    down: float  # gamma (1 + n_th)
    up: float  # gamma n_th
    deph: float  # gamma_d


def _rates(noise) -> _Rates:
    if noise is None:
        return _Rates(0.0, 0.0, 0.0)
    return _Rates(noise.gamma * (1.0 + noise.n_th), noise.gamma * noise.n_th, noise.gamma_d)


def _lindblad(X: np.ndarray, eps: complex, r: _Rates, sq: np.ndarray) -> np.ndarray:
    """Master-equation generator on a batch of oscillator blocks, ``O(d^2)`` each."""
    # ladder actions via shifts: sq[n] = sqrt(n)
    def a_left(Y):  # a Y
        out = np.zeros_like(Y)
        out[..., :-1, :] = sq[1:, None] * Y[..., 1:, :]
        return out

    def ad_left(Y):  # a^dagger Y
        out = np.zeros_like(Y)
        out[..., 1:, :] = sq[1:, None] * Y[..., :-1, :]
        return out

    def a_right(Y):  # Y a
        out = np.zeros_like(Y)
        out[..., :, 1:] = Y[..., :, :-1] * sq[None, 1:]
        return out

    def ad_right(Y):  # Y a^dagger
        out = np.zeros_like(Y)
        out[..., :, :-1] = Y[..., :, 1:] * sq[None, 1:]
        return out

    n = sq**2
    out = eps * ad_left(X) - np.conj(eps) * a_left(X) - eps * ad_right(X) + np.conj(eps) * a_right(X)
    if r.down:
        out += r.down * (ad_right(a_left(X)) - 0.5 * (n[:, None] + n[None, :]) * X)
    if r.up:
        out += r.up * (a_right(ad_left(X)) - 0.5 * ((n + 1)[:, None] + (n + 1)[None, :]) * X)
    if r.deph:
        out += -0.5 * r.deph * (n[:, None] - n[None, :]) ** 2 * X
    return out


def _rk4(X, eps, r, sq, duration, steps):
    h = duration / steps
    for _ in range(steps):
        k1 = _lindblad(X, eps, r, sq)
        k2 = _lindblad(X + 0.5 * h * k1, eps, r, sq)
        k3 = _lindblad(X + 0.5 * h * k2, eps, r, sq)
        k4 = _lindblad(X + h * k3, eps, r, sq)
        X = X + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return X


def evolve_blocks(X: np.ndarray, noise, eps: complex, duration: float, tol: float = 1e-9) -> np.ndarray:
    """Integrate a batch of blocks, halving the step until the change is below ``tol``."""
    if duration == 0:
        return X.copy()
    d = X.shape[-1]
    sq = np.sqrt(np.arange(d, dtype=float))
    r = _rates(noise)
    scale = (r.down + r.up) * d + abs(eps) * 2 * math.sqrt(d) + r.deph * d * d / 2
    steps = max(4, int(math.ceil(0.5 * scale * duration)))
    coarse = _rk4(X, eps, r, sq, duration, steps)
    for _ in range(16):
        steps *= 2
        fine = _rk4(X, eps, r, sq, duration, steps)
        if np.abs(fine - coarse).max() < tol:
            return fine
        coarse = fine
    raise NumericalError("master-equation integration did not converge")


def fock_lindblad_evolve(state: FockState, noise, drive: complex = 0.0, duration: float = 0.0, tol: float = 1e-9) -> FockState:
    """Evolve under the drive ``H = i(eps a^dagger - eps* a)`` plus loss, heating
    and dephasing for ``duration`` seconds."""
    if state.top_population() > 1e-6:
        raise ResourceError(f"input populates the top Fock levels; increase dim beyond {state.dim}", parameter="dim")
    X = evolve_blocks(state.blocks(), noise, complex(drive), duration, tol)
    out = FockState.from_blocks(X)
    if out.top_population() > 1e-6:
        raise ResourceError(f"evolution reached the truncation edge; increase dim beyond {state.dim}", parameter="dim")
    if abs(np.trace(out.rho) - np.trace(state.rho)) > 1e-9:
        raise NumericalError("trace not preserved")
    return out


def displacement(alpha: complex, dim: int, pad: int = 40) -> np.ndarray:
    """``D(alpha)`` exponentiated in a larger space and cropped to ``dim``."""
    D = dim + pad
    a = np.diag(np.sqrt(np.arange(1, D, dtype=float)), 1)
    gen = alpha * a.T - np.conj(alpha) * a
    return scipy.linalg.expm(gen)[:dim, :dim]


def fock_protocol_matrix(spec, noise, dim: int = 60, rounds: int | None = None, tol: float = 1e-9) -> np.ndarray:
    """Ancilla matrix of a protocol simulated in a truncated Fock space.

    Each ancilla starts in ``(|-> + |+>)/sqrt(2)``; the oscillator block for
    every pair of label records is evolved separately and the kick applies
    ``D(a alpha) X D(b alpha)^dagger``.
    """
    kind = _kinds(spec)
    beta = as_amplitude(spec.beta)
    t = noise.t_round if noise is not None else 1.0
    eps = beta / t
    sched = [as_amplitude(a) for a in spec.schedule]
    if kind == "single":
        plan = [(spec.N, sched[0])]
    else:
        R = len(sched) if rounds is None else rounds
        plan = [(1, a) for a in sched[:R]]
    if len(plan) > 6:
        raise ResourceError("Fock protocol simulation limited to 6 kicks", parameter="rounds")
    X = np.zeros((1, 1, dim, dim), dtype=complex)
    X[0, 0, 0, 0] = 1.0
    for n_drive, alpha in plan:
        B = X.shape[0]
        X = evolve_blocks(X.reshape(B * B, dim, dim), noise, eps, n_drive * t, tol).reshape(B, B, dim, dim)
        Ds = [displacement(-alpha, dim), displacement(alpha, dim)]
        new = np.empty((2 * B, 2 * B, dim, dim), dtype=complex)
        for s in (0, 1):
            for sp in (0, 1):
                new[s::2, sp::2] = 0.5 * np.einsum("ij,abjk,lk->abil", Ds[s], X, Ds[sp].conj(), optimize=True)
        X = new
    pops = np.real(np.einsum("aajj->aj", X))
    top = dim - max(1, dim // 10)
    if pops[:, top:].sum() > 1e-6:
        raise ResourceError(f"protocol reached the truncation edge; increase dim beyond {dim}", parameter="dim")
    return np.einsum("abjj->ab", X)


# ---------------------------------------------------------------------------
# trajectory sampler
# ---------------------------------------------------------------------------

def _node_layout(spec):
    """Node shape, per-round '+' step and class of each round."""
    kind = _kinds(spec)
    R = len(spec.schedule)
    if kind == "two-param":
        Nr, Ni = (R + 1) // 2, R // 2
        shape = (Nr + 1, Ni + 1)
        cls = [n % 2 for n in range(R)]
    else:
        shape = (R + 1,)
        cls = [0] * R
    return shape, cls


def _tail_grams(spec, shape, cls) -> np.ndarray:
    """Per-round Gram matrices with the unmeasured tail traced out."""
    R = len(cls)
    beta = as_amplitude(spec.beta)
    amps = [as_amplitude(spec.schedule[0]), as_amplitude(spec.schedule[1]) if len(shape) == 2 else 0]
    tot = [cls.count(0), cls.count(1)]
    nodes = list(itertools.product(*[range(s) for s in shape]))

    def mu(counts):
        return R * beta + sum(amps[c] * (2 * counts[c] - tot[c]) for c in range(len(shape)))

    grams = np.zeros((R, len(nodes), len(nodes)), dtype=complex)
    for n in range(R):
        rem = [cls[n + 1:].count(c) for c in range(len(shape))]
        tails = list(itertools.product(*[range(r + 1) for r in rem]))
        tw = [
            math.prod(math.comb(rem[c], t[c]) for c in range(len(shape))) / 2.0 ** sum(rem) for t in tails
        ]
        seen = [cls[: n + 1].count(c) for c in range(len(shape))]
        for i, ki in enumerate(nodes):
            if any(ki[c] > seen[c] for c in range(len(shape))):
                continue
            for j, kj in enumerate(nodes):
                if any(kj[c] > seen[c] for c in range(len(shape))):
                    continue
                acc = 0.0j
                for t, w in zip(tails, tw):
                    mi = mu([ki[c] + t[c] for c in range(len(shape))])
                    mj = mu([kj[c] + t[c] for c in range(len(shape))])
                    acc += w * coherent_overlap(mi, mj)
                grams[n, i, j] = acc
    return grams


def _steps(shape, cls) -> np.ndarray:
    R = len(cls)
    dim = int(np.prod(shape))
    steps = np.full((R, dim), -1, dtype=np.int64)
    stride = [shape[1], 1] if len(shape) == 2 else [1]
    for n, c in enumerate(cls):
        for j in range(dim):
            idx = np.unravel_index(j, shape)
            if idx[c] >= 1:
                steps[n, j] = j - stride[c]
    return steps


def sample_trajectories(spec, noise=None, seed: int = 0, count: int = 1000, u: np.ndarray = READOUT_U) -> np.ndarray:
    """Readout records drawn round by round from exact conditionals.

    Returns an ``int8`` array ``(count, rounds)``; 1 means ``|up>``.  All
    uniforms are drawn up front from ``numpy.random.default_rng(seed)`` so
    the result is reproducible for a fixed seed.
    """
    from . import _kernels

    if count < 1:
        raise DomainError("count must be at least 1")
    kind = _kinds(spec)
    R = 1 if kind == "single" else len(spec.schedule)
    uniforms = np.random.default_rng(seed).random((count, R))
    if noise is not None and noise.Gamma > 0:
        from .decoherence import evolve_noisy_branches

        table = evolve_noisy_branches(spec, noise).outcome_probabilities(u)
        return _sample_from_table(table, uniforms)
    if kind == "single":
        res = brute_force_seq(spec, u=u)
        return _sample_from_table(res.probabilities, uniforms)
    shape, cls = _node_layout(spec)
    grams = _tail_grams(spec, shape, cls)
    return _kernels.sample_dicke_paths(grams, _steps(shape, cls), u, uniforms)


def _sample_from_table(table: np.ndarray, uniforms: np.ndarray) -> np.ndarray:
    count, R = uniforms.shape
    p = np.clip(np.asarray(table, dtype=float), 0.0, None)
    bits = np.zeros((count, R), dtype=np.int8)
    idx = np.zeros(count, dtype=np.int64)
    for n in range(R):
        marg = p.reshape(2 ** (n + 1), -1).sum(1)
        p0 = marg[2 * idx]
        p1 = marg[2 * idx + 1]
        up = uniforms[:, n] * (p0 + p1) >= p0
        bits[:, n] = up
        idx = 2 * idx + up
    return bits


# ---------------------------------------------------------------------------
# grid-state fixture
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class GridFixture:
    n: int
    alpha_abs: float
    state: object  # AncillaState
    reference: np.ndarray
    pattern_error: float
    commutator_coeff: float


def commutator_coefficient(alpha_abs: float) -> float:
    """``c`` in ``[D(|a|), D(i|a|)] = i c D(|a| + i|a|)``, i.e. ``2 sin(|a|^2)``."""
    return 2.0 * math.sin(alpha_abs**2)


def grid_reference(n: int) -> np.ndarray:
    """``1/4 [1, s x, s x, x^2; ...]`` with ``x = exp(-2 n pi)`` and ``s = (-1)^n``."""
    x = math.exp(-2.0 * n * math.pi)
    s = -1.0 if n % 2 else 1.0
    k = [(0, 0), (0, 1), (1, 0), (1, 1)]
    ref = np.empty((4, 4))
    for i, (r, q) in enumerate(k):
        for j, (rp, qp) in enumerate(k):
            d = (r - rp) ** 2 + (q - qp) ** 2
            ref[i, j] = 0.25 * x**d * (s if d == 1 else 1.0)
    return ref


def grid_state_fixture(n: int) -> GridFixture:
    """Single-round two-quadrature state at ``|alpha| = sqrt(n pi)``, ``beta = 0``."""
    from .protocols import ProtocolSpec, build_rho

    if int(n) != n or n < 1:
        raise DomainError(f"n must be a positive integer, got {n!r}")
    a = math.sqrt(n * math.pi)
    state = build_rho(ProtocolSpec.two_param(1, a, 0.0))
    ref = grid_reference(int(n))
    return GridFixture(int(n), a, state, ref, float(np.abs(state.entries - ref).max()), commutator_coefficient(a))
