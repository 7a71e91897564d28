"""Hot loops with a numba path and a pure-numpy fallback.

Set ``SEQMETRO_DISABLE_NUMBA=1`` (before import) to force the numpy path.
Both paths take the same arguments and return the same values; the numba
versions are compiled lazily on first call.
"""
from __future__ import annotations

import math
import os

import numpy as np
from scipy.special import gammaln

_DISABLED = os.environ.get("SEQMETRO_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes", "on")

try:
    if _DISABLED:
        raise ImportError("disabled by SEQMETRO_DISABLE_NUMBA")
    from numba import njit
    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False


def backend() -> str:
    return "numba" if HAVE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# direct transfer matrix: signed log-sum over the shared excitation count
# ---------------------------------------------------------------------------

def _log_factorials(n: int) -> np.ndarray:
    return gammaln(np.arange(n + 2, dtype=float) + 1.0)


def _direct_transfer_py(N, logabs, args, lf):
    """``M[kp, k] = <D_kp| u^{(x)N} |D_k>`` summed term by term (numpy)."""
    out = np.zeros((N + 1, N + 1), dtype=np.complex128)
    for k in range(N + 1):
        for kp in range(N + 1):
            s = np.arange(max(0, k + kp - N), min(k, kp) + 1)
            ex = np.stack([N - k - kp + s, k - s, kp - s, s])  # powers of u00, u01, u10, u11
            keep = np.all((ex == 0) | np.isfinite(logabs)[:, None], axis=0)
            s, ex = s[keep], ex[:, keep]
            if s.size == 0:
                continue
            lmag = (lf[k] - lf[s] - lf[k - s]) + (lf[N - k] - lf[kp - s] - lf[N - k - kp + s])
            lmag = lmag + np.where(ex > 0, ex * np.where(np.isfinite(logabs), logabs, 0.0)[:, None], 0.0).sum(0)
            ph = (ex * args[:, None]).sum(0)
            top = lmag.max()
            acc = np.sum(np.exp(lmag - top) * np.exp(1j * ph))
            norm = 0.5 * ((lf[N] - lf[k] - lf[N - k]) - (lf[N] - lf[kp] - lf[N - kp]))
            out[kp, k] = acc * math.exp(top + norm)
    return out


if HAVE_NUMBA:

    @njit(cache=True)
    def _direct_transfer_nb(N, logabs, args, lf):
        out = np.zeros((N + 1, N + 1), dtype=np.complex128)
        ex = np.zeros(4, dtype=np.int64)
        for k in range(N + 1):
            for kp in range(N + 1):
                lo = max(0, k + kp - N)
                hi = min(k, kp)
                # first pass: largest log-magnitude
                top = -np.inf
                for s in range(lo, hi + 1):
                    ex[0] = N - k - kp + s
                    ex[1] = k - s
                    ex[2] = kp - s
                    ex[3] = s
                    lm = (lf[k] - lf[s] - lf[k - s]) + (lf[N - k] - lf[kp - s] - lf[N - k - kp + s])
                    ok = True
                    for j in range(4):
                        if ex[j] > 0:
                            if logabs[j] == -np.inf:
                                ok = False
                            else:
                                lm += ex[j] * logabs[j]
                    if ok and lm > top:
                        top = lm
                if top == -np.inf:
                    continue
                acc = 0.0 + 0.0j
                for s in range(lo, hi + 1):
                    ex[0] = N - k - kp + s
                    ex[1] = k - s
                    ex[2] = kp - s
                    ex[3] = s
                    lm = (lf[k] - lf[s] - lf[k - s]) + (lf[N - k] - lf[kp - s] - lf[N - k - kp + s])
                    ph = 0.0
                    ok = True
                    for j in range(4):
                        if ex[j] > 0:
                            if logabs[j] == -np.inf:
                                ok = False
                            else:
                                lm += ex[j] * logabs[j]
                                ph += ex[j] * args[j]
                    if ok:
                        acc += math.exp(lm - top) * complex(math.cos(ph), math.sin(ph))
                norm = 0.5 * ((lf[N] - lf[k] - lf[N - k]) - (lf[N] - lf[kp] - lf[N - kp]))
                out[kp, k] = acc * math.exp(top + norm)
        return out


def direct_transfer(N: int, u: np.ndarray) -> np.ndarray:
    """Dicke-block of ``u`` tensored ``N`` times, one term per shared count.

    Terms are accumulated as (log-magnitude, phase) pairs relative to the
    largest one.  The alternating sum still cancels catastrophically for
    large ``N`` and generic ``u``, so this is a cross-check kernel.
    """
    u = np.asarray(u, dtype=np.complex128)
    flat = np.array([u[0, 0], u[0, 1], u[1, 0], u[1, 1]])
    with np.errstate(divide="ignore"):
        logabs = np.log(np.abs(flat))
    args = np.angle(flat)
    lf = _log_factorials(N)
    if HAVE_NUMBA:
        return _direct_transfer_nb(int(N), logabs, args, lf)
    return _direct_transfer_py(int(N), logabs, args, lf)


# ---------------------------------------------------------------------------
# Hamming-weight grouping of a bitstring-indexed matrix
# ---------------------------------------------------------------------------

def _group_pairs_py(mat, labels, nlab):
    P = np.zeros((labels.size, nlab))
    P[np.arange(labels.size), labels] = 1.0
    return P.T @ mat @ P


if HAVE_NUMBA:

    @njit(cache=True)
    def _group_pairs_nb(mat, labels, nlab):
        out = np.zeros((nlab, nlab), dtype=np.complex128)
        n = labels.size
        for i in range(n):
            li = labels[i]
            for j in range(n):
                out[li, labels[j]] += mat[i, j]
        return out


def group_pairs(mat: np.ndarray, labels: np.ndarray, nlab: int) -> np.ndarray:
    """Sum ``mat[i, j]`` into ``out[labels[i], labels[j]]``."""
    mat = np.ascontiguousarray(mat, dtype=np.complex128)
    labels = np.ascontiguousarray(labels, dtype=np.int64)
    if HAVE_NUMBA:
        return _group_pairs_nb(mat, labels, int(nlab))
    return _group_pairs_py(mat, labels, int(nlab))


# ---------------------------------------------------------------------------
# noisy branch coherences
# ---------------------------------------------------------------------------

def _branch_exponent_py(coef, K, drive):
    # <T_b, T_a> - |T_a|^2/2 - |T_b|^2/2 with T = coef @ v + signal
    cross = coef.conj() @ K @ coef.T  # [b, a]
    norms = np.real(np.diag(cross))
    lin = coef @ drive.conj()  # <signal, T_a - signal>
    e = cross - 0.5 * (norms[:, None] + norms[None, :])
    e = e + 1j * (lin.imag[None, :] - lin.imag[:, None])
    return e.T  # [a, b]


if HAVE_NUMBA:

    @njit(cache=True)
    def _branch_exponent_nb(coef, K, drive):
        B, R = coef.shape
        Kc = np.empty((B, R), dtype=np.complex128)  # Kc[a] = K @ coef[a]
        for a in range(B):
            for n in range(R):
                acc = 0.0 + 0.0j
                for m in range(R):
                    acc += K[n, m] * coef[a, m]
                Kc[a, n] = acc
        norms = np.empty(B)
        lin = np.empty(B)
        for a in range(B):
            acc = 0.0 + 0.0j
            li = 0.0 + 0.0j
            for n in range(R):
                acc += np.conj(coef[a, n]) * Kc[a, n]
                li += coef[a, n] * np.conj(drive[n])
            norms[a] = acc.real
            lin[a] = li.imag
        out = np.empty((B, B), dtype=np.complex128)
        for a in range(B):
            for b in range(B):
                acc = 0.0 + 0.0j
                for n in range(R):
                    acc += np.conj(coef[b, n]) * Kc[a, n]
                out[a, b] = acc - 0.5 * (norms[a] + norms[b]) + 1j * (lin[a] - lin[b])
        return out


def branch_exponent(coef: np.ndarray, K: np.ndarray, drive: np.ndarray) -> np.ndarray:
    """Log of the branch coherence matrix (before the ``2**-R`` weight).

    ``coef[a, n] = a_n alpha_n`` are the kick amplitudes of branch ``a``,
    ``K[n, m]`` the overlap of kick ``n`` with kick ``m`` after decay and
    ``drive[n]`` the overlap of kick ``n`` with the accumulated signal.
    """
    coef = np.ascontiguousarray(coef, dtype=np.complex128)
    K = np.ascontiguousarray(K, dtype=np.complex128)
    drive = np.ascontiguousarray(drive, dtype=np.complex128)
    if HAVE_NUMBA:
        return _branch_exponent_nb(coef, K, drive)
    return _branch_exponent_py(coef, K, drive)


# ---------------------------------------------------------------------------
# trajectory sampler
# ---------------------------------------------------------------------------

def _sample_py(grams, steps, u, uniforms):
    count, R = uniforms.shape
    nodes = grams.shape[1]
    bits = np.zeros((count, R), dtype=np.int8)
    for t in range(count):
        c = np.zeros(nodes, dtype=np.complex128)
        c[0] = 1.0
        for n in range(R):
            step = steps[n]
            c0 = u[0, 0] * c + u[0, 1] * c[step]
            c1 = u[1, 0] * c + u[1, 1] * c[step]
            c0 = np.where(step >= 0, c0, u[0, 0] * c)
            c1 = np.where(step >= 0, c1, u[1, 0] * c)
            G = grams[n]
            p0 = np.real(np.vdot(c0, G @ c0))
            p1 = np.real(np.vdot(c1, G @ c1))
            if uniforms[t, n] * (p0 + p1) < p0:
                c = c0
            else:
                c = c1
                bits[t, n] = 1
            c = c / math.sqrt(max(np.real(np.vdot(c, G @ c)), 1e-300))
    return bits


if HAVE_NUMBA:

    @njit(cache=True)
    def _sample_nb(grams, steps, u, uniforms):
        count, R = uniforms.shape
        nodes = grams.shape[1]
        bits = np.zeros((count, R), dtype=np.int8)
        c = np.zeros(nodes, dtype=np.complex128)
        c0 = np.zeros(nodes, dtype=np.complex128)
        c1 = np.zeros(nodes, dtype=np.complex128)
        for t in range(count):
            c[:] = 0.0
            c[0] = 1.0
            for n in range(R):
                for j in range(nodes):
                    s = steps[n, j]
                    prev = c[s] if s >= 0 else 0.0
                    c0[j] = u[0, 0] * c[j] + u[0, 1] * prev
                    c1[j] = u[1, 0] * c[j] + u[1, 1] * prev
                p0 = 0.0
                p1 = 0.0
                for i in range(nodes):
                    g0 = 0.0 + 0.0j
                    g1 = 0.0 + 0.0j
                    for j in range(nodes):
                        g0 += grams[n, i, j] * c0[j]
                        g1 += grams[n, i, j] * c1[j]
                    p0 += (np.conj(c0[i]) * g0).real
                    p1 += (np.conj(c1[i]) * g1).real
                if uniforms[t, n] * (p0 + p1) < p0:
                    norm = p0
                    for j in range(nodes):
                        c[j] = c0[j]
                else:
                    norm = p1
                    bits[t, n] = 1
                    for j in range(nodes):
                        c[j] = c1[j]
                scale = 1.0 / math.sqrt(max(norm, 1e-300))
                for j in range(nodes):
                    c[j] *= scale
        return bits


def sample_dicke_paths(grams, steps, u, uniforms) -> np.ndarray:
    """Draw bitstrings round by round from Dicke-node coefficient vectors.

    ``grams[n]`` is the (tail-averaged) Gram matrix that turns the node
    coefficients after round ``n`` into a marginal probability;
    ``steps[n, j]`` is the node reached from ``j`` by a ``+`` label in round
    ``n`` read backwards, i.e. node ``j`` receives ``c[steps[n, j]]`` from the
    ``+`` branch (``-1`` for none).  ``uniforms`` has shape ``(count, R)``.
    """
    grams = np.ascontiguousarray(grams, dtype=np.complex128)
    steps = np.ascontiguousarray(steps, dtype=np.int64)
    u = np.ascontiguousarray(u, dtype=np.complex128)
    uniforms = np.ascontiguousarray(uniforms, dtype=np.float64)
    if HAVE_NUMBA:
        return _sample_nb(grams, steps, u, uniforms)
    return _sample_py(grams, steps, u, uniforms)
