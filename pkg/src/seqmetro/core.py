"""Numerically stable primitives: coherent overlaps, log-domain binomial
weights and Hamming-weight index bookkeeping."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import DomainError

LN2 = math.log(2.0)


def as_amplitude(value, name="amplitude") -> complex:
    """Coerce ``value`` to a finite Python complex."""
    z = complex(value)
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise DomainError(f"{name} must be finite, got {value!r}")
    return z


def coherent_overlap(bra, ket):
    """Overlap ``<bra|ket>`` of two coherent states.

    Works elementwise on numpy arrays (with broadcasting) as well as on
    scalars.
    """
    bra = np.asarray(bra, dtype=complex)
    ket = np.asarray(ket, dtype=complex)
    out = np.exp(-0.5 * (np.abs(bra) ** 2 + np.abs(ket) ** 2) + np.conj(bra) * ket)
    if out.ndim == 0:
        return complex(out)
    return out


def log_binom(n, k):
    """``log C(n, k)`` via the log-gamma function; ``k`` may be an array."""
    k = np.asarray(k, dtype=float)
    return gammaln(n + 1.0) - gammaln(k + 1.0) - gammaln(n - k + 1.0)


def log_dicke_weights(N: int) -> np.ndarray:
    """``log(C(N, k) / 2**N)`` for ``k = 0..N``."""
    if N < 0:
        raise DomainError(f"N must be non-negative, got {N}")
    k = np.arange(N + 1)
    out = log_binom(N, k) - N * LN2
    # exact at the symmetric endpoints; removes lgamma round-off there
    out[0] = out[-1] = -N * LN2
    return out


@dataclass(frozen=True)
class DickeWeight:
    """Binomial weight ``C(N, k) / 2**N`` stored as its natural log."""

    N: int
    k: int
    log_gamma: float

    @property
    def gamma(self) -> float:
        return math.exp(self.log_gamma)


def dicke_weight(N: int, k: int) -> DickeWeight:
    if N < 1:
        raise DomainError(f"round count must be positive, got N={N}")
    if not 0 <= k <= N:
        raise DomainError(f"Hamming weight k={k} outside 0..{N}")
    if k == 0 or k == N:
        lg = -N * LN2
    else:
        lg = float(log_binom(N, k)) - N * LN2
    return DickeWeight(int(N), int(k), lg)


def scaled_sqrt_weight_product(wa: DickeWeight, wb: DickeWeight) -> tuple[float, float]:
    """Underflow-safe ``sqrt(gamma_a * gamma_b)`` as ``(mantissa, log_scale)``.

    ``mantissa * exp(log_scale)`` equals the product, with the mantissa in
    ``[1, 2)`` and ``log_scale`` an integer multiple of ``ln 2``.
    """
    if wa.N != wb.N:
        raise DomainError(f"weights belong to different N ({wa.N} vs {wb.N})")
    return split_log(0.5 * (wa.log_gamma + wb.log_gamma))


def split_log(log_value: float) -> tuple[float, float]:
    """Split ``exp(log_value)`` into a mantissa in [1, 2) and a power of two."""
    e = math.floor(log_value / LN2)
    mant = math.exp(log_value - e * LN2)
    if mant >= 2.0:  # round-off at exact powers of two
        mant *= 0.5
        e += 1
    return mant, e * LN2


@dataclass(frozen=True)
class HammingIndex:
    """Ordering of Dicke labels inside an ancilla matrix.

    ``params == 1``: position ``k`` for ``k = 0..N``.
    ``params == 2``: row-major over ``(k_r, k_i)`` with ``k_r`` outer, i.e.
    position ``k_r * (N_i + 1) + k_i``.  ``N_i`` defaults to ``N``; it differs
    only for round prefixes that end on a real-quadrature kick.
    """

    N: int
    params: int = 1
    N_i: int | None = None

    def __post_init__(self):
        if self.params not in (1, 2):
            raise DomainError(f"params must be 1 or 2, got {self.params}")
        if self.N_i is None:
            object.__setattr__(self, "N_i", self.N)
        elif self.params == 1 and self.N_i != self.N:
            raise DomainError("N_i only applies to two-parameter indices")

    @property
    def shape(self) -> tuple[int, ...]:
        if self.params == 1:
            return (self.N + 1,)
        return (self.N + 1, self.N_i + 1)

    @property
    def dim(self) -> int:
        return int(np.prod(self.shape))

    def linear(self, kr, ki=None):
        if self.params == 1:
            if ki is not None:
                raise DomainError("one-parameter index takes a single weight")
            self._check(kr, self.N)
            return kr
        self._check(kr, self.N)
        self._check(ki, self.N_i)
        return kr * (self.N_i + 1) + ki

    def unravel(self, pos):
        if self.params == 1:
            return pos
        return divmod(pos, self.N_i + 1)

    def weights(self) -> tuple[np.ndarray, ...]:
        """Hamming-weight arrays aligned with the matrix ordering."""
        if self.params == 1:
            return (np.arange(self.N + 1),)
        kr, ki = np.meshgrid(np.arange(self.N + 1), np.arange(self.N_i + 1), indexing="ij")
        return kr.ravel(), ki.ravel()

    @staticmethod
    def _check(k, top):
        k = np.asarray(k)
        if np.any(k < 0) or np.any(k > top):
            raise DomainError(f"Hamming weight outside 0..{top}")
