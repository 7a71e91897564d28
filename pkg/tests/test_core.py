import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seqmetro.core import (
    HammingIndex,
    as_amplitude,
    coherent_overlap,
    dicke_weight,
    log_binom,
    log_dicke_weights,
    scaled_sqrt_weight_product,
    split_log,
)
from seqmetro.errors import DomainError

finite = st.floats(-3, 3, allow_nan=False)


def test_as_amplitude_rejects_nonfinite():
    assert as_amplitude(1) == 1 + 0j
    with pytest.raises(DomainError):
        as_amplitude(complex(math.inf, 0))


def test_overlap_of_equal_states_is_one():
    assert coherent_overlap(0.3 - 0.7j, 0.3 - 0.7j) == pytest.approx(1.0)


@given(finite, finite, finite, finite)
def test_overlap_modulus(a, b, c, d):
    x, y = complex(a, b), complex(c, d)
    ov = coherent_overlap(x, y)
    assert abs(ov) ** 2 == pytest.approx(math.exp(-abs(x - y) ** 2), rel=1e-12, abs=1e-300)
    assert coherent_overlap(y, x) == pytest.approx(np.conj(ov), rel=1e-12, abs=1e-300)


def test_overlap_broadcasts():
    mu = np.array([0.1, -0.2j, 0.5])
    G = coherent_overlap(mu[None, :], mu[:, None])
    assert G.shape == (3, 3)
    np.testing.assert_allclose(G, G.conj().T, atol=1e-15)


def test_log_binom_matches_math_comb():
    for n in (1, 7, 40):
        for k in range(n + 1):
            assert log_binom(n, k) == pytest.approx(math.log(math.comb(n, k)), abs=1e-12)


@given(st.integers(0, 3000))
def test_dicke_weights_normalized(N):
    w = log_dicke_weights(N)
    assert np.exp(w).sum() == pytest.approx(1.0, rel=1e-10)
    np.testing.assert_allclose(w, w[::-1], atol=1e-9)


def test_dicke_weight_underflow_safe():
    w = dicke_weight(2000, 0)
    assert w.log_gamma == pytest.approx(-2000 * math.log(2))
    assert w.gamma == 0.0  # the linear value underflows, the log does not
    mant, scale = scaled_sqrt_weight_product(w, dicke_weight(2000, 2000))
    assert 1.0 <= mant < 2.0
    assert math.log(mant) + scale == pytest.approx(-2000 * math.log(2))


def test_dicke_weight_domain():
    with pytest.raises(DomainError):
        dicke_weight(3, 4)
    with pytest.raises(DomainError):
        dicke_weight(0, 0)
    with pytest.raises(DomainError):
        scaled_sqrt_weight_product(dicke_weight(3, 1), dicke_weight(4, 1))


@given(st.floats(-2000, 700, allow_nan=False))
def test_split_log_roundtrip(x):
    mant, scale = split_log(x)
    assert 1.0 <= mant < 2.0
    assert math.log(mant) + scale == pytest.approx(x, abs=1e-9)


def test_hamming_index_two_param_ordering():
    idx = HammingIndex(2, 2, 1)
    assert idx.shape == (3, 2)
    assert idx.linear(2, 1) == 5
    assert idx.unravel(5) == (2, 1)
    kr, ki = idx.weights()
    np.testing.assert_array_equal(kr, [0, 0, 1, 1, 2, 2])
    np.testing.assert_array_equal(ki, [0, 1, 0, 1, 0, 1])
    with pytest.raises(DomainError):
        idx.linear(0, 2)


@settings(max_examples=50)
@given(st.integers(1, 30), st.integers(0, 30))
def test_hamming_index_roundtrip(N, Ni):
    idx = HammingIndex(N, 2, Ni)
    for pos in range(idx.dim):
        assert idx.linear(*idx.unravel(pos)) == pos


def test_hamming_index_rejects_bad_params():
    with pytest.raises(DomainError):
        HammingIndex(3, 3)
    with pytest.raises(DomainError):
        HammingIndex(3, 1, 2)
