import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seqmetro.errors import DomainError, UsageError
from seqmetro.fisher import (
    MEASUREMENT_U,
    crb_min_over_rounds,
    distribution_derivative,
    fd_distribution_derivative,
    outcome_distribution,
    protocol_qfi,
    protocol_report,
    qfi_matrix,
    qfi_scalar,
    scaling_exponent,
    single_two_quadrature_crb,
    transfer_matrix,
)
from seqmetro.oracle import ancilla_qfi_dense, brute_force_seq
from seqmetro.protocols import ProtocolSpec, build_rho, d_rho

amp = st.floats(0.01, 1.0, allow_nan=False)
sig = st.floats(-0.4, 0.4, allow_nan=False)


@pytest.mark.parametrize("N", [1, 2, 5, 40, 500])
def test_transfer_unitary(N):
    V = transfer_matrix(N)
    assert np.abs(V @ V.conj().T - np.eye(N + 1)).max() < 1e-10


def test_transfer_single_qubit_is_transpose():
    np.testing.assert_allclose(transfer_matrix(1), MEASUREMENT_U.T, atol=1e-15)


@pytest.mark.parametrize("N", [1, 3, 8, 20])
def test_transfer_methods_agree(N):
    np.testing.assert_allclose(transfer_matrix(N, method="direct"), transfer_matrix(N), atol=1e-11)


def test_transfer_rejects_bad_input():
    with pytest.raises(DomainError):
        transfer_matrix(-1)
    with pytest.raises(UsageError):
        transfer_matrix(3, method="bogus")
    with pytest.raises(DomainError):
        transfer_matrix(3, u=np.array([[1.0, 1.0], [0.0, 1.0]]))


@pytest.mark.parametrize("N", [1, 4, 30])
def test_uncoupled_state_reads_all_down(N):
    dist = outcome_distribution(build_rho(ProtocolSpec.seq(N, 0.0, 0.2)))
    assert dist.p[0] == pytest.approx(1.0, abs=1e-12)


def test_distribution_matches_brute_force():
    spec = ProtocolSpec.seq(6, 0.2j, 0.1)
    p = outcome_distribution(build_rho(spec)).p
    ref = brute_force_seq(spec).weight_distribution()
    frozen = [7.72756618e-01, 1.64633499e-01, 4.65440024e-02, 1.25789136e-02,
              2.91941387e-03, 5.15109080e-04, 5.24445976e-05]
    np.testing.assert_allclose(p, ref, atol=1e-12)
    np.testing.assert_allclose(p, frozen, rtol=1e-8)


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(["single", "seq"]), st.integers(1, 40), amp, sig, sig)
def test_cfi_below_qfi(kind, N, a, b1, b2):
    spec = getattr(ProtocolSpec, kind)(N, 1j * a, complex(b1, b2))
    rep = protocol_report(spec, "beta1")
    assert rep.cfi[0, 0] <= rep.qfi[0, 0] * (1 + 1e-9) + 1e-12
    rep.check()


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 6), amp, sig, sig)
def test_two_param_report_invariants(N, a, b1, b2):
    rep = protocol_report(ProtocolSpec.two_param(N, a, complex(b1, b2)))
    assert rep.qfi.shape == (2, 2)
    assert np.linalg.eigvalsh(rep.qfi)[0] >= -1e-10
    rep.check()


@settings(max_examples=20, deadline=None)
@given(st.sampled_from(["single", "seq", "two-param"]), st.integers(1, 6), amp, sig, sig)
def test_analytic_vs_fd_distribution_derivative(kind, N, a, b1, b2):
    if kind == "two-param":
        spec = ProtocolSpec.two_param(N, a, complex(b1, b2))
    else:
        spec = getattr(ProtocolSpec, kind)(N, 1j * a, complex(b1, b2))
    state = build_rho(spec)
    for q in ("beta1", "beta2"):
        an = distribution_derivative(state, d_rho(state, q))
        fd = fd_distribution_derivative(spec, q)
        assert np.abs(an - fd).max() <= 1e-6 * max(np.abs(an).max(), 1.0)


def test_single_qfi_closed_form():
    assert protocol_qfi(ProtocolSpec.single(10, 0.5j, 0.0)) == pytest.approx(36.78794411714423, rel=1e-10)


@pytest.mark.parametrize("a", [0.1, 0.3, 0.7])
def test_binary_outcome_cfi(a):
    N, b1 = 10, 0.07
    rep = protocol_report(ProtocolSpec.single(N, 1j * a, b1), "beta1")
    c, phi = math.exp(-2 * a * a), 2 * N * a * b1
    expected = 4 * N * N * a * a * c * c * math.sin(phi) ** 2 / (1 - c * c * math.cos(phi) ** 2)
    assert rep.cfi[0, 0] == pytest.approx(expected, rel=1e-9)


def test_qfi_matches_dense_sld_oracle():
    spec = ProtocolSpec.seq(4, 0.3j, 0.05)
    assert ancilla_qfi_dense(spec, "beta1") == pytest.approx(9.357539057622642, rel=1e-10)
    assert protocol_qfi(spec, "beta1") == pytest.approx(9.357539057622642, rel=1e-10)
    spec = ProtocolSpec.seq(5, 0.2, 0.03 + 0.04j)
    assert protocol_qfi(spec, "beta2") == pytest.approx(11.07822489886055, rel=1e-10)


def test_two_param_qfi_matches_dense_oracle():
    spec = ProtocolSpec.two_param(2, 0.3, 0.05 + 0.02j)
    rep = protocol_report(spec)
    assert rep.qfi[0, 0] == pytest.approx(6.610593102978999, rel=1e-9)
    assert rep.qfi[1, 1] == pytest.approx(rep.qfi[0, 0], rel=1e-9)
    assert abs(rep.qfi[0, 1]) < 1e-9 * rep.qfi[0, 0]


def test_sld_commutator_nonzero_off_grid():
    state = build_rho(ProtocolSpec.two_param(3, 0.3, 0.05))
    rep = qfi_matrix(state, d_rho(state, "beta1"), d_rho(state, "beta2"))
    assert rep.sld_residual < 1e-10
    assert rep.sld_commutator > 1e-6


@pytest.mark.parametrize("spec", [ProtocolSpec.seq(30, 0.4j, 0.02), ProtocolSpec.single(30, 0.4j, 0.02)])
def test_eigenvalue_cutoff_insensitive(spec):
    state = build_rho(spec)
    d = d_rho(state, "beta1")
    ref = qfi_scalar(state, d)
    for eps in (1e-10, 1e-14):
        assert qfi_scalar(state, d, eps=eps) == pytest.approx(ref, rel=1e-6)


def test_single_crb_singular_on_axis():
    crb, F1, F2 = single_two_quadrature_crb(10, 0.2, 0.3)
    assert math.isinf(crb) and F1 > 0
    crb, F1, F2 = single_two_quadrature_crb(10, 0.2, 0.1 + 0.1j)
    assert crb == pytest.approx(1 / F1 + 1 / F2)


def test_crb_running_minimum():
    rep = crb_min_over_rounds(ProtocolSpec.two_param(3, 0.3, 0.1 + 0.1j))
    h = rep.history
    assert len(h["crb"]) == 6
    assert math.isinf(h["crb"][0])  # one real kick cannot resolve beta2
    assert np.all(np.diff(h["running_min"]) <= 0)
    assert rep.crb == h["running_min"][-1]


def test_scaling_exponent_power_law():
    N = np.array([10.0, 20.0, 40.0, 80.0])
    n, p = scaling_exponent(zip(N, 3 * N**2.5))
    np.testing.assert_allclose(p, 2.5)
    np.testing.assert_array_equal(n, [20.0, 40.0])


def test_scaling_exponent_errors():
    with pytest.raises(UsageError):
        scaling_exponent([(1, 1), (2, 2)])
    with pytest.raises(UsageError):
        scaling_exponent([(1, 1), (3, 2), (2, 3)])
    with pytest.raises(DomainError):
        scaling_exponent([(1, 1), (2, 0), (3, 3)])


def test_two_param_needs_matrix():
    with pytest.raises(UsageError):
        protocol_qfi(ProtocolSpec.two_param(2, 0.3))
