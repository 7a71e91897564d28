import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seqmetro.decoherence import (
    NoiseModel,
    amplitude_history,
    displaced_amplitude,
    evolve_noisy_branches,
    noisy_cfi,
    noisy_crb_curve,
    noisy_distribution,
    symmetric_noisy_approx,
)
from seqmetro.errors import DomainError, ResourceError
from seqmetro.fisher import protocol_report
from seqmetro.oracle import brute_force_seq, fock_protocol_matrix
from seqmetro.protocols import ProtocolSpec, build_rho, prefix_state

tau = st.floats(0.0, 0.5, allow_nan=False)
amp = st.floats(0.0, 0.8, allow_nan=False)
sig = st.floats(-0.4, 0.4, allow_nan=False)
QUIET = NoiseModel(0.0, 1.0)


def _legal(m, tol=1e-10):
    assert abs(np.trace(m) - 1) < tol
    assert np.abs(m - m.conj().T).max() < tol
    assert np.linalg.eigvalsh(m)[0] > -tol


def test_noise_model_validation():
    with pytest.raises(DomainError):
        NoiseModel(-1.0, 1.0)
    with pytest.raises(DomainError):
        NoiseModel(1.0, 0.0)
    with pytest.raises(DomainError):
        NoiseModel(1.0, 1.0, g=-2.0)


def test_standard_rates():
    n = NoiseModel.standard_rates()
    assert n.tau_eff == pytest.approx(0.150444, rel=1e-6)
    n.check_beta(0.3536 + 0.3536j)
    with pytest.raises(DomainError):
        n.check_beta(0.1)
    assert NoiseModel.from_tau_eff(0.2, 3.0).tau_eff == pytest.approx(0.2)
    assert n.without_loss().Gamma == 0.0


@pytest.mark.parametrize(
    "spec",
    [ProtocolSpec.single(5, 0.3j, 0.1), ProtocolSpec.seq(5, 0.3j, 0.1 + 0.02j), ProtocolSpec.two_param(2, 0.3, 0.05 - 0.1j)],
)
def test_zero_loss_reduces_to_noiseless(spec):
    np.testing.assert_allclose(symmetric_noisy_approx(spec, QUIET).entries, build_rho(spec).entries, atol=1e-12)
    np.testing.assert_allclose(symmetric_noisy_approx(spec, None).entries, build_rho(spec).entries, atol=1e-12)
    ens = evolve_noisy_branches(spec, QUIET)
    np.testing.assert_allclose(ens.reduced_matrix(), brute_force_seq(spec).rho, atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 7), st.integers(0, 7), amp, sig, sig)
def test_zero_loss_prefixes(N, r, a, b1, b2):
    spec = ProtocolSpec.two_param(N, a, complex(b1, b2))
    r = 1 + r % spec.rounds
    np.testing.assert_allclose(
        symmetric_noisy_approx(spec, QUIET, r).entries, prefix_state(spec, r).entries, atol=1e-12
    )


def test_zero_loss_cfi_matches_analytic():
    spec = ProtocolSpec.seq(6, 0.3j, 0.1)
    noisy = noisy_cfi(spec, QUIET).cfi[0, 0]
    assert noisy == pytest.approx(protocol_report(spec, with_qfi=False).cfi[0, 0], rel=1e-6)


@settings(max_examples=30, deadline=None)
@given(tau, st.integers(1, 6), amp, sig, sig, st.sampled_from(["seq", "two-param"]))
def test_channel_is_legal(t, N, a, b1, b2, kind):
    noise = NoiseModel.from_tau_eff(t)
    if kind == "seq":
        spec = ProtocolSpec.seq(N, 1j * a, complex(b1, b2))
    else:
        spec = ProtocolSpec.two_param(min(N, 3), a, complex(b1, b2))
    _legal(symmetric_noisy_approx(spec, noise).entries)
    _legal(evolve_noisy_branches(spec, noise).reduced_matrix())
    p = noisy_distribution(spec, noise).p
    assert p.min() >= 0 and p.sum() == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(tau, st.integers(1, 8), st.floats(0.0, 1e-10))
def test_vanishing_kick_leaves_ancillas_uncoupled(t, N, a):
    spec = ProtocolSpec.seq(N, 1j * a, 0.2)
    dist = noisy_distribution(spec, NoiseModel.from_tau_eff(t))
    assert dist.p[0] == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(tau, st.integers(1, 10), st.floats(1e-3, 1.0))
def test_free_amplitude_decays(t, n, a):
    noise = NoiseModel.from_tau_eff(t)
    spec = ProtocolSpec.seq_schedule([1j * a] + [0.0] * (n - 1), 0.0)
    hist = amplitude_history(spec, noise, [1] * n)
    np.testing.assert_allclose(hist, 1j * a * noise.decay ** np.arange(n), rtol=1e-12)


@settings(max_examples=30, deadline=None)
@given(tau, st.integers(1, 10), st.floats(0.01, 0.6))
def test_drive_accrues_continuously(t, n, b):
    noise = NoiseModel.from_tau_eff(t, t_round=2.0)
    spec = ProtocolSpec.seq_schedule([0.0] * n, b)
    hist = amplitude_history(spec, noise, [0] * n)
    g = math.sqrt(2.0) * b / noise.t_round
    assert hist[-1].real == pytest.approx(displaced_amplitude(g, noise.Gamma, n * noise.t_round), rel=1e-10)


def test_displaced_amplitude_limits():
    g, t = 2.0, 0.7
    assert displaced_amplitude(g, 0.0, t) == pytest.approx(g * t / math.sqrt(2))
    assert displaced_amplitude(g, 1e-12, t) == pytest.approx(g * t / math.sqrt(2), rel=1e-9)
    assert displaced_amplitude(g, 1e6, 10.0) == pytest.approx(math.sqrt(2) * g / 1e6)
    assert displaced_amplitude(g, 3.0, t) == pytest.approx(math.sqrt(2) * g / 3.0 * (1 - math.exp(-1.5 * t)))
    with pytest.raises(DomainError):
        displaced_amplitude(g, -1.0, t)


def test_loss_reduces_information():
    spec = ProtocolSpec.seq(6, 0.4j, 0.2)
    F = [noisy_cfi(spec, NoiseModel.from_tau_eff(t)).cfi[0, 0] for t in (0.0, 0.1, 0.3)]
    assert F[0] > F[1] > F[2] > 0


@pytest.mark.parametrize(
    "spec", [ProtocolSpec.seq(5, 0.4j, 0.3 + 0.2j), ProtocolSpec.two_param(2, 0.4, 0.3536 + 0.3536j)]
)
def test_symmetric_close_to_exact(spec):
    noise = NoiseModel.standard_rates()
    for r in range(1, spec.rounds + 1):
        a = noisy_distribution(spec, noise, r, "symmetric").p
        b = noisy_distribution(spec, noise, r, "exact").p
        assert 0.5 * np.abs(a - b).sum() < 0.05


def test_empty_imaginary_class_prefix():
    spec = ProtocolSpec.two_param(3, 0.4, 0.3 + 0.3j)
    state = symmetric_noisy_approx(spec, NoiseModel.from_tau_eff(0.15), 1)
    assert state.entries.shape == (2, 2)
    _legal(state.entries)


def test_branch_model_matches_fock_solver():
    noise = NoiseModel.standard_rates()
    spec = ProtocolSpec.seq(2, 0.4j, 0.3536 + 0.3536j)
    F = fock_protocol_matrix(spec, noise)
    B = evolve_noisy_branches(spec, noise, operator_phases=True).reduced_matrix()
    m = np.abs(F) > 1e-8
    assert (np.abs(F - B)[m] / np.abs(F)[m]).max() < 1e-3


def test_branch_guard():
    with pytest.raises(ResourceError) as exc:
        evolve_noisy_branches(ProtocolSpec.seq(40, 0.1j, 0.1), QUIET)
    assert exc.value.parameter == "rounds"


def test_crb_curve_shape():
    noise = NoiseModel.from_tau_eff(0.15)
    out = noisy_crb_curve(ProtocolSpec.two_param(2, 0.4, 0.3 + 0.3j), noise)
    assert set(out) == {"seq", "single"}
    for series in out.values():
        assert len(series["crb"]) == 4
        assert np.all(np.diff(series["crb_running_min"]) <= 0)
