import os
import subprocess
import sys

import numpy as np
import pytest

from seqmetro import _kernels as K
from seqmetro.fisher import MEASUREMENT_U

needs_numba = pytest.mark.skipif(not K.HAVE_NUMBA, reason="numba unavailable")
rng = np.random.default_rng(0)


@needs_numba
@pytest.mark.parametrize("N", [1, 4, 15])
def test_direct_transfer_parity(N):
    flat = MEASUREMENT_U.reshape(-1)
    logabs, args, lf = np.log(np.abs(flat)), np.angle(flat), K._log_factorials(N)
    np.testing.assert_allclose(
        K._direct_transfer_nb(N, logabs, args, lf), K._direct_transfer_py(N, logabs, args, lf), atol=1e-13
    )


@needs_numba
def test_group_pairs_parity():
    mat = rng.normal(size=(32, 32)) + 1j * rng.normal(size=(32, 32))
    labels = rng.integers(0, 6, size=32)
    np.testing.assert_allclose(K._group_pairs_nb(mat, labels, 6), K._group_pairs_py(mat, labels, 6), atol=1e-12)


@needs_numba
def test_branch_exponent_parity():
    R = 5
    coef = rng.normal(size=(2**R, R)) + 1j * rng.normal(size=(2**R, R))
    t = np.arange(R)
    Km = np.exp(-0.2 * np.abs(np.subtract.outer(t, t))).astype(complex)
    drive = rng.normal(size=R) + 1j * rng.normal(size=R)
    np.testing.assert_allclose(K._branch_exponent_nb(coef, Km, drive), K._branch_exponent_py(coef, Km, drive), atol=1e-11)


@needs_numba
def test_sampler_parity():
    from seqmetro.oracle import _node_layout, _steps, _tail_grams
    from seqmetro.protocols import ProtocolSpec

    for spec in (ProtocolSpec.seq(5, 0.3j, 0.1), ProtocolSpec.two_param(2, 0.3, 0.1 + 0.1j)):
        shape, cls = _node_layout(spec)
        grams = _tail_grams(spec, shape, cls)
        steps = _steps(shape, cls)
        u = np.random.default_rng(2).random((500, len(spec.schedule)))
        np.testing.assert_array_equal(K._sample_nb(grams, steps, MEASUREMENT_U, u), K._sample_py(grams, steps, MEASUREMENT_U, u))


def test_env_flag_selects_numpy():
    env = dict(os.environ, SEQMETRO_DISABLE_NUMBA="1")
    code = "from seqmetro import _kernels, fisher; print(_kernels.backend()); print(abs(fisher.transfer_matrix(6, method='direct') - fisher.transfer_matrix(6)).max())"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True).stdout.split()
    assert out[0] == "numpy"
    assert float(out[1]) < 1e-12
