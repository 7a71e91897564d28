"""Time the hot kernels on the numba and pure-numpy paths.

Each backend runs in its own interpreter because the path is chosen at import
time from ``SEQMETRO_DISABLE_NUMBA``.

    python benchmarks/bench_kernels.py [--repeat 3]
"""
import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
from seqmetro import _kernels as K
from seqmetro.fisher import MEASUREMENT_U
from seqmetro.decoherence import NoiseModel, evolve_noisy_branches
from seqmetro.oracle import sample_trajectories
from seqmetro.protocols import ProtocolSpec

repeat = int(sys.argv[1])
rng = np.random.default_rng(0)
mat = rng.normal(size=(4096, 4096)) + 0j
labels = rng.integers(0, 13, size=4096)
noise = NoiseModel.from_tau_eff(0.15)

cases = {
    "direct_transfer N=60": lambda: K.direct_transfer(60, MEASUREMENT_U),
    "group_pairs 4096x4096": lambda: K.group_pairs(mat, labels, 13),
    "branch_exponent R=11": lambda: evolve_noisy_branches(ProtocolSpec.seq(11, 0.4j, 0.3), noise).log_matrix,
    "sample seq N=40, 5k": lambda: sample_trajectories(ProtocolSpec.seq(40, 0.3j, 0.1), seed=1, count=5000),
}
out = {"backend": K.backend()}
for name, fn in cases.items():
    fn()  # warm-up (includes JIT compilation on the numba path)
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    out[name] = best
print(json.dumps(out))
"""


def run(disable: bool, repeat: int) -> dict:
    env = dict(os.environ)
    env.pop("SEQMETRO_DISABLE_NUMBA", None)
    if disable:
        env["SEQMETRO_DISABLE_NUMBA"] = "1"
    res = subprocess.run([sys.executable, "-c", WORKER, str(repeat)], env=env, capture_output=True, text=True, check=True)
    return json.loads(res.stdout.strip().splitlines()[-1])


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    fast = run(False, args.repeat)
    slow = run(True, args.repeat)
    print(f"{'kernel':28s} {fast['backend']:>10s} {slow['backend']:>10s} {'speedup':>8s}")
    for name in fast:
        if name == "backend":
            continue
        print(f"{name:28s} {fast[name]:10.4f} {slow[name]:10.4f} {slow[name] / fast[name]:8.1f}x")


if __name__ == "__main__":
    main()
