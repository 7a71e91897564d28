"""Tolerances and size limits used across the package."""

EPS_NORM = 1e-12
EPS_EIG = 1e-12
EPS_PSD = -1e-10

# magnitudes below this are treated as underflow and stored as exact zeros
UNDERFLOW = 1e-300

MAX_N = 2000
# brute-force enumeration of 2**rounds branches
MAX_BRANCH_ROUNDS = 22
# dense 2**rounds x 2**rounds pair matrices (memory bound)
MAX_DENSE_ROUNDS = 12

PROB_CLAMP = 1e-12
PROB_FAIL = -1e-8
CFI_SKIP = 1e-14
