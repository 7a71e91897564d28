"""Sequential weak-measurement displacement sensing with an ancilla qubit.

Dicke-compressed ancilla states, quantum and classical Fisher information,
amplitude-decay noise and brute-force oracles.
"""
from .decoherence import NoiseModel, evolve_noisy_branches, noisy_crb_curve, symmetric_noisy_approx
from .errors import DomainError, NumericalError, ResourceError, SeqMetroError, UsageError
from .fisher import (
    FisherReport,
    OutcomeDistribution,
    cfi_matrix,
    crb_min_over_rounds,
    outcome_distribution,
    protocol_qfi,
    protocol_report,
    qfi_matrix,
    qfi_scalar,
    scaling_exponent,
    transfer_matrix,
)
from .protocols import AncillaState, Kind, ProtocolSpec, build_rho, d_rho, prefix_state

__version__ = "0.1.0"

__all__ = [
    "AncillaState",
    "DomainError",
    "FisherReport",
    "Kind",
    "NoiseModel",
    "NumericalError",
    "OutcomeDistribution",
    "ProtocolSpec",
    "ResourceError",
    "SeqMetroError",
    "UsageError",
    "build_rho",
    "cfi_matrix",
    "crb_min_over_rounds",
    "d_rho",
    "evolve_noisy_branches",
    "noisy_crb_curve",
    "outcome_distribution",
    "prefix_state",
    "protocol_qfi",
    "protocol_report",
    "qfi_matrix",
    "qfi_scalar",
    "scaling_exponent",
    "symmetric_noisy_approx",
    "transfer_matrix",
]
