"""Quantum tomography with informationally complete measurements, optimal
data processing, and optimal covariant testers for channels."""
from .combs import QuantumComb, Tester, comb_link, realize_tester, tester_probabilities, validate_comb
from .devices import (ChoiOperator, apply_channel, choi_from_kraus, depolarizing_channel, is_faithful,
                      povm_tomography, process_tomography)
from .frames import (DualFrame, Povm, alternate_dual, canonical_dual, is_info_complete, pauli_povm, validate_povm,
                     verify_dual)
from .harness import ExperimentConfig, ExperimentRecord, run_experiment
from .linalg import SubsystemShape, link_product, partial_trace, partial_transpose
from .optimal import (SchurCoefficients, SubspaceKind, covariant_Y_from_seeds, eta, eta_subspace, optimal_A,
                      optimal_eta_bound, optimal_seed, special_case_eta)
from .processing import Ensemble, max_likelihood, min_error_closed_form, optimal_dual, statistical_error

__version__ = "0.1.0"
