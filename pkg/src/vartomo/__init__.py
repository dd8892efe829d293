"""vartomo: variational reconstruction of quantum processes from noisy,
incomplete measurement data via semidefinite programming."""

from .channels import (
    DensityMatrix,
    KrausSet,
    OperatorBasis,
    ProcessMatrix,
    apply_map,
    build_scaled_pauli_basis,
    check_trace_preserving,
    chi_rank,
    chi_to_choi,
    identity_channel,
    kraus_to_chi,
    process_fidelity,
)
from .probes import (
    EffectSet,
    MeasurementRecord,
    ProbeSet,
    RngSeed,
    Scheme,
    aapt_probe_state,
    pauli_projector_effects,
    random_channel,
    simulate_measurements,
    sqpt_probe_states,
    unknown_subspace_hamiltonian,
)
from .sdp import SdpProblem, SdpSolution, SolveStatus, solve
from .tomography import (
    InfeasibleDataError,
    ReconstructionOptions,
    ReconstructionResult,
    TomographyDataset,
    build_aapt_program,
    build_sqpt_program,
    make_dataset,
    minimal_elements_sweep,
    reconstruct,
)
from .harness import ExperimentConfig, ExperimentResult, emit_plot_data, run_experiment

__version__ = "0.1.0"

__all__ = [
    "DensityMatrix",
    "KrausSet",
    "OperatorBasis",
    "ProcessMatrix",
    "apply_map",
    "build_scaled_pauli_basis",
    "check_trace_preserving",
    "chi_rank",
    "chi_to_choi",
    "identity_channel",
    "kraus_to_chi",
    "process_fidelity",
    "EffectSet",
    "MeasurementRecord",
    "ProbeSet",
    "RngSeed",
    "Scheme",
    "aapt_probe_state",
    "pauli_projector_effects",
    "random_channel",
    "simulate_measurements",
    "sqpt_probe_states",
    "unknown_subspace_hamiltonian",
    "SdpProblem",
    "SdpSolution",
    "SolveStatus",
    "solve",
    "InfeasibleDataError",
    "ReconstructionOptions",
    "ReconstructionResult",
    "TomographyDataset",
    "build_aapt_program",
    "build_sqpt_program",
    "make_dataset",
    "minimal_elements_sweep",
    "reconstruct",
    "ExperimentConfig",
    "ExperimentResult",
    "emit_plot_data",
    "run_experiment",
]
