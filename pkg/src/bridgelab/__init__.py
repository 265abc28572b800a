"""Numerical laboratory for trapped diffusion bridges.

Pinned Brownian bridges carrying Feynman-Kac weights, symmetrized path
ensembles, principal Schroedinger eigenpairs, entropic transport between
endpoint marginals, and the ergodic ground-state diffusion, with a small
CLI runner tying the pieces into reproducible experiments.
"""
from .measures import (
    DiscreteMeasure,
    DistanceResult,
    Grid,
    PairMeasure,
    build_grid,
    marginals,
    measure_distance,
    relative_entropy,
)
from .potentials import TrapPotential
from .bridges import (
    FKKernel,
    PathSample,
    attach_weight,
    bridge_fk_mc,
    check_wall_alignment,
    default_fk_steps,
    feynman_kac_weight,
    fk_kernel_grid,
    gauss_kernel,
    gaussian_pair_matrix,
    sample_bridge,
)
from .spectral import (
    EigenSolveError,
    HamiltonianOperator,
    OptimizationError,
    SpectralResult,
    discretize_hamiltonian,
    dv_duality_check,
    dv_rate,
    principal_eigenpair,
    shifted_principal_eigenpair,
)
from .ensemble import (
    EnsembleEstimates,
    EnsembleSample,
    EstimationError,
    cycle_log_partition,
    ensemble_estimates,
    free_energy_curve,
    sample_permutation,
    sample_sym_ensemble,
    sym_trace_exact,
)
from .transport import (
    ReducibleOperatorError,
    SchrodingerSolution,
    SinkhornError,
    SupportMismatchError,
    TransportError,
    build_T_operator,
    eigen_schrodinger_solution,
    factorization_check,
    minimizing_pair_measure,
    schrodinger_objective,
    sinkhorn_bridge,
    t_eigenpair,
)
from .diffusion import (
    DriftField,
    PathCollection,
    SDEResult,
    girsanov_density,
    ground_state_drift,
    martingale_check,
    schrodinger_process_sampler,
    simulate_ergodic_sde,
    simulate_sde_ensemble,
    systematic_resample,
)
from .fileio import (
    load_kernel,
    load_measure,
    load_pair_measure,
    load_report,
    read_table,
    save_kernel,
    save_measure,
    save_pair_measure,
    save_report,
    write_table,
)
from .runner import (
    CheckResult,
    ConfigError,
    ExperimentConfig,
    RunReport,
    config_from_dict,
    load_config,
    run_experiment,
)

__version__ = "0.1.0"

__all__ = [
    "DiscreteMeasure",
    "DistanceResult",
    "Grid",
    "PairMeasure",
    "build_grid",
    "marginals",
    "measure_distance",
    "relative_entropy",
    "TrapPotential",
    "FKKernel",
    "PathSample",
    "attach_weight",
    "bridge_fk_mc",
    "check_wall_alignment",
    "default_fk_steps",
    "feynman_kac_weight",
    "fk_kernel_grid",
    "gauss_kernel",
    "gaussian_pair_matrix",
    "sample_bridge",
    "EigenSolveError",
    "HamiltonianOperator",
    "OptimizationError",
    "SpectralResult",
    "discretize_hamiltonian",
    "dv_duality_check",
    "dv_rate",
    "principal_eigenpair",
    "shifted_principal_eigenpair",
    "EnsembleEstimates",
    "EnsembleSample",
    "EstimationError",
    "cycle_log_partition",
    "ensemble_estimates",
    "free_energy_curve",
    "sample_permutation",
    "sample_sym_ensemble",
    "sym_trace_exact",
    "ReducibleOperatorError",
    "SchrodingerSolution",
    "SinkhornError",
    "SupportMismatchError",
    "TransportError",
    "build_T_operator",
    "eigen_schrodinger_solution",
    "factorization_check",
    "minimizing_pair_measure",
    "schrodinger_objective",
    "sinkhorn_bridge",
    "t_eigenpair",
    "DriftField",
    "PathCollection",
    "SDEResult",
    "girsanov_density",
    "ground_state_drift",
    "martingale_check",
    "schrodinger_process_sampler",
    "simulate_ergodic_sde",
    "simulate_sde_ensemble",
    "systematic_resample",
    "load_kernel",
    "load_measure",
    "load_pair_measure",
    "load_report",
    "read_table",
    "save_kernel",
    "save_measure",
    "save_pair_measure",
    "save_report",
    "write_table",
    "CheckResult",
    "ConfigError",
    "ExperimentConfig",
    "RunReport",
    "config_from_dict",
    "load_config",
    "run_experiment",
]
