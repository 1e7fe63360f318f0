"""Hidden-variable histories through sliced quantum circuits.

A state-vector simulator with a restricted gate set, pluggable
hidden-variable theories (product, max-flow, iterative scaling) mapping
each gate step to a stochastic transition kernel, trajectory sampling of
the induced Markov chain, and the history-powered algorithms built on it:
value juggling, statistical-difference decisions (with collision and
graph-isomorphism front-ends), and sub-Grover search.
"""

from .experiments import (
    ConfigError,
    ExperimentConfig,
    ExperimentFailure,
    TrialRecord,
    emit_results,
    run_experiment,
    scaling_fit,
)
from .juggle import (
    JugglePlan,
    build_juggle_program,
    default_attempts,
    extract_checkpoint_values,
    failure_bound,
    pair_prep_slices,
    register_value,
)
from .oracle import (
    History,
    HistoryBatch,
    HistoryQuery,
    MarginalReport,
    empirical_marginals,
    sample_batch,
    sample_history,
    substream,
)
from .qsim import (
    BasisPermutation,
    DimensionCapError,
    Gate,
    Hadamard,
    OracleFunction,
    OracleXor,
    PhaseFlip,
    QueryLedger,
    SlicedProgram,
    apply_gate,
    apply_slice,
    basis_state,
    born_distribution,
    gate_permutation,
    grover_iterate,
    grover_slices,
    program_from_dict,
    program_to_dict,
    run_program,
    slice_unitary,
    zero_state,
)
from .sd import (
    AffineHash,
    SDInstance,
    SolverResult,
    collision_one_to_one,
    collision_two_to_one,
    distinguish_collision,
    draw_vv_hash,
    far_many_to_one,
    far_one_to_one,
    gi_demo_pairs,
    gi_to_sd,
    near_many_to_one,
    near_one_to_one,
    solve_sd_general,
    solve_sd_one_to_one,
    tv_exact,
)
from .search import (
    SearchInstance,
    SearchResult,
    dqp_search,
    grover_iterations,
    make_search_instance,
    prepare_search_state,
    target_amplitudes,
)
from .theories import (
    FLOW,
    PRODUCT,
    SINKHORN,
    THEORIES,
    RobustnessProbe,
    TransitionKernel,
    check_indifference,
    check_marginalization,
    flow_kernel_dense,
    hadamard_flip_probs,
    kernel_row,
    probe_robustness,
    product_kernel,
    sinkhorn_kernel,
    theory_kernel,
)

__version__ = "0.1.0"

__all__ = [
    "AffineHash",
    "BasisPermutation",
    "ConfigError",
    "DimensionCapError",
    "ExperimentConfig",
    "ExperimentFailure",
    "FLOW",
    "Gate",
    "Hadamard",
    "History",
    "HistoryBatch",
    "HistoryQuery",
    "JugglePlan",
    "MarginalReport",
    "OracleFunction",
    "OracleXor",
    "PRODUCT",
    "PhaseFlip",
    "QueryLedger",
    "RobustnessProbe",
    "SDInstance",
    "SINKHORN",
    "SearchInstance",
    "SearchResult",
    "SlicedProgram",
    "SolverResult",
    "THEORIES",
    "TransitionKernel",
    "TrialRecord",
    "apply_gate",
    "apply_slice",
    "basis_state",
    "born_distribution",
    "build_juggle_program",
    "check_indifference",
    "check_marginalization",
    "collision_one_to_one",
    "collision_two_to_one",
    "default_attempts",
    "distinguish_collision",
    "dqp_search",
    "draw_vv_hash",
    "emit_results",
    "empirical_marginals",
    "extract_checkpoint_values",
    "failure_bound",
    "far_many_to_one",
    "far_one_to_one",
    "flow_kernel_dense",
    "gate_permutation",
    "gi_demo_pairs",
    "gi_to_sd",
    "grover_iterate",
    "grover_iterations",
    "grover_slices",
    "hadamard_flip_probs",
    "kernel_row",
    "make_search_instance",
    "near_many_to_one",
    "near_one_to_one",
    "pair_prep_slices",
    "prepare_search_state",
    "probe_robustness",
    "product_kernel",
    "program_from_dict",
    "program_to_dict",
    "register_value",
    "run_experiment",
    "run_program",
    "sample_batch",
    "sample_history",
    "scaling_fit",
    "sinkhorn_kernel",
    "slice_unitary",
    "solve_sd_general",
    "solve_sd_one_to_one",
    "substream",
    "target_amplitudes",
    "theory_kernel",
    "tv_exact",
    "zero_state",
]
