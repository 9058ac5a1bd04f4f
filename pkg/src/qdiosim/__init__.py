"""Simulated adiabatic decision procedure for integer polynomial equations.

The package encodes a multivariate polynomial with integer coefficients as a
diagonal operator on a truncated multi-mode bosonic space, evolves a product
coherent state toward that operator along a linear interpolation, and reads
off solvability in nonnegative integers from the energy of the state that
ends up holding a majority of the probability.
"""

from .adiabatic import (
    EvolutionConfig,
    RunRecord,
    SweepPolicy,
    Verdict,
    decide,
    identify_ground,
    initial_state,
    observables,
    run_single,
    sweep,
)
from .diophantine import (
    DiophantinePolynomial,
    ParseError,
    SearchResult,
    brute_force_search,
    parse,
)
from .fock import (
    CoherentParams,
    DimensionCapError,
    GrowthPolicy,
    QuantumState,
    TruncatedFockSpace,
    boundary_mass,
    coherent_state,
    dump_state,
    grow,
    load_state,
    min_cutoffs,
    min_truncation,
    occupation_vectors,
)
from .hamiltonian import (
    DiagonalOverflowError,
    InitialHamiltonian,
    LeakageCounter,
    ProblemHamiltonian,
    apply_h,
    apply_hi,
    apply_hp,
    diag_hp,
    interpolated_diagonal,
)
from .integrator import (
    EvolutionAbortedError,
    IntegratorConfig,
    SolverConvergenceError,
    StepReport,
    StepUnderflowError,
    adaptive_dt,
    cn_step,
    evolve,
    solve_linear,
)
from .spectral import (
    GapProfile,
    OracleCapError,
    dense_h,
    exact_propagate,
    gap_profile,
)

__version__ = "0.1.0"

__all__ = [
    "CoherentParams",
    "DiagonalOverflowError",
    "DimensionCapError",
    "DiophantinePolynomial",
    "EvolutionAbortedError",
    "EvolutionConfig",
    "GapProfile",
    "GrowthPolicy",
    "InitialHamiltonian",
    "IntegratorConfig",
    "LeakageCounter",
    "OracleCapError",
    "ParseError",
    "ProblemHamiltonian",
    "QuantumState",
    "RunRecord",
    "SearchResult",
    "SolverConvergenceError",
    "StepReport",
    "StepUnderflowError",
    "SweepPolicy",
    "TruncatedFockSpace",
    "Verdict",
    "adaptive_dt",
    "apply_h",
    "apply_hi",
    "apply_hp",
    "boundary_mass",
    "brute_force_search",
    "cn_step",
    "coherent_state",
    "decide",
    "dense_h",
    "diag_hp",
    "dump_state",
    "evolve",
    "exact_propagate",
    "gap_profile",
    "grow",
    "identify_ground",
    "initial_state",
    "interpolated_diagonal",
    "load_state",
    "min_cutoffs",
    "min_truncation",
    "observables",
    "occupation_vectors",
    "parse",
    "run_single",
    "solve_linear",
    "sweep",
]
