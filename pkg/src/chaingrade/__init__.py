"""Relative divergence of grading functions on chain bundles, and MRDP solvers."""
from .divergence import (
    DivergenceResult,
    check_scaling_identities,
    disorder_entropy,
    rd_bundle_dp,
    rd_bundle_oracle,
    rd_chain,
)
from .errors import (
    BudgetExceededError,
    ChaingradeError,
    ConvergenceError,
    DegenerateRangeError,
    InfeasibleError,
    MonotonicityError,
    ShapeError,
)
from .lattice import (
    BundleShape,
    GradingFunction,
    MaximalChain,
    enumerate_maximal_chains,
    evaluate,
    extremes,
    standardize,
)
from .solvers import (
    AnchoredProblem,
    LinearConstraintProblem,
    MrdpSolution,
    ServerMixProblem,
    UnconstrainedProblem,
    add_linear_overhead,
    objective_server_mix,
    solve_anchored,
    solve_height_dependent,
    solve_linear_constraint,
    solve_separable,
    solve_server_mix,
    solve_unconstrained,
)

__version__ = "0.1.0"
