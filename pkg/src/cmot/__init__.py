"""Constrained dynamic optimal mass transport on regular grids.

The library computes the time-dependent density path between two
prescribed densities that minimizes kinetic action, optionally under
pointwise convex constraints (density caps, momentum penalties,
frozen regions), by saddle-point iterations on a collocated
space-time grid.  See the README for the mathematical setup, the
problem-file format, and the command-line interface.
"""

import os as _os

# Honor CMOT_THREADS before numpy initializes its kernels.  This only
# takes effect when cmot is imported first, which is the case for the
# command-line entry point.
_threads = _os.environ.get("CMOT_THREADS")
if _threads:
    for _var in (
        "OMP_NUM_THREADS",
        "OPENBLAS_NUM_THREADS",
        "MKL_NUM_THREADS",
        "NUMEXPR_NUM_THREADS",
    ):
        _os.environ.setdefault(_var, _threads)

from .constraints import (
    ConstraintSpec,
    DensityUpperBound,
    FixedDensityRegion,
    MomentumQuadraticPenalty,
    Unconstrained,
    compute_target,
    evaluate_I,
    prox_mu,
)
from .diagnostics import EPS_RHO, IterationRecord, energy, mass_per_slice, residuals
from .grid import (
    GridSpec,
    PairField,
    ScalarField,
    SpaceBC,
    div_ts,
    grad_ts,
    inner,
    laplacian_ts,
    norm,
)
from .output import (
    FrameArchive,
    FrameArchiveError,
    read_frames,
    write_frames,
    write_heatmaps,
    write_history,
)
from .poisson import PoissonCompatibilityError, PoissonProblem, boundary_source, solve_phi
from .problems import OutputsSpec, ProblemFile, ProblemFileError, evaluate_field, load_problem
from .projection import PairPoint, project_k, solve_q
from .solvers import (
    ALGORITHMS,
    BoundCheck,
    NonFiniteFieldError,
    Solution,
    SolverParams,
    SolverState,
    StepSizeReport,
    TransportProblem,
    alg1_step,
    alg1_sub_phi,
    alg1_sub_q,
    alg2_step,
    alg3_step,
    initial_state,
    run,
    validate_alg1,
    validate_alg23,
    validate_steps,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "SpaceBC",
    "GridSpec",
    "ScalarField",
    "PairField",
    "grad_ts",
    "div_ts",
    "laplacian_ts",
    "inner",
    "norm",
    "PoissonProblem",
    "PoissonCompatibilityError",
    "boundary_source",
    "solve_phi",
    "PairPoint",
    "project_k",
    "solve_q",
    "ConstraintSpec",
    "Unconstrained",
    "DensityUpperBound",
    "MomentumQuadraticPenalty",
    "FixedDensityRegion",
    "prox_mu",
    "compute_target",
    "evaluate_I",
    "EPS_RHO",
    "IterationRecord",
    "energy",
    "residuals",
    "mass_per_slice",
    "TransportProblem",
    "SolverParams",
    "SolverState",
    "BoundCheck",
    "StepSizeReport",
    "NonFiniteFieldError",
    "Solution",
    "ALGORITHMS",
    "validate_alg1",
    "validate_alg23",
    "validate_steps",
    "initial_state",
    "alg1_sub_phi",
    "alg1_sub_q",
    "alg1_step",
    "alg2_step",
    "alg3_step",
    "run",
    "ProblemFile",
    "ProblemFileError",
    "OutputsSpec",
    "evaluate_field",
    "load_problem",
    "FrameArchive",
    "FrameArchiveError",
    "write_frames",
    "read_frames",
    "write_heatmaps",
    "write_history",
]
