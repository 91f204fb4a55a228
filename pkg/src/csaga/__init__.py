"""Cyclic SAGA and related incremental gradient methods for finite sums."""

from .data import Dataset, Sample, load_libsvm, parse_libsvm, stats, subsample, to_libsvm
from .diagnostics import (
    TheoryConstants,
    check_contraction,
    check_corollary,
    delta_residual,
    recurrence_bound_check,
    lyapunov,
    rate_sweep,
)
from .objectives import (
    FiniteSumProblem,
    glm_problem,
    quadratic_from_centers,
    quadratic_problem,
    random_quadratic_family,
    solve_reference,
)
from .solvers import (
    HistoryWindow,
    Scheduler,
    SolverState,
    Trace,
    TraceRecord,
    init,
    literal_csaga,
    run,
    step,
    step_csaga,
    step_finito_diag,
    step_jit,
    step_sag_iag,
)
from .vecmath import SparseVec, axpy_sparse, dot, sq_dist

__version__ = "0.1.0"
