"""LP and MILP solvers behind a small, swappable interface.

The default backend is the in-tree dense simplex with best-bound branch and
bound; ``SolverConfig(backend="highs")`` delegates to SciPy's HiGHS.
"""

from .lp import (
    INFEASIBLE,
    ITERATION_LIMIT,
    NODE_LIMIT,
    OPTIMAL,
    UNBOUNDED,
    LpSolution,
    SolverConfig,
    SolverError,
    solve_lp,
)
from .milp import solve_milp

__all__ = [
    "INFEASIBLE",
    "ITERATION_LIMIT",
    "NODE_LIMIT",
    "OPTIMAL",
    "UNBOUNDED",
    "LpSolution",
    "SolverConfig",
    "SolverError",
    "solve_lp",
    "solve_milp",
]
