"""Solver-facing types and the LP entry point."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..problem import ProblemInstance
from .simplex import simplex_standard

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration_limit"
NODE_LIMIT = "node_limit"


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    feasibility_tol: float = 1e-7
    integrality_tol: float = 1e-6
    optimality_gap: float = 1e-6
    max_iterations: int = 50_000
    max_nodes: int = 20_000
    anti_cycling: str = "bland"
    backend: str = "simplex"

    def __post_init__(self):
        for name in ("feasibility_tol", "integrality_tol", "optimality_gap"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.anti_cycling not in ("bland", "lexicographic"):
            raise ValueError(f"unknown anti-cycling rule {self.anti_cycling!r}")
        if self.backend not in ("simplex", "highs"):
            raise ValueError(f"unknown backend {self.backend!r}")


@dataclass
class LpSolution:
    status: str
    objective: float = float("nan")
    primal: np.ndarray = field(default_factory=lambda: np.zeros(0))
    iterations: int = 0
    nodes: int = 0
    bound: float = float("nan")
    gap: float = float("nan")

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


def _standard_form(inst: ProblemInstance, c):
    """Map bounds and inequalities onto ``A y = b, y >= 0`` with ``x = s + M y``."""
    n = inst.n_vars
    lb, ub = inst.lb, inst.ub
    cols = []  # (var, sign)
    shift = np.zeros(n)
    bound_rows = []  # (column index in y, limit)
    for j in range(n):
        lo, hi = lb[j], ub[j]
        if np.isfinite(lo) and np.isfinite(hi) and hi - lo <= 0:
            if hi < lo - 1e-12:
                return None
            shift[j] = lo
            continue
        if np.isfinite(lo):
            shift[j] = lo
            cols.append((j, 1.0))
            if np.isfinite(hi):
                bound_rows.append((len(cols) - 1, hi - lo))
        elif np.isfinite(hi):
            shift[j] = hi
            cols.append((j, -1.0))
        else:
            cols.append((j, 1.0))
            cols.append((j, -1.0))
    ny = len(cols)
    M = np.zeros((n, ny))
    for k, (j, s) in enumerate(cols):
        M[j, k] = s

    A_ub = inst.A_ub @ M
    b_ub = inst.b_ub - inst.A_ub @ shift
    if bound_rows:
        extra = np.zeros((len(bound_rows), ny))
        for r, (k, lim) in enumerate(bound_rows):
            extra[r, k] = 1.0
        A_ub = np.vstack([A_ub, extra])
        b_ub = np.concatenate([b_ub, [lim for _, lim in bound_rows]])
    A_eq = inst.A_eq @ M
    b_eq = inst.b_eq - inst.A_eq @ shift

    m_eq, m_ub = A_eq.shape[0], A_ub.shape[0]
    A = np.zeros((m_eq + m_ub, ny + m_ub))
    A[:m_eq, :ny] = A_eq
    A[m_eq:, :ny] = A_ub
    A[m_eq:, ny:] = np.eye(m_ub)
    b = np.concatenate([b_eq, b_ub])
    hint = np.concatenate([np.full(m_eq, -1), ny + np.arange(m_ub)])
    cy = np.concatenate([c @ M, np.zeros(m_ub)])
    return A, b, cy, hint, M, shift


def _solve_lp_simplex(inst: ProblemInstance, c, config: SolverConfig) -> LpSolution:
    sf = _standard_form(inst, c)
    if sf is None:
        return LpSolution(INFEASIBLE)
    A, b, cy, hint, M, shift = sf
    res = simplex_standard(
        cy, A, b, hint,
        max_iter=config.max_iterations,
        rule=config.anti_cycling,
        feas_tol=config.feasibility_tol,
    )
    if res.status != OPTIMAL:
        return LpSolution(res.status, iterations=res.iterations)
    x = shift + M @ res.x[: M.shape[1]]
    return LpSolution(OPTIMAL, float(c @ x), x, iterations=res.iterations)


def solve_lp(
    instance: ProblemInstance,
    objective=None,
    sense: str = "min",
    config: SolverConfig | None = None,
) -> LpSolution:
    """Solve the continuous relaxation of ``instance``.

    ``objective`` replaces the instance cost vector when given; the instance
    constant is added to the reported objective only when the instance's own
    cost vector is used. Integer markers are ignored (the caller decides
    whether a relaxation is wanted).
    """
    config = config or SolverConfig()
    if sense not in ("min", "max"):
        raise ValueError(f"sense must be 'min' or 'max', got {sense!r}")
    own = objective is None
    c = np.asarray(instance.c if own else objective, dtype=float).ravel()
    if c.size != instance.n_vars:
        raise ValueError(f"objective has {c.size} entries, expected {instance.n_vars}")
    sign = -1.0 if sense == "max" else 1.0

    if config.backend == "simplex":
        sol = _solve_lp_simplex(instance, sign * c, config)
    elif config.backend == "highs":
        from .highs import solve_lp_highs

        sol = solve_lp_highs(instance, sign * c, config)
    else:
        raise ValueError(f"unknown solver backend {config.backend!r}")

    if sol.optimal:
        sol.objective = float(c @ sol.primal) + (instance.constant if own else 0.0)
        sol.bound = sol.objective
        sol.gap = 0.0
    return sol
