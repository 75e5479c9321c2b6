"""Optional backend delegating to the HiGHS solver shipped with SciPy."""

from __future__ import annotations

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, linprog, milp

from ..problem import ProblemInstance
from .lp import INFEASIBLE, ITERATION_LIMIT, NODE_LIMIT, OPTIMAL, UNBOUNDED, LpSolution, SolverConfig

_STATUS = {0: OPTIMAL, 1: ITERATION_LIMIT, 2: INFEASIBLE, 3: UNBOUNDED}


def solve_lp_highs(inst: ProblemInstance, c, config: SolverConfig) -> LpSolution:
    res = linprog(
        c,
        A_ub=inst.A_ub if inst.b_ub.size else None,
        b_ub=inst.b_ub if inst.b_ub.size else None,
        A_eq=inst.A_eq if inst.b_eq.size else None,
        b_eq=inst.b_eq if inst.b_eq.size else None,
        bounds=list(zip(np.where(np.isfinite(inst.lb), inst.lb, None), np.where(np.isfinite(inst.ub), inst.ub, None))),
        method="highs-ds",
        options={"primal_feasibility_tolerance": config.feasibility_tol},
    )
    status = _STATUS.get(res.status, INFEASIBLE)
    if status != OPTIMAL:
        return LpSolution(status, iterations=int(res.nit or 0))
    return LpSolution(OPTIMAL, float(res.fun), np.asarray(res.x), iterations=int(res.nit))


def solve_milp_highs(inst: ProblemInstance, config: SolverConfig) -> LpSolution:
    # Lattice variables become integer counts of their step.
    scale = np.where(inst.steps > 0, inst.steps, 1.0)
    cons = []
    if inst.b_ub.size:
        cons.append(LinearConstraint(inst.A_ub * scale, -np.inf, inst.b_ub))
    if inst.b_eq.size:
        cons.append(LinearConstraint(inst.A_eq * scale, inst.b_eq, inst.b_eq))
    res = milp(
        inst.c * scale,
        constraints=cons,
        integrality=(inst.steps > 0).astype(int),
        bounds=Bounds(inst.lb / scale, inst.ub / scale),
        options={"mip_rel_gap": config.optimality_gap, "node_limit": config.max_nodes},
    )
    if res.x is None:
        return LpSolution(INFEASIBLE if res.status in (0, 2) else _STATUS.get(res.status, INFEASIBLE))
    x = np.asarray(res.x) * scale
    ints = inst.steps > 0
    x[ints] = np.round(x[ints] / inst.steps[ints]) * inst.steps[ints]
    status = OPTIMAL if res.status == 0 else NODE_LIMIT
    obj = float(inst.c @ x + inst.constant)
    return LpSolution(status, obj, x, bound=obj, gap=0.0)
