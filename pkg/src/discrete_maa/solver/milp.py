"""Best-bound branch and bound over lattice-valued design variables."""

from __future__ import annotations

import heapq
import logging

import numpy as np

from ..problem import ProblemInstance
from .lp import (
    INFEASIBLE,
    NODE_LIMIT,
    OPTIMAL,
    LpSolution,
    SolverConfig,
    solve_lp,
)

log = logging.getLogger(__name__)


def _fractionality(x, idx, steps):
    units = x[idx] / steps[idx]
    return np.abs(units - np.round(units))


def _snap(instance, sol, idx, config):
    """Round lattice variables exactly and re-solve the remaining LP."""
    steps = instance.steps
    fixed = np.round(sol.primal[idx] / steps[idx]) * steps[idx]
    lb = instance.lb.copy()
    ub = instance.ub.copy()
    lb[idx] = fixed
    ub[idx] = fixed
    again = solve_lp(instance.with_bounds(lb, ub), config=config)
    return again if again.optimal else sol


def solve_milp(instance: ProblemInstance, config: SolverConfig | None = None) -> LpSolution:
    """Minimize ``instance`` with its lattice variables kept integral.

    Nodes are explored best bound first. The branching variable is the most
    fractional one in lattice units, ties going to the lowest index.
    """
    config = config or SolverConfig()
    if config.backend == "highs":
        from .highs import solve_milp_highs

        return solve_milp_highs(instance, config)

    idx = np.flatnonzero(instance.steps > 0)
    steps = instance.steps
    root = solve_lp(instance, config=config)
    if not root.optimal:
        return root
    if idx.size == 0:
        return root

    counter = 0
    heap = [(root.objective, counter, instance.lb, instance.ub, root)]
    incumbent: LpSolution | None = None
    nodes = 0
    iterations = root.iterations

    def tolerance(value):
        return config.optimality_gap * max(1.0, abs(value))

    bound = root.objective
    while heap:
        node_bound, _, lb, ub, sol = heapq.heappop(heap)
        bound = node_bound
        if incumbent is not None and node_bound >= incumbent.objective - tolerance(incumbent.objective):
            heap.clear()
            break
        frac = _fractionality(sol.primal, idx, steps)
        if frac.max() <= config.integrality_tol:
            if incumbent is None or sol.objective < incumbent.objective:
                incumbent = sol
            continue
        if nodes >= config.max_nodes:
            heapq.heappush(heap, (node_bound, counter, lb, ub, sol))
            break
        nodes += 1
        pos = int(np.argmax(frac))
        j = idx[pos]
        units = sol.primal[j] / steps[j]
        down, up = np.floor(units) * steps[j], np.ceil(units) * steps[j]
        for lo_j, hi_j in ((lb[j], down), (up, ub[j])):
            if hi_j < lo_j:
                continue
            clb, cub = lb.copy(), ub.copy()
            clb[j], cub[j] = lo_j, hi_j
            child = solve_lp(instance.with_bounds(clb, cub), config=config)
            iterations += child.iterations
            if not child.optimal:
                continue
            if incumbent is not None and child.objective >= incumbent.objective - tolerance(incumbent.objective):
                continue
            counter += 1
            heapq.heappush(heap, (child.objective, counter, clb, cub, child))

    if incumbent is None:
        if heap:
            return LpSolution(NODE_LIMIT, nodes=nodes, iterations=iterations, bound=bound)
        return LpSolution(INFEASIBLE, nodes=nodes, iterations=iterations)

    best = _snap(instance, incumbent, idx, config)
    proven = min([best.objective] + [h[0] for h in heap]) if heap else best.objective
    if heap:
        proven = min(proven, bound)
    status = NODE_LIMIT if heap and best.objective - proven > tolerance(best.objective) else OPTIMAL
    gap = (best.objective - proven) / max(1.0, abs(best.objective))
    log.debug("branch and bound: %d nodes, status %s, gap %.3g", nodes, status, gap)
    return LpSolution(
        status,
        best.objective,
        best.primal,
        iterations=iterations + best.iterations,
        nodes=nodes,
        bound=proven,
        gap=max(gap, 0.0),
    )
