"""Directional exploration of the relaxed near-optimal design space.

Each probe maximizes ``n @ d`` over all designs (and operations) whose total
annualized cost stays within ``(1 + epsilon)`` of the optimum. Probes start
with the positive and negative unit vectors and continue with outward facet
normals of the hull of all vertices found so far, largest facets first, until
the relative gap between the outer polyhedron of supporting halfspaces and
the inner hull drops to ``delta``.
"""

from __future__ import annotations

import itertools
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .geometry import HullState
from .model import EnergySystemModel, assemble
from .problem import ProblemInstance
from .solver import SolverConfig, solve_lp, solve_milp

log = logging.getLogger(__name__)

ANCHORS = ("discrete", "continuous")


class ExplorationError(RuntimeError):
    pass


@dataclass(frozen=True)
class ExplorationConfig:
    epsilon: float = 0.01
    delta: float = 0.05
    max_directions: int = 2000
    parallel_workers: int = 1
    direction_dedup_angle: float = 1e-6
    anchor: str = "discrete"

    def __post_init__(self):
        if not self.epsilon >= 0:
            raise ValueError("epsilon must be >= 0")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if self.max_directions < 1 or self.parallel_workers < 1:
            raise ValueError("max_directions and parallel_workers must be positive")
        if self.anchor not in ANCHORS:
            raise ValueError(f"anchor must be one of {ANCHORS}")


@dataclass
class ExplorationReport:
    hull: HullState
    directions_evaluated: int
    final_gap: float
    tac_star: float
    budget: float
    stop_reason: str
    log: list = field(default_factory=list)
    epsilon: float = 0.0
    delta: float = 0.0
    anchor: str = "discrete"
    tac_continuous: float = math.nan
    tac_discrete: float = math.nan
    continuous_optimum: np.ndarray | None = None
    discrete_optimum: np.ndarray | None = None
    design_names: tuple = ()

    @property
    def explored_ratio(self) -> float:
        return 1.0 - self.final_gap

    @property
    def degenerate(self) -> bool:
        return self.hull.degenerate or self.hull.inner_volume == 0.0

    def log_lines(self) -> str:
        return "".join(json.dumps(rec, sort_keys=True) + "\n" for rec in self.log)


def near_optimal_constraint(instance: ProblemInstance, tac_star: float, epsilon: float) -> ProblemInstance:
    """Add ``TAC <= tac_star * (1 + epsilon)`` and clear the objective."""
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    budget = tac_star * (1.0 + epsilon)
    inst = instance.relaxed().with_ub_rows(instance.c[None, :], [budget - instance.constant], names=("budget",))
    inst = inst.with_objective(np.zeros(instance.n_vars), constant=0.0)
    inst.meta.update(instance.meta)
    inst.meta["budget"] = budget
    inst.meta["tac_star"] = tac_star
    inst.meta["cost"] = instance.c
    return inst


def initial_directions(dim: int) -> list[np.ndarray]:
    """``+e_c`` and ``-e_c`` for every coordinate, in that order."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    out = []
    for c in range(dim):
        e = np.zeros(dim)
        e[c] = 1.0
        out += [e, -e]
    return out


def diagonal_directions(dim: int) -> list[np.ndarray]:
    """All ``2**dim`` sign-pattern diagonals, normalized."""
    return [np.array(s, dtype=float) / math.sqrt(dim) for s in itertools.product((1.0, -1.0), repeat=dim)]


def _is_new(n, seen, cos_limit) -> bool:
    if not len(seen):
        return True
    return bool(np.max(np.asarray(seen) @ n) < cos_limit)


def facet_directions(hull: HullState, seen, dedup_angle: float = 1e-6, limit: int | None = None) -> list[np.ndarray]:
    """Outward facet normals of the inner hull not yet probed, largest facets first.

    Near-parallel normals are probed once, through the larger facet. At most
    ``limit`` directions are returned.
    """
    cos_limit = math.cos(dedup_angle)
    normals = hull.inner_normals
    if not len(normals):
        return []
    order = np.argsort(-hull.inner_areas, kind="stable")
    normals = normals[order] / np.linalg.norm(normals[order], axis=1, keepdims=True)
    seen = np.asarray(seen, dtype=float).reshape(-1, hull.dim)
    if len(seen):
        normals = normals[(normals @ seen.T).max(axis=1) < cos_limit]
    kept: list[np.ndarray] = []
    for n in normals:
        if limit is not None and len(kept) >= limit:
            break
        if not kept or np.max(np.asarray(kept) @ n) < cos_limit:
            kept.append(n)
    return kept


def explore_region(
    probe: Callable[[np.ndarray], np.ndarray],
    dim: int,
    config: ExplorationConfig,
    solver_config: SolverConfig | None = None,
    on_record: Callable[[dict], None] | None = None,
):
    """Run the probing loop against any support oracle ``probe(n) -> argmax n @ x``.

    Returns ``(hull, log, directions_evaluated, stop_reason)``.
    """
    state = HullState(dim, config=solver_config)
    seen: list[np.ndarray] = []
    records: list[dict] = []
    initial = initial_directions(dim)
    diagonals: list[np.ndarray] = []
    diagonals_tried = False
    cos_limit = math.cos(config.direction_dedup_angle)
    evaluated = 0
    reason = None
    workers = config.parallel_workers
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        while True:
            if initial:
                source = initial
            elif diagonals:
                source = diagonals
            else:
                # facet normals are recomputed from the hull after every batch
                want = min(workers, config.max_directions - evaluated)
                source = facet_directions(state, seen, config.direction_dedup_angle, limit=want)
                if not source and not math.isfinite(state.outer_volume) and not diagonals_tried:
                    diagonals_tried = True
                    diagonals = [n for n in diagonal_directions(dim) if _is_new(n, seen, cos_limit)]
                    source = diagonals
                if not source:
                    reason = "exhausted"
                    break
            take = min(workers, config.max_directions - evaluated, len(source))
            batch = source[:take]
            del source[:take]
            vertices = list(pool.map(probe, batch)) if pool else [probe(n) for n in batch]
            state.add(batch, vertices)
            for n, v in zip(batch, vertices):
                evaluated += 1
                seen.append(n)
                rec = {
                    "iteration": evaluated,
                    "direction": [float(x) for x in n],
                    "vertex": [float(x) for x in v],
                    "inner_volume": state.inner_volume,
                    "outer_volume": state.outer_volume if math.isfinite(state.outer_volume) else None,
                    "gap": state.gap,
                    "subspace_dim": 0 if state.hull is None else state.hull.rank,
                }
                records.append(rec)
                if on_record is not None:
                    on_record(rec)
            log.debug("probed %d directions, gap %.4f", evaluated, state.gap)
            if not initial and state.gap <= config.delta:
                reason = "gap"
                break
            if evaluated >= config.max_directions:
                reason = "max_directions"
                break
    finally:
        if pool is not None:
            pool.shutdown()
    return state, records, evaluated, reason


def model_probe(near: ProblemInstance, solver_config: SolverConfig | None = None):
    """Support oracle over the near-optimal instance: maximize ``n @ d``."""
    idx = near.design_index

    def probe(n):
        c = np.zeros(near.n_vars)
        c[idx] = n
        sol = solve_lp(near, c, sense="max", config=solver_config)
        if not sol.optimal:
            raise ExplorationError(f"directional LP ended with status {sol.status}")
        return np.maximum(sol.primal[idx], 0.0)

    return probe


def optimize(model: EnergySystemModel, solver_config: SolverConfig | None = None):
    """Continuous and discrete cost optima, as ``(lp_solution, milp_solution)``."""
    cont = assemble(model, "continuous")
    lp = solve_lp(cont, config=solver_config)
    if not lp.optimal:
        raise ExplorationError(f"continuous design problem is {lp.status}")
    milp = solve_milp(assemble(model, "discrete"), solver_config)
    if milp.status not in ("optimal", "node_limit") or milp.primal.size == 0:
        raise ExplorationError(f"discrete design problem is {milp.status}")
    return lp, milp


def explore(
    model: EnergySystemModel,
    config: ExplorationConfig | None = None,
    solver_config: SolverConfig | None = None,
    optima=None,
    on_record=None,
) -> ExplorationReport:
    """Map the relaxed near-optimal design space of ``model``.

    The cost budget is anchored on the discrete optimum by default
    (``config.anchor``). ``optima`` may pass precomputed results of
    :func:`optimize`.
    """
    config = config or ExplorationConfig()
    cont = assemble(model, "continuous")
    lp, milp = optima if optima is not None else optimize(model, solver_config)
    tac_star = milp.objective if config.anchor == "discrete" else lp.objective
    near = near_optimal_constraint(cont, tac_star, config.epsilon)
    probe = model_probe(near, solver_config)
    state, records, evaluated, reason = explore_region(probe, model.dim, config, solver_config, on_record)
    return ExplorationReport(
        hull=state,
        directions_evaluated=evaluated,
        final_gap=state.gap,
        tac_star=tac_star,
        budget=near.meta["budget"],
        stop_reason=reason,
        log=records,
        epsilon=config.epsilon,
        delta=config.delta,
        anchor=config.anchor,
        tac_continuous=lp.objective,
        tac_discrete=milp.objective,
        continuous_optimum=cont.design_of(lp.primal),
        discrete_optimum=cont.design_of(milp.primal),
        design_names=tuple(model.design_names),
    )
