"""Lattice designs inside a halfspace polytope by recursive box sorting.

The bounding box of the polytope is cut into sub-boxes whose corners are
tested against ``A d <= b``: a box with every corner inside holds only
feasible designs (convexity), a box with no corner inside is discarded, and
anything in between is bisected until single lattice points remain. The
discard rule can miss thin slivers of the polytope crossing a box, so an
``exact`` mode confirms every discard with an emptiness LP.

All bookkeeping happens in integer lattice coordinates ``k``; the design in
capacity units is ``k * steps``.
"""

from __future__ import annotations

import csv
import io
import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .geometry import GeometryError, Polytope
from .model import EnergySystemModel, assemble_fixed_design
from .problem import ProblemInstance
from .solver import SolverConfig, solve_lp

log = logging.getLogger(__name__)

MODES = ("fast", "exact")
ALL_INSIDE = "all_inside"
ALL_OUTSIDE = "all_outside_candidate"
MIXED = "mixed"
BRUTE_FORCE_GUARD = 10**7
VERIFY_TOL = 1e-6
# Pieces per axis of the initial cut. Coarser cuts sort faster in fast mode
# but miss more designs near the boundary.
ROOT_DIVISIONS = 32


class DiscretizationError(RuntimeError):
    pass


@dataclass(frozen=True)
class HyperRectangle:
    """Box of lattice points ``lower <= k <= upper`` (integer lattice units)."""

    lower: np.ndarray
    upper: np.ndarray
    steps: np.ndarray

    def __post_init__(self):
        if np.any(self.lower > self.upper):
            raise ValueError("box lower corner exceeds upper corner")

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def n_points(self) -> int:
        return int(np.prod(self.upper - self.lower + 1))

    @property
    def lower_design(self) -> np.ndarray:
        return self.lower * self.steps

    @property
    def upper_design(self) -> np.ndarray:
        return self.upper * self.steps

    def corners(self) -> np.ndarray:
        """All ``2**dim`` corners in lattice units (duplicates on flat axes)."""
        bits = np.array(list(itertools.product((0, 1), repeat=self.dim)), dtype=np.int64)
        return self.lower + bits * (self.upper - self.lower)

    def split(self) -> tuple["HyperRectangle", "HyperRectangle"]:
        """Bisect the axis with most lattice intervals (lowest index on ties).

        The median plane goes to the lower child, so children are disjoint.
        """
        extent = self.upper - self.lower
        axis = int(np.argmax(extent))
        if extent[axis] == 0:
            raise ValueError("cannot split a single lattice point")
        mid = self.lower[axis] + extent[axis] // 2
        up = self.upper.copy()
        up[axis] = mid
        lo = self.lower.copy()
        lo[axis] = mid + 1
        return HyperRectangle(self.lower, up, self.steps), HyperRectangle(lo, self.upper, self.steps)

    def points(self) -> np.ndarray:
        axes = [np.arange(lo, hi + 1) for lo, hi in zip(self.lower, self.upper)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.dim)


@dataclass
class EnumerationResult:
    """Lattice points found inside a polytope, with sorting statistics.

    ``points`` holds integer lattice coordinates in lexicographic order.
    """

    points: np.ndarray
    steps: np.ndarray
    mode: str
    counts: dict = field(default_factory=dict)
    box: HyperRectangle | None = None

    @property
    def designs(self) -> np.ndarray:
        return self.points * self.steps

    def __len__(self) -> int:
        return len(self.points)

    def as_set(self) -> set[tuple[float, ...]]:
        return {tuple(float(v) for v in row) for row in self.designs}

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "steps": [float(s) for s in self.steps],
            "counts": dict(sorted(self.counts.items())),
            "box": None if self.box is None else {
                "lower": [int(v) for v in self.box.lower],
                "upper": [int(v) for v in self.box.upper],
            },
            "designs": [[float(v) for v in row] for row in self.designs],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "EnumerationResult":
        steps = np.asarray(doc["steps"], dtype=float)
        designs = np.asarray(doc["designs"], dtype=float).reshape(-1, steps.size)
        box = None
        if doc.get("box"):
            box = HyperRectangle(np.asarray(doc["box"]["lower"], dtype=np.int64),
                                 np.asarray(doc["box"]["upper"], dtype=np.int64), steps)
        return cls(np.rint(designs / steps).astype(np.int64), steps, doc["mode"], dict(doc["counts"]), box)


def _check_steps(polytope: Polytope, steps) -> np.ndarray:
    steps = np.asarray(steps, dtype=float).ravel()
    if steps.size != polytope.dim:
        raise ValueError(f"{steps.size} steps for a {polytope.dim}-dimensional polytope")
    if np.any(~(steps > 0)):
        raise ValueError("capacity steps must be positive")
    return steps


def _extent(polytope: Polytope, b, steps, config) -> tuple[np.ndarray, np.ndarray] | None:
    dim = polytope.dim
    inst = ProblemInstance.from_arrays(np.zeros(dim), polytope.A, b, lb=np.full(dim, -np.inf))
    lower = np.empty(dim, dtype=np.int64)
    upper = np.empty(dim, dtype=np.int64)
    for c in range(dim):
        e = np.zeros(dim)
        e[c] = 1.0
        for sense, out, rnd in (("min", lower, math.floor), ("max", upper, math.ceil)):
            sol = solve_lp(inst, e, sense=sense, config=config)
            if sol.status == "infeasible":
                return None
            if sol.status == "unbounded":
                raise GeometryError("polytope is unbounded")
            if not sol.optimal:
                raise DiscretizationError(f"bounding LP ended with status {sol.status}")
            x = sol.objective / steps[c]
            near = round(x)
            if abs(x - near) * steps[c] <= 1e-6 * (1.0 + abs(sol.objective)):
                out[c] = near
            else:
                out[c] = rnd(x)
    return lower, upper


def bounding_box(polytope: Polytope, steps, config: SolverConfig | None = None) -> HyperRectangle | None:
    """Smallest lattice box containing the polytope (``None`` if it is empty).

    Per-axis extremes come from ``2 * dim`` LPs and are rounded outward to
    the lattice; extremes within the feasibility tolerance of a lattice
    plane snap onto it. A polytope that is empty only by round-off (say, a
    single point cut by nearly coincident halfspaces) is measured with the
    tolerance added.
    """
    steps = _check_steps(polytope, steps)
    ext = _extent(polytope, polytope.b, steps, config)
    if ext is None:
        ext = _extent(polytope, polytope.b + polytope.tolerance(), steps, config)
    if ext is None:
        return None
    return HyperRectangle(ext[0], ext[1], steps)


def _inside(polytope: Polytope, k: np.ndarray, steps: np.ndarray) -> np.ndarray:
    return polytope.contains(np.atleast_2d(k) * steps)


def classify_box(box: HyperRectangle, polytope: Polytope) -> str:
    """``all_inside``, ``all_outside_candidate`` or ``mixed`` from the corners."""
    if box.dim != polytope.dim:
        raise ValueError("box and polytope dimensions differ")
    inside = _inside(polytope, box.corners(), box.steps)
    if inside.all():
        return ALL_INSIDE
    if not inside.any():
        return ALL_OUTSIDE
    return MIXED


def box_is_empty(box: HyperRectangle, polytope: Polytope, config: SolverConfig | None = None) -> bool:
    """True if no point of the box satisfies ``A x <= b + tol``."""
    inst = ProblemInstance.from_arrays(np.zeros(box.dim), polytope.A, polytope.b + polytope.tolerance(),
                                       lb=box.lower_design, ub=box.upper_design)
    status = solve_lp(inst, config=config).status
    if status not in ("optimal", "infeasible"):
        raise DiscretizationError(f"emptiness LP ended with status {status}")
    return status == "infeasible"


def _root_boxes(box: HyperRectangle, divisions: int) -> list[HyperRectangle]:
    """Cut the bounding box into about ``divisions`` pieces per axis."""
    limit = -(-(box.upper - box.lower) // divisions)
    out, stack = [], [box]
    while stack:
        b = stack.pop()
        if np.any(b.upper - b.lower > limit):
            lo, hi = b.split()
            stack += [hi, lo]
        else:
            out.append(b)
    return out


def enumerate_designs(
    polytope: Polytope,
    steps,
    mode: str = "exact",
    root_divisions: int = ROOT_DIVISIONS,
    config: SolverConfig | None = None,
) -> EnumerationResult:
    """All lattice designs ``k * steps`` with ``A d <= b + tol``.

    ``fast`` discards boxes without a feasible corner; ``exact`` first checks
    with an LP that the box misses the polytope and bisects it otherwise.
    Before any box is classified, the bounding box is cut into about
    ``root_divisions`` pieces per axis.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    steps = _check_steps(polytope, steps)
    counts = dict.fromkeys(
        ("accepted_whole_boxes", "rejected_whole_boxes", "point_checks", "lp_verifications",
         "accepted_points", "rejected_points"), 0)
    box = bounding_box(polytope, steps, config)
    if box is None:
        return EnumerationResult(np.zeros((0, polytope.dim), dtype=np.int64), steps, mode, counts)
    if len(box.corners()) > 2**12:
        raise DiscretizationError("lattice enumeration is limited to 12 dimensions")

    found: list[np.ndarray] = []
    stack = list(reversed(_root_boxes(box, root_divisions)))
    while stack:
        b = stack.pop()
        if b.n_points == 1:
            counts["point_checks"] += 1
            if _inside(polytope, b.lower, steps)[0]:
                found.append(b.lower[None, :])
            continue
        kind = classify_box(b, polytope)
        if kind == ALL_INSIDE:
            counts["accepted_whole_boxes"] += 1
            counts["accepted_points"] += b.n_points
            found.append(b.points())
            continue
        if kind == ALL_OUTSIDE:
            if mode == "fast":
                counts["rejected_whole_boxes"] += 1
                counts["rejected_points"] += b.n_points
                continue
            counts["lp_verifications"] += 1
            if box_is_empty(b, polytope, config):
                counts["rejected_whole_boxes"] += 1
                counts["rejected_points"] += b.n_points
                continue
        lo, hi = b.split()
        stack += [hi, lo]

    points = np.concatenate(found) if found else np.zeros((0, polytope.dim), dtype=np.int64)
    points = np.unique(points, axis=0)
    log.info("%s enumeration: %d designs from %d lattice points", mode, len(points), box.n_points)
    return EnumerationResult(points, steps, mode, counts, box)


# ``enumerate`` is the public name; the alias keeps the builtin usable here.
enumerate = enumerate_designs  # noqa: A001


def brute_force(polytope: Polytope, steps, guard: int = BRUTE_FORCE_GUARD,
                config: SolverConfig | None = None) -> set[tuple[float, ...]]:
    """Test every lattice point of the bounding box (reference oracle)."""
    steps = _check_steps(polytope, steps)
    box = bounding_box(polytope, steps, config)
    if box is None:
        return set()
    if box.n_points > guard:
        raise DiscretizationError(f"bounding box holds {box.n_points} lattice points (guard {guard})")
    pts = box.points()
    keep = pts[_inside(polytope, pts, steps)]
    return {tuple(float(v) for v in row) for row in keep * steps}


@dataclass
class VerificationResult:
    """Designs that pass the operation re-solve, with their achieved cost."""

    designs: np.ndarray
    tac: np.ndarray
    budget: float
    dropped: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.designs)


def verify_designs(
    model: EnergySystemModel,
    designs,
    budget: float,
    config: SolverConfig | None = None,
    workers: int = 1,
) -> VerificationResult:
    """Re-solve the operation of each design and keep those within budget.

    A design survives when its optimal operation cost gives
    ``TAC <= budget * (1 + 1e-6)``.
    """
    designs = np.atleast_2d(np.asarray(designs, dtype=float)).reshape(-1, model.dim)

    def run(d):
        return solve_lp(assemble_fixed_design(model, d), config=config)

    if workers > 1 and len(designs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            sols = list(pool.map(run, designs))
    else:
        sols = [run(d) for d in designs]

    keep, tac, dropped = [], [], []
    limit = budget * (1.0 + VERIFY_TOL)
    for d, sol in zip(designs, sols):
        if not sol.optimal:
            dropped.append({"design": [float(v) for v in d], "reason": sol.status})
            log.info("design %s dropped: operation LP %s", d.tolist(), sol.status)
        elif sol.objective > limit:
            dropped.append({"design": [float(v) for v in d], "reason": "over_budget", "tac": sol.objective})
            log.debug("design %s dropped: TAC %.6g over budget %.6g", d.tolist(), sol.objective, budget)
        else:
            keep.append(d)
            tac.append(sol.objective)
    arr = np.array(keep) if keep else np.zeros((0, model.dim))
    return VerificationResult(arr, np.array(tac, dtype=float), budget, dropped)


def designs_csv(names, designs, tac=None, tac_star: float | None = None) -> str:
    """One row per design: capacities, then achieved TAC and TAC/TAC* if known."""
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    header = list(names)
    if tac is not None:
        header += ["tac", "tac_ratio"]
    w.writerow(header)
    designs = np.atleast_2d(np.asarray(designs, dtype=float)).reshape(-1, len(names))
    for i in range(len(designs)):
        row = designs[i]
        cells = [repr(float(v)) for v in row]
        if tac is not None:
            ratio = tac[i] / tac_star if tac_star else math.nan
            cells += [repr(float(tac[i])), repr(float(ratio))]
        w.writerow(cells)
    return out.getvalue()
