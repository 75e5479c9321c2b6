"""Inner hull, outer polyhedron and halfspace bookkeeping for exploration.

Facet enumeration and hull volumes delegate to Qhull (via
:mod:`scipy.spatial`); facet merging, lower-dimensional handling, the
halfspace-to-vertex duality and the outer-polyhedron volume (a recursion over
faces) live here. Point sets that do not span the full space are handled
inside their affine hull: volumes are then measured in that subspace's
dimension, and the outer polyhedron is intersected with the same subspace so
that the two volumes stay comparable.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .problem import ProblemInstance
from .solver import SolverConfig, solve_lp

RANK_TOL = 1e-7


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class AffineSubspace:
    """``{origin + basis.T @ y}``; ``basis`` rows are orthonormal."""

    origin: np.ndarray
    basis: np.ndarray

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    @property
    def ambient(self) -> int:
        return self.origin.size

    def complement(self) -> np.ndarray:
        """Orthonormal rows spanning the directions the subspace is flat in."""
        d = self.ambient
        if self.dim == 0:
            return np.eye(d)
        _, _, vt = np.linalg.svd(self.basis, full_matrices=True)
        return vt[self.dim :]

    def project(self, points) -> np.ndarray:
        return (np.atleast_2d(points) - self.origin) @ self.basis.T

    def lift(self, coords) -> np.ndarray:
        return self.origin + np.atleast_2d(coords) @ self.basis


@dataclass
class Hull:
    """Convex hull of a point set.

    ``normals``/``offsets`` describe the facets as ``normals @ x <= offsets``
    in the ambient space (unit normals, coplanar pieces merged); ``areas``
    are facet measures in the hull's own dimension minus one.
    """

    points: np.ndarray
    normals: np.ndarray
    offsets: np.ndarray
    areas: np.ndarray
    volume: float
    affine: AffineSubspace

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def rank(self) -> int:
        return self.affine.dim

    @property
    def degenerate(self) -> bool:
        return self.rank < self.dim


def affine_hull(points, tol: float = RANK_TOL) -> AffineSubspace:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    origin = pts.mean(axis=0)
    centered = pts - origin
    if pts.shape[0] < 2:
        return AffineSubspace(origin, np.zeros((0, pts.shape[1])))
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    if s[0] == 0.0:
        return AffineSubspace(origin, np.zeros((0, pts.shape[1])))
    rank = int(np.sum(s > tol * s[0]))
    return AffineSubspace(origin, vt[:rank])


def _facet_areas(corners: np.ndarray) -> np.ndarray:
    """(d-1)-measures of facet simplices given as ``(k, d, d)``."""
    k = corners.shape[1] - 1
    edges = corners[:, 1:, :] - corners[:, :1, :]
    gram = edges @ np.swapaxes(edges, 1, 2)
    return np.sqrt(np.clip(np.linalg.det(gram), 0.0, None)) / math.factorial(k)


def _run_qhull(points: np.ndarray) -> ConvexHull:
    opts = "Qt" if points.shape[1] <= 4 else "Qt Qx"
    try:
        return ConvexHull(points, qhull_options=opts)
    except QhullError:
        # Nearly degenerate input: joggle instead of merging facets.
        return ConvexHull(points, qhull_options="QJ")


def _qhull(coords: np.ndarray):
    lo = coords.min(axis=0)
    span = coords.max(axis=0) - lo
    span[span == 0] = 1.0
    scaled = (coords - lo) / span
    return _run_qhull(scaled), lo, span


def _merge_facets(equations, normals, offsets, areas):
    """Merge triangulated pieces of one facet (they share Qhull's hyperplane)."""
    key = np.round(equations, 10)
    _, first, inverse = np.unique(key, axis=0, return_index=True, return_inverse=True)
    inverse = inverse.ravel()
    total = np.bincount(inverse, weights=areas, minlength=first.size)
    order = np.argsort(first)
    return normals[first[order]], offsets[first[order]], total[order]


def convex_hull(points) -> Hull:
    """Facets (outward unit normals) and volume of the hull of ``points``.

    Affinely dependent input is handled inside its affine hull (see module
    docstring).
    """
    pts = np.unique(np.atleast_2d(np.asarray(points, dtype=float)), axis=0)
    if pts.size == 0:
        raise GeometryError("convex hull of an empty point set")
    d = pts.shape[1]
    aff = affine_hull(pts)
    r = aff.dim
    empty = np.zeros((0, d))
    if r == 0:
        return Hull(pts, empty, np.zeros(0), np.zeros(0), 0.0, aff)
    y = aff.project(pts)
    if r == 1:
        t = y[:, 0]
        u = aff.basis[0]
        normals = np.vstack([u, -u])
        offsets = np.array([t.max() + u @ aff.origin, -t.min() - u @ aff.origin])
        return Hull(pts, normals, offsets, np.ones(2), float(t.max() - t.min()), aff)

    try:
        qh, lo, span = _qhull(y)
    except QhullError as exc:
        raise GeometryError(f"hull computation failed: {exc}") from exc
    corners = y[qh.simplices]  # (k, r, r)
    # Qhull's own volume: after facet merges the triangulated pieces can
    # overlap slightly, so a fan over them may overcount.
    volume = float(qh.volume * np.prod(span))

    # facet planes back in unscaled subspace coordinates
    nz = qh.equations[:, :r] / span
    norm = np.linalg.norm(nz, axis=1)
    n_sub = nz / norm[:, None]
    off_sub = -(qh.equations[:, r] - (qh.equations[:, :r] / span) @ lo) / norm
    areas = _facet_areas(corners)
    n_sub, off_sub, areas = _merge_facets(qh.equations, n_sub, off_sub, areas)
    normals = n_sub @ aff.basis
    offsets = off_sub + normals @ aff.origin
    return Hull(pts, normals, offsets, areas, volume, aff)


def _restrict(normals, offsets, affine: AffineSubspace | None):
    """Express halfspaces in the coordinates of ``affine`` (if given)."""
    A = np.atleast_2d(np.asarray(normals, dtype=float))
    b = np.asarray(offsets, dtype=float).ravel()
    if affine is None:
        return A, b
    A_sub = A @ affine.basis.T
    b_sub = b - A @ affine.origin
    norm = np.linalg.norm(A_sub, axis=1)
    flat = norm <= 1e-9
    if np.any(b_sub[flat] < -1e-7 * (1.0 + np.abs(b)[flat])):
        raise GeometryError("halfspaces exclude the affine hull of the vertices")
    keep = ~flat
    return A_sub[keep] / norm[keep, None], b_sub[keep] / norm[keep]


def is_bounded(normals) -> bool:
    """True when the halfspace normals positively span their space."""
    A = np.atleast_2d(np.asarray(normals, dtype=float))
    m, r = A.shape
    if r == 0:
        return True
    if m <= r or np.linalg.matrix_rank(A) < r:
        return False
    if r == 1:
        return bool(np.any(A[:, 0] > 0) and np.any(A[:, 0] < 0))
    try:
        qh = _run_qhull(A)
    except QhullError:
        return False
    return bool(np.all(qh.equations[:, -1] < -1e-10))


def chebyshev_center(A, b, config: SolverConfig | None = None):
    """Center and radius of the largest ball inside ``{x | A x <= b}``.

    Returns ``(None, -inf)`` for an empty set and ``(x, inf)`` when the ball
    radius is unbounded.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).ravel()
    m, r = A.shape
    norms = np.linalg.norm(A, axis=1)
    c = np.zeros(r + 1)
    c[-1] = 1.0
    inst = ProblemInstance.from_arrays(
        c,
        A_ub=np.column_stack([A, norms]),
        b_ub=b,
        lb=np.r_[np.full(r, -np.inf), 0.0],
    )
    sol = solve_lp(inst, sense="max", config=config)
    if sol.status == "infeasible":
        return None, -np.inf
    if sol.status == "unbounded":
        return None, np.inf
    if not sol.optimal:
        raise GeometryError(f"Chebyshev center LP ended with status {sol.status}")
    return sol.primal[:r], float(sol.primal[r])


def _dual_hull(A, b, p):
    """Qhull of the dual points ``a_i / (b_i - a_i @ p)`` about interior ``p``."""
    slack = b - A @ p
    dual = A / slack[:, None]
    try:
        return _run_qhull(dual)
    except QhullError as exc:
        raise GeometryError(f"dual hull failed: {exc}") from exc


def _dual_vertices(qh, p) -> np.ndarray:
    eq = qh.equations
    r = eq.shape[1] - 1
    return p + eq[:, :r] / (-eq[:, r])[:, None]


def _unique_rows(verts, scale) -> np.ndarray:
    # facets of the dual sharing a plane give the same primal vertex
    key = np.round(verts / (scale * 1e-9))
    _, first = np.unique(key, axis=0, return_index=True)
    return np.sort(first)


def halfspace_vertices(A, b, config: SolverConfig | None = None) -> np.ndarray:
    """Vertices of the bounded polytope ``{x | A x <= b}`` by point-plane duality.

    Requires a nonempty interior. Each halfspace maps to the dual point
    ``a_i / (b_i - a_i @ p)`` about an interior point ``p``; facets of the
    dual hull correspond to primal vertices.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).ravel()
    r = A.shape[1]
    if not is_bounded(A):
        raise GeometryError("halfspaces do not bound a polytope")
    p, radius = chebyshev_center(A, b, config)
    if p is None or radius == -np.inf:
        raise GeometryError("empty halfspace intersection")
    scale = 1.0 + np.abs(b).max()
    if radius <= 1e-10 * scale:
        raise GeometryError("halfspace intersection has no interior")
    if r == 1:
        vals = A[:, 0] / (b - A[:, 0] * p[0])
        return p + np.array([[1.0 / vals.max()], [1.0 / vals.min()]])
    verts = _dual_vertices(_dual_hull(A, b, p), p)
    return verts[_unique_rows(verts, scale)]


# The face recursion visits about d * 2**(d-1) faces per vertex; beyond this
# the vertex hull is cheaper.
FACE_MAX_DIM = 8
# Relative outward shift used to break degenerate vertices (see outer_volume).
PERTURBATION = 1e-9


def _face_volume(simplices, verts, A, b, p) -> float:
    """Volume of the simple polytope ``{x | A x <= b}`` by recursion over faces.

    Row ``f`` of ``simplices`` lists the ``d`` facets meeting at vertex
    ``verts[f]``; a face is identified by the facets containing it. With
    ``q_F`` the projection of ``p`` onto the affine hull of face ``F``,
    ``vol(F) = sum_G h_G vol(G) / dim(F)`` over the facets ``G`` of ``F``,
    where ``h_G = +-|q_G - q_F|`` is the signed height of ``q_F`` above ``G``.
    """
    n_vert, d = simplices.shape
    S = np.sort(simplices, axis=1).astype(np.int64)
    base = int(S.max()) + 1
    combos = [list(itertools.combinations(range(d), m)) for m in range(d + 1)]
    position = [{c: i for i, c in enumerate(cs)} for cs in combos]
    inv = [np.zeros((n_vert, 1), dtype=np.int64)]
    q = [np.asarray(p, dtype=float)[None, :]]
    for m in range(1, d):
        # a sorted facet subset, packed into one integer
        keys = np.zeros((n_vert, len(combos[m])), dtype=np.int64)
        for j in range(m):
            keys = keys * base + S[:, [c[j] for c in combos[m]]]
        _, first, idx = np.unique(keys.ravel(), return_index=True, return_inverse=True)
        rows, cols = np.divmod(first, len(combos[m]))
        facets = S[rows[:, None], np.array(combos[m])[cols]]
        As = A[facets]
        resid = As @ p - b[facets]
        lam = np.linalg.solve(As @ As.transpose(0, 2, 1), resid[:, :, None])[:, :, 0]
        q.append(p - np.einsum("fmd,fm->fd", As, lam))
        inv.append(idx.reshape(n_vert, -1))
    inv.append(np.arange(n_vert)[:, None])
    q.append(verts)
    vol = np.ones(n_vert)
    for m in range(d - 1, -1, -1):
        parents, children, added = [], [], []
        for ci, c in enumerate(combos[m]):
            for j in range(d):
                if j in c:
                    continue
                child = position[m + 1][tuple(sorted(c + (j,)))]
                parents.append(inv[m][:, ci])
                children.append(inv[m + 1][:, child])
                added.append(S[:, j])
        parents = np.concatenate(parents)
        children = np.concatenate(children)
        added = np.concatenate(added)
        n_child = len(q[m + 1])
        _, first = np.unique(parents * n_child + children, return_index=True)
        parents, children, added = parents[first], children[first], added[first]
        step = q[m + 1][children] - q[m][parents]
        h = np.linalg.norm(step, axis=1) * np.sign(np.einsum("kd,kd->k", A[added], step))
        vol = np.bincount(parents, weights=h * vol[children], minlength=len(q[m])) / (d - m)
    return float(vol[0])


def outer_volume(normals, offsets, affine: AffineSubspace | None = None, config: SolverConfig | None = None) -> float:
    """Volume of ``{x | normals @ x <= offsets}`` (within ``affine`` if given).

    Returns ``inf`` while the halfspaces do not bound a polytope.
    """
    A, b = _restrict(normals, offsets, affine)
    r = A.shape[1]
    if r == 0:
        return 0.0
    if A.shape[0] <= r or np.linalg.matrix_rank(A) < r:
        return math.inf
    if r == 1:
        if not is_bounded(A):
            return math.inf
        pos, neg = A[:, 0] > 0, A[:, 0] < 0
        upper = np.min(b[pos] / A[pos, 0])
        lower = np.max(b[neg] / A[neg, 0])
        if upper < lower - 1e-9 * (1.0 + abs(upper)):
            raise GeometryError("empty halfspace intersection")
        return float(max(upper - lower, 0.0))
    p, radius = chebyshev_center(A, b, config)
    if radius == -np.inf:
        raise GeometryError("empty halfspace intersection")
    if p is None:
        return math.inf
    scale = 1.0 + np.abs(b).max()
    if radius <= 1e-10 * scale:
        return 0.0 if is_bounded(A) else math.inf
    qh = _dual_hull(A, b, p)
    # bounded iff the origin lies strictly inside the dual hull
    if not np.all(qh.equations[:, -1] < -1e-12 * np.abs(qh.points).max()):
        return math.inf
    verts = _dual_vertices(qh, p)
    keep = _unique_rows(verts, scale)
    if r > FACE_MAX_DIM:
        return convex_hull(verts[keep]).volume
    if len(keep) == len(verts):
        return _face_volume(qh.simplices, verts, A, b, p)
    # Several halfspaces meet at a vertex. Pushing each one out by a tiny,
    # distinct amount makes the polytope simple and can only grow it.
    push = np.random.default_rng(0).uniform(1.0, 2.0, size=len(b)) * PERTURBATION * scale
    qh = _dual_hull(A, b + push, p)
    verts = _dual_vertices(qh, p)
    if len(_unique_rows(verts, scale * 1e-3)) == len(verts):
        return _face_volume(qh.simplices, verts, A, b + push, p)
    return convex_hull(verts[_unique_rows(verts, scale)]).volume


def volume_gap(inner: float, outer: float) -> float:
    """Relative volume gap ``(outer - inner) / outer``; 1 while unbounded."""
    if not math.isfinite(outer):
        return 1.0
    if outer <= 0.0:
        return 0.0
    return float(min(1.0, max(0.0, (outer - inner) / outer)))


@dataclass(frozen=True)
class Polytope:
    """``{x | A x <= b}`` with unit-norm rows."""

    A: np.ndarray
    b: np.ndarray

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    @classmethod
    def from_arrays(cls, A, b, normalize: bool = True) -> "Polytope":
        A = np.atleast_2d(np.asarray(A, dtype=float))
        b = np.asarray(b, dtype=float).ravel()
        if A.shape[0] != b.size:
            raise GeometryError("A and b sizes differ")
        if normalize:
            norm = np.linalg.norm(A, axis=1)
            if np.any(norm == 0):
                raise GeometryError("zero row in halfspace system")
            A, b = A / norm[:, None], b / norm
        A.setflags(write=False)
        b.setflags(write=False)
        return cls(A, b)

    def tolerance(self) -> np.ndarray:
        """Per-row slack accepted when testing lattice points."""
        return 1e-6 * (1.0 + np.abs(self.b))

    def contains(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return np.all(pts @ self.A.T <= self.b + self.tolerance(), axis=1)

    def is_empty(self, config: SolverConfig | None = None) -> bool:
        inst = ProblemInstance.from_arrays(np.zeros(self.dim), self.A, self.b + self.tolerance(),
                                           lb=np.full(self.dim, -np.inf))
        return solve_lp(inst, config=config).status == "infeasible"

    def to_dict(self) -> dict:
        return {"dim": self.dim, "A": self.A.tolist(), "b": self.b.tolist()}

    @classmethod
    def from_dict(cls, doc: dict) -> "Polytope":
        A = np.asarray(doc["A"], dtype=float).reshape(-1, int(doc["dim"]))
        return cls.from_arrays(A, doc["b"], normalize=False)


@dataclass
class HullState:
    """Exploration geometry: found vertices, inner hull L and outer polyhedron U."""

    dim: int
    vertices: np.ndarray = None
    outer_normals: np.ndarray = None
    outer_offsets: np.ndarray = None
    hull: Hull | None = None
    inner_volume: float = 0.0
    outer_volume: float = math.inf
    config: SolverConfig | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.vertices is None:
            self.vertices = np.zeros((0, self.dim))
        if self.outer_normals is None:
            self.outer_normals = np.zeros((0, self.dim))
            self.outer_offsets = np.zeros(0)

    @property
    def inner_normals(self) -> np.ndarray:
        return self.hull.normals if self.hull is not None else np.zeros((0, self.dim))

    @property
    def inner_offsets(self) -> np.ndarray:
        return self.hull.offsets if self.hull is not None else np.zeros(0)

    @property
    def inner_areas(self) -> np.ndarray:
        return self.hull.areas if self.hull is not None else np.zeros(0)

    @property
    def affine(self) -> AffineSubspace | None:
        return self.hull.affine if self.hull is not None else None

    @property
    def degenerate(self) -> bool:
        return self.hull is not None and self.hull.degenerate

    @property
    def gap(self) -> float:
        return volume_gap(self.inner_volume, self.outer_volume)

    def add(self, directions, vertices) -> int:
        """Record probe results; returns the number of new distinct vertices."""
        directions = np.atleast_2d(np.asarray(directions, dtype=float)).reshape(-1, self.dim)
        vertices = np.atleast_2d(np.asarray(vertices, dtype=float)).reshape(-1, self.dim)
        before = len(self.vertices)
        self.outer_normals = np.vstack([self.outer_normals, directions])
        self.outer_offsets = np.concatenate([self.outer_offsets, np.einsum("ij,ij->i", directions, vertices)])
        if len(self.vertices):
            scale = 1.0 + np.abs(self.vertices).max()
        else:
            scale = 1.0 + np.abs(vertices).max()
        for v in vertices:
            if len(self.vertices) and np.min(np.abs(self.vertices - v).max(axis=1)) <= 1e-9 * scale:
                continue
            self.vertices = np.vstack([self.vertices, v])
        self.refresh()
        return len(self.vertices) - before

    def refresh(self) -> None:
        if len(self.vertices) == 0:
            return
        self.hull = convex_hull(self.vertices)
        self.inner_volume = self.hull.volume
        if len(self.outer_offsets):
            self.outer_volume = outer_volume(self.outer_normals, self.outer_offsets, self.hull.affine, self.config)

    def check(self, tol: float = 1e-7) -> None:
        """Assert the structural invariants (used by tests and debugging)."""
        scale = 1.0 + np.abs(self.vertices).max(initial=0.0)
        if self.hull is not None and len(self.hull.offsets):
            viol = self.vertices @ self.hull.normals.T - self.hull.offsets
            assert viol.max() <= tol * scale, f"vertex outside inner hull by {viol.max()}"
        if len(self.outer_offsets):
            viol = self.vertices @ self.outer_normals.T - self.outer_offsets
            assert viol.max() <= tol * scale, f"vertex outside outer polyhedron by {viol.max()}"
        if math.isfinite(self.outer_volume):
            assert self.inner_volume <= self.outer_volume * (1 + 1e-9) + 1e-12

    def dump_csv(self) -> str:
        """Vertices and facets as CSV text for external plotting."""
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["kind", "index", *[f"x{i}" for i in range(self.dim)], "offset", "area"])
        for i, v in enumerate(self.vertices):
            w.writerow(["vertex", i, *[repr(float(x)) for x in v], "", ""])
        for i, (n, o, a) in enumerate(zip(self.inner_normals, self.inner_offsets, self.inner_areas)):
            w.writerow(["facet", i, *[repr(float(x)) for x in n], repr(float(o)), repr(float(a))])
        for i, (n, o) in enumerate(zip(self.outer_normals, self.outer_offsets)):
            w.writerow(["outer", i, *[repr(float(x)) for x in n], repr(float(o)), ""])
        return out.getvalue()


def gap(hull: HullState) -> float:
    return hull.gap


def to_halfspaces(state) -> Polytope:
    """Halfspace system whose solution set is exactly the inner hull.

    Lower-dimensional hulls add a pair of opposite rows per flat direction.
    """
    hull = state.hull if isinstance(state, HullState) else state
    if hull is None:
        raise GeometryError("no hull to convert")
    A = [hull.normals]
    b = [hull.offsets]
    if hull.degenerate:
        comp = hull.affine.complement()
        level = comp @ hull.affine.origin
        A += [comp, -comp]
        b += [level, -level]
    return Polytope.from_arrays(np.vstack(A), np.concatenate(b))
