"""Dense two-phase primal simplex on a full tableau.

Works on the standard form ``min c @ x, A x = b, x >= 0``. Every
``REFRESH_EVERY`` pivots the right-hand side and reduced costs are recomputed
from an LU factorization of the basis; the whole tableau body is rebuilt
every ``REBUILD_EVERY`` pivots. Both keep round-off from accumulating on the
larger dispatch problems.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import LinAlgError, blas, lu_factor, lu_solve

REFRESH_EVERY = 50
REBUILD_EVERY = 600
DEGENERATE_STREAK = 40
PIVOT_TOL = 1e-9
OPT_TOL = 1e-9


class SimplexResult:
    __slots__ = ("status", "x", "basis", "iterations")

    def __init__(self, status, x=None, basis=None, iterations=0):
        self.status = status
        self.x = x
        self.basis = basis
        self.iterations = iterations


def _equilibrate(A, b, c):
    """Row then column max-norm scaling; returns scaled data and factors."""
    A = A.copy()
    row = np.ones(A.shape[0])
    col = np.ones(A.shape[1])
    for _ in range(2):
        rmax = np.abs(A).max(axis=1) if A.shape[1] else np.zeros(A.shape[0])
        rmax[rmax == 0] = 1.0
        A /= rmax[:, None]
        row /= rmax
        cmax = np.abs(A).max(axis=0) if A.shape[0] else np.zeros(A.shape[1])
        cmax[cmax == 0] = 1.0
        A /= cmax[None, :]
        col /= cmax
    b = b * row
    c = c * col
    cscale = np.abs(c).max() if c.size else 1.0
    if cscale == 0:
        cscale = 1.0
    return A, b, c / cscale, row, col, cscale


class _Tableau:
    def __init__(self, A_full, b, basis, rule):
        self.A = A_full
        self.b = b
        self.m, self.N = A_full.shape
        self.basis = np.array(basis, dtype=int)
        self.init_cols = self.basis.copy()
        self.rule = rule
        self.T = np.zeros((self.m + 1, self.N + 1), order="F")
        self.T[: self.m, : self.N] = A_full
        self.T[: self.m, self.N] = b
        self.cost = np.zeros(self.N)
        self.since_refactor = 0
        self.since_rebuild = 0

    def set_cost(self, cost):
        self.cost = cost
        self.refactor()

    def refactor(self, rebuild=False):
        """Recompute rhs and reduced costs from the basis (and the body if asked)."""
        m, N = self.m, self.N
        lu = None
        if m:
            try:
                lu = lu_factor(self.A[:, self.basis], check_finite=False)
            except (LinAlgError, ValueError):
                lu = None
            if lu is not None and not np.all(np.isfinite(lu[0])):
                lu = None
        if lu is not None:
            if rebuild:
                body = lu_solve(lu, self.A, check_finite=False)
                if np.all(np.isfinite(body)):
                    self.T[:m, :N] = body
                self.since_rebuild = 0
            rhs = lu_solve(lu, self.b, check_finite=False)
            y = lu_solve(lu, self.cost[self.basis], trans=1, check_finite=False)
            self.T[:m, N] = rhs
            self.T[m, :N] = self.cost - y @ self.A
            self.T[m, N] = -(y @ self.b)
        else:
            cB = self.cost[self.basis]
            self.T[m, :N] = self.cost - cB @ self.T[:m, :N]
            self.T[m, N] = -(cB @ self.T[:m, N])
        self.T[m, self.basis] = 0.0
        self.since_refactor = 0

    def pivot(self, r, k):
        T = self.T
        T[r] /= T[r, k]
        col = T[:, k].copy()
        col[r] = 0.0
        row = T[r].copy()
        # in-place rank-one update T -= col * row
        self.T = T = blas.dger(-1.0, col, row, a=T, overwrite_a=1)
        T[:, k] = 0.0
        T[r, k] = 1.0
        self.basis[r] = k
        self.since_refactor += 1
        self.since_rebuild += 1
        if self.since_rebuild >= REBUILD_EVERY:
            self.refactor(rebuild=True)
        elif self.since_refactor >= REFRESH_EVERY:
            self.refactor()

    def remove_row(self, r):
        keep = np.arange(self.m) != r
        self.T = np.asfortranarray(np.vstack([self.T[: self.m][keep], self.T[self.m :]]))
        self.A = self.A[keep]
        self.b = self.b[keep]
        self.basis = self.basis[keep]
        self.init_cols = self.init_cols[keep]
        self.m -= 1

    def entering(self, allowed, bland):
        rc = np.where(allowed, self.T[self.m, : self.N], np.inf)
        if bland:
            cand = np.flatnonzero(rc < -OPT_TOL)
            return int(cand[0]) if cand.size else -1
        k = int(np.argmin(rc))
        return k if rc[k] < -OPT_TOL else -1

    def leaving(self, k, bland):
        m = self.m
        col = self.T[:m, k]
        pos = np.flatnonzero(col > PIVOT_TOL)
        if pos.size == 0:
            return -1, 0.0
        rhs = np.maximum(self.T[pos, self.N], 0.0)
        ratios = rhs / col[pos]
        theta = ratios.min()
        ties = pos[ratios <= theta + 1e-12 * (1.0 + theta)]
        if ties.size == 1:
            return int(ties[0]), theta
        if bland:
            return int(ties[np.argmin(self.basis[ties])]), theta
        if self.rule == "lexicographic":
            # Lexicographic ratio test on rows of B^-1 (initial identity columns).
            cand = ties
            binv = self.T[:m, self.init_cols]
            for j in range(binv.shape[1]):
                vals = binv[cand, j] / col[cand]
                best = vals.min()
                cand = cand[vals <= best + 1e-12 * (1.0 + abs(best))]
                if cand.size == 1:
                    break
            return int(cand[0]), theta
        return int(ties[np.argmax(col[ties])]), theta

    def run(self, allowed, max_iter, iterations):
        """Iterate to optimality. Returns (status, iterations)."""
        streak = 0
        bland = self.rule == "bland_only"
        while True:
            if iterations >= max_iter:
                return "iteration_limit", iterations
            use_bland = bland or (self.rule == "bland" and streak > DEGENERATE_STREAK)
            k = self.entering(allowed, use_bland)
            if k < 0:
                # Confirm on a fresh factorization before declaring optimality.
                if self.since_refactor:
                    self.refactor()
                    k = self.entering(allowed, use_bland)
                if k < 0:
                    return "optimal", iterations
            r, theta = self.leaving(k, use_bland)
            if r < 0:
                if self.since_refactor:
                    self.refactor()
                    continue
                return "unbounded", iterations
            self.pivot(r, k)
            iterations += 1
            streak = streak + 1 if theta <= 1e-12 else 0


def simplex_standard(c, A, b, basis_hint=None, max_iter=50_000, rule="bland", feas_tol=1e-7):
    """Minimize ``c @ x`` subject to ``A x = b``, ``x >= 0``.

    ``basis_hint[i]`` may name a column that is a unit vector on row ``i``
    (a slack); rows without one get an artificial variable.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float).copy()
    c = np.asarray(c, dtype=float)
    m, n = A.shape
    if m == 0:
        if np.any(c < -OPT_TOL * max(1.0, np.abs(c).max(initial=0.0))):
            return SimplexResult("unbounded")
        return SimplexResult("optimal", np.zeros(n), np.zeros(0, dtype=int))

    neg = b < 0
    A = A.copy()
    A[neg] *= -1.0
    b[neg] *= -1.0
    hint = np.full(m, -1) if basis_hint is None else np.asarray(basis_hint).copy()
    hint[neg] = -1

    As, bs, cs, row_s, col_s, cscale = _equilibrate(A, b, c)
    for i in range(m):
        j = hint[i]
        if j >= 0 and not (As[i, j] > 0 and np.count_nonzero(As[:, j]) == 1):
            hint[i] = -1
    for i in range(m):
        j = hint[i]
        if j >= 0 and As[i, j] != 1.0:
            s = As[i, j]
            As[:, j] /= s
            col_s[j] /= s
            cs[j] /= s

    art_rows = np.flatnonzero(hint < 0)
    n_art = art_rows.size
    A_full = np.zeros((m, n + n_art))
    A_full[:, :n] = As
    A_full[art_rows, n + np.arange(n_art)] = 1.0
    basis = hint.copy()
    basis[art_rows] = n + np.arange(n_art)

    tab = _Tableau(A_full, bs, basis, rule)
    is_art = np.zeros(n + n_art, dtype=bool)
    is_art[n:] = True
    iterations = 0

    if n_art:
        tab.set_cost(is_art.astype(float))
        status, iterations = tab.run(np.ones(n + n_art, dtype=bool), max_iter, iterations)
        if status == "iteration_limit":
            return SimplexResult(status, iterations=iterations)
        if -tab.T[tab.m, tab.N] > feas_tol * (1.0 + np.abs(bs).max()):
            return SimplexResult("infeasible", iterations=iterations)
        r = 0
        while r < tab.m:
            if is_art[tab.basis[r]]:
                row = np.where(is_art, 0.0, np.abs(tab.T[r, : tab.N]))
                j = int(np.argmax(row))
                if row[j] > 1e-7:
                    tab.pivot(r, j)
                    r += 1
                else:
                    tab.remove_row(r)
                continue
            r += 1

    tab.set_cost(np.concatenate([cs, np.zeros(n_art)]))
    status, iterations = tab.run(~is_art, max_iter, iterations)
    if status != "optimal":
        return SimplexResult(status, iterations=iterations)

    tab.refactor(rebuild=tab.since_rebuild > REFRESH_EVERY)
    xs = np.zeros(n + n_art)
    xs[tab.basis] = tab.T[: tab.m, tab.N]
    xs = np.maximum(xs[:n], 0.0)
    return SimplexResult("optimal", xs * col_s, tab.basis.copy(), iterations)
