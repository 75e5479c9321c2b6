"""Linear problem container shared by the model builder and the solvers."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np


def _frozen(a, shape=None, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    if shape is not None:
        arr = arr.reshape(shape)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ProblemInstance:
    """``min c @ x + constant`` subject to ``A_ub x <= b_ub``, ``A_eq x = b_eq``
    and ``lb <= x <= ub``.

    ``steps[j] > 0`` marks variable ``j`` as restricted to nonnegative integer
    multiples of ``steps[j]`` (a capacity lattice). ``design_index`` lists the
    columns holding design variables; everything else is operation.
    """

    c: np.ndarray
    A_ub: np.ndarray
    b_ub: np.ndarray
    A_eq: np.ndarray
    b_eq: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    steps: np.ndarray
    design_index: np.ndarray
    constant: float = 0.0
    var_names: tuple[str, ...] = ()
    ub_names: tuple[str, ...] = ()
    eq_names: tuple[str, ...] = ()
    mode: str = "continuous"
    meta: dict = field(default_factory=dict, compare=False)

    @classmethod
    def from_arrays(
        cls,
        c,
        A_ub=None,
        b_ub=None,
        A_eq=None,
        b_eq=None,
        lb=None,
        ub=None,
        steps=None,
        design_index=None,
        constant: float = 0.0,
        var_names=None,
        ub_names=None,
        eq_names=None,
        mode: str | None = None,
        meta: dict | None = None,
    ) -> "ProblemInstance":
        c = np.asarray(c, dtype=float).ravel()
        n = c.size
        A_ub = np.zeros((0, n)) if A_ub is None else np.asarray(A_ub, dtype=float).reshape(-1, n)
        A_eq = np.zeros((0, n)) if A_eq is None else np.asarray(A_eq, dtype=float).reshape(-1, n)
        b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float).ravel()
        b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float).ravel()
        if b_ub.size != A_ub.shape[0] or b_eq.size != A_eq.shape[0]:
            raise ValueError("constraint matrix and right-hand side sizes differ")
        lb = np.zeros(n) if lb is None else np.broadcast_to(np.asarray(lb, dtype=float), (n,))
        ub = np.full(n, np.inf) if ub is None else np.broadcast_to(np.asarray(ub, dtype=float), (n,))
        steps = np.zeros(n) if steps is None else np.broadcast_to(np.asarray(steps, dtype=float), (n,))
        if design_index is None:
            design_index = np.arange(n)
        if mode is None:
            mode = "discrete" if np.any(steps > 0) else "continuous"
        return cls(
            c=_frozen(c),
            A_ub=_frozen(A_ub),
            b_ub=_frozen(b_ub),
            A_eq=_frozen(A_eq),
            b_eq=_frozen(b_eq),
            lb=_frozen(lb),
            ub=_frozen(ub),
            steps=_frozen(steps),
            design_index=_frozen(design_index, dtype=int),
            constant=float(constant),
            var_names=tuple(var_names or ()),
            ub_names=tuple(ub_names or ()),
            eq_names=tuple(eq_names or ()),
            mode=mode,
            meta=dict(meta or {}),
        )

    @property
    def n_vars(self) -> int:
        return self.c.size

    @property
    def n_design(self) -> int:
        return self.design_index.size

    @property
    def is_discrete(self) -> bool:
        return bool(np.any(self.steps > 0))

    def design_of(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x)[self.design_index]

    def objective_value(self, x: np.ndarray) -> float:
        return float(self.c @ x + self.constant)

    def relaxed(self) -> "ProblemInstance":
        return replace(self, steps=_frozen(np.zeros(self.n_vars)), mode="continuous")

    def with_objective(self, c, constant: float | None = None) -> "ProblemInstance":
        c = _frozen(np.asarray(c, dtype=float).ravel())
        if c.size != self.n_vars:
            raise ValueError(f"objective has {c.size} entries, expected {self.n_vars}")
        return replace(self, c=c, constant=self.constant if constant is None else float(constant))

    def with_bounds(self, lb=None, ub=None) -> "ProblemInstance":
        return replace(
            self,
            lb=self.lb if lb is None else _frozen(lb),
            ub=self.ub if ub is None else _frozen(ub),
        )

    def with_ub_rows(self, A, b, names=()) -> "ProblemInstance":
        A = np.asarray(A, dtype=float).reshape(-1, self.n_vars)
        b = np.asarray(b, dtype=float).ravel()
        names = tuple(names) or tuple(f"extra_{i}" for i in range(len(b)))
        return replace(
            self,
            A_ub=_frozen(np.vstack([self.A_ub, A])),
            b_ub=_frozen(np.concatenate([self.b_ub, b])),
            ub_names=self.ub_names + names if self.ub_names else (),
        )

    def max_violation(self, x: np.ndarray) -> float:
        """Largest scaled constraint violation of ``x`` (0 when feasible)."""
        x = np.asarray(x, dtype=float)
        worst = 0.0
        if self.b_ub.size:
            r = (self.A_ub @ x - self.b_ub) / (1.0 + np.abs(self.b_ub))
            worst = max(worst, float(r.max()))
        if self.b_eq.size:
            r = np.abs(self.A_eq @ x - self.b_eq) / (1.0 + np.abs(self.b_eq))
            worst = max(worst, float(r.max()))
        worst = max(worst, float(np.max(self.lb - x, initial=0.0)))
        finite = np.isfinite(self.ub)
        if finite.any():
            worst = max(worst, float(np.max(x[finite] - self.ub[finite], initial=0.0)))
        return worst

    def dump(self) -> str:
        """Plain-text dump of the constraint system (MPS-like, for debugging)."""
        names = self.var_names or tuple(f"x{j}" for j in range(self.n_vars))
        lines = [f"NAME {self.meta.get('name', 'instance')}", "OBJECTIVE"]
        lines += [f"  {names[j]} {v:.12g}" for j, v in enumerate(self.c) if v != 0.0]
        lines.append(f"  CONSTANT {self.constant:.12g}")
        for tag, A, b, rnames in (
            ("L", self.A_ub, self.b_ub, self.ub_names),
            ("E", self.A_eq, self.b_eq, self.eq_names),
        ):
            for i in range(A.shape[0]):
                rname = rnames[i] if rnames else f"{tag}{i}"
                terms = " ".join(f"{A[i, j]:+.12g}*{names[j]}" for j in np.flatnonzero(A[i]))
                lines.append(f"{tag} {rname}: {terms} {'<=' if tag == 'L' else '='} {b[i]:.12g}")
        lines.append("BOUNDS")
        for j in range(self.n_vars):
            step = f" step {self.steps[j]:.12g}" if self.steps[j] > 0 else ""
            lines.append(f"  {self.lb[j]:.12g} <= {names[j]} <= {self.ub[j]:.12g}{step}")
        return "\n".join(lines) + "\n"
