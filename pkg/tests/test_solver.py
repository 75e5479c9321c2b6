import numpy as np
import pytest

from discrete_maa.problem import ProblemInstance
from discrete_maa.solver import (
    INFEASIBLE,
    ITERATION_LIMIT,
    OPTIMAL,
    UNBOUNDED,
    SolverConfig,
    solve_lp,
    solve_milp,
)

from oracles import exhaustive_milp, textbook_simplex


def random_lp(seed):
    """Feasible, bounded dense LP with mixed row types and integer data."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(5, 16))
    m_ub = int(rng.integers(3, 9))
    m_eq = int(rng.integers(0, 3))
    x0 = rng.integers(0, 5, size=n)
    A_ub = rng.integers(-4, 10, size=(m_ub, n))
    b_ub = A_ub @ x0 + rng.integers(0, 6, size=m_ub)
    # a cap on the total keeps every instance bounded
    A_ub = np.vstack([A_ub, np.ones(n, dtype=int)])
    b_ub = np.append(b_ub, x0.sum() + 20)
    A_eq = rng.integers(-3, 6, size=(m_eq, n))
    b_eq = A_eq @ x0
    c = rng.integers(-10, 11, size=n)
    return c, A_ub, b_ub, A_eq, b_eq


@pytest.mark.parametrize("seed", range(20))
@pytest.mark.parametrize("rule", ["bland", "lexicographic"])
def test_random_lp_matches_textbook_oracle(seed, rule):
    c, A_ub, b_ub, A_eq, b_eq = random_lp(seed)
    status, expected, _ = textbook_simplex(c, A_ub, b_ub, A_eq, b_eq)
    assert status == "optimal"
    inst = ProblemInstance.from_arrays(c, A_ub, b_ub, A_eq, b_eq)
    sol = solve_lp(inst, config=SolverConfig(anti_cycling=rule))
    assert sol.status == OPTIMAL
    assert sol.objective == pytest.approx(float(expected), rel=1e-6, abs=1e-6)
    assert inst.max_violation(sol.primal) < 1e-7


@pytest.mark.parametrize("seed", range(10))
def test_strong_duality(seed):
    # min c x, A x >= b, x >= 0  <->  max b y, A^T y <= c, y >= 0
    rng = np.random.default_rng(100 + seed)
    n, m = 6, 5
    A = rng.uniform(0.1, 3.0, size=(m, n))
    b = rng.uniform(1.0, 5.0, size=m)
    c = rng.uniform(1.0, 4.0, size=n)
    primal = solve_lp(ProblemInstance.from_arrays(c, -A, -b))
    dual = solve_lp(ProblemInstance.from_arrays(b, A.T, c), sense="max")
    assert primal.optimal and dual.optimal
    assert primal.objective == pytest.approx(dual.objective, rel=1e-6)


def test_min_x_at_least_three():
    inst = ProblemInstance.from_arrays([1.0], A_ub=[[-1.0]], b_ub=[-3.0])
    sol = solve_lp(inst)
    assert sol.status == OPTIMAL
    assert sol.objective == pytest.approx(3.0)


def test_max_box_corner():
    inst = ProblemInstance.from_arrays([1.0, 1.0], A_ub=np.eye(2), b_ub=[1.0, 1.0])
    sol = solve_lp(inst, sense="max")
    assert sol.objective == pytest.approx(2.0)
    assert sol.primal == pytest.approx([1.0, 1.0])


def test_infeasible_and_unbounded():
    infeasible = ProblemInstance.from_arrays([1.0], A_ub=[[1.0], [-1.0]], b_ub=[1.0, -2.0])
    assert solve_lp(infeasible).status == INFEASIBLE
    unbounded = ProblemInstance.from_arrays([-1.0, 0.0], A_ub=[[0.0, 1.0]], b_ub=[1.0])
    assert solve_lp(unbounded).status == UNBOUNDED


def test_free_and_upper_bounded_variables():
    # min x + y with x free in [-2, inf), y in (-inf, 3] and x + y >= -5
    inst = ProblemInstance.from_arrays(
        [1.0, 1.0], A_ub=[[-1.0, -1.0]], b_ub=[5.0], lb=[-2.0, -np.inf], ub=[np.inf, 3.0]
    )
    sol = solve_lp(inst)
    assert sol.objective == pytest.approx(-5.0)
    free = ProblemInstance.from_arrays([1.0], A_ub=[[-1.0]], b_ub=[4.0], lb=[-np.inf])
    assert solve_lp(free).primal == pytest.approx([-4.0])


def test_iteration_limit_is_explicit():
    c, A_ub, b_ub, A_eq, b_eq = random_lp(3)
    inst = ProblemInstance.from_arrays(c, A_ub, b_ub, A_eq, b_eq)
    sol = solve_lp(inst, config=SolverConfig(max_iterations=1))
    assert sol.status == ITERATION_LIMIT
    assert not sol.optimal


def test_degenerate_cycling_example():
    # Beale's example cycles under the textbook largest-coefficient rule.
    c = [-0.75, 150.0, -0.02, 6.0]
    A_ub = [[0.25, -60.0, -0.04, 9.0], [0.5, -90.0, -0.02, 3.0], [0.0, 0.0, 1.0, 0.0]]
    b_ub = [0.0, 0.0, 1.0]
    for rule in ("bland", "lexicographic"):
        sol = solve_lp(ProblemInstance.from_arrays(c, A_ub, b_ub), config=SolverConfig(anti_cycling=rule))
        assert sol.objective == pytest.approx(-0.05)


def test_solution_is_a_vertex():
    # Optimal face is an edge; the solver must still return one of its endpoints.
    inst = ProblemInstance.from_arrays([1.0, 1.0], A_ub=[[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]], b_ub=[-2.0, 2.0, 2.0])
    sol = solve_lp(inst)
    active = np.sum(np.isclose(np.r_[inst.A_ub @ sol.primal - inst.b_ub, -sol.primal], 0.0, atol=1e-9))
    assert active >= 2


def test_determinism():
    c, A_ub, b_ub, A_eq, b_eq = random_lp(7)
    inst = ProblemInstance.from_arrays(c, A_ub, b_ub, A_eq, b_eq)
    a, b = solve_lp(inst), solve_lp(inst)
    assert a.primal.tobytes() == b.primal.tobytes()


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(feasibility_tol=0.0)
    with pytest.raises(ValueError):
        SolverConfig(anti_cycling="random")


# --- branch and bound -------------------------------------------------------


def random_knapsack(seed):
    rng = np.random.default_rng(200 + seed)
    n = 2 if seed < 5 else 3
    steps = rng.choice([1.0, 2.0, 5.0], size=n)
    A = rng.uniform(1.0, 6.0, size=(2, n))
    b = A @ (steps * 4.5)
    # maximize value under two resource rows, i.e. minimize -value
    c = -rng.uniform(1.0, 5.0, size=n)
    return c, A, b, steps


@pytest.mark.parametrize("seed", range(10))
def test_milp_matches_exhaustive_enumeration(seed):
    c, A, b, steps = random_knapsack(seed)
    limit = 10
    bounds_A = np.vstack([A, np.eye(len(c))])
    bounds_b = np.concatenate([b, steps * limit])
    expected, _ = exhaustive_milp(c, bounds_A, bounds_b, steps, limit)
    inst = ProblemInstance.from_arrays(c, bounds_A, bounds_b, steps=steps)
    sol = solve_milp(inst)
    assert sol.status == OPTIMAL
    assert sol.objective == pytest.approx(expected, rel=1e-6, abs=1e-9)
    units = sol.primal / steps
    assert np.allclose(units, np.round(units), atol=1e-6)
    relaxed = solve_lp(inst)
    assert relaxed.objective <= sol.objective + 1e-9


def test_integral_relaxation_needs_no_branching():
    inst = ProblemInstance.from_arrays([-1.0, -1.0], A_ub=np.eye(2), b_ub=[3.0, 4.0], steps=[1.0, 1.0])
    sol = solve_milp(inst)
    assert sol.nodes == 0
    assert sol.objective == pytest.approx(-7.0)


def test_milp_infeasible():
    inst = ProblemInstance.from_arrays([1.0], A_ub=[[1.0], [-1.0]], b_ub=[0.5, -0.2], steps=[1.0])
    assert solve_milp(inst).status == INFEASIBLE


def test_milp_lattice_step():
    # min -x with 0 <= x <= 1.3, x a multiple of 0.5
    inst = ProblemInstance.from_arrays([-1.0], A_ub=[[1.0]], b_ub=[1.3], steps=[0.5])
    sol = solve_milp(inst)
    assert sol.primal[0] == pytest.approx(1.0)


@pytest.mark.parametrize("seed", range(4))
def test_highs_backend_agrees(seed):
    c, A, b, steps = random_knapsack(seed)
    inst = ProblemInstance.from_arrays(c, A, b, steps=steps, ub=steps * 10)
    ours = solve_milp(inst)
    theirs = solve_milp(inst, SolverConfig(backend="highs"))
    assert ours.objective == pytest.approx(theirs.objective, rel=1e-6)
    lp_ours = solve_lp(inst)
    lp_theirs = solve_lp(inst, config=SolverConfig(backend="highs"))
    assert lp_ours.objective == pytest.approx(lp_theirs.objective, rel=1e-6)
