import math

import numpy as np
import pytest

from discrete_maa.explorer import (
    ExplorationConfig,
    ExplorationError,
    diagonal_directions,
    explore,
    explore_region,
    facet_directions,
    initial_directions,
    near_optimal_constraint,
)
from discrete_maa.geometry import HullState
from discrete_maa.model import assemble, assemble_fixed_design, model_from_dict
from discrete_maa.solver import SolverConfig, solve_lp, solve_milp

from models import toy_doc


def support(points):
    points = np.asarray(points, dtype=float)
    return lambda n: points[np.argmax(points @ n)]


def test_initial_directions():
    dirs = initial_directions(2)
    assert [tuple(d) for d in dirs] == [(1, 0), (-1, 0), (0, 1), (0, -1)]
    assert len(initial_directions(7)) == 14
    assert np.allclose([np.linalg.norm(d) for d in initial_directions(5)], 1.0)
    with pytest.raises(ValueError):
        initial_directions(0)


def test_diagonal_directions_unit_sign_patterns():
    dirs = diagonal_directions(3)
    assert len(dirs) == 8 and np.allclose(np.linalg.norm(dirs, axis=1), 1.0)


def hull_of(points):
    state = HullState(len(points[0]))
    state.vertices = np.asarray(points, dtype=float)
    state.refresh()
    return state


def test_facet_directions_square_all_seen():
    square = hull_of([[0, 0], [1, 0], [0, 1], [1, 1]])
    assert facet_directions(square, initial_directions(2)) == []


def test_facet_directions_triangle_and_order():
    tri = hull_of([[0, 0], [4, 0], [0, 1]])
    dirs = facet_directions(tri, [])
    assert len(dirs) == 3
    # largest facet (the hypotenuse, length sqrt(17)) first, then the base
    assert np.allclose(dirs[0], np.array([1, 4]) / math.sqrt(17))
    assert np.allclose(dirs[1], [0, -1])
    assert len(facet_directions(tri, [], limit=2)) == 2


def test_facet_directions_dedup():
    tri = hull_of([[0, 0], [4, 0], [0, 1]])
    tilt = 5e-7
    seen = [np.array([math.sin(tilt), -math.cos(tilt)])]
    dirs = facet_directions(tri, seen, dedup_angle=1e-6)
    assert len(dirs) == 2 and not any(np.allclose(d, [0, -1]) for d in dirs)


def test_box_region_is_captured_by_axis_probes():
    corners = np.array([[a, b, c] for a in (0, 2) for b in (1, 3) for c in (0, 5)], dtype=float)
    state, log, evaluated, reason = explore_region(support(corners), 3, ExplorationConfig(delta=0.05))
    # the axis probes pin the outer polyhedron to the box exactly; the few
    # corners they return need some facet probes to fill the inner hull
    assert log[5]["outer_volume"] == pytest.approx(20.0)
    assert reason == "gap" and state.gap <= 1e-9 and evaluated <= 6 + 8
    assert state.inner_volume == pytest.approx(20.0)


def test_square_with_corner_probes_stops_after_axis_probes():
    # each axis probe lands on a different corner
    answers = {(1, 0): [2, 1], (-1, 0): [0, 3], (0, 1): [2, 3], (0, -1): [0, 1]}
    probe = lambda n: np.array(answers[tuple(int(v) for v in n)], dtype=float)
    state, _, evaluated, reason = explore_region(probe, 2, ExplorationConfig())
    assert evaluated == 4 and reason == "gap" and state.gap == pytest.approx(0.0, abs=1e-12)


def test_random_region_invariants():
    pts = np.random.default_rng(4).normal(size=(60, 3))
    state, log, evaluated, reason = explore_region(support(pts), 3, ExplorationConfig(delta=0.02))
    assert reason == "gap" and state.gap <= 0.02
    assert len(state.vertices) <= evaluated
    state.check()
    full = [r["gap"] for r in log if r["subspace_dim"] == 3]
    assert all(b <= a + 1e-12 for a, b in zip(full, full[1:]))
    assert [r["iteration"] for r in log] == list(range(1, evaluated + 1))


def test_max_directions_stop():
    pts = np.random.default_rng(5).normal(size=(200, 4))
    _, _, evaluated, reason = explore_region(support(pts), 4, ExplorationConfig(delta=1e-6, max_directions=12))
    assert evaluated == 12 and reason == "max_directions"


def test_parallel_workers_batch():
    pts = np.random.default_rng(6).normal(size=(40, 3))
    state, _, evaluated, reason = explore_region(support(pts), 3, ExplorationConfig(delta=0.05, parallel_workers=3))
    assert reason == "gap" and state.gap <= 0.05


@pytest.fixture(scope="module")
def toy3():
    return model_from_dict(toy_doc(battery=True))


def test_near_optimal_constraint(toy3):
    inst = assemble(toy3, "continuous")
    tac_star = solve_lp(inst).objective
    near = near_optimal_constraint(inst, tac_star, 0.01)
    assert near.meta["budget"] == pytest.approx(1.01 * tac_star)
    again = solve_lp(near.with_objective(inst.c, inst.constant))
    assert again.objective == pytest.approx(tac_star, rel=1e-9)
    with pytest.raises(ValueError):
        near_optimal_constraint(inst, tac_star, -0.1)


def test_epsilon_zero_admits_only_optimal_designs(toy3):
    inst = assemble(toy3, "continuous")
    lp = solve_lp(inst)
    near = near_optimal_constraint(inst, lp.objective, 0.0)
    rng = np.random.default_rng(0)
    for n in rng.normal(size=(6, toy3.dim)):
        c = np.zeros(near.n_vars)
        c[near.design_index] = n
        sol = solve_lp(near, c, sense="max")
        assert inst.objective_value(sol.primal) == pytest.approx(lp.objective, rel=1e-7)


def test_explore_model_vertices_within_budget(toy3):
    report = explore(toy3, ExplorationConfig(epsilon=0.02, delta=0.05))
    assert report.stop_reason == "gap" and report.final_gap <= 0.05
    assert report.explored_ratio >= 0.95
    milp = solve_milp(assemble(toy3, "discrete"))
    assert report.tac_star == pytest.approx(milp.objective)
    for v in report.hull.vertices:
        tac = solve_lp(assemble_fixed_design(toy3, v)).objective
        assert tac <= 1.0000001 * report.budget


def test_continuous_anchor(toy3):
    report = explore(toy3, ExplorationConfig(epsilon=0.02, anchor="continuous"))
    assert report.tac_star == pytest.approx(report.tac_continuous)
    assert report.tac_continuous <= report.tac_discrete


def test_epsilon_zero_collapses_to_a_point():
    # without storage the relaxed optimum is unique
    model = model_from_dict(toy_doc())
    report = explore(model, ExplorationConfig(epsilon=0.0))
    assert report.degenerate and report.hull.inner_volume == 0.0
    assert len(report.hull.vertices) == 1
    assert np.allclose(report.hull.vertices[0], report.continuous_optimum)


def test_infeasible_relaxation_fails_before_exploring():
    doc = toy_doc()
    doc["carriers"][0]["importable"] = False
    doc["components"] = doc["components"][:1]
    doc["components"].append({"id": "pv", "kind": "source", "output": "electricity",
                              "availability": [0.0, 0.0, 0.0, 0.0], "capacity_step": 5.0, "invest_cost": 1.0})
    model = model_from_dict(doc)
    probes = []
    with pytest.raises(ExplorationError):
        explore(model, ExplorationConfig(), on_record=probes.append)
    assert probes == []


def test_highs_backend_matches(toy3):
    a = explore(toy3, ExplorationConfig(epsilon=0.02))
    b = explore(toy3, ExplorationConfig(epsilon=0.02), SolverConfig(backend="highs"))
    assert a.tac_star == pytest.approx(b.tac_star, rel=1e-7)
    assert a.hull.inner_volume == pytest.approx(b.hull.inner_volume, rel=0.05)


def test_config_validation():
    with pytest.raises(ValueError):
        ExplorationConfig(delta=0.0)
    with pytest.raises(ValueError):
        ExplorationConfig(epsilon=-1)
    with pytest.raises(ValueError):
        ExplorationConfig(anchor="median")
