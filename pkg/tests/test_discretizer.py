import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from discrete_maa.discretizer import (
    ALL_INSIDE,
    ALL_OUTSIDE,
    MIXED,
    DiscretizationError,
    EnumerationResult,
    HyperRectangle,
    bounding_box,
    brute_force,
    classify_box,
    designs_csv,
    enumerate_designs,
    verify_designs,
)
from discrete_maa.geometry import GeometryError, Polytope
from discrete_maa.model import assemble, assemble_fixed_design, model_from_dict
from discrete_maa.solver import solve_lp, solve_milp

from models import toy_doc
from oracles import lattice_brute_force
from polytopes import lattice_box, random_polytope

TRIANGLE = Polytope.from_arrays([[1, 1], [-1, 0], [0, -1]], [2, 0, 0])
UNIT_SQUARE = Polytope.from_arrays([[1, 0], [-1, 0], [0, 1], [0, -1]], [1, 0, 1, 0])


def oracle_points(A, b, steps):
    """Independent lattice brute force, returned as design tuples."""
    poly = Polytope.from_arrays(A, b)
    lower, upper = lattice_box(poly.A, poly.b, steps)
    A_lat = poly.A * steps
    pts = lattice_brute_force(A_lat, poly.b, lower, upper, lambda b: 1e-6 * (1.0 + np.abs(b)))
    return {tuple(float(v) for v in np.asarray(p) * steps) for p in pts}


def test_bounding_box_unit_square_half_step():
    box = bounding_box(UNIT_SQUARE, [0.5, 0.5])
    assert np.allclose(box.lower_design, [0, 0]) and np.allclose(box.upper_design, [1, 1])
    assert box.n_points == 9


def test_bounding_box_triangle_and_shift():
    box = bounding_box(TRIANGLE, [1, 1])
    assert list(box.lower) == [0, 0] and list(box.upper) == [2, 2]
    shifted = Polytope.from_arrays([[1.0], [-1.0]], [1.7, -0.3])
    box = bounding_box(shifted, [1.0])
    assert list(box.lower) == [0] and list(box.upper) == [2]


def test_bounding_box_errors():
    with pytest.raises(GeometryError):
        bounding_box(Polytope.from_arrays([[1, 0], [0, 1]], [1, 1]), [1, 1])
    assert bounding_box(Polytope.from_arrays([[1.0], [-1.0]], [0.0, -1.0]), [1.0]) is None
    with pytest.raises(ValueError):
        bounding_box(TRIANGLE, [1.0, 0.0])


def test_hyperrectangle_corners_and_split():
    box = HyperRectangle(np.array([0, 0]), np.array([4, 1]), np.array([1.0, 1.0]))
    assert len(box.corners()) == 4
    a, b = box.split()
    # the longest axis is cut at its median lattice plane, children are disjoint
    assert list(a.lower) == [0, 0] and list(a.upper) == [2, 1]
    assert list(b.lower) == [3, 0] and list(b.upper) == [4, 1]
    assert a.n_points + b.n_points == box.n_points


def test_classify_box():
    steps = np.array([0.25, 0.25])
    inside = HyperRectangle(np.array([1, 1]), np.array([3, 3]), steps)
    far = HyperRectangle(np.array([40, 40]), np.array([44, 44]), steps)
    straddle = HyperRectangle(np.array([2, 2]), np.array([6, 6]), steps)
    assert classify_box(inside, UNIT_SQUARE) == ALL_INSIDE
    assert classify_box(far, UNIT_SQUARE) == ALL_OUTSIDE
    assert classify_box(straddle, UNIT_SQUARE) == MIXED


@pytest.mark.parametrize("mode", ["fast", "exact"])
def test_triangle_six_points(mode):
    expected = {(0.0, 0.0), (0.0, 1.0), (0.0, 2.0), (1.0, 0.0), (1.0, 1.0), (2.0, 0.0)}
    assert enumerate_designs(TRIANGLE, [1, 1], mode).as_set() == expected
    assert brute_force(TRIANGLE, [1, 1]) == expected


def test_single_point_polytope():
    point = Polytope.from_arrays([[1, 0], [-1, 0], [0, 1], [0, -1]], [3, -3, 2, -2])
    assert enumerate_designs(point, [1.5, 1.0]).as_set() == {(3.0, 2.0)}


def test_empty_polytope():
    empty = Polytope.from_arrays([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]], [0.0, -1.0, 1.0, 0.0])
    assert brute_force(empty, [1, 1]) == set()
    assert len(enumerate_designs(empty, [1, 1])) == 0


def test_unbounded_polytope_is_an_error():
    with pytest.raises(GeometryError):
        enumerate_designs(Polytope.from_arrays([[-1, 0], [0, -1]], [0, 0]), [1, 1])


def test_brute_force_guard():
    big = Polytope.from_arrays([[1, 0], [-1, 0], [0, 1], [0, -1]], [1000, 0, 1000, 0])
    with pytest.raises(DiscretizationError):
        brute_force(big, [1, 1], guard=1000)


def test_thin_sliver_missed_by_fast_found_by_exact():
    # a narrow band around x + y = 10.5 crossing boxes between lattice corners
    sliver = Polytope.from_arrays([[1, 1], [-1, -1], [-1, 0], [0, -1], [1, 0]], [10.02, -9.98, 0, 0, 10])
    truth = brute_force(sliver, [1, 1])
    exact = enumerate_designs(sliver, [1, 1], "exact", root_divisions=1).as_set()
    fast = enumerate_designs(sliver, [1, 1], "fast", root_divisions=1).as_set()
    assert exact == truth and fast <= truth


@pytest.mark.parametrize("seed", range(12))
def test_random_polytopes_match_independent_oracle(seed):
    A, b, steps = random_polytope(1000 + seed, max_points=3000)
    poly = Polytope.from_arrays(A, b)
    truth = oracle_points(A, b, steps)
    assert brute_force(poly, steps) == truth
    exact = enumerate_designs(poly, steps, "exact")
    fast = enumerate_designs(poly, steps, "fast")
    assert exact.as_set() == truth
    assert fast.as_set() <= exact.as_set()
    for res in (exact, fast):
        c = res.counts
        assert c["accepted_points"] + c["rejected_points"] + c["point_checks"] == res.box.n_points
        assert len(set(map(tuple, res.points.tolist()))) == len(res)


def test_designs_are_sound():
    A, b, steps = random_polytope(5, max_points=2000)
    poly = Polytope.from_arrays(A, b)
    res = enumerate_designs(poly, steps, "fast")
    assert poly.contains(res.designs).all()


@settings(max_examples=25, deadline=None)
@given(
    lo=st.lists(st.integers(-5, 5), min_size=2, max_size=3),
    size=st.lists(st.integers(0, 4), min_size=3, max_size=3),
    step=st.sampled_from([0.5, 1.0, 2.5]),
)
def test_box_polytopes_enumerate_every_lattice_point(lo, size, step):
    d = len(lo)
    lower = np.asarray(lo, dtype=float) * step
    upper = lower + np.asarray(size[:d], dtype=float) * step
    poly = Polytope.from_arrays(np.vstack([np.eye(d), -np.eye(d)]), np.concatenate([upper, -lower]))
    res = enumerate_designs(poly, np.full(d, step), "fast")
    assert len(res) == int(np.prod(np.asarray(size[:d]) + 1))


def test_enumeration_result_round_trip():
    res = enumerate_designs(TRIANGLE, [1, 1])
    again = EnumerationResult.from_dict(res.to_dict())
    assert again.as_set() == res.as_set() and again.counts == res.counts


def test_designs_csv_layout():
    text = designs_csv(["a", "b"], np.array([[1.0, 2.0]]), np.array([11.0]), 10.0)
    assert text.splitlines()[0] == "a,b,tac,tac_ratio"
    assert text.splitlines()[1].startswith("1.0,2.0,11.0,1.1")


@pytest.fixture(scope="module")
def toy():
    return model_from_dict(toy_doc(battery=True))


def test_verify_keeps_rounded_continuous_optimum(toy):
    lp = solve_lp(assemble(toy, "continuous"))
    milp = solve_milp(assemble(toy, "discrete"))
    budget = milp.objective * 1.01
    d = assemble(toy, "continuous").design_of(milp.primal)
    ver = verify_designs(toy, [d], budget)
    assert len(ver) == 1 and ver.tac[0] == pytest.approx(milp.objective, rel=1e-7)
    assert lp.objective <= milp.objective + 1e-6


def test_verify_drops_over_budget_and_infeasible(toy):
    milp = solve_milp(assemble(toy, "discrete"))
    budget = milp.objective * 1.01
    huge = np.array([500.0, 500.0, 1000.0])
    ver = verify_designs(toy, [huge], budget)
    assert len(ver) == 0 and ver.dropped[0]["reason"] == "over_budget"


def test_verify_reports_achieved_tac(toy):
    designs = np.array([[40.0, 10.0, 30.0], [40.0, 15.0, 30.0], [35.0, 10.0, 40.0]])
    ver = verify_designs(toy, designs, 1e9, workers=2)
    for d, tac in zip(ver.designs, ver.tac):
        assert tac == pytest.approx(solve_lp(assemble_fixed_design(toy, d)).objective, rel=1e-9)
    assert len(ver) <= len(designs)
