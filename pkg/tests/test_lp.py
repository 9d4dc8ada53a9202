import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tsa.lp import (LpProblem, enumerate_vertices_best, maximize_concave,
                    solve_lp)


def test_single_bound():
    sol = solve_lp(LpProblem(np.array([1.0]), np.array([[1.0]]), np.array([1.0])))
    assert sol.status == "optimal"
    assert sol.x[0] == pytest.approx(1.0)


def test_two_rows():
    sol = solve_lp(LpProblem(np.array([1.0]), np.array([[2.0], [1.0]]), np.array([1.0, 0.4])))
    assert sol.x[0] == pytest.approx(0.4)


def test_low_value_1x1_lp():
    # max 0.25 y  s.t. 1.5 y <= 1 (twice)  ->  y = 2/3, value 1/6
    sol = solve_lp(LpProblem(np.array([0.25]), np.array([[1.5], [1.5]]), np.array([1.0, 1.0])))
    assert sol.x[0] == pytest.approx(2.0 / 3.0)
    assert sol.value == pytest.approx(1.0 / 6.0)


def test_statuses():
    assert solve_lp(LpProblem(np.array([1.0, 1.0]), np.zeros((0, 2)), np.zeros(0))).status == "unbounded"
    infeas = LpProblem(np.array([1.0]), np.array([[1.0], [-1.0]]), np.array([1.0, -2.0]))
    assert solve_lp(infeas).status == "infeasible"
    free = LpProblem(np.array([1.0, 0.0]), np.array([[0.0, 1.0]]), np.array([1.0]))
    assert solve_lp(free).status == "unbounded"


def test_equality_rows():
    p = LpProblem(np.array([1.0, 0.0]), np.array([[1.0, 1.0]]), np.array([2.0]))
    p.add_equality(np.array([0.0, 1.0]), 1.5)
    sol = solve_lp(p)
    assert sol.x[1] == pytest.approx(1.5)
    assert sol.value == pytest.approx(0.5)


@given(st.integers(0, 2000))
@settings(max_examples=120, deadline=None)
def test_matches_vertex_enumeration(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 7))
    rows = int(rng.integers(1, 9))
    A = rng.normal(size=(rows, n))
    b = rng.uniform(-0.3, 2.0, size=rows)
    c = rng.normal(size=n)
    # Keep the region bounded so both methods agree on a finite optimum.
    A = np.vstack([A, np.ones((1, n))])
    b = np.concatenate([b, [5.0]])
    sol = solve_lp(LpProblem(c, A, b))
    best = enumerate_vertices_best(LpProblem(c, A, b))
    if best is None:
        assert sol.status == "infeasible"
    else:
        assert sol.status == "optimal"
        assert sol.value == pytest.approx(best, abs=1e-7)


@given(st.integers(0, 500))
@settings(max_examples=60, deadline=None)
def test_duals_satisfy_complementary_slackness(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 5))
    rows = int(rng.integers(1, 6))
    A = rng.normal(size=(rows, n))
    b = rng.uniform(0.1, 2.0, size=rows)
    c = rng.normal(size=n)
    A = np.vstack([A, np.ones((1, n))])
    b = np.concatenate([b, [4.0]])
    sol = solve_lp(LpProblem(c, A, b))
    if sol.status != "optimal":
        return
    assert sol.cs_residual <= 1e-6
    assert (sol.dual >= -1e-8).all()
    assert abs(float(sol.dual @ b) - sol.value) <= 1e-6  # strong duality


def test_frank_wolfe_linear_matches_lp():
    A = np.array([[1.0, 2.0], [3.0, 1.0]])
    b = np.array([2.0, 3.0])
    c = np.array([1.0, 1.0])
    lp = solve_lp(LpProblem(c, A, b))
    res = maximize_concave(lambda x: float(c @ x), lambda x: c,
                           LpProblem(np.zeros(2), A, b))
    assert res.status == "optimal"
    assert res.certified_upper == pytest.approx(lp.value, abs=1e-6)
    assert res.value == pytest.approx(lp.value, abs=1e-6)


def test_frank_wolfe_concave_closed_form():
    # max z/(1+z) over 0 <= z <= 1: optimum 0.5 at z = 1.
    A = np.array([[1.0]])
    b = np.array([1.0])
    res = maximize_concave(lambda x: float(x[0] / (1 + x[0])),
                           lambda x: np.array([1.0 / (1 + x[0]) ** 2]),
                           LpProblem(np.zeros(1), A, b))
    assert res.value == pytest.approx(0.5, abs=1e-6)
    assert res.certified_upper >= 0.5 - 1e-9
    assert res.certified_upper >= res.value


def test_frank_wolfe_certifies_upper_bound():
    rng = np.random.default_rng(3)
    A = np.vstack([rng.random((3, 2)) + 0.2, np.eye(2)])
    b = np.ones(5)
    w = np.array([0.7, 1.3])

    def f(x):
        z = w @ x
        return float(z / (1 + z))

    def grad(x):
        z = w @ x
        return w / (1 + z) ** 2

    res = maximize_concave(f, grad, LpProblem(np.zeros(2), A, b))
    # Concave composition of a linear map: optimum equals f at the LP optimum of w.x.
    lp = solve_lp(LpProblem(w, A, b))
    true_opt = lp.value / (1 + lp.value)
    assert res.certified_upper >= true_opt - 1e-9
    assert res.value <= true_opt + 1e-9


def test_frank_wolfe_bound_history_nonincreasing():
    A = np.vstack([np.full((1, 2), 1.0), np.eye(2)])
    b = np.array([1.5, 1.0, 1.0])
    w = np.array([0.9, 0.4])
    res = maximize_concave(lambda x: float(np.log1p(w @ x)),
                           lambda x: w / (1 + w @ x),
                           LpProblem(np.zeros(2), A, b))
    hist = res.bound_history
    assert len(hist) >= 1
    assert all(hist[k + 1] <= hist[k] + 1e-12 for k in range(len(hist) - 1))


def test_frank_wolfe_gradient_check():
    A = np.array([[1.0]])
    b = np.array([1.0])
    with pytest.raises(ValueError, match="gradient"):
        maximize_concave(lambda x: float(x[0]), lambda x: np.array([5.0]),
                         LpProblem(np.zeros(1), A, b))


def test_frank_wolfe_infeasible_region():
    A = np.array([[1.0], [-1.0]])
    b = np.array([1.0, -2.0])
    res = maximize_concave(lambda x: float(x[0]), lambda x: np.array([1.0]),
                           LpProblem(np.zeros(1), A, b))
    assert res.status == "infeasible"
