from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from bellforge.lp import Bound, LinearProgram, Relation, feasibility, solve


def test_textbook_optimum_is_exact():
    # max x + y  s.t.  x + 2y <= 4,  3x + y <= 6,  x, y >= 0  ->  (8/5, 6/5)
    lp = LinearProgram([1, 1], [[1, 2], [3, 1]], ["<=", "<="], [4, 6], [Bound.NONNEG] * 2)
    res = solve(lp)
    assert res.status == "optimal"
    assert res.x == [F(8, 5), F(6, 5)]
    assert res.value == F(14, 5)
    assert isinstance(res.value, F)


def test_duals_close_the_gap():
    lp = LinearProgram([1, 1], [[1, 2], [3, 1]], ["<=", "<="], [4, 6], [Bound.NONNEG] * 2)
    res = solve(lp)
    assert sum(y * b for y, b in zip(res.duals, lp.rhs)) == res.value
    assert all(y >= 0 for y in res.duals)


def test_cycling_example_terminates():
    # classic degenerate problem that cycles under the largest-coefficient rule
    c = [F(3, 4), -20, F(1, 2), -6]
    rows = [[F(1, 4), -8, -1, 9], [F(1, 2), -12, F(-1, 2), 3], [0, 0, 1, 0]]
    lp = LinearProgram(c, rows, ["<="] * 3, [0, 0, 1], [Bound.NONNEG] * 4)
    res = solve(lp)
    assert res.status == "optimal"
    assert res.value == F(5, 4)


def test_infeasible_and_unbounded():
    infeasible = LinearProgram([1], [[1], [1]], [">=", "<="], [2, 1], [Bound.FREE])
    assert solve(infeasible).status == "infeasible"
    assert feasibility(infeasible).status == "infeasible"
    unbounded = LinearProgram([1, 0], [[1, -1]], ["<="], [1], [Bound.NONNEG] * 2)
    assert solve(unbounded).status == "unbounded"


def test_free_and_nonpositive_variables():
    # max -x - y with x free, y <= 0, x >= y + 3 and x <= 10, y >= -2
    lp = LinearProgram(
        [-1, -1],
        [[1, -1], [1, 0], [0, 1]],
        [Relation.GE, Relation.LE, Relation.GE],
        [3, 10, -2],
        [Bound.FREE, Bound.NONPOS],
    )
    res = solve(lp)
    assert res.status == "optimal"
    assert res.x == [F(1), F(-2)]
    assert res.value == F(1)


def test_equality_rows_and_negative_rhs():
    lp = LinearProgram([1, 2], [[1, 1], [-1, 0]], ["=", "<="], [-1, 3], [Bound.FREE] * 2)
    res = solve(lp)
    assert res.x[0] + res.x[1] == -1
    assert res.x == [F(-3), F(2)]
    assert res.value == 1


def test_float_mode_matches_exact():
    lp = LinearProgram([1, 1], [[1, 2], [3, 1]], ["<=", "<="], [4, 6], [Bound.NONNEG] * 2)
    assert solve(lp, exact=False).value == pytest.approx(2.8, abs=1e-12)


def test_malformed_programs_are_rejected():
    with pytest.raises(ValueError):
        LinearProgram([])
    with pytest.raises(ValueError):
        LinearProgram([1, 2], [[1]], ["<="], [0])
    with pytest.raises(ValueError):
        LinearProgram([1], [[1]], ["<=", "<="], [0])


small_int = st.integers(-4, 4)


@settings(max_examples=60, deadline=None)
@given(
    c=st.lists(small_int, min_size=3, max_size=3),
    rows=st.lists(st.lists(small_int, min_size=3, max_size=3), min_size=1, max_size=4),
    rhs=st.lists(st.integers(0, 6), min_size=4, max_size=4),
)
def test_agrees_with_highs_on_boxed_programs(c, rows, rhs):
    # the box keeps every program bounded and the origin keeps it feasible
    box = [[1 if i == j else 0 for j in range(3)] for i in range(3)]
    all_rows = rows + box
    b = rhs[: len(rows)] + [5, 5, 5]
    lp = LinearProgram(c, all_rows, ["<="] * len(all_rows), b, [Bound.NONNEG] * 3)
    res = solve(lp)
    ref = linprog(-np.array(c, float), A_ub=np.array(all_rows, float), b_ub=np.array(b, float), method="highs")
    assert res.status == "optimal"
    assert float(res.value) == pytest.approx(-ref.fun, abs=1e-9)
    # primal feasibility holds exactly
    for row, bound in zip(all_rows, b):
        assert sum(F(a) * x for a, x in zip(row, res.x)) <= bound
