from fractions import Fraction

from lp import linprog
from rational import min_norm_point, norm_sq, nullspace, project, row_basis, solve, span_coefficients, sqrt_upper

F = Fraction


def test_nullspace_and_row_basis():
    rows = [(F(1), F(-1), F(0)), (F(2), F(-2), F(0))]
    assert row_basis(rows, 3) == ((1, -1, 0),)
    basis = nullspace(rows, 3)
    assert len(basis) == 2
    for v in basis:
        assert v[0] - v[1] == 0


def test_solve_inconsistent_and_underdetermined():
    assert solve([[F(1), F(1)], [F(1), F(1)]], [F(1), F(2)]) is None
    assert solve([[F(1), F(1)]], [F(3)]) == (3, 0)


def test_projection_onto_a_line():
    assert project((F(2), F(0)), [(F(1), F(1))]) == (1, 1)
    assert project((F(2), F(5)), []) == (0, 0)


def test_span_coefficients():
    assert span_coefficients((F(3), F(-3)), [(F(1), F(-1))]) == (3,)
    assert span_coefficients((F(1), F(0)), [(F(1), F(-1))]) is None


def test_min_norm_point_of_a_segment():
    x, w = min_norm_point([(F(1), F(0)), (F(0), F(1))])
    assert x == (F(1, 2), F(1, 2))
    assert w == (F(1, 2), F(1, 2))


def test_min_norm_point_containing_origin():
    x, _ = min_norm_point([(F(-1),), (F(1),)])
    assert x == (0,)
    x, _ = min_norm_point([(F(1), F(1)), (F(-1), F(1)), (F(1), F(-1)), (F(-1), F(-1))])
    assert x == (0, 0)


def test_min_norm_point_at_a_vertex():
    x, w = min_norm_point([(F(2), F(1)), (F(3), F(3)), (F(2), F(5))])
    assert x == (2, 1)
    assert w == (1, 0, 0)


def test_sqrt_upper_bounds_from_above():
    r = sqrt_upper(F(2))
    assert r * r >= 2
    assert (r - F(1, 10**6)) ** 2 < 2
    assert sqrt_upper(F(9, 4)) == F(3, 2)
    assert norm_sq((F(3), F(4))) == 25


def test_linprog_optimal():
    res = linprog([-1, -1], [[1, 1], [1, 0]], [4, 3], nonneg=[True, True])
    assert res.status == "optimal"
    assert res.value == -4


def test_linprog_free_variables_and_equalities():
    # minimise x subject to x + y = 1, y <= 3
    res = linprog([1, 0], [[0, 1]], [3], [[1, 1]], [1])
    assert res.status == "optimal"
    assert res.x == [-2, 3]


def test_linprog_infeasible_and_unbounded():
    assert linprog([1], [[1]], [-1], nonneg=[True]).status == "infeasible"
    assert linprog([-1], nonneg=[True]).status == "unbounded"
    assert not linprog([0], [[1], [-1]], [-1, -1]).feasible
