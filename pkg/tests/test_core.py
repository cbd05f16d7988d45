import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vssdimsim.core import (ConvergenceRow, Grid, OdeSystem, SolutionState, StepRatios, Tableau,
                            fd_jacobian, g_consistency, validate_tableau)
from vssdimsim.tableau import method, order1, order2

ratio = st.floats(0.2, 5.0)


def test_order1_validates():
    t = order1()
    assert validate_tableau(t).ok
    assert t.Bbar[0, 0] == 0.499


def test_identity_V_is_not_rank_one():
    t = order2(1.0).replace(V=np.eye(2))
    rep = validate_tableau(t)
    assert not rep.ok
    assert any("rank-one" in msg for msg in rep.problems)


def test_perturbed_U_row_sum_fails():
    t = order2(1.0)
    U = t.U.copy()
    U[1, 0] += 1e-6
    rep = validate_tableau(t.replace(U=U))
    assert not rep.ok
    assert any("U row 1" in msg for msg in rep.problems)


def test_upper_triangular_A_flagged():
    t = order2(1.0)
    A = t.A.copy()
    A[0, 1] = 0.3
    rep = validate_tableau(t.replace(A=A))
    assert any("A[0,1]" in msg for msg in rep.problems)
    assert str(rep) != "pass"


def test_nonfinite_entries_flagged():
    t = order2(1.0)
    B = t.B.copy()
    B[0, 0] = np.nan
    rep = validate_tableau(t.replace(B=B))
    assert any("non-finite" in msg for msg in rep.problems)


def test_shape_mismatch_flagged():
    t = order2(1.0)
    assert not validate_tableau(t.replace(c=[0.0])).ok
    assert not validate_tableau(t.replace(p=3)).ok


@given(st.integers(2, 4).flatmap(lambda p: st.tuples(st.just(p), st.lists(ratio, min_size=p - 1,
                                                                            max_size=p - 1))))
def test_constructed_tableaus_validate(args):
    p, sig = args
    assert validate_tableau(method(p, sig)).ok


@given(st.integers(2, 4).flatmap(lambda p: st.tuples(
    st.just(p), st.lists(ratio, min_size=p - 1, max_size=p - 1),
    st.lists(ratio, min_size=p - 1, max_size=p - 1))))
def test_V_products_collapse(args):
    p, s1, s2 = args
    V1, V2 = method(p, s1).V, method(p, s2).V
    np.testing.assert_allclose(V1 @ V2, np.outer(np.ones(p), V2[0]), atol=1e-12)


def test_tableau_json_round_trip():
    t = method(3, [1.5, 0.7])
    u = Tableau.from_json(t.to_json())
    for k in ("c", "A", "Abar", "U", "B", "Bbar", "V"):
        np.testing.assert_array_equal(getattr(u, k), getattr(t, k))
    np.testing.assert_array_equal(u.sigma.values, [1.5, 0.7])
    assert set(json.loads(t.to_json())) == {"p", "c", "A", "Abar", "U", "B", "Bbar", "V", "sigma"}


def test_tableau_is_immutable():
    t = order2(1.0)
    with pytest.raises(ValueError):
        t.A[0, 0] = 1.0


def test_step_ratios():
    s = StepRatios([2.0, 3.0])
    np.testing.assert_array_equal(s.cumulative, [0, 2, 5])
    assert len(StepRatios.ones(3)) == 3
    for bad in ([0.0], [-1.0], [np.inf], [[1.0]]):
        with pytest.raises(ValueError):
            StepRatios(bad)


def test_fd_jacobian_of_linear_map():
    M = np.array([[1.0, 2.0], [-3.0, 0.5]])
    np.testing.assert_allclose(fd_jacobian(lambda y: M @ y, np.array([0.3, -2.0])), M, atol=1e-8)


def test_g_consistency_catches_wrong_g():
    good = OdeSystem("sq", 1, lambda y: y * y, lambda y: 2 * y ** 3, [0.7])
    bad = OdeSystem("sq", 1, lambda y: y * y, lambda y: y ** 3, [0.7])
    assert g_consistency(good, [0.7])[0]
    ok, res = g_consistency(bad, [0.7])
    assert not ok and res > 1e-2


def test_ode_system_shape_check():
    with pytest.raises(ValueError):
        OdeSystem("x", 2, lambda y: y, lambda y: y, [1.0])


def test_grid_validation():
    g = Grid(points=[0, 0.5, 1.5], steps=[0.5, 1.0])
    assert (g.N, g.x0, g.X) == (2, 0.0, 1.5)
    np.testing.assert_allclose(g.ratios(1, 1).values, [0.5])
    with pytest.raises(IndexError):
        g.ratios(0, 1)
    with pytest.raises(ValueError):
        Grid(points=[0, 1, 0.5], steps=[1, -0.5])
    with pytest.raises(ValueError):
        Grid(points=[0, 1, 2], steps=[1, 1.1])
    with pytest.raises(ValueError):
        Grid(points=[0], steps=[])


def test_ratio_matrix_matches_ratios():
    h = np.array([1.0, 2.0, 0.5, 0.25, 3.0])
    pts = np.concatenate(([0], np.cumsum(h)))
    g = Grid(points=pts, steps=h)
    R = g.ratio_matrix(2)
    assert R.shape == (3, 2)
    for k, n in enumerate(range(2, 5)):
        np.testing.assert_allclose(R[k], g.ratios(n, 2).values)
    assert g.ratio_matrix(0).shape == (5, 0)


def test_solution_state():
    s = SolutionState(n=1, x=0.1, blocks=[[1.0, 2.0], [3.0, 4.0]])
    assert (s.r, s.m) == (2, 2)
    np.testing.assert_array_equal(s.y, [1.0, 2.0])


def test_convergence_row():
    r = ConvergenceRow(1000, 3.53e-4)
    assert ConvergenceRow.from_dict(r.to_dict()) == r
    with pytest.raises(ValueError):
        ConvergenceRow(10, -1.0)
