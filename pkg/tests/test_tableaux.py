from fractions import Fraction

import numpy as np
import pytest

from delaykit.tableaux import (
    FCRK1,
    FCRK2,
    FCRK3,
    FCRK4,
    TABLEAUX,
    poly_eval,
    rooted_trees,
    tree_density,
    verify_order_conditions,
)


def test_rooted_tree_counts():
    assert [len(rooted_trees(k)) for k in range(1, 6)] == [1, 1, 2, 4, 9]


def test_tree_density_of_bushy_tree():
    # root with three leaves: gamma = 4
    assert tree_density(((), (), ())) == 4


@pytest.mark.parametrize("tab", [FCRK1, FCRK2, FCRK3, FCRK4], ids=lambda t: t.name)
def test_continuous_order_conditions_hold_exactly(tab):
    report = verify_order_conditions(tab)
    assert report.max_residual == 0.0
    assert report.stage_consistency == 0.0


def test_stage_counts_and_orders():
    assert [(t.stages, t.p) for t in (FCRK1, FCRK2, FCRK3, FCRK4)] == [(1, 1), (2, 2), (4, 3), (7, 4)]
    assert sorted(TABLEAUX) == ["fcrk1", "fcrk2", "fcrk3", "fcrk4"]


@pytest.mark.parametrize("tab", [FCRK1, FCRK2, FCRK3, FCRK4], ids=lambda t: t.name)
def test_weights_sum_to_theta(tab):
    for theta in (Fraction(1, 3), Fraction(1), Fraction(7, 5)):
        assert sum(poly_eval(b, theta) for b in tab.b) == theta


@pytest.mark.parametrize("tab", [FCRK2, FCRK3, FCRK4], ids=lambda t: t.name)
def test_second_order_weight_condition(tab):
    for theta in (Fraction(1, 4), Fraction(1)):
        assert sum(poly_eval(b, theta) * c for b, c in zip(tab.b, tab.c)) == theta**2 / 2


@pytest.mark.parametrize("tab", [FCRK2, FCRK3, FCRK4], ids=lambda t: t.name)
def test_stage_interpolants_reproduce_discrete_rows(tab):
    for i in range(1, tab.stages):
        total = sum(poly_eval(p, tab.c[i]) for p in tab.a[i])
        assert total == tab.c[i]


def test_order_request_above_method_order():
    with pytest.raises(ValueError):
        verify_order_conditions(FCRK2, 3)


def test_fcrk2_weights_are_heun_dense_output():
    assert FCRK2.b[0] == (0, 1, Fraction(-1, 2))
    assert FCRK2.b[1] == (0, 0, Fraction(1, 2))


def test_float_views_match_fractions():
    for tab in (FCRK3, FCRK4):
        assert np.allclose(tab.B.sum(axis=0), tab.b_end)
        assert tab.b_end.sum() == pytest.approx(1.0, abs=1e-15)
        assert tab.c_float[-1] == 1.0
