import math

import numpy as np
import pytest

from delaykit.core import (
    BreakingPoint,
    ClampedStateDependent,
    Constant,
    DdeProblem,
    DenseSolution,
    HistoryFunction,
    HistoryPiece,
    StateDependent,
    delayed_argument,
    evaluate_solution,
    horner,
    same_time,
    time_tol,
)
from delaykit.errors import AdvanceDetected, OutOfRange
from delaykit.fcrk import integrate
from delaykit.lambert import lambert_w
from delaykit import models
from delaykit.models import CATALOG


def _scalar_problem(delays, history=None, t0=0.0, tf=1.0, max_delay=2.0):
    return DdeProblem(
        dimension=1,
        rhs=lambda t, u, d: -u,
        delays=delays,
        history=history or HistoryFunction.constant(1.0, t0),
        t0=t0,
        tf=tf,
        max_delay=max_delay,
    )


def test_time_tolerance_scales_with_magnitude():
    assert time_tol(0.5) == 1e-12
    assert time_tol(-1e4) == pytest.approx(1e-8)
    assert same_time(1.0, 1.0 + 5e-13)
    assert not same_time(1.0, 1.0 + 5e-12)


def test_constant_delay_argument():
    prob = _scalar_problem([Constant(2.0)])
    assert delayed_argument(prob, 0, 5.0, np.array([0.3])) == 3.0


def test_negative_constant_delay_rejected():
    with pytest.raises(ValueError):
        Constant(-0.1)


def test_clamped_delay_never_advances():
    prob = _scalar_problem([ClampedStateDependent(lambda t, u: 1.3 + 1.0 * u[0])])
    assert delayed_argument(prob, 0, 0.0, np.array([-2.0])) == 0.0
    assert delayed_argument(prob, 0, 0.0, np.array([0.0])) == pytest.approx(-1.3)


def test_unclamped_advance_raises_with_context():
    prob = _scalar_problem([StateDependent(lambda t, u: 1.3 + 1.0 * u[0])])
    with pytest.raises(AdvanceDetected) as info:
        delayed_argument(prob, 0, 0.0, np.array([-2.0]))
    assert info.value.t == 0.0
    assert info.value.delay == 0
    assert info.value.tau == pytest.approx(-0.7)


def test_history_pieces_and_sides():
    hist = HistoryFunction(
        [HistoryPiece(-math.inf, -1.0, lambda t: np.zeros(1)), HistoryPiece(-1.0, 0.0, lambda t: np.ones(1))],
        [(-1.0, -1)],
    )
    assert hist(-1.0)[0] == 0.0
    assert hist(-1.0, side="right")[0] == 1.0
    assert hist(-0.5)[0] == 1.0
    # analytic extension of the right piece below its interval
    assert hist.evaluate_piece(1, -3.0)[0] == 1.0


def test_history_rejects_gaps_and_unlisted_boundaries():
    with pytest.raises(ValueError):
        HistoryFunction([HistoryPiece(-2.0, -1.0, lambda t: 0.0), HistoryPiece(-0.5, 0.0, lambda t: 0.0)], [(-1.0, 0)])
    with pytest.raises(ValueError):
        HistoryFunction([HistoryPiece(-2.0, -1.0, lambda t: 0.0), HistoryPiece(-1.0, 0.0, lambda t: 0.0)])


def test_constant_history_query():
    hist = HistoryFunction.constant(1.0)
    assert hist(-0.3)[0] == 1.0
    assert hist.constant_value[0] == 1.0


def test_problem_invariants():
    with pytest.raises(ValueError):
        _scalar_problem([Constant(1.0)], tf=0.0)
    with pytest.raises(ValueError):
        DdeProblem(0, lambda t, u, d: u, [], HistoryFunction.constant(1.0), 0.0, 1.0)
    with pytest.raises(ValueError):
        DdeProblem(2, lambda t, u, d: u, [], HistoryFunction.constant(1.0), 0.0, 1.0)


def test_reach_from_delays():
    prob = DdeProblem(1, lambda t, u, d: -d[0], [Constant(0.5), Constant(1.5)], HistoryFunction.constant(1.0), 0.0, 1.0)
    assert prob.reach == 1.5
    assert math.isinf(_scalar_problem([StateDependent(lambda t, u: 1.0)], max_delay=None).reach)


def test_breaking_point_order_chain():
    root = BreakingPoint(0.0, -1)
    child = BreakingPoint(1.0, 0, parent=root, delay=0, tier="quadratic")
    assert child.order == root.order + 1
    with pytest.raises(ValueError):
        BreakingPoint(1.0, 2, parent=root)
    with pytest.raises(ValueError):
        BreakingPoint(1.0, -2)


def test_horner_matches_polyval():
    coef = np.array([[1.0], [2.0], [-3.0], [0.5]])
    for theta in (0.0, 0.3, 1.0):
        expected = 1 + 2 * theta - 3 * theta**2 + 0.5 * theta**3
        assert horner(coef, theta)[0] == pytest.approx(expected, abs=1e-15)
    arr = horner(coef[:, 0], np.array([0.0, 1.0]))
    assert arr.tolist() == pytest.approx([1.0, 0.5])


def test_exact_test1_pieces_agree_at_two():
    left = math.sqrt(2.0)
    right = 2.0 / 4.0 + 0.5 + (1.0 - 1.0 / math.sqrt(2.0)) * math.sqrt(2.0)
    assert left == pytest.approx(1.41421356, abs=1e-8)
    assert right == pytest.approx(left, abs=1e-15)
    assert models.test1_exact(2.0) == pytest.approx(left, abs=1e-15)


def test_exact_test2_at_jump_point():
    w = lambert_w(1.0)
    assert models.test2_exact(w) == pytest.approx(w, abs=1e-15)
    assert w == pytest.approx(0.567143, abs=1e-6)


@pytest.fixture(scope="module")
def test1_solution():
    return integrate(CATALOG["test1"].build(), "fcrk4", 0.05)


def test_dense_solution_evaluation(test1_solution):
    sol = test1_solution
    assert evaluate_solution(sol, 0.5)[0] == 1.0  # history
    assert evaluate_solution(sol, 2.0)[0] == pytest.approx(math.sqrt(2.0), abs=1e-8)
    with pytest.raises(OutOfRange):
        evaluate_solution(sol, 5.5)
    with pytest.raises(OutOfRange):
        evaluate_solution(sol, -0.5)


def test_dense_solution_sides_at_breaking_point(test1_solution):
    sol = test1_solution
    xi = [b.location for b in sol.breaking_points if b.order == 1][0]
    left = evaluate_solution(sol, xi, "left")[0]
    right = evaluate_solution(sol, xi, "right")[0]
    assert left == pytest.approx(right, abs=1e-10)
    assert evaluate_solution(sol, xi)[0] == left


def test_mesh_continuity(test1_solution):
    sol = test1_solution
    worst = 0.0
    for n in range(sol.n_steps - 1):
        t_next = sol.mesh[n + 1]
        worst = max(worst, abs(sol.eval_step(n, t_next)[0] - sol.eval_step(n + 1, t_next)[0]))
    assert worst <= 1e-13 * (1 + 2.5)


def test_vectorised_matches_scalar_evaluation(test1_solution):
    sol = test1_solution
    ts = np.linspace(0.2, 5.0, 37)
    vec = sol(ts)[:, 0]
    scalar = np.array([sol.raw(t)[0] for t in ts])
    assert np.max(np.abs(vec - scalar)) <= 1e-14


def test_dense_times_include_mesh(test1_solution):
    ts = test1_solution.dense_times(3)
    assert ts.size == 3 * 0 + 4 * test1_solution.n_steps + 1
    assert set(test1_solution.mesh.tolist()) <= set(ts.tolist())
