import math

import numpy as np
import pytest

from delaykit.convergence import fitted_slope, max_error
from delaykit.core import Constant, DdeProblem, DenseSolution, HistoryFunction, StateDependent, Threshold
from delaykit.errors import AdvanceDetected, BlowUp, StepUnderflow
from delaykit.fcrk import (
    AdaptiveStep,
    BreakpointPolicy,
    FixedStep,
    GridSteps,
    integrate,
    resolve_method,
    take_step,
)
from delaykit.models import CATALOG
from delaykit.tableaux import FCRK1, FCRK2, FCRK3, FCRK4
from delaykit.threshold import ThresholdSpec


def _decay_problem(tf=1.0):
    return DdeProblem(1, lambda t, u, d: -u, [], HistoryFunction.constant(1.0), 0.0, tf)


def test_euler_step():
    prob = _decay_problem()
    step = take_step(prob, DenseSolution(prob), 0.0, np.array([1.0]), 0.1, FCRK1)
    assert step.u_end[0] == pytest.approx(0.9, abs=1e-15)


def test_heun_step():
    prob = _decay_problem()
    step = take_step(prob, DenseSolution(prob), 0.0, np.array([1.0]), 0.1, FCRK2)
    assert step.u_end[0] == pytest.approx(0.905, abs=1e-15)


@pytest.mark.parametrize("tab", [FCRK1, FCRK2, FCRK3, FCRK4], ids=lambda t: t.name)
def test_interpolant_endpoints(tab):
    prob = _decay_problem()
    step = take_step(prob, DenseSolution(prob), 0.0, np.array([1.0]), 0.2, tab)
    assert step.value(0.0)[0] == 1.0
    assert step.value(1.0)[0] == pytest.approx(step.u_end[0], rel=1e-14)


def test_fourth_order_step_on_test1():
    prob = CATALOG["test1"].build()
    sol = DenseSolution(prob)
    step = take_step(prob, sol, 1.0, np.array([1.0]), 0.05, FCRK4)
    assert abs(step.value(1.0)[0] - math.sqrt(1.05)) <= 1e-8


def test_step_size_must_be_positive():
    prob = _decay_problem()
    with pytest.raises(ValueError):
        take_step(prob, DenseSolution(prob), 0.0, np.array([1.0]), 0.0, FCRK1)


def _smooth_delay_problem():
    # u(t) = exp(-t) solves u' = -exp(-1) u(t - 1) with matching history
    return DdeProblem(
        1, lambda t, u, d: -math.exp(-1.0) * d[0], [Constant(1.0)],
        HistoryFunction.from_callable(lambda t: np.array([math.exp(-t)])), 0.0, 3.0,
    )


@pytest.mark.parametrize("method,order", [("fcrk1", 1), ("fcrk2", 2), ("fcrk3", 3), ("fcrk4", 4)])
def test_smooth_constant_delay_order(method, order):
    hs = [0.1, 0.05, 0.025, 0.0125]
    errs = [max_error(integrate(_smooth_delay_problem(), method, h), lambda t: math.exp(-t)) for h in hs]
    assert abs(fitted_slope(hs, errs) - order) <= 0.3


def test_overlapping_stays_explicit_and_accurate():
    # the delay 0.02 is shorter than every step below
    def build():
        return DdeProblem(
            1, lambda t, u, d: -math.exp(-0.02) * d[0], [Constant(0.02)],
            HistoryFunction.from_callable(lambda t: np.array([math.exp(-t)])), 0.0, 2.0,
        )

    sol = integrate(build(), "fcrk4", 0.05)
    assert max_error(sol, lambda t: math.exp(-t)) <= 1e-6
    prob = build()
    step = take_step(prob, DenseSolution(prob), 0.0, np.array([1.0]), 0.1, FCRK4)
    sources = {src for _, _, alpha, src in step.reads}
    assert "overlap" in sources


def test_blow_up_reports_stage():
    prob = DdeProblem(1, lambda t, u, d: np.array([np.inf]), [], HistoryFunction.constant(1.0), 0.0, 1.0)
    with pytest.raises(BlowUp) as info:
        integrate(prob, "fcrk2", 0.1)
    assert info.value.stage == 0


def test_step_underflow():
    with pytest.raises(StepUnderflow):
        integrate(_decay_problem(), "fcrk1", FixedStep(1e-20))


def test_unaugmented_threshold_rejected():
    spec = ThresholdSpec(lambda u: 1.0, 1.0, 1.0, 1.0)
    prob = DdeProblem(1, lambda t, u, d: -d[0], [Threshold(spec)], HistoryFunction.constant(1.0), 0.0, 1.0)
    with pytest.raises(ValueError):
        integrate(prob, "fcrk4", 0.1)


def test_unknown_method():
    with pytest.raises(ValueError):
        resolve_method("fcrk9")


def test_last_step_hits_horizon():
    sol = integrate(_decay_problem(1.0), "fcrk4", 0.3)
    assert sol.t_end == pytest.approx(1.0, abs=1e-15)
    assert sol.raw(1.0)[0] == pytest.approx(math.exp(-1.0), abs=1e-4)


def test_grid_steps_land_on_grid():
    grid = [0.1, 0.25, 0.7, 1.0]
    sol = integrate(_decay_problem(1.0), "fcrk4", GridSteps(grid))
    assert sol.mesh[1:].tolist() == pytest.approx(grid, abs=1e-15)


def test_adaptive_controller_meets_tolerance():
    sol = integrate(_decay_problem(5.0), "fcrk4", AdaptiveStep(rtol=1e-8, atol=1e-10, h0=0.5))
    assert max_error(sol, lambda t: math.exp(-t)) <= 1e-7
    assert sol.n_steps < 200


def test_adaptive_needs_embedded_weights():
    with pytest.raises(ValueError):
        integrate(_decay_problem(), "fcrk1", AdaptiveStep())


def _fast_relaxation():
    # exact solution -0.9 + 1.9 exp(-30 t) keeps tau = 1 + u positive, but
    # large steps overshoot inside the stages
    return DdeProblem(
        1, lambda t, u, d: -30.0 * (u + 0.9), [StateDependent(lambda t, u: 1.0 + u[0])],
        HistoryFunction.constant(1.0), 0.0, 1.0, max_delay=2.0,
    )


def test_stage_advance_is_retried_with_smaller_steps():
    sol = integrate(_fast_relaxation(), "fcrk4", 0.1)
    assert sol.stage_retries > 0
    assert abs(sol.raw(1.0)[0] - (-0.9 + 1.9 * math.exp(-30.0))) <= 1e-10


def test_stage_advance_raises_without_retries():
    with pytest.raises(AdvanceDetected) as info:
        integrate(_fast_relaxation(), "fcrk4", 0.1, max_halvings=0)
    assert info.value.t > 0.0


def test_true_advance_raises_at_step_start():
    prob = CATALOG["twostatedep"].build({"history": -2.0})
    with pytest.raises(AdvanceDetected) as info:
        integrate(prob, "fcrk4", 0.05)
    assert info.value.t == 0.0


def test_detection_off_skips_ledger():
    sol = integrate(CATALOG["test1"].build(), "fcrk4", 0.1, BreakpointPolicy(enabled=False))
    assert sol.breaking_points == []


def test_detection_cutoff():
    # test1 has reach 1: with p = 4 detection stops after t0 + 3
    sol = integrate(CATALOG["test1"].build({"tf": 5.0}), "fcrk4", 0.1)
    assert all(b.location <= 4.0 for b in sol.breaking_points)


def test_unknown_tier():
    with pytest.raises(ValueError):
        BreakpointPolicy(tier="cubic")
