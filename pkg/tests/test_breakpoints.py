import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from delaykit import models
from delaykit.breakpoints import (
    TIER_ACCURACY,
    BreakingPointLedger,
    approximate_breaking_point,
    crossing_test,
    departure_test,
    process_step,
    required_accuracy,
    secant_correct,
    select_tier,
)
from delaykit.convergence import fitted_slope
from delaykit.core import BreakingPoint, Constant, DdeProblem, HistoryFunction
from delaykit.errors import DegenerateCrossing
from delaykit.fcrk import BreakpointPolicy, integrate
from delaykit.lambert import lambert_w


def _ledger(locations, alpha, p=4, orders=None):
    orders = orders or [0] * len(locations)
    pts = [BreakingPoint(x, k) for x, k in zip(locations, orders)]
    ledger = BreakingPointLedger(pts, p, math.inf, [True])
    ledger.place([alpha])
    return ledger


def _samples(alpha, t_n, h):
    return alpha(t_n), alpha(t_n + 0.5 * h), alpha(t_n + h)


# ---------------------------------------------------------------------------
# crossing and departure tests
# ---------------------------------------------------------------------------


@pytest.mark.parametrize(
    "a0, a1, crossed",
    [(-0.2, 0.1, 0.0), (0.3, 0.5, None), (-0.1, 0.0, 0.0)],
    ids=["sign-change", "no-change", "endpoint-hit"],
)
def test_crossing_examples(a0, a1, crossed):
    hit = crossing_test(_ledger([0.0], a0), 0, a0, a1)
    if crossed is None:
        assert hit is None
    else:
        point, upward = hit
        assert point.location == crossed and upward


def test_crossing_downward():
    ledger = _ledger([0.0, 1.0], 0.5)
    point, upward = crossing_test(ledger, 0, 0.1, -0.1)
    assert point.location == 0.0 and not upward


def test_crossing_skips_point_at_step_start_and_ignored_point():
    ledger = _ledger([0.0, 1.0], 0.0)
    assert crossing_test(ledger, 0, 0.0, 0.3) is None
    ledger = _ledger([0.0, 1.0], 0.9)
    assert crossing_test(ledger, 0, 0.9, 1.1, ignore=1.0) is None


def test_crossing_only_checks_bounding_points():
    # a jump over two listed points reports the nearer bound only
    ledger = _ledger([0.0, 1.0, 2.0], 0.5)
    point, _ = crossing_test(ledger, 0, 0.5, 2.5)
    assert point.location == 1.0


def test_departure_detects_leaving_a_listed_point():
    ledger = _ledger([0.0, 1.0], 0.5)
    point, upward = departure_test(ledger, 0, 1.0, 1.2)
    assert point.location == 1.0 and upward
    point, upward = departure_test(ledger, 0, 0.0, -0.1)
    assert point.location == 0.0 and not upward
    assert departure_test(ledger, 0, 0.5, 0.7) is None
    assert departure_test(ledger, 0, 1.0, 1.0) is None


# ---------------------------------------------------------------------------
# approximation of the new point
# ---------------------------------------------------------------------------


def test_linear_example():
    x = approximate_breaking_point(0.0, 0.1, -0.1, -0.05, 0.0, 0.0)
    assert x == pytest.approx(0.1, abs=1e-15)


@pytest.mark.parametrize("form", ["series", "stable", "closed"])
def test_quadratic_example(form):
    alpha = lambda t: t * t - 0.01
    x = approximate_breaking_point(0.0, 0.2, *_samples(alpha, 0.0, 0.2), 0.0, form=form)
    assert abs(x - 0.1) <= 1e-12


@settings(max_examples=200, deadline=None)
@given(
    t_n=st.floats(-5.0, 5.0),
    h=st.floats(1e-3, 1.0),
    frac=st.floats(0.05, 0.95),
    slope=st.floats(0.2, 5.0),
    curv=st.floats(-1.0, 1.0),
    form=st.sampled_from(["stable", "closed"]),
)
def test_exact_on_quadratic_argument(t_n, h, frac, slope, curv, form):
    root = t_n + frac * h
    # increasing over the step: slope + 2 curv (t - root) > 0
    curv = curv * slope / (2.0 * h)
    alpha = lambda t: slope * (t - root) + curv * (t - root) ** 2
    x = approximate_breaking_point(t_n, h, *_samples(alpha, t_n, h), 0.0, form=form)
    assert abs(x - root) <= 1e-10 * max(1.0, abs(root))


def test_series_form_is_third_order():
    r = math.log(1.2)
    alpha = lambda t: math.exp(t)
    hs = [0.2, 0.1, 0.05, 0.025]
    errs = [abs(approximate_breaking_point(r - 0.4 * h, h, *_samples(alpha, r - 0.4 * h, h), 1.2) - r) for h in hs]
    assert fitted_slope(hs, errs) == pytest.approx(3.0, abs=0.3)


def test_linear_branch_rejects_non_crossing():
    with pytest.raises(DegenerateCrossing):
        approximate_breaking_point(0.0, 0.1, 0.0, 0.0, 0.0, 0.5, linear=True)
    with pytest.raises(DegenerateCrossing):
        approximate_breaking_point(0.0, 0.1, 0.2, 0.15, 0.1, 0.5)


def test_unknown_form():
    with pytest.raises(ValueError):
        approximate_breaking_point(0.0, 0.2, -0.01, 0.0, 0.03, 0.0, form="cubic")


def test_result_is_clipped_to_step():
    x = approximate_breaking_point(0.0, 0.1, -0.1, -0.05, -1e-17, 0.0, linear=True)
    assert 0.0 <= x <= 0.1


# ---------------------------------------------------------------------------
# secant correction
# ---------------------------------------------------------------------------


def test_secant_exact_on_linear_argument():
    alpha = lambda t: 3.0 * t - 0.6
    assert secant_correct(0.25, 0.0, alpha(0.0), alpha, 0.0) == pytest.approx(0.2, abs=1e-15)


def _bisect_root(f, lo, hi):
    while hi - lo > 1e-15:
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if f(mid) < 0 else (lo, mid)
    return 0.5 * (lo + hi)


@pytest.mark.parametrize("steps, order", [(1, 4.0), (2, 7.0)])
def test_secant_orders(steps, order):
    alpha = lambda t: math.exp(t) - 1.2
    root = _bisect_root(alpha, 0.0, 0.25)
    assert root == pytest.approx(math.log(1.2), abs=1e-15)
    hs = [0.2, 0.1, 0.05] if steps == 2 else [0.2, 0.1, 0.05, 0.025]
    errs = []
    for h in hs:
        t_n = root - 0.4 * h
        seed = approximate_breaking_point(t_n, h, *_samples(alpha, t_n, h), 0.0)
        errs.append(abs(secant_correct(seed, t_n, alpha(t_n), alpha, 0.0, steps) - root))
    assert fitted_slope(hs, errs, floor=1e-15) == pytest.approx(order, abs=0.5)


def test_degenerate_secant_warns_and_keeps_seed():
    with pytest.warns(RuntimeWarning):
        assert secant_correct(0.3, 0.0, 1.0, lambda t: 1.0, 2.0) == 0.3


# ---------------------------------------------------------------------------
# accuracy bookkeeping
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("p, k, r", [(4, 0, 4.0), (4, 1, 2.0), (6, 4, 1.2), (3, 0, 3.0), (1, 0, 1.0)])
def test_required_accuracy(p, k, r):
    assert required_accuracy(p, k) == pytest.approx(r, abs=1e-15)


@pytest.mark.parametrize("p, k", [(0, 0), (2, -1)])
def test_required_accuracy_domain(p, k):
    with pytest.raises(ValueError):
        required_accuracy(p, k)


@pytest.mark.parametrize("p", [1, 2, 3, 4])
@pytest.mark.parametrize("k", [0, 1, 2, 3])
def test_tier_sufficiency(p, k):
    tier = select_tier("auto", p, k)
    assert TIER_ACCURACY[tier] >= required_accuracy(p, k)


def test_auto_tier_choices():
    assert select_tier("auto", 4, 0) == "secant"
    assert select_tier("auto", 3, 0) == "quadratic"
    assert select_tier("auto", 4, 1) == "quadratic"
    assert select_tier("linear", 4, 0) == "linear"


# ---------------------------------------------------------------------------
# ledger bookkeeping and full integrations
# ---------------------------------------------------------------------------


def test_ledger_keeps_only_low_orders():
    ledger = _ledger([0.0], 0.5, p=4)
    ledger.insert(BreakingPoint(1.0, 2))
    assert ledger.locations == [0.0]
    ledger.insert(BreakingPoint(1.0, 1))
    assert ledger.locations == [0.0, 1.0]


class _LinearStep:
    """Step of ``u(t) = t`` used to drive the ledger without integrating."""

    def __init__(self, t, h):
        self.t, self.h = t, h
        self.u0, self.u_end = np.array([t]), np.array([t + h])

    def value(self, theta):
        return np.array([self.t + theta * self.h])


def _lag_problem(*taus):
    return DdeProblem(1, lambda t, u, d: u, [Constant(x) for x in taus], HistoryFunction.constant(1.0), 0.0, 5.0)


def test_process_step_without_crossing_leaves_ledger():
    prob = _lag_problem(1.0)
    ledger = BreakingPointLedger.from_problem(prob, 4, np.array([1.0]))
    before = list(ledger.locations), list(ledger.lower)
    out = process_step(ledger, prob, _LinearStep(0.2, 0.1), 4)
    assert out.accepted_whole and (ledger.locations, ledger.lower) == before


def test_process_step_keeps_earliest_of_two_crossings():
    prob = _lag_problem(1.0, 1.04)
    ledger = BreakingPointLedger.from_problem(prob, 4, np.array([1.0]))
    out = process_step(ledger, prob, _LinearStep(0.95, 0.2), 4)
    assert out.truncate_at == pytest.approx(1.0, abs=1e-14)
    assert out.point.order == 1 and out.point.delay == 0


def test_two_constant_delays_give_mesh_points():
    prob = DdeProblem(1, lambda t, u, d: -d[0] - d[1], [Constant(1.0), Constant(1.04)],
                      HistoryFunction.constant(1.0), 0.0, 2.5)
    sol = integrate(prob, "fcrk4", 0.1)
    mesh = sol.mesh
    for target in (1.0, 1.04):
        assert np.min(np.abs(mesh - target)) <= 1e-12
    assert {round(b.location, 10) for b in sol.breaking_points if b.parent is not None} >= {1.0, 1.04}


@pytest.mark.parametrize("method", ["fcrk2", "fcrk3", "fcrk4"])
def test_every_detected_point_is_a_mesh_point(method):
    sol = integrate(models.CATALOG["test2"].build(), method, 1.0 / 13.5)
    mesh = sol.mesh
    for b in sol.breaking_points:
        if b.location >= sol.problem.t0:
            assert np.min(np.abs(mesh - b.location)) <= 1e-12 * max(1.0, abs(b.location))


def test_test1_fcrk3_point_not_kept_in_ledger():
    prob = models.CATALOG["test1"].build()
    ledger = BreakingPointLedger.from_problem(prob, 3, prob.u0())
    # p - 3 = 0: the order-0 start point is listed, the order-1 child is not
    assert [b.order for b in ledger.points] == [0]
    sol = integrate(prob, "fcrk3", 1.0 / 8.5)
    found = [b for b in sol.breaking_points if b.parent is not None]
    assert len(found) == 1
    assert found[0].order == 1 and found[0].location == pytest.approx(2.0, abs=1e-3)


def test_test2_point_close_to_lambert():
    sol = integrate(models.CATALOG["test2"].build(), "fcrk4", 1.0 / 40.5)
    found = [b for b in sol.breaking_points if b.parent is not None and b.parent.order == -1]
    assert len(found) == 1
    assert found[0].tier == "secant"
    assert abs(found[0].location - lambert_w(1.0)) <= 1e-8


def test_detection_off_records_no_new_points():
    sol = integrate(models.CATALOG["test2"].build(), "fcrk4", 0.05, BreakpointPolicy(enabled=False))
    assert all(b.parent is None for b in sol.breaking_points)


def test_order_chain_increments():
    sol = integrate(models.CATALOG["test2"].build(), "fcrk4", 0.05)
    for b in sol.breaking_points:
        if b.parent is not None:
            assert b.order == b.parent.order + 1
