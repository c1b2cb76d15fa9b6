"""Acceptance criteria, one test each; every test records a pass/fail line.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines as they
happen; they are also collected in the terminal summary.
"""

import math
import time

import numpy as np
import pytest

from delaykit.analysis import (
    boundedness_guard,
    characteristic_roots,
    check_trajectory_bounds,
    closed_curve_gap,
    evaluate_characteristic,
    poincare_trace,
    scalar_threshold_characteristic,
    steady_states,
)
from delaykit.convergence import convergence_study
from delaykit.core import HistoryFunction
from delaykit.errors import DelayKitError
from delaykit.fcrk import integrate
from delaykit.lambert import lambert_w
from delaykit.models import CATALOG, twostatedep_bounds
from delaykit.threshold import audit_problem, dummy_delay_from_solution

STEPS = [8, 16, 32, 64, 128, 256, 512, 1024]
TEST1_POINT = 2.0
LAMBERT_ONE = 0.5671432904097838


def _study(name, method, lam, detection, anchor, tracked=None):
    entry = CATALOG[name]
    exact = entry.exact_solution(entry.params())
    return convergence_study(entry.build, exact, method, STEPS, lam, anchor, detection, tracked)


def _slopes(reports, attr="slope"):
    return ", ".join(f"{m} {getattr(r, attr):.3f}" for m, r in reports.items())


def test_order_restoration_on_test1(acceptance):
    start = time.perf_counter()
    methods = ["fcrk1", "fcrk2", "fcrk3", "fcrk4"]
    reports = {m: _study("test1", m, 0.5, True, TEST1_POINT, TEST1_POINT) for m in methods}
    elapsed = time.perf_counter() - start
    ok = all(abs(reports[m].slope - p) <= 0.3 for p, m in enumerate(methods, 1)) and elapsed < 30.0
    assert acceptance(1, ok, f"slopes {_slopes(reports)}; {elapsed:.1f} s")


def test_order_reduction_on_test1(acceptance):
    reports = {m: _study("test1", m, 0.5, False, TEST1_POINT) for m in ["fcrk3", "fcrk4"]}
    ok = all(abs(r.slope - 2.0) <= 0.3 for r in reports.values())
    assert acceptance(2, ok, f"slopes {_slopes(reports)}")


def test_order_one_collapse_on_test2(acceptance):
    # lambda = 0 puts the exact breaking point on the mesh
    reports = {m: _study("test2", m, 0.0, False, LAMBERT_ONE) for m in ["fcrk1", "fcrk2", "fcrk3", "fcrk4"]}
    ok = all(abs(r.slope - 1.0) <= 0.3 for r in reports.values())
    assert acceptance(3, ok, f"slopes {_slopes(reports)}")


def test_full_restoration_on_test2(acceptance):
    w1 = lambert_w(1.0)
    methods = ["fcrk2", "fcrk3", "fcrk4"]
    reports = {m: _study("test2", m, 0.5, True, w1, w1) for m in methods}
    ok = abs(w1 - LAMBERT_ONE) <= 1e-15
    for p, m in enumerate(methods, 2):
        rep = reports[m]
        ok &= abs(rep.slope - p) <= 0.3 and abs(rep.xi_slope - p) <= 0.4
        xi_errs = [row.xi_err for row in rep.rows]
        # the detected point converges to the Lambert value
        ok &= xi_errs[-1] < 1e-6 and xi_errs[-1] < xi_errs[0]
    detail = f"err {_slopes(reports)}; xi {_slopes(reports, 'xi_slope')}; W(1) = {w1:.16f}"
    assert acceptance(4, ok, detail)


def test_fcrk4_tier_study(acceptance):
    variants = {"fcrk4-q2": 2, "fcrk4-q3": 3, "fcrk4-q4": 4}
    reports = {m: _study("test1", m, 0.5, True, TEST1_POINT, TEST1_POINT) for m in variants}
    ok = all(abs(r.slope - 4.0) <= 0.3 and abs(r.xi_slope - variants[m]) <= 0.4 for m, r in reports.items())
    assert acceptance(5, ok, f"err {_slopes(reports)}; xi {_slopes(reports, 'xi_slope')}")


def test_threshold_audit(acceptance):
    entry = CATALOG["scalar_threshold"]
    start = time.perf_counter()
    (plain,) = audit_problem(integrate(entry.build({"tf": 50.0}), "fcrk4", 1e-2))
    sol = integrate(entry.build({"tf": 50.0, "penalty": 1.0, "tau0_shift": 1e-3}), "fcrk4", 1e-2)
    times = np.linspace(0.0, 20.0, 2001)
    (penalized,) = audit_problem(sol, times=times)
    elapsed = time.perf_counter() - start
    res = np.abs(penalized.residuals)
    # monotone down to the round-off floor
    above = res > 1e-12
    monotone = bool(np.all(np.diff(res[above]) <= 0.0)) and bool(np.all(above[: np.argmin(above)]))
    ok = plain.max_residual <= 1e-10 and res[0] > 1e-4 and monotone and res[-1] < 1e-6 and elapsed < 10.0
    below = times[np.argmax(res < 1e-6)]
    detail = f"max residual {plain.max_residual:.1e}; penalized {res[0]:.1e} -> below 1e-6 at t={below:.2f}; {elapsed:.1f} s"
    assert acceptance(6, ok, detail)


def _random_threshold_params(rng):
    return dict(
        beta=rng.uniform(0.5, 2.0), mu=rng.uniform(0.0, 0.5), gamma=rng.uniform(0.3, 2.0), a=rng.uniform(0.5, 2.0),
        g_minus=rng.uniform(0.2, 2.0), g_plus=rng.uniform(0.2, 2.0), theta_g=rng.uniform(0.3, 1.5),
        n=float(rng.integers(1, 5)), v_minus=rng.uniform(0.1, 1.0), v_plus=rng.uniform(1.0, 3.0),
        theta_v=rng.uniform(0.3, 1.5), m=float(rng.integers(1, 5)),
    )


def test_characteristic_factorization(acceptance):
    rng = np.random.default_rng(7)
    box = (-5.0, 2.0, 20.0)
    ok, worst, total = True, 0.0, 0
    for _ in range(20):
        params = _random_threshold_params(rng)
        u_star = steady_states("scalar_threshold", params)[0].u
        plain = scalar_threshold_characteristic(params, u_star)
        diff = scalar_threshold_characteristic(params, u_star, differentiated=True)
        first, second = characteristic_roots(plain, box), characteristic_roots(diff, box)
        extra = [z for z in second.roots if np.min(np.abs(z - first.roots), initial=np.inf) > 1e-8]
        missing = [z for z in first.roots if np.min(np.abs(z - second.roots), initial=np.inf) > 1e-8]
        ok &= not missing and len(extra) == 1 and abs(extra[0]) <= 1e-8
        scaled = [abs(evaluate_characteristic(plain, z)) / (1.0 + abs(z)) for z in first.roots]
        worst = max([worst] + scaled)
        total += len(first)
    ok &= worst <= 1e-10 and total > 0
    assert acceptance(7, ok, f"20 sets, {total} roots, only lambda=0 extra, max scaled |Delta| {worst:.1e}")


def test_steady_state_multiplicity(acceptance):
    params = CATALOG["scalar_threshold"].params(preset="g_up_v_up")
    gammas = np.linspace(0.5, 1.5, 41)
    best, inside = 0, True
    for gamma in gammas:
        p = dict(params, gamma=float(gamma))
        roots = [s.u for s in steady_states("scalar_threshold", p)]
        best = max(best, len(set(np.round(roots, 10))))
        inside &= all(0.0 <= u <= p["beta"] * p["g_plus"] / gamma for u in roots)
    ok = params["m"] == params["n"] == 20.0 and best >= 5 and inside
    assert acceptance(8, ok, f"most coexisting steady states {best}; all in [0, beta g+ / gamma]: {inside}")


def _random_history(rng, lower, upper, reach):
    amp, omega, phase = rng.uniform(0.1, 1.0, 3), rng.uniform(0.2, 3.0, 3), rng.uniform(0.0, 2.0 * np.pi, 3)

    def raw(t):
        return float(np.sum(amp * np.sin(omega * t + phase)))

    grid = np.array([raw(t) for t in np.linspace(-reach, 0.0, 2001)])
    span = (upper - lower) * rng.uniform(0.05, 0.9)
    middle = rng.uniform(lower + span / 2 + 1e-3, upper - span / 2 - 1e-3)
    scale = span / (grid.max() - grid.min())
    shift = middle - scale * (grid.max() + grid.min()) / 2
    return HistoryFunction.from_callable(lambda t: np.array([shift + scale * raw(t)]), 0.0)


def test_boundedness_conformance(acceptance):
    entry = CATALOG["twostatedep"]
    params = entry.params(preset="tori_a", overrides={"tf": 200.0})
    lower, upper, reach = twostatedep_bounds(params)
    rng = np.random.default_rng(9)
    failures = []
    for k in range(50):
        history = _random_history(rng, lower, upper, reach)
        if not boundedness_guard(params, history).admissible:
            failures.append((k, "inadmissible history"))
            continue
        try:
            sol = integrate(entry.factory(dict(params, history_function=history)), "fcrk4", 0.05)
        except DelayKitError as exc:
            failures.append((k, type(exc).__name__))
            continue
        inside, _, _ = check_trajectory_bounds(sol, (lower, upper))
        if not inside:
            failures.append((k, "left the interval"))
    ok = not failures and lower == -1.3 and abs(upper - 2.0362) <= 1e-4
    detail = f"50 histories in ({lower:.4g}, {upper:.6g}); failures {failures}"
    assert acceptance(9, ok, detail)


def test_quasi_periodic_section(acceptance):
    params = {"tf": 2000.0, "history": 0.1}
    sol = integrate(CATALOG["twostatedep"].build(params, preset="tori_a"), "fcrk4", 0.05)
    trace = poincare_trace(sol, 1.3, 6.0, t_start=500.0)
    pts = trace.points
    nearest = float(np.min(np.hypot(pts[:, 0], pts[:, 1]))) if len(trace) else 0.0
    gap = closed_curve_gap(pts)
    ok = len(trace) >= 200 and nearest > 0.01 and gap < 0.2
    assert acceptance(10, ok, f"{len(trace)} crossings; nearest to origin {nearest:.3f}; max angular gap {gap:.3f} rad")


def test_threshold_formulations_agree(acceptance):
    entry = CATALOG["scalar_threshold"]
    sol = integrate(entry.build({"gamma": 0.8, "history": 1.0, "tf": 20.0}, preset="g_const_v_up"), "fcrk4", 1e-2)
    spec = sol.problem.meta["thresholds"][0].spec
    start = 5.0
    tau_start = float(sol.evaluate(start)[1])
    times = np.linspace(start, start + tau_start, 81)
    augmented = sol(times)[:, 1]
    dummy = np.array([dummy_delay_from_solution(sol, spec, t, n=512) for t in times])
    gap = float(np.max(np.abs(augmented - dummy)))
    ok = gap <= 1e-6
    assert acceptance(11, ok, f"sup |tau - tau_dummy| on [{start}, {start + tau_start:.4f}] = {gap:.1e}")
