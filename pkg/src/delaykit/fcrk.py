"""Explicit FCRK stepping and the integration driver."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .breakpoints import TIERS, BreakingPointLedger, process_step
from .core import BreakingPoint, DdeProblem, DenseSolution, Threshold, delayed_argument, horner, time_tol
from .errors import AdvanceDetected, BlowUp, StepUnderflow
from .tableaux import FCRK1, FCRK2, FCRK3, FCRK4, FcrkTableau

#: method name -> (tableau, breaking point tier)
METHODS = {
    "fcrk1": (FCRK1, "auto"),
    "fcrk2": (FCRK2, "auto"),
    "fcrk3": (FCRK3, "auto"),
    "fcrk4": (FCRK4, "auto"),
    "fcrk4-q2": (FCRK4, "linear"),
    "fcrk4-q3": (FCRK4, "quadratic"),
    "fcrk4-q4": (FCRK4, "secant"),
}


@dataclass
class StepResult:
    """One computed step ``[t, t + h]``.

    ``coef`` holds the interpolant ``sum_m coef[m] theta**m``; ``reads`` lists
    for each stage and delay the delayed argument and where it was read
    (``overlap``, ``left``, ``right`` or ``plain``).
    """

    t: float
    h: float
    u0: np.ndarray
    K: np.ndarray
    coef: np.ndarray
    reads: list = field(default_factory=list)

    @property
    def u_end(self) -> np.ndarray:
        return self.coef.sum(axis=0)

    def value(self, theta: float) -> np.ndarray:
        return horner(self.coef, theta)

    def truncated(self, h_new: float) -> "StepResult":
        scale = (h_new / self.h) ** np.arange(self.coef.shape[0])
        coef = self.coef * scale[:, None]
        coef[0] = self.u0
        return StepResult(self.t, h_new, self.u0, self.K, coef, self.reads)


def take_step(
    problem: DdeProblem,
    sol: DenseSolution,
    t_n: float,
    u_n: np.ndarray,
    h: float,
    tableau: FcrkTableau,
    frozen: Optional[Sequence[tuple]] = None,
) -> StepResult:
    """Compute one step of ``tableau`` from ``(t_n, u_n)`` with size ``h``.

    ``frozen`` gives per delay an interval ``[lo, hi)``; delayed arguments
    outside it are read from the analytic extension of the piece adjacent to
    the violated bound. Arguments beyond ``t_n`` use the stage interpolants.
    """
    if not h > 0.0:
        raise ValueError("step size must be positive")
    c, A, Ap, B = tableau.c_float, tableau.A, tableau.A_poly, tableau.B
    s, d = tableau.stages, problem.dimension
    nd = len(problem.delays)
    K = np.empty((s, d))
    reads = []
    rhs = problem.rhs
    # frozen bounds shrunk by the time tolerance: [lo + tol, hi - tol)
    bounds = [
        (lo + time_tol(lo) if lo > -math.inf else lo, hi - time_tol(hi) if hi < math.inf else hi, lo, hi)
        for lo, hi in (frozen if frozen is not None else [(-math.inf, math.inf)] * nd)
    ]
    for i in range(s):
        ti = t_n + c[i] * h
        ui = u_n + h * (A[i, :i] @ K[:i]) if i else u_n
        delayed = []
        for j in range(nd):
            alpha = delayed_argument(problem, j, ti, ui)
            lo_in, hi_in, lo, hi = bounds[j]
            if alpha >= hi_in:
                val, src = sol.extend_from(alpha, hi, "left"), "left"
            elif alpha < lo_in:
                val, src = sol.extend_from(alpha, lo, "right"), "right"
            elif alpha > t_n:
                if i == 0:
                    val = u_n
                else:
                    w = horner(Ap[i, :, :i], (alpha - t_n) / h)
                    val = u_n + h * (w @ K[:i])
                src = "overlap"
            else:
                val, src = sol.raw(alpha), "plain"
            delayed.append(val)
            reads.append((i, j, alpha, src))
        k = np.asarray(rhs(ti, ui, delayed), dtype=float).reshape(d)
        if not np.all(np.isfinite(k)):
            raise BlowUp(ti, i)
        K[i] = k
    coef = h * (B @ K)
    coef[0] += u_n
    return StepResult(t_n, h, u_n, K, coef, reads)


# ---------------------------------------------------------------------------
# Step controllers
# ---------------------------------------------------------------------------


class FixedStep:
    """Constant step ``h``; the last step is shortened to hit ``tf``."""

    adaptive = False

    def __init__(self, h: float):
        if not h > 0:
            raise ValueError("step size must be positive")
        self.h = float(h)

    def propose(self, t: float, tf: float) -> float:
        rem = tf - t
        return rem if rem <= self.h * (1.0 + 1e-9) else self.h

    def accept(self, step, err: float = 0.0) -> None:
        pass


class GridSteps:
    """Steps that land on a user-supplied increasing grid of times."""

    adaptive = False

    def __init__(self, times: Sequence[float]):
        self.times = np.asarray(sorted(times), dtype=float)

    def propose(self, t: float, tf: float) -> float:
        nxt = self.times[self.times > t + time_tol(t)]
        target = nxt[0] if nxt.size else tf
        return min(target, tf) - t

    def accept(self, step, err: float = 0.0) -> None:
        pass


class AdaptiveStep:
    """Proportional controller on an embedded error estimate."""

    adaptive = True

    def __init__(self, rtol: float = 1e-6, atol: float = 1e-9, h0: float = 1e-2, h_max: float = math.inf):
        self.rtol, self.atol, self.h, self.h_max = rtol, atol, h0, h_max

    def propose(self, t: float, tf: float) -> float:
        return min(self.h, tf - t, self.h_max)

    def error(self, step: StepResult, tableau: FcrkTableau) -> float:
        if tableau.b_hat is None:
            raise ValueError(f"{tableau.name} has no embedded weights for error control")
        est = step.h * ((tableau.b_end - tableau.b_hat) @ step.K)
        scale = self.atol + self.rtol * np.maximum(np.abs(step.u0), np.abs(step.u_end))
        return float(np.sqrt(np.mean((est / scale) ** 2)))

    def update(self, err: float, order: int) -> None:
        fac = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err ** (-1.0 / order)))
        self.h *= fac

    def accept(self, step, err: float = 0.0) -> None:
        pass


# ---------------------------------------------------------------------------
# Driver
# ---------------------------------------------------------------------------


@dataclass
class BreakpointPolicy:
    """How breaking points are handled during integration.

    ``tier`` is ``auto`` or a fixed approximation (``linear``, ``quadratic``,
    ``secant``, ``secant2``); ``form`` selects the quadratic root formula.
    """

    enabled: bool = True
    tier: str = "auto"
    form: str = "series"

    def __post_init__(self):
        if self.tier not in TIERS:
            raise ValueError(f"unknown tier {self.tier!r}")


def resolve_method(name: str) -> tuple:
    try:
        return METHODS[name]
    except KeyError:
        raise ValueError(f"unknown method {name!r}; choose from {sorted(METHODS)}") from None


def integrate(
    problem: DdeProblem,
    tableau,
    step_controller,
    breaking_point_policy: Optional[BreakpointPolicy] = None,
    max_restarts: int = 100,
    max_halvings: int = 8,
) -> DenseSolution:
    """Integrate ``problem`` over ``[t0, tf]``.

    ``tableau`` is an :class:`FcrkTableau` or a method name such as
    ``"fcrk4-q2"`` (which also fixes the breaking-point tier).
    ``step_controller`` is a step size, :class:`FixedStep`,
    :class:`GridSteps` or :class:`AdaptiveStep`.

    A step whose inner stages (or end value) give an advanced delayed
    argument is retried with half the size, at most ``max_halvings`` times;
    an advance at the step start is raised at once.
    """
    policy = breaking_point_policy if breaking_point_policy is not None else BreakpointPolicy()
    if isinstance(tableau, str):
        tableau, tier = resolve_method(tableau)
        if policy.tier == "auto":
            policy = BreakpointPolicy(policy.enabled, tier, policy.form)
    if isinstance(step_controller, (int, float)):
        step_controller = FixedStep(step_controller)
    for spec in problem.delays:
        if isinstance(spec, Threshold) and spec.tau_index is None:
            raise ValueError("threshold delays must be augmented before integration")
    sol = DenseSolution(problem, tableau.name)
    t, tf = float(problem.t0), float(problem.tf)
    u = problem.u0()
    p = tableau.p
    ledger = None
    if policy.enabled:
        ledger = BreakingPointLedger.from_problem(problem, p, u)
        sol.breaking_points.extend(BreakingPoint(x, k) for x, k in problem.initial_breaking_points())
    restarts = halvings = 0
    while t < tf - time_tol(tf):
        h = step_controller.propose(t, tf) * 0.5**halvings
        if h < 1e-14 * max(1.0, abs(t)):
            raise StepUnderflow(t, h)
        active = ledger is not None and t <= ledger.cutoff
        try:
            step = take_step(problem, sol, t, u, h, tableau, ledger.frozen_map() if active else None)
            for j in range(len(problem.delays)):
                delayed_argument(problem, j, t + h, step.u_end)
        except AdvanceDetected as exc:
            if exc.t <= t or halvings >= max_halvings:
                raise
            halvings += 1
            sol.stage_retries += 1
            continue
        halvings = 0
        if step_controller.adaptive:
            err = step_controller.error(step, tableau)
            step_controller.update(err, p)
            if err > 1.0:
                continue
        if active:
            outcome = process_step(ledger, problem, step, p, policy.tier, policy.form)
            if outcome.point is not None:
                sol.breaking_points.append(outcome.point)
            if outcome.restart:
                restarts += 1
                if restarts > max_restarts:
                    raise StepUnderflow(t, 0.0)
                continue
            if outcome.truncate_at is not None:
                step = step.truncated(outcome.truncate_at - t)
        restarts = 0
        sol.append_step(t, step.h, step.coef)
        t = t + step.h
        u = step.u_end
    return sol
