"""Threshold delays: ``tau(t)`` solves ``int_{t - tau}^{t} V(s, u(s)) ds = a``.

Integration goes through the differentiated form
``tau' = 1 - V(t, u(t)) / V(t - tau, u(t - tau))``, which turns each threshold
delay into an extra state component read by a discrete state-dependent delay.
The integral condition then only enters through ``tau(t0)``, so computed
solutions should be audited against it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .core import (
    ClampedStateDependent,
    Constant,
    DdeProblem,
    DenseSolution,
    HistoryFunction,
    HistoryPiece,
    StateDependent,
    Threshold,
    time_tol,
)
from .errors import BracketNotFound, HistoryTooShort, VelocityBoundViolation

GL_NODES, GL_WEIGHTS = np.polynomial.legendre.leggauss(5)


@dataclass(frozen=True)
class ThresholdSpec:
    """Velocity, threshold and velocity bounds of one threshold delay.

    ``velocity(t, u)`` must broadcast over leading axes of ``u`` (index state
    entries as ``u[..., k]``) and over array ``t``. ``time_dependent`` marks
    velocities that depend on ``t`` directly, which disables the
    constant-history shortcut for the initial delay.
    """

    velocity: Callable
    a: float
    v_min: float
    v_max: float
    time_dependent: bool = False
    name: str = "tau"

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError("threshold constant a must be positive")
        if not 0 < self.v_min <= self.v_max < math.inf:
            raise ValueError("velocity bounds must satisfy 0 < v_min <= v_max < inf")

    @classmethod
    def on_component(cls, func: Callable, component: int, a: float, v_min: float, v_max: float, name: str = "tau"):
        """Spec whose velocity is ``func(u[component])``."""
        return cls(lambda t, u: func(np.asarray(u)[..., component]), a, v_min, v_max, False, name)

    @property
    def tau_min(self) -> float:
        return self.a / self.v_max

    @property
    def tau_max(self) -> float:
        return self.a / self.v_min

    def __call__(self, t, u):
        return self.velocity(t, u)


# ---------------------------------------------------------------------------
# Quadrature helpers
# ---------------------------------------------------------------------------


def _gl_integrate(f: Callable, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Five-point Gauss-Legendre rule on each interval ``[lo_i, hi_i]``."""
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    nodes = mid[..., None] + half[..., None] * GL_NODES
    vals = f(nodes.ravel()).reshape(nodes.shape)
    return half * (vals @ GL_WEIGHTS)


def _history_velocity(spec: ThresholdSpec, history: HistoryFunction) -> Callable:
    def f(ts):
        ts = np.asarray(ts, float)
        us = np.array([history(t) for t in ts.ravel()]).reshape(ts.shape + (history.dimension,))
        return np.asarray(spec.velocity(ts, us), float).reshape(ts.shape)

    return f


def _split(lo: float, hi: float, cuts: Sequence[float], width: float) -> np.ndarray:
    """Breakpoints of ``[lo, hi]`` at ``cuts`` with pieces no wider than ``width``."""
    pts = [lo] + [c for c in cuts if lo < c < hi] + [hi]
    out = [lo]
    for a, b in zip(pts[:-1], pts[1:]):
        n = max(1, int(math.ceil((b - a) / width)))
        out.extend(a + (b - a) * np.arange(1, n + 1) / n)
    return np.array(out)


def history_integral(spec: ThresholdSpec, history: HistoryFunction, lo: float, hi: float, width: float = 0.05) -> float:
    """``int_lo^hi V(s, phi(s)) ds`` over the history."""
    if hi <= lo:
        return 0.0
    grid = _split(lo, hi, [x for x, _ in history.discontinuities], width)
    return float(np.sum(_gl_integrate(_history_velocity(spec, history), grid[:-1], grid[1:])))


def _constant_history_value(history: HistoryFunction):
    return getattr(history, "constant_value", None)


def initial_threshold_delay(spec: ThresholdSpec, history: HistoryFunction, t0: float = 0.0) -> float:
    """Delay ``tau0`` with ``int_{t0 - tau0}^{t0} V(phi(s)) ds = a``.

    Constant histories use ``a / V(phi)``; otherwise the monotone cumulative
    integral is bracketed on ``[0, a / v_min]``, bisected to width ``1e-14``
    and polished with one Newton step.
    """
    const = _constant_history_value(history)
    if const is not None and not spec.time_dependent:
        v = float(spec.velocity(t0, const))
        _check_velocity(v, t0)
        return spec.a / v
    reach = spec.tau_max * (1.0 + 1e-9)
    if t0 - reach < history.start - time_tol(history.start):
        raise HistoryTooShort(f"history starts at {history.start!r}, threshold needs {t0 - reach!r}")

    def excess(tau):
        return history_integral(spec, history, t0 - tau, t0) - spec.a

    if excess(reach) < 0.0:
        raise HistoryTooShort(f"integral over the full reach {reach!r} stays below a={spec.a!r}")
    lo, hi = 0.0, reach
    while hi - lo > 1e-14 * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if excess(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    tau = 0.5 * (lo + hi)
    v = float(spec.velocity(t0 - tau, history(t0 - tau)))
    _check_velocity(v, t0 - tau)
    return tau - excess(tau) / v


def _check_velocity(v, t):
    if not np.all(np.asarray(v) > 0.0):
        raise VelocityBoundViolation(f"velocity {v!r} is not positive at t={t!r}")


# ---------------------------------------------------------------------------
# Augmentation
# ---------------------------------------------------------------------------


def penalty_rhs(spec: ThresholdSpec, gamma_pen: float) -> Callable:
    """Rate of the delay component with an optional penalty.

    The returned function maps ``(v_now, v_delayed, integral)`` to
    ``1 - v_now / v_delayed + gamma_pen * (a - integral)``; ``integral`` may be
    ``None`` when ``gamma_pen == 0``.
    """
    if gamma_pen < 0:
        raise ValueError("penalty coefficient must be non-negative")

    def rate(v_now, v_delayed, integral=None):
        _check_velocity(v_now, math.nan)
        _check_velocity(v_delayed, math.nan)
        out = 1.0 - v_now / v_delayed
        if gamma_pen:
            out += gamma_pen * (spec.a - integral)
        return out

    return rate


@dataclass(frozen=True)
class ThresholdSlot:
    """Where one threshold delay lives in an augmented state."""

    delay: int
    spec: ThresholdSpec
    tau_index: int
    integral_index: Optional[int] = None


def _wrap_delay(spec, d: int):
    if isinstance(spec, Constant):
        return spec
    if isinstance(spec, StateDependent):
        return StateDependent(lambda t, w, f=spec.func: f(t, w[:d]), spec.monotone)
    if isinstance(spec, ClampedStateDependent):
        return ClampedStateDependent(lambda t, w, f=spec.func: f(t, w[:d]), spec.monotone)
    raise TypeError(f"cannot wrap delay {spec!r}")


def augment_problem(
    problem: DdeProblem,
    penalty: float = 0.0,
    tau0: Optional[Sequence[float]] = None,
    tau0_shift: float = 0.0,
) -> DdeProblem:
    """Replace each threshold delay by a state component with its own ODE.

    The right-hand side of ``problem`` is called as
    ``rhs(t, u, delayed, taus)`` where ``taus`` holds the current value of
    every delay. The augmented state is ``(u, tau_1..tau_m)`` followed, when
    ``penalty > 0``, by running integrals ``I_k(t) = int_{t0}^{t} V_k`` that
    give the penalty term as ``I_k(t) - I_k(t - tau_k)``.
    """
    d = problem.dimension
    thr = [j for j, s in enumerate(problem.delays) if isinstance(s, Threshold)]
    if not thr:
        raise ValueError("problem has no threshold delays")
    m = len(thr)
    use_integral = penalty > 0.0
    slots = []
    for k, j in enumerate(thr):
        slots.append(
            ThresholdSlot(j, problem.delays[j].spec, d + k, d + m + k if use_integral else None)
        )
    if tau0 is None:
        tau0 = [initial_threshold_delay(s.spec, problem.history, problem.t0) for s in slots]
    tau0 = [float(x) + tau0_shift for x in tau0]
    rates = [penalty_rhs(s.spec, penalty) for s in slots]
    dim = d + m + (m if use_integral else 0)
    delays = []
    slot_of = {s.delay: s for s in slots}
    for j, spec in enumerate(problem.delays):
        if j in slot_of:
            delays.append(Threshold(spec.spec, tau_index=slot_of[j].tau_index, monotone=True))
        else:
            delays.append(_wrap_delay(spec, d))
    base_rhs = problem.rhs
    orig = problem.delays

    def rhs(t, w, delayed):
        u = w[:d]
        taus = []
        for j, spec in enumerate(orig):
            if j in slot_of:
                taus.append(w[slot_of[j].tau_index])
            elif isinstance(spec, Constant):
                taus.append(spec.tau)
            else:
                taus.append(float(spec.func(t, u)))
        du = np.asarray(base_rhs(t, u, [x[:d] for x in delayed], taus), float).reshape(d)
        out = np.empty(dim)
        out[:d] = du
        for s, rate in zip(slots, rates):
            tau = w[s.tau_index]
            v_now = float(s.spec.velocity(t, u))
            v_del = float(s.spec.velocity(t - tau, delayed[s.delay][:d]))
            integral = None
            if s.integral_index is not None:
                integral = w[s.integral_index] - delayed[s.delay][s.integral_index]
                out[s.integral_index] = v_now
            out[s.tau_index] = rate(v_now, v_del, integral)
        return out

    history = _augmented_history(problem, slots, tau0, dim)
    reach = max([problem.reach if math.isfinite(problem.reach) else 0.0] + [s.spec.tau_max for s in slots])
    meta = dict(problem.meta)
    meta.update(thresholds=slots, base_dimension=d, penalty=penalty, tau0=tau0)
    return DdeProblem(
        dimension=dim,
        rhs=rhs,
        delays=delays,
        history=history,
        t0=problem.t0,
        tf=problem.tf,
        name=problem.name,
        max_delay=reach,
        initial_value=None if problem.initial_value is None else _augment_value(problem.initial_value, tau0, dim, d),
        t0_order=problem.t0_order,
        meta=meta,
    )


def _augment_value(u, tau0, dim, d):
    out = np.zeros(dim)
    out[:d] = u
    out[d : d + len(tau0)] = tau0
    return out


def _augmented_history(problem: DdeProblem, slots, tau0, dim) -> HistoryFunction:
    d, t0, hist = problem.dimension, problem.t0, problem.history
    const = _constant_history_value(hist)

    def integral_part(s, spec):
        # also evaluated past t0 as the analytic extension of the history
        if const is not None and not spec.time_dependent:
            return (s - t0) * float(spec.velocity(s, const))
        if s >= t0:
            return history_integral(spec, hist, t0, s)
        return -history_integral(spec, hist, s, t0)

    def make(piece):
        def func(s):
            out = np.zeros(dim)
            out[:d] = np.asarray(piece.func(s), float).reshape(d)
            for k, slot in enumerate(slots):
                out[slot.tau_index] = tau0[k]
                if slot.integral_index is not None:
                    out[slot.integral_index] = integral_part(s, slot.spec)
            return out

        return func

    pieces = [HistoryPiece(p.left, p.right, make(p)) for p in hist.pieces]
    out = HistoryFunction(pieces, hist.discontinuities, dim)
    if const is not None and not any(s.integral_index is not None for s in slots):
        out.constant_value = make(hist.pieces[0])(t0)
    return out


# ---------------------------------------------------------------------------
# Audits
# ---------------------------------------------------------------------------


@dataclass
class AuditReport:
    """Residual of the integral condition along a solution."""

    times: np.ndarray
    residuals: np.ndarray
    taus: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def max_residual(self) -> float:
        return float(np.max(np.abs(self.residuals))) if self.residuals.size else 0.0


class CumulativeIntegral:
    """Running integral of ``V(s, u(s))`` along a dense solution and its history."""

    def __init__(self, sol: DenseSolution, integrand: Callable, history_width: Optional[float] = None):
        self.sol = sol
        self.integrand = integrand
        steps = sol.step_sizes
        width = history_width or (float(np.mean(steps)) if steps.size else 0.05)
        lo = sol.t0 - sol.reach
        cuts = [x for x, _ in sol.history.discontinuities]
        hist_grid = _split(lo, sol.t0, cuts, min(width, 0.05))
        self.grid = np.concatenate([hist_grid[:-1], sol.mesh])
        pieces = _gl_integrate(self._f, self.grid[:-1], self.grid[1:])
        self.cum = np.concatenate([[0.0], np.cumsum(pieces)])

    def _f(self, ts):
        ts = np.asarray(ts, float)
        return np.asarray(self.integrand(ts, self.sol(ts)), float).reshape(ts.shape)

    def at(self, ts) -> np.ndarray:
        """``int_{grid[0]}^{t} integrand`` for each ``t``."""
        ts = np.atleast_1d(np.asarray(ts, float))
        idx = np.clip(np.searchsorted(self.grid, ts, side="right") - 1, 0, self.grid.size - 2)
        return self.cum[idx] + _gl_integrate(self._f, self.grid[idx], ts)


def audit_threshold_residual(
    sol: DenseSolution,
    spec: ThresholdSpec,
    tau_index: int,
    times: Optional[np.ndarray] = None,
    per_step: int = 2,
) -> AuditReport:
    """``int_{t - tau(t)}^{t} V(u_h(s)) ds - a`` on a grid over ``[t0, tf]``.

    Integrals use five-point Gauss-Legendre on every interpolant piece.
    """
    if times is None:
        times = sol.dense_times(per_step)
    times = np.asarray(times, float)
    cumulative = CumulativeIntegral(sol, spec.velocity)
    taus = sol(times)[:, tau_index]
    residual = cumulative.at(times) - cumulative.at(times - taus) - spec.a
    return AuditReport(times, residual, taus)


def audit_problem(sol: DenseSolution, **kwargs) -> list:
    """Audit every threshold delay recorded in an augmented problem."""
    return [
        audit_threshold_residual(sol, slot.spec, slot.tau_index, **kwargs)
        for slot in sol.problem.meta.get("thresholds", [])
    ]


# ---------------------------------------------------------------------------
# Dummy-delay quadrature
# ---------------------------------------------------------------------------


def dummy_delay_threshold(velocities: Sequence[float], spec: ThresholdSpec, n: Optional[int] = None) -> float:
    """Threshold delay from velocities at ``N + 1`` equally spaced past times.

    ``velocities[j]`` is ``V(u(t - tau_j))`` with ``tau_j = (j / N) a / v_min``.
    Cumulative trapezoid sums bracket the threshold, and inside the bracket
    ``V`` is taken linear, which makes the partial integral quadratic in the
    fractional index.
    """
    v = np.asarray(velocities, float)
    n = v.size - 1 if n is None else n
    if n < 2 or v.size != n + 1:
        raise ValueError("need N >= 2 and N + 1 velocity samples")
    step = spec.tau_max / n
    cum = np.concatenate([[0.0], np.cumsum(0.5 * step * (v[:-1] + v[1:]))])
    if spec.a >= cum[-1]:
        raise BracketNotFound(f"threshold a={spec.a!r} not reached within tau_max={spec.tau_max!r}")
    j = int(np.searchsorted(cum, spec.a, side="right") - 1)
    qa = 0.5 * step * (v[j + 1] - v[j])
    qb = step * v[j]
    qc = cum[j] - spec.a
    if abs(qa) <= 1e-15 * abs(qb):
        theta = -qc / qb
    else:
        theta = -2.0 * qc / (qb + math.sqrt(max(qb * qb - 4.0 * qa * qc, 0.0)))
    return (j + min(max(theta, 0.0), 1.0)) * step


def dummy_delay_from_solution(sol: DenseSolution, spec: ThresholdSpec, t: float, n: int = 512) -> float:
    """:func:`dummy_delay_threshold` with velocities read from a dense solution."""
    ts = t - np.arange(n + 1) * (spec.tau_max / n)
    v = np.asarray(spec.velocity(ts, sol(ts)), float).reshape(ts.shape)
    return dummy_delay_threshold(v, spec, n)
