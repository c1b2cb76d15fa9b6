"""Explicit detection of breaking points propagated by the delays.

During a step the delayed argument ``alpha_j(t)`` is tracked against the
breaking points that bound the history interval it currently reads. When it
crosses one, the step is cut at an approximation of the new breaking point,
whose accuracy is chosen so the method keeps its order.
"""

from __future__ import annotations

import bisect
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from .core import BreakingPoint, DdeProblem, delayed_argument, time_tol
from .errors import DegenerateCrossing

EPS_LINEAR = 1e-10

#: approximation order delivered by each tier
TIER_ACCURACY = {"mesh": math.inf, "linear": 2, "quadratic": 3, "secant": 4, "secant2": 7}

TIERS = ("auto", "linear", "quadratic", "secant", "secant2")


def required_accuracy(p: int, k: int) -> float:
    """Smallest ``r`` with ``|xi - xi_h| = O(h**r)`` that keeps order ``p``
    past a breaking point of order ``k``."""
    if p < 1 or k < 0:
        raise ValueError("need p >= 1 and k >= 0")
    return p / (k + 1)


def select_tier(tier: str, p: int, new_order: int) -> str:
    """Tier used to locate a new point of order ``new_order``.

    ``auto`` uses the quadratic approximation unless the required accuracy
    exceeds what it delivers, then one or two secant corrections.
    """
    if tier != "auto":
        return tier
    r = required_accuracy(p, max(new_order, 0))
    for name in ("quadratic", "secant", "secant2"):
        if TIER_ACCURACY[name] >= r:
            return name
    return "secant2"


@dataclass
class BreakingPointLedger:
    """Breaking points that can still reduce the order, and where each delay reads.

    ``lower[j]`` is the index of the largest listed point not above the
    current delayed argument of delay ``j`` (``-1`` if none), so delay ``j``
    reads the interval ``[points[lower[j]], points[lower[j] + 1])``.
    """

    points: list
    p: int
    cutoff: float
    monotone: list
    lower: list = field(default_factory=list)
    last_crossed: list = field(default_factory=list)

    @classmethod
    def from_problem(cls, problem: DdeProblem, p: int, u0) -> "BreakingPointLedger":
        pts = [BreakingPoint(x, k) for x, k in problem.initial_breaking_points() if k <= p - 3]
        pts.sort(key=lambda b: b.location)
        reach = problem.reach
        cutoff = problem.t0 + (p - 1) * reach if math.isfinite(reach) else math.inf
        ledger = cls(pts, p, cutoff, [bool(getattr(d, "monotone", False)) for d in problem.delays])
        alphas = [delayed_argument(problem, j, problem.t0, u0) for j in range(len(problem.delays))]
        ledger.place(alphas)
        return ledger

    @property
    def locations(self) -> list:
        return [b.location for b in self.points]

    def place(self, alphas: Sequence[float]) -> None:
        locs = self.locations
        self.lower = [bisect.bisect_right(locs, a + time_tol(a)) - 1 for a in alphas]
        self.last_crossed = [None] * len(alphas)

    def bounds(self, j: int) -> tuple:
        i = self.lower[j]
        lo = self.points[i].location if i >= 0 else -math.inf
        hi = self.points[i + 1].location if i + 1 < len(self.points) else math.inf
        return lo, hi

    def frozen_map(self) -> list:
        return [self.bounds(j) for j in range(len(self.lower))]

    def insert(self, point: BreakingPoint) -> None:
        if point.order > self.p - 3:
            return
        q = bisect.bisect_right(self.locations, point.location)
        self.points.insert(q, point)
        self.lower = [i + 1 if i >= q else i for i in self.lower]

    def advance(self, j: int, upward: bool) -> None:
        self.lower[j] += 1 if upward else -1

    def prune(self) -> None:
        """Drop points every (monotone) delay has moved strictly past."""
        if not self.lower or not all(self.monotone):
            return
        drop = min(self.lower)
        if drop > 0:
            del self.points[:drop]
            self.lower = [i - drop for i in self.lower]


def crossing_test(
    ledger: BreakingPointLedger, j: int, alpha_n: float, alpha_next: float, ignore: Optional[float] = None
) -> Optional[tuple]:
    """Listed point crossed by delay ``j`` during the step, if any.

    Returns ``(point, upward)``. A point the step starts on (within the time
    tolerance) or the point ``ignore`` just crossed in the previous step is a
    re-encounter and is skipped.
    """
    lo, hi = ledger.bounds(j)
    hits = []
    for xi, upward in ((hi, True), (lo, False)):
        if not math.isfinite(xi):
            continue
        if (alpha_next - xi) * (alpha_n - xi) > 0:
            continue
        if abs(alpha_n - xi) <= time_tol(xi) or (ignore is not None and xi == ignore):
            continue
        hits.append((abs(alpha_n - xi), xi, upward))
    if not hits:
        return None
    _, xi, upward = min(hits)
    idx = ledger.lower[j] + (1 if upward else 0)
    return ledger.points[idx], upward


def departure_test(ledger: BreakingPointLedger, j: int, alpha_n: float, alpha_next: float) -> Optional[tuple]:
    """Listed point the step starts on (within the time tolerance) and leaves.

    Returns ``(point, upward)`` when ``alpha_n`` sits on a bound of the
    current interval and ``alpha_next`` lies beyond it.
    """
    lo, hi = ledger.bounds(j)
    if math.isfinite(hi) and abs(alpha_n - hi) <= time_tol(hi) and alpha_next > hi + time_tol(hi):
        return ledger.points[ledger.lower[j] + 1], True
    if math.isfinite(lo) and abs(alpha_n - lo) <= time_tol(lo) and alpha_next < lo - time_tol(lo):
        return ledger.points[ledger.lower[j]], False
    return None


def approximate_breaking_point(
    t_n: float,
    h: float,
    alpha_n: float,
    alpha_half: float,
    alpha_next: float,
    xi: float,
    form: str = "series",
    linear: bool = False,
) -> float:
    """Time where the quadratic through the three samples of ``alpha`` hits ``xi``.

    ``form`` selects how the root is evaluated: ``series`` (two-term binomial
    expansion of the root, accurate to ``O(h**3)``; falls back to ``stable``
    when the expansion is not small), ``stable`` (cancellation-free quadratic
    formula, exact for quadratic ``alpha``) or ``closed`` (textbook quadratic
    formula). With ``linear=True`` only the endpoint values are used.
    """
    d1 = (alpha_next - alpha_n) / h
    d2 = (alpha_next - 2.0 * alpha_half + alpha_n) / (h * h)
    gap = xi - alpha_n
    if linear or abs(d2) <= EPS_LINEAR * abs(d1) / h:
        if d1 == 0.0 or gap * d1 < 0.0:
            raise DegenerateCrossing(
                f"delayed argument not crossing {xi!r} transversally on [{t_n!r}, {t_n + h!r}]"
            )
        theta = gap / (d1 * h)
    elif form == "series" and _series_ok(gap, d1 - 2.0 * h * d2, d2):
        den = d1 - 2.0 * h * d2
        return _clip(t_n + gap / den - 2.0 * gap * gap * d2 / den**3, t_n, h)
    elif form in ("stable", "series"):
        # exact root of p(theta) - xi = qa theta^2 + qb theta + qc
        qa = 2.0 * h * h * d2
        qb = h * d1 - 2.0 * h * h * d2
        qc = -gap
        disc = max(qb * qb - 4.0 * qa * qc, 0.0)
        denom = qb + math.copysign(math.sqrt(disc), qb if qb != 0.0 else 1.0)
        if denom == 0.0:
            raise DegenerateCrossing(f"tangential crossing of {xi!r} near t={t_n!r}")
        theta = -2.0 * qc / denom
        if not -1e-12 <= theta <= 1.0 + 1e-12 and theta != 0.0:
            theta = qc / (qa * theta)
    elif form == "closed":
        lead = 2.0 * h * d2 - d1
        return _clip(
            t_n + lead / (4.0 * d2) * (1.0 - math.sqrt(max(1.0 + 8.0 * gap * d2 / lead**2, 0.0))), t_n, h
        )
    else:
        raise ValueError(f"unknown quadratic form {form!r}")
    return _clip(t_n + theta * h, t_n, h)


def _series_ok(gap: float, den: float, d2: float) -> bool:
    """Whether the binomial expansion of the root converges comfortably."""
    return den != 0.0 and abs(8.0 * gap * d2 / den**2) < 0.5


def _clip(t: float, t_n: float, h: float) -> float:
    return min(max(t, t_n), t_n + h)


def secant_correct(
    xi_p: float, t_n: float, alpha_n: float, alpha: Callable[[float], float], xi: float, steps: int = 1
) -> float:
    """One or two secant iterations on ``alpha(t) = xi`` starting from ``xi_p``."""
    a_p = alpha(xi_p)
    if a_p == alpha_n:
        warnings.warn("degenerate secant step; keeping the uncorrected approximation", RuntimeWarning)
        return xi_p
    xi_s = xi_p - (a_p - xi) * (xi_p - t_n) / (a_p - alpha_n)
    if steps >= 2:
        a_s = alpha(xi_s)
        if a_s != a_p:
            xi_s = xi_s - (a_s - xi) * (xi_s - xi_p) / (a_s - a_p)
    return xi_s


@dataclass
class StepOutcome:
    """Result of checking one computed step for breaking points."""

    point: Optional[BreakingPoint] = None
    truncate_at: Optional[float] = None
    restart: bool = False

    @property
    def accepted_whole(self) -> bool:
        return self.truncate_at is None and not self.restart


def process_step(
    ledger: BreakingPointLedger,
    problem: DdeProblem,
    step,
    p: int,
    tier: str = "auto",
    form: str = "series",
) -> StepOutcome:
    """Check a computed step for crossings and update the ledger.

    ``step`` must provide ``t``, ``h``, ``u0``, ``u_end`` and ``value(theta)``.
    Only the earliest new breaking point is kept; the caller truncates the
    step there (or repeats it when the point coincides with its start).
    """
    t_n, h = step.t, step.h
    ignore = ledger.last_crossed
    alphas = [
        (delayed_argument(problem, j, t_n, step.u0), delayed_argument(problem, j, t_n + h, step.u_end))
        for j in range(len(problem.delays))
    ]
    for j, (a0, a1) in enumerate(alphas):
        leaving = departure_test(ledger, j, a0, a1)
        if leaving is not None:
            # the step started on a listed point and read the wrong side of it
            parent, upward = leaving
            point = BreakingPoint(t_n, parent.order + 1, parent=parent, delay=j, tier="mesh")
            ledger.insert(point)
            ledger.advance(j, upward)
            return StepOutcome(point=point, restart=True)
    ledger.last_crossed = [None] * len(ignore)
    found = []
    for j, (a0, a1) in enumerate(alphas):
        hit = crossing_test(ledger, j, a0, a1, ignore[j])
        if hit is None:
            continue
        parent, upward = hit
        used = select_tier(tier, p, parent.order + 1)
        a_half = delayed_argument(problem, j, t_n + 0.5 * h, step.value(0.5))
        x = approximate_breaking_point(
            t_n, h, a0, a_half, a1, parent.location, form=form, linear=(used == "linear")
        )
        if used in ("secant", "secant2"):
            def alpha_at(t, j=j):
                return delayed_argument(problem, j, t, step.value((t - t_n) / h))

            x = _clip(secant_correct(x, t_n, a0, alpha_at, parent.location, 2 if used == "secant2" else 1), t_n, h)
        found.append((x, j, parent, upward, used))
    if not found:
        ledger.prune()
        return StepOutcome()
    x, j, parent, upward, used = min(found, key=lambda f: f[0])
    t_end = t_n + h
    if x >= t_end - time_tol(t_end):
        x = t_end
    restart = x <= t_n + time_tol(t_n)
    if restart:
        x = t_n
    point = BreakingPoint(x, parent.order + 1, parent=parent, delay=j, tier=used)
    ledger.insert(point)
    ledger.advance(j, upward)
    ledger.last_crossed[j] = parent.location
    return StepOutcome(point=point, truncate_at=None if (x == t_end or restart) else x, restart=restart)
