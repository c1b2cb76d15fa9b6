"""Problem, history, dense-solution and breaking-point types.

Times are compared with an absolute tolerance ``1e-12 * max(1, |t|)``.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Sequence, Union

import numpy as np

from .errors import AdvanceDetected, OutOfRange

Vector = np.ndarray
RhsFunction = Callable[[float, Vector, Sequence[Vector]], Vector]


def time_tol(t: float) -> float:
    """Tolerance used whenever two times are compared."""
    return 1e-12 * max(1.0, abs(t))


def same_time(a: float, b: float) -> bool:
    return abs(a - b) <= time_tol(max(abs(a), abs(b)))


# ---------------------------------------------------------------------------
# Delay specifications
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Constant:
    """Fixed delay ``tau >= 0``."""

    tau: float
    monotone: bool = True

    def __post_init__(self):
        if not self.tau >= 0.0:
            raise ValueError(f"constant delay must be non-negative, got {self.tau}")


@dataclass(frozen=True)
class StateDependent:
    """Delay ``tau(t, u)`` evaluated at the current state.

    ``monotone`` asserts that ``t - tau(t, u(t))`` is increasing along
    solutions, which lets crossed breaking points be dropped from the ledger.
    """

    func: Callable[[float, Vector], float]
    monotone: bool = False


@dataclass(frozen=True)
class ClampedStateDependent:
    """State-dependent delay whose delayed argument is ``min(t, t - tau)``."""

    func: Callable[[float, Vector], float]
    monotone: bool = False


@dataclass(frozen=True)
class Threshold:
    """Threshold delay defined by an integral condition on a velocity.

    Integration requires the problem to be augmented first (see
    :func:`delaykit.threshold.augment_problem`); after augmentation
    ``tau_index`` names the state component that holds the delay.
    """

    spec: Any  # ThresholdSpec, kept untyped to avoid a circular import
    tau_index: Optional[int] = None
    monotone: bool = True


DelaySpec = Union[Constant, StateDependent, ClampedStateDependent, Threshold]


# ---------------------------------------------------------------------------
# History
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HistoryPiece:
    """Smooth piece of a history function on ``[left, right]``.

    ``func`` maps a time to a state vector and must accept times outside the
    interval (analytic extension).
    """

    left: float
    right: float
    func: Callable[[float], Any]


class HistoryFunction:
    """Piecewise smooth initial function.

    Parameters
    ----------
    pieces : sequence of HistoryPiece
        Ordered, contiguous pieces. The first may start at ``-inf``.
    discontinuities : sequence of (time, order)
        Breaking points of the history. Interior piece boundaries must appear
        here; order ``-1`` marks a jump in value.
    dimension : int
        Length of the state vector.
    """

    def __init__(
        self,
        pieces: Sequence[HistoryPiece],
        discontinuities: Sequence[tuple[float, int]] = (),
        dimension: int = 1,
    ):
        if not pieces:
            raise ValueError("history needs at least one piece")
        for a, b in zip(pieces[:-1], pieces[1:]):
            if not same_time(a.right, b.left):
                raise ValueError(f"history pieces leave a gap between {a.right} and {b.left}")
        listed = {float(x) for x, _ in discontinuities}
        for a in pieces[:-1]:
            if not any(same_time(a.right, x) for x in listed):
                raise ValueError(f"piece boundary {a.right} is not a listed discontinuity")
        self.pieces = tuple(pieces)
        self.discontinuities = tuple(sorted((float(x), int(k)) for x, k in discontinuities))
        self.dimension = int(dimension)
        self._rights = [p.right for p in self.pieces]
        #: state vector when the history is constant, else None
        self.constant_value = None

    @classmethod
    def constant(cls, value, t0: float = 0.0) -> "HistoryFunction":
        vec = np.atleast_1d(np.asarray(value, dtype=float)).copy()
        out = cls([HistoryPiece(-math.inf, t0, lambda t, v=vec: v)], (), vec.size)
        out.constant_value = vec
        return out

    @classmethod
    def from_callable(cls, func, t0: float = 0.0, dimension: int = 1) -> "HistoryFunction":
        return cls([HistoryPiece(-math.inf, t0, func)], (), dimension)

    @property
    def start(self) -> float:
        return self.pieces[0].left

    @property
    def end(self) -> float:
        return self.pieces[-1].right

    def piece_index(self, t: float, side: str = "left") -> int:
        """Index of the piece owning ``t``; at a boundary ``side`` decides."""
        i = bisect.bisect_left(self._rights, t)
        if i < len(self._rights) and same_time(self._rights[i], t):
            if side == "right" and i + 1 < len(self.pieces):
                return i + 1
            return i
        if i > 0 and same_time(self._rights[i - 1], t):
            if side == "right" and i < len(self.pieces):
                return i
            return i - 1
        return min(i, len(self.pieces) - 1)

    def evaluate_piece(self, index: int, t: float) -> Vector:
        return np.asarray(self.pieces[index].func(t), dtype=float).reshape(self.dimension)

    def __call__(self, t: float, side: str = "left") -> Vector:
        return self.evaluate_piece(self.piece_index(t, side), t)


# ---------------------------------------------------------------------------
# Problems
# ---------------------------------------------------------------------------


@dataclass
class DdeProblem:
    """Initial value problem ``u'(t) = rhs(t, u(t), [u(alpha_j(t))])``.

    ``max_delay`` bounds every delay; it sets how far back the history must
    reach and when breaking-point detection can stop. ``initial_value``
    overrides ``history(t0)`` and creates an order -1 point at ``t0``.
    """

    dimension: int
    rhs: RhsFunction
    delays: Sequence[DelaySpec]
    history: HistoryFunction
    t0: float
    tf: float
    name: str = "dde"
    max_delay: Optional[float] = None
    initial_value: Optional[Vector] = None
    t0_order: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be at least 1")
        if not self.tf > self.t0:
            raise ValueError(f"horizon must satisfy tf > t0, got t0={self.t0}, tf={self.tf}")
        self.delays = tuple(self.delays)
        if self.history.dimension != self.dimension:
            raise ValueError("history dimension does not match the problem dimension")

    @property
    def reach(self) -> float:
        """How far before ``t0`` delayed arguments may look."""
        if self.max_delay is not None:
            return float(self.max_delay)
        bounds = []
        for d in self.delays:
            if isinstance(d, Constant):
                bounds.append(d.tau)
            elif isinstance(d, Threshold):
                bounds.append(d.spec.tau_max)
            else:
                return math.inf
        return max(bounds, default=0.0)

    def u0(self) -> Vector:
        if self.initial_value is not None:
            return np.asarray(self.initial_value, dtype=float).reshape(self.dimension).copy()
        return self.history(self.t0, side="left").copy()

    def initial_breaking_points(self) -> list[tuple[float, int]]:
        pts = [(x, k) for x, k in self.history.discontinuities if x < self.t0 - time_tol(self.t0)]
        order = -1 if self.initial_value is not None else self.t0_order
        pts.append((self.t0, order))
        return pts


def delayed_argument(problem: DdeProblem, j: int, t: float, u: Vector) -> float:
    """Delayed argument ``alpha_j(t) = t - tau_j`` at state ``u``."""
    spec = problem.delays[j]
    if isinstance(spec, Constant):
        return t - spec.tau
    if isinstance(spec, ClampedStateDependent):
        return min(t, t - float(spec.func(t, u)))
    if isinstance(spec, StateDependent):
        tau = float(spec.func(t, u))
        if tau < -time_tol(t):
            raise AdvanceDetected(t, j, tau)
        return t - tau
    if isinstance(spec, Threshold):
        if spec.tau_index is None:
            raise ValueError("threshold delay must be augmented before it can be evaluated")
        tau = float(u[spec.tau_index])
        if tau < -time_tol(t):
            raise AdvanceDetected(t, j, tau)
        return t - tau
    raise TypeError(f"unknown delay specification {spec!r}")


# ---------------------------------------------------------------------------
# Breaking points and dense output
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BreakingPoint:
    """A point where some derivative of the solution jumps.

    ``order`` is -1 for a jump in value; ``parent`` and ``delay`` record which
    earlier point and which delay generated this one. ``tier`` names how the
    location was approximated (``mesh``, ``linear``, ``quadratic``, ``secant``
    or ``secant2``).
    """

    location: float
    order: int
    parent: Optional["BreakingPoint"] = None
    delay: Optional[int] = None
    tier: str = "mesh"

    def __post_init__(self):
        if self.order < -1:
            raise ValueError("breaking point order must be at least -1")
        if self.parent is not None and self.order != self.parent.order + 1:
            raise ValueError("breaking point order must exceed its parent's by one")


_POWERS = np.arange(16)


def horner(coef: np.ndarray, theta):
    """Evaluate ``sum_m coef[m] theta**m`` along the first axis of ``coef``."""
    if isinstance(theta, float) and coef.ndim == 2:
        # a power-vector product is cheaper than a Python loop for short arrays
        return (theta ** _POWERS[: coef.shape[0]]) @ coef
    acc = coef[-1]
    for m in range(coef.shape[0] - 2, -1, -1):
        acc = acc * theta + coef[m]
    return acc


class DenseSolution:
    """Piecewise polynomial solution on a mesh plus the history before ``t0``.

    Step ``n`` covers ``[t_n, t_n + h_n]`` with
    ``u(t_n + theta h_n) = sum_m coef_n[m] theta**m``.
    """

    def __init__(self, problem: DdeProblem, method: str = ""):
        self.problem = problem
        self.history = problem.history
        self.dimension = problem.dimension
        self.t0 = float(problem.t0)
        self.method = method
        #: steps retried with half the size after an advanced stage argument
        self.stage_retries = 0
        self._starts: list[float] = []
        self._steps: list[float] = []
        self._coefs: list[np.ndarray] = []
        self.breaking_points: list[BreakingPoint] = []
        self._stacked = None

    # construction -------------------------------------------------------

    def append_step(self, t: float, h: float, coef: np.ndarray) -> None:
        self._starts.append(float(t))
        self._steps.append(float(h))
        self._coefs.append(coef)
        self._stacked = None

    # properties ---------------------------------------------------------

    @property
    def mesh(self) -> np.ndarray:
        if not self._starts:
            return np.array([self.t0])
        return np.array(self._starts + [self._starts[-1] + self._steps[-1]])

    @property
    def step_sizes(self) -> np.ndarray:
        return np.array(self._steps)

    @property
    def n_steps(self) -> int:
        return len(self._starts)

    @property
    def t_end(self) -> float:
        if not self._starts:
            return self.t0
        return self._starts[-1] + self._steps[-1]

    @property
    def reach(self) -> float:
        return self.problem.reach

    def step_poly(self, n: int) -> tuple[float, float, np.ndarray]:
        return self._starts[n], self._steps[n], self._coefs[n]

    # scalar evaluation --------------------------------------------------

    def _step_index(self, t: float, side: str) -> int:
        i = bisect.bisect_right(self._starts, t) - 1
        if i < 0:
            return 0
        if side == "left" and i > 0 and same_time(self._starts[i], t):
            return i - 1
        if side == "right" and i + 1 < len(self._starts) and same_time(self._starts[i + 1], t):
            return i + 1
        return i

    def eval_step(self, n: int, t: float) -> Vector:
        return horner(self._coefs[n], (t - self._starts[n]) / self._steps[n])

    def raw(self, t: float, side: str = "left") -> Vector:
        """Evaluate without range checks; history below ``t0``."""
        if t < self.t0 or (side == "left" and t <= self.t0) or not self._starts:
            return self.history(t, side)
        return self.eval_step(self._step_index(t, side), t)

    def extend_from(self, t: float, anchor: float, side: str) -> Vector:
        """Analytic extension to ``t`` of the piece on ``side`` of ``anchor``."""
        tol = time_tol(anchor)
        if side == "left":
            if anchor <= self.t0 + tol or not self._starts:
                return self.history.evaluate_piece(self.history.piece_index(anchor, "left"), t)
            i = bisect.bisect_left(self._starts, anchor - tol) - 1
            return self.eval_step(max(i, 0), t)
        if anchor < self.t0 - tol:
            return self.history.evaluate_piece(self.history.piece_index(anchor, "right"), t)
        i = bisect.bisect_left(self._starts, anchor - tol)
        if i >= len(self._starts):
            return self.raw(t)
        return self.eval_step(i, t)

    def evaluate(self, t: float, side: Optional[str] = None) -> Vector:
        """Range-checked evaluation; ``side`` reads one side of a jump."""
        t = float(t)
        lo = self.t0 - self.reach
        if t < lo - time_tol(t) or t > self.t_end + time_tol(self.t_end):
            raise OutOfRange(t, lo, self.t_end)
        if side is None:
            return self.raw(t, "left").copy()
        if side not in ("left", "right"):
            raise ValueError("side must be 'left' or 'right'")
        return self.extend_from(t, t, side).copy()

    # vectorised evaluation ---------------------------------------------

    def _stack(self):
        if self._stacked is None:
            deg = max(c.shape[0] for c in self._coefs)
            arr = np.zeros((len(self._coefs), deg, self.dimension))
            for i, c in enumerate(self._coefs):
                arr[i, : c.shape[0]] = c
            self._stacked = (np.array(self._starts), np.array(self._steps), arr)
        return self._stacked

    def __call__(self, ts) -> np.ndarray:
        """Evaluate at many times; returns an array of shape ``(len(ts), d)``."""
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        out = np.empty((ts.size, self.dimension))
        hist = ts < self.t0
        for k in np.flatnonzero(hist):
            out[k] = self.history(ts[k])
        if np.any(~hist):
            starts, steps, coef = self._stack()
            tt = ts[~hist]
            idx = np.clip(np.searchsorted(starts, tt, side="right") - 1, 0, len(starts) - 1)
            theta = (tt - starts[idx]) / steps[idx]
            acc = coef[idx, -1]
            for m in range(coef.shape[1] - 2, -1, -1):
                acc = acc * theta[:, None] + coef[idx, m]
            out[~hist] = acc
        return out

    def dense_times(self, per_step: int = 20, t_start: Optional[float] = None) -> np.ndarray:
        """Mesh points plus ``per_step`` interior samples in every step."""
        starts, steps, _ = self._stack()
        theta = np.arange(per_step + 1) / (per_step + 1)
        grid = (starts[:, None] + steps[:, None] * theta[None, :]).ravel()
        grid = np.append(grid, self.t_end)
        if t_start is not None:
            grid = grid[grid >= t_start]
        return grid


def evaluate_solution(sol: DenseSolution, t: float, piece_hint: Optional[str] = None) -> Vector:
    """Evaluate a dense solution (or its history) at ``t``."""
    return sol.evaluate(t, piece_hint)
