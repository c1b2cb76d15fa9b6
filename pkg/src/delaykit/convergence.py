"""Error measurement and convergence studies against closed-form solutions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .core import DdeProblem, DenseSolution
from .fcrk import BreakpointPolicy, FixedStep, integrate, resolve_method

SATURATION = 1e-12


def lambda_step(xi: float, t0: float, n: int, lam: float) -> float:
    """Step size placing ``xi`` at fraction ``lam`` of step ``n + 1``."""
    if n < 1 or not 0.0 <= lam < 1.0:
        raise ValueError("need N >= 1 and 0 <= lambda < 1")
    return (xi - t0) / (n + lam)


def max_error(sol: DenseSolution, exact: Callable[[float], float], per_step: int = 20) -> float:
    """Sup-norm error over the mesh plus ``per_step`` samples per step."""
    ts = sol.dense_times(per_step)
    approx = sol(ts)
    ref = np.array([np.atleast_1d(exact(t)) for t in ts]).reshape(approx.shape)
    return float(np.max(np.abs(approx - ref)))


def fitted_slope(hs: Sequence[float], errs: Sequence[float], floor: float = SATURATION) -> float:
    """Least-squares slope of ``log err`` against ``log h`` above ``floor``."""
    hs, errs = np.asarray(hs, float), np.asarray(errs, float)
    keep = errs >= floor
    if keep.sum() < 2:
        return math.nan
    return float(np.polyfit(np.log(hs[keep]), np.log(errs[keep]), 1)[0])


@dataclass
class ConvergenceRow:
    n: int
    h: float
    err: float
    slope: float = math.nan
    xi: float = math.nan
    xi_err: float = math.nan
    xi_slope: float = math.nan
    steps: int = 0
    lam: float = math.nan


@dataclass
class ConvergenceReport:
    method: str
    lam: float
    detection: bool
    rows: list = field(default_factory=list)

    @property
    def slope(self) -> float:
        return fitted_slope([r.h for r in self.rows], [r.err for r in self.rows])

    @property
    def xi_slope(self) -> float:
        return fitted_slope([r.h for r in self.rows], [r.xi_err for r in self.rows])


def _nearest_point(sol: DenseSolution, target: float) -> float:
    found = [b.location for b in sol.breaking_points if b.parent is not None]
    if not found:
        return math.nan
    return min(found, key=lambda x: abs(x - target))


def convergence_row(
    problem: DdeProblem,
    exact: Callable[[float], float],
    method: str,
    n: int,
    lam: float,
    anchor: float,
    detection: bool = True,
    tracked_point: Optional[float] = None,
    per_step: int = 20,
) -> ConvergenceRow:
    """One row of a convergence study: integrate with ``h = (anchor - t0) / (n + lam)``."""
    tableau, tier = resolve_method(method)
    h = lambda_step(anchor, problem.t0, n, lam)
    sol = integrate(problem, tableau, FixedStep(h), BreakpointPolicy(detection, tier))
    row = ConvergenceRow(n, h, max_error(sol, exact, per_step), steps=sol.n_steps, lam=lam)
    if tracked_point is not None and detection:
        row.xi = _nearest_point(sol, tracked_point)
        row.xi_err = abs(row.xi - tracked_point)
    return row


def fill_slopes(rows: Sequence[ConvergenceRow]) -> None:
    """Set the slope-to-previous columns of consecutive rows in place."""
    for prev, row in zip(rows[:-1], rows[1:]):
        ratio = math.log(prev.h / row.h)
        row.slope = math.log(prev.err / row.err) / ratio if row.err > 0 and prev.err > 0 else math.nan
        if row.xi_err > 0 and prev.xi_err > 0:
            row.xi_slope = math.log(prev.xi_err / row.xi_err) / ratio


def convergence_study(
    problem_factory: Callable[[], DdeProblem],
    exact: Callable[[float], float],
    method: str,
    ns: Sequence[int],
    lam,
    anchor: float,
    detection: bool = True,
    tracked_point: Optional[float] = None,
    per_step: int = 20,
) -> ConvergenceReport:
    """Run ``method`` for each ``N`` with ``h = (anchor - t0) / (N + lam)``.

    ``lam`` is a fraction in ``[0, 1)`` or a sequence with one fraction per
    ``N``. ``tracked_point`` is an exact breaking point whose computed
    location is compared with the detected one.
    """
    lams = [float(lam)] * len(ns) if np.ndim(lam) == 0 else [float(x) for x in lam]
    if len(lams) != len(ns):
        raise ValueError("need one lambda per N")
    report = ConvergenceReport(method, lams[0] if np.ndim(lam) == 0 else math.nan, detection)
    for n, lam_n in zip(ns, lams):
        report.rows.append(
            convergence_row(problem_factory(), exact, method, n, lam_n, anchor, detection, tracked_point, per_step)
        )
    fill_slopes(report.rows)
    return report
