"""Steady states, characteristic roots, Poincare sections and solution norms."""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .core import DenseSolution, HistoryFunction
from .errors import PreconditionFailed

GL_NODES, GL_WEIGHTS = np.polynomial.legendre.leggauss(5)


# ---------------------------------------------------------------------------
# Scalar root finding
# ---------------------------------------------------------------------------


def _bisect(f: Callable, lo: float, hi: float, flo: float, width: float = 1e-14) -> float:
    while hi - lo > width * max(1.0, abs(lo)):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0.0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def real_roots(f: Callable, lo: float, hi: float, samples: int = 20001) -> list:
    """Sign-change roots of a vectorized ``f`` on ``[lo, hi]``.

    Brackets from a uniform sample are bisected to width ``1e-14`` and then
    polished with one secant-based Newton step when it stays in the bracket.
    """
    x = np.linspace(lo, hi, samples)
    y = np.asarray(f(x), float)
    roots = [float(x[i]) for i in np.flatnonzero(y == 0.0)]
    for i in np.flatnonzero(y[:-1] * y[1:] < 0.0):
        a, b = float(x[i]), float(x[i + 1])
        r = _bisect(lambda s: float(f(np.array([s]))[0]), a, b, float(y[i]))
        dx = 1e-7 * max(1.0, abs(r))
        slope = (float(f(np.array([r + dx]))[0]) - float(f(np.array([r - dx]))[0])) / (2 * dx)
        if slope != 0.0:
            polished = r - float(f(np.array([r]))[0]) / slope
            if a <= polished <= b:
                r = polished
        roots.append(r)
    return sorted(roots)


# ---------------------------------------------------------------------------
# Steady states
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SteadyState:
    """One steady state; ``delays`` holds the delay values there."""

    state: tuple
    delays: tuple = ()

    @property
    def u(self) -> float:
        return self.state[0]


def scalar_threshold_h(params: dict) -> Callable:
    """``h(u) = beta e^(-mu a / V(u)) g(u) - gamma u``."""
    from .models import scalar_threshold_functions

    g, _, V, _ = scalar_threshold_functions(params)
    beta, mu, gamma, a = (float(params[k]) for k in ("beta", "mu", "gamma", "a"))
    return lambda u: beta * np.exp(-mu * a / V(u)) * g(u) - gamma * u


def steady_states(model: str, params: dict, samples: int = 20001) -> list:
    """Steady states of a catalog model family for the given parameters.

    Supported: ``scalar_threshold``, ``twostatedep``, ``g0_cellcycle``,
    ``goodwin`` and ``operon``. Threshold families report ``a / V(u*)`` as
    the delay.
    """
    if model == "scalar_threshold":
        from .models import scalar_threshold_functions

        _, _, V, _ = scalar_threshold_functions(params)
        g_max = max(float(params["g_minus"]), float(params["g_plus"]))
        upper = float(params["beta"]) * g_max / float(params["gamma"])
        roots = real_roots(scalar_threshold_h(params), 0.0, upper * (1 + 1e-9), samples)
        a = float(params["a"])
        return [SteadyState((u,), (a / float(V(u)),)) for u in roots]
    if model == "twostatedep":
        return [SteadyState((0.0,), (float(params["a1"]), float(params["a2"])))]
    if model == "g0_cellcycle":
        kappa, f, theta, s = (float(params[k]) for k in ("kappa", "f", "theta", "s"))
        amp = 2.0 * math.exp(-float(params["gamma"]) * float(params["tau"]))
        out = [SteadyState((0.0,), (float(params["tau"]),))]
        # kappa = (A - 1) beta(Q) with beta decreasing from f to 0
        ratio = (amp - 1.0) * f / kappa
        if ratio > 1.0:
            out.append(SteadyState((theta * (ratio - 1.0) ** (1.0 / s),), (float(params["tau"]),)))
        return out
    if model in ("goodwin", "operon"):
        return _gene_steady_states(model, params, samples)
    raise ValueError(f"no steady-state solver for model {model!r}")


def _gene_steady_states(model: str, params: dict, samples: int) -> list:
    from .models import hill

    bM, bI, bE = (float(params[k]) for k in ("beta_M", "beta_I", "beta_E"))
    gM, gI, gE = (float(params[k]) for k in ("gamma_M", "gamma_I", "gamma_E"))
    mu = float(params["mu"])
    theta, n = float(params["theta_f"]), float(params["n"])
    if model == "goodwin":
        tM, tI = float(params["tau_M"]), float(params["tau_I"])

        def delays(E, M):
            return np.full_like(E, tM), np.full_like(M, tI)
    else:
        vm = (params["vM_minus"], params["vM_plus"], params["theta_vM"], params["m_M"])
        vi = (params["vI_minus"], params["vI_plus"], params["theta_vI"], params["m_I"])

        def delays(E, M):
            return float(params["a_M"]) / hill(E, *vm), float(params["a_I"]) / hill(M, *vi)

    def chain(E):
        E = np.asarray(E, float)
        tM, _ = delays(E, E)
        M = bM * np.exp(-mu * tM) * hill(E, 1.0, 0.0, theta, n) / gM
        _, tI = delays(E, M)
        I = bI * np.exp(-mu * tI) * M / gI
        return M, I

    def residual(E):
        _, I = chain(E)
        return bE * I / gE - E

    upper = bE * bI * bM / (gE * gI * gM)
    out = []
    for E in real_roots(residual, 0.0, upper * (1 + 1e-9), samples):
        M, I = (float(np.ravel(x)[0]) for x in chain(np.array([E])))
        tM, tI = delays(np.array([E]), np.array([M]))
        out.append(SteadyState((M, I, E), (float(tM[0]), float(tI[0]))))
    return out


# ---------------------------------------------------------------------------
# Characteristic functions
# ---------------------------------------------------------------------------


class CharacteristicFunction:
    """Analytic ``Delta(lambda)`` with its derivative; vectorized over ``lambda``."""

    #: roots excluded from stability verdicts
    spurious: tuple = ()

    def __call__(self, lam):
        return self.value(np.asarray(lam, complex))

    def value(self, lam):
        raise NotImplementedError

    def derivative(self, lam):
        raise NotImplementedError

    @property
    def delay_scale(self) -> float:
        return 1.0


@dataclass
class DiscreteScalar(CharacteristicFunction):
    """``lambda - mu - sigma e^(-tau lambda)``."""

    mu: float
    sigma: float
    tau: float

    def value(self, lam):
        return lam - self.mu - self.sigma * np.exp(-self.tau * lam)

    def derivative(self, lam):
        return 1.0 + self.sigma * self.tau * np.exp(-self.tau * lam)

    @property
    def delay_scale(self) -> float:
        return self.tau

    def real_part_bound(self) -> float:
        """Every root has real part below ``|mu| + |sigma|``."""
        return abs(self.mu) + abs(self.sigma)


@dataclass
class DiscreteMatrix(CharacteristicFunction):
    """``det(lambda I - A0 - sum_k A_k e^(-lambda tau_k))``."""

    a0: np.ndarray
    matrices: Sequence[np.ndarray]
    taus: Sequence[float]

    def __post_init__(self):
        self.a0 = np.atleast_2d(np.asarray(self.a0, float))
        self.matrices = [np.atleast_2d(np.asarray(m, float)) for m in self.matrices]
        self.taus = [float(t) for t in self.taus]

    def _matrix(self, lam):
        lam = np.asarray(lam, complex)[..., None, None]
        d = self.a0.shape[0]
        M = lam * np.eye(d) - self.a0
        dM = np.broadcast_to(np.eye(d, dtype=complex), M.shape).copy()
        for A, tau in zip(self.matrices, self.taus):
            e = np.exp(-lam * tau)
            M = M - A * e
            dM = dM + tau * A * e
        return M, dM

    def value(self, lam):
        return np.linalg.det(self._matrix(lam)[0])

    def derivative(self, lam):
        M, dM = self._matrix(lam)
        # Jacobi's formula with the adjugate, valid at singular M
        d = M.shape[-1]
        out = np.zeros(M.shape[:-2], complex)
        for k in range(d):
            Mk = M.copy()
            Mk[..., :, k] = dM[..., :, k]
            out = out + np.linalg.det(Mk)
        return out

    @property
    def delay_scale(self) -> float:
        return max(self.taus, default=1.0)


def _exp_ratio(lam, tau):
    """``(1 - e^(-lam tau)) / lam`` and its derivative, finite at ``lam = 0``."""
    x = lam * tau
    small = np.abs(x) < 1e-1
    xs = np.where(small, x, 0.0)
    val_s = np.zeros_like(xs)
    der_s = np.zeros_like(xs)
    term = np.ones_like(xs)
    fact = 1.0
    for k in range(16):
        fact *= k + 1
        val_s = val_s + term / fact
        if k >= 1:
            der_s = der_s + k * term_prev / fact
        term_prev = term
        term = term * (-xs)
    val_s = tau * val_s
    der_s = -tau * tau * der_s
    safe = np.where(small, 1.0, lam)
    e = np.exp(-safe * tau)
    val_l = (1.0 - e) / safe
    der_l = (tau * e * safe - (1.0 - e)) / (safe * safe)
    return np.where(small, val_s, val_l), np.where(small, der_s, der_l)


@dataclass
class ThresholdScalar(CharacteristicFunction):
    """Characteristic function of the scalar threshold model at a steady state.

    ``lambda + gamma - beta e^(-mu tau)[g V'/V (1 - e^(-lambda tau))(1 + mu/lambda)
    + g' e^(-lambda tau)]`` with all functions evaluated at ``u*``; the
    removable singularity at ``lambda = 0`` is evaluated by series.
    """

    beta: float
    mu: float
    gamma: float
    tau: float
    g: float
    dg: float
    v: float
    dv: float

    def _parts(self, lam):
        lam = np.asarray(lam, complex)
        E, dE = _exp_ratio(lam, self.tau)
        e = np.exp(-lam * self.tau)
        c = self.beta * math.exp(-self.mu * self.tau)
        w = self.g * self.dv / self.v
        # (1 - e)(1 + mu/lam) = lam E + mu E
        val = lam + self.gamma - c * (w * (lam + self.mu) * E + self.dg * e)
        der = 1.0 - c * (w * (E + (lam + self.mu) * dE) - self.dg * self.tau * e)
        return val, der

    def value(self, lam):
        return self._parts(lam)[0]

    def derivative(self, lam):
        return self._parts(lam)[1]

    @property
    def delay_scale(self) -> float:
        return self.tau

    def at_zero(self) -> float:
        """Limit at ``lambda = 0``: ``gamma - c [g (V'/V) mu tau + g']``."""
        c = self.beta * math.exp(-self.mu * self.tau)
        return self.gamma - c * (self.g * self.dv / self.v * self.mu * self.tau + self.dg)


@dataclass
class DifferentiatedThreshold(CharacteristicFunction):
    """``lambda * Delta_thres(lambda)``: the differentiated system's function."""

    base: ThresholdScalar
    spurious = (0.0,)

    def value(self, lam):
        lam = np.asarray(lam, complex)
        return lam * self.base.value(lam)

    def derivative(self, lam):
        lam = np.asarray(lam, complex)
        v, d = self.base._parts(lam)
        return v + lam * d

    @property
    def delay_scale(self) -> float:
        return self.base.tau


def evaluate_characteristic(cf: CharacteristicFunction, lam) -> complex:
    """``Delta(lambda)`` for a scalar or array ``lambda``."""
    out = cf(lam)
    return complex(out) if np.ndim(out) == 0 else out


def scalar_threshold_characteristic(params: dict, u_star: float, differentiated: bool = False):
    """Characteristic function of the scalar threshold model at ``u_star``."""
    from .models import scalar_threshold_functions

    g, dg, V, dV = scalar_threshold_functions(params)
    v = float(V(u_star))
    cf = ThresholdScalar(
        float(params["beta"]), float(params["mu"]), float(params["gamma"]), float(params["a"]) / v,
        float(g(u_star)), float(dg(u_star)), v, float(dV(u_star)),
    )
    return DifferentiatedThreshold(cf) if differentiated else cf


def twostatedep_characteristic(params: dict) -> DiscreteMatrix:
    """Linearization at ``u* = 0``, where the delays are the constants ``a_j``."""
    return DiscreteMatrix(
        [[-float(params["gamma"])]],
        [[[-float(params["kappa1"])]], [[-float(params["kappa2"])]]],
        [float(params["a1"]), float(params["a2"])],
    )


@dataclass
class RootReport:
    """Roots found in a search box with their residuals."""

    roots: np.ndarray
    residuals: np.ndarray
    failed_seeds: int
    box: tuple

    def __len__(self):
        return self.roots.size

    def rightmost(self, exclude: Sequence[complex] = (), tol: float = 1e-8) -> Optional[complex]:
        keep = [r for r in self.roots if all(abs(r - x) > tol for x in exclude)]
        return max(keep, key=lambda z: (z.real, z.imag)) if keep else None


def characteristic_roots(
    cf: CharacteristicFunction,
    box: tuple = (-5.0, 2.0, 20.0),
    max_roots: Optional[int] = None,
    re_spacing: float = 0.25,
    iterations: int = 60,
    dedup: float = 1e-8,
) -> RootReport:
    """Roots of ``cf`` in ``re_min <= Re <= re_max``, ``|Im| <= im_max``.

    Newton's method runs from a rectangular seed grid whose imaginary
    spacing is ``pi / (2 tau)``; roots are deduplicated at ``dedup`` and
    kept only when ``|Delta| <= 1e-10 (1 + |lambda|)``.
    """
    re_min, re_max, im_max = box
    im_step = min(math.pi / (2.0 * max(cf.delay_scale, 1e-3)), 0.5)
    re_pts = np.arange(re_min - re_spacing, re_max + re_spacing + 1e-12, re_spacing)
    im_pts = np.arange(-im_max - im_step, im_max + im_step + 1e-12, im_step)
    z = (re_pts[:, None] + 1j * im_pts[None, :]).ravel()
    active = np.ones(z.size, bool)
    for _ in range(iterations):
        if not active.any():
            break
        za = z[active]
        with np.errstate(all="ignore"):
            f = cf.value(za)
            d = cf.derivative(za)
            step = f / d
        bad = ~np.isfinite(step)
        step[bad] = 0.0
        za = za - step
        z[active] = za
        idx = np.flatnonzero(active)
        done = (np.abs(step) <= 1e-15 * (1.0 + np.abs(za))) | bad | (np.abs(za) > 10 * (abs(re_min) + abs(re_max) + im_max))
        active[idx[done]] = False
    # final polishing pass with scalar Newton to settle round-off
    with np.errstate(all="ignore"):
        for _ in range(3):
            step = cf.value(z) / cf.derivative(z)
            step[~np.isfinite(step)] = 0.0
            z = z - step
        res = np.abs(cf.value(z))
    tol = 1e-10 * (1.0 + np.abs(z))
    inside = (z.real >= re_min) & (z.real <= re_max) & (np.abs(z.imag) <= im_max)
    ok = np.isfinite(res) & (res <= tol)
    failed = int(np.sum(~ok))
    cand = z[ok & inside]
    cand = cand[np.argsort(-cand.real, kind="stable")]
    roots: list = []
    for r in cand:
        if all(abs(r - q) > dedup * max(1.0, abs(r)) for q in roots):
            roots.append(r)
    roots = np.array(sorted(roots, key=lambda w: (-w.real, w.imag)), complex)
    # snap conjugate pairs and real roots so the set is exactly symmetric
    roots = np.where(np.abs(roots.imag) < 1e-12, roots.real + 0j, roots)
    if max_roots is not None:
        roots = roots[:max_roots]
    return RootReport(roots, np.abs(cf.value(roots)) if roots.size else np.zeros(0), failed, box)


def stability_abscissa(cf: CharacteristicFunction, box: tuple = (-3.0, 2.0, 20.0)) -> Optional[complex]:
    """Rightmost root, ignoring the function's spurious roots."""
    return characteristic_roots(cf, box).rightmost(exclude=cf.spurious)


def _abscissa_at(factory, box, value):
    return stability_abscissa(factory(value), box)


@dataclass(frozen=True)
class HopfCrossing:
    """Parameter value where a complex pair crosses the imaginary axis."""

    parameter: float
    omega: float
    direction: int  # +1 losing stability as the parameter increases


@dataclass
class SweepRow:
    parameter: float
    rightmost: Optional[complex]

    @property
    def stable(self) -> bool:
        return self.rightmost is None or self.rightmost.real < 0.0


def stability_sweep(
    factory: Callable[[float], CharacteristicFunction],
    values: Sequence[float],
    box: tuple = (-3.0, 2.0, 20.0),
    tol: float = 1e-8,
    mapper: Callable = map,
) -> tuple:
    """Rightmost roots along a one-parameter sweep and the Hopf crossings.

    A sign change of the rightmost real part between two sweep values with
    a non-real rightmost root is refined by halving the bracket until its
    width is below ``tol``. ``mapper`` evaluates the sweep values (for
    example a process pool's ``map``); results keep the input order.
    """
    values = [float(p) for p in values]
    rightmost = mapper(functools.partial(_abscissa_at, factory, box), values)
    rows = [SweepRow(p, r) for p, r in zip(values, rightmost)]
    crossings = []
    for r0, r1 in zip(rows[:-1], rows[1:]):
        if r0.rightmost is None or r1.rightmost is None:
            continue
        if (r0.rightmost.real < 0) == (r1.rightmost.real < 0):
            continue
        lo, hi, s_lo = r0.parameter, r1.parameter, r0.rightmost.real < 0
        root = r1.rightmost
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            rm = stability_abscissa(factory(mid), box)
            if rm is None:
                break
            if (rm.real < 0) == s_lo:
                lo = mid
            else:
                hi, root = mid, rm
        if abs(root.imag) > 1e-6:
            crossings.append(HopfCrossing(0.5 * (lo + hi), float(abs(root.imag)), 1 if s_lo else -1))
    return rows, crossings


# ---------------------------------------------------------------------------
# Poincare sections and norms
# ---------------------------------------------------------------------------


def _poly_values(coef: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Evaluate stacked polynomials ``coef[n, m]`` at ``theta[n, k]``."""
    acc = np.broadcast_to(coef[:, -1:], theta.shape).copy()
    for m in range(coef.shape[1] - 2, -1, -1):
        acc = acc * theta + coef[:, m : m + 1]
    return acc


def downward_zeros(sol: DenseSolution, component: int = 0, t_start: Optional[float] = None, samples: int = 8) -> np.ndarray:
    """Times where ``u_component`` crosses zero from above.

    Each step polynomial is sampled at ``samples + 1`` points and every
    sign change from positive to non-positive is bisected on the polynomial.
    """
    starts, steps, coef = sol._stack()
    coef = coef[:, :, component]
    theta = np.linspace(0.0, 1.0, samples + 1)[None, :].repeat(len(starts), 0)
    vals = _poly_values(coef, theta)
    hit_n, hit_k = np.nonzero((vals[:, :-1] > 0.0) & (vals[:, 1:] <= 0.0))
    if hit_n.size == 0:
        return np.zeros(0)
    lo = theta[hit_n, hit_k]
    hi = theta[hit_n, hit_k + 1]
    c = coef[hit_n]
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        v = _poly_values(c, mid[:, None])[:, 0]
        pos = v > 0.0
        lo = np.where(pos, mid, lo)
        hi = np.where(pos, hi, mid)
    times = starts[hit_n] + steps[hit_n] * 0.5 * (lo + hi)
    times = np.unique(times)
    if t_start is not None:
        times = times[times >= t_start]
    return times


@dataclass
class PoincareTrace:
    times: np.ndarray
    points: np.ndarray  # (n, 2): u(t - a1), u(t - a2)

    def __len__(self):
        return self.times.size


def poincare_trace(sol: DenseSolution, a1: float, a2: float, t_start: Optional[float] = None, component: int = 0) -> PoincareTrace:
    """Delayed coordinates ``(u(t - a1), u(t - a2))`` where ``u(t) = 0``, ``u' < 0``."""
    lo = sol.t0 - sol.reach + max(a1, a2) if math.isfinite(sol.reach) else sol.t0
    start = max(t_start if t_start is not None else -math.inf, lo)
    times = downward_zeros(sol, component, start)
    if times.size == 0:
        return PoincareTrace(times, np.zeros((0, 2)))
    pts = np.column_stack([sol(times - a1)[:, component], sol(times - a2)[:, component]])
    return PoincareTrace(times, pts)


def closed_curve_gap(points: np.ndarray, center: Optional[Sequence[float]] = None) -> float:
    """Largest angular gap (radians) between neighbors sorted by angle about ``center``."""
    pts = np.asarray(points, float)
    if len(pts) < 2:
        return 2 * math.pi
    c = pts.mean(axis=0) if center is None else np.asarray(center, float)
    ang = np.sort(np.arctan2(pts[:, 1] - c[1], pts[:, 0] - c[0]))
    gaps = np.diff(np.concatenate([ang, [ang[0] + 2 * math.pi]]))
    return float(gaps.max())


@dataclass(frozen=True)
class PeriodicNorms:
    l2: float
    maximum: float
    minimum: float


def periodic_norms(sol, t_start: float, period: float, component: int = 0, panels: int = 256) -> PeriodicNorms:
    """``((1/T) int |u|^2)^(1/2)``, max and min of ``u`` over ``[t_start, t_start + T]``.

    ``sol`` may be a :class:`DenseSolution` (integrated piecewise between mesh
    points with five-point Gauss-Legendre) or any vectorized callable.
    """
    t_end = t_start + period
    if isinstance(sol, DenseSolution):
        mesh = sol.mesh
        grid = np.concatenate([[t_start], mesh[(mesh > t_start) & (mesh < t_end)], [t_end]])

        def f(ts):
            return sol(ts)[:, component]
    else:
        grid = np.linspace(t_start, t_end, panels + 1)

        def f(ts):
            return np.asarray(sol(ts), float).reshape(-1)

    lo, hi = grid[:-1], grid[1:]
    nodes = 0.5 * (lo + hi)[:, None] + 0.5 * (hi - lo)[:, None] * GL_NODES
    vals = f(nodes.ravel()).reshape(nodes.shape)
    integral = float(np.sum(0.5 * (hi - lo) * ((vals**2) @ GL_WEIGHTS)))
    dense = (lo[:, None] + (hi - lo)[:, None] * np.linspace(0, 1, 33)[None, :]).ravel()
    dv = f(dense)
    return PeriodicNorms(math.sqrt(max(integral, 0.0) / period), float(dv.max()), float(dv.min()))


# ---------------------------------------------------------------------------
# Boundedness of the two-delay model
# ---------------------------------------------------------------------------


@dataclass
class GuardReport:
    """Outcome of the boundedness check for the two-delay model."""

    admissible: bool
    interval: tuple
    reach: float
    violations: list = field(default_factory=list)

    def raise_if_violated(self) -> None:
        if not self.admissible:
            raise PreconditionFailed("; ".join(self.violations))


def boundedness_guard(params: dict, history=None, samples: int = 2001) -> GuardReport:
    """Check ``gamma > kappa2`` and that the history lies in the invariant interval.

    ``history`` may be a number, a :class:`HistoryFunction` or a callable;
    it is sampled on ``[-tau0, 0]`` together with its listed breaking points.
    """
    from .models import twostatedep_bounds

    lower, upper, reach = twostatedep_bounds(params)
    a1, c1 = float(params["a1"]), float(params["c1"])
    a2, c2 = float(params["a2"]), float(params["c2"])
    violations = []
    if not float(params["gamma"]) > float(params["kappa2"]):
        violations.append(f"gamma > kappa2 fails ({params['gamma']!r} <= {params['kappa2']!r})")
    if not (c1 > 0 and c2 >= 0 and -a1 / c1 >= -a2 / max(c2, 1e-300)):
        violations.append("delays must be ordered so that -a1/c1 >= -a2/c2 with c1 > 0")
    if history is None:
        history = params.get("history", 0.0)
    if isinstance(history, (int, float)):
        values = np.array([float(history)])
    else:
        ts = np.linspace(-reach, 0.0, samples)
        if isinstance(history, HistoryFunction):
            ts = np.union1d(ts, [x for x, _ in history.discontinuities if -reach <= x <= 0.0])
            values = np.array([history(t)[0] for t in ts])
        else:
            values = np.array([float(np.asarray(history(t)).reshape(-1)[0]) for t in ts])
    if values.min() <= lower:
        violations.append(f"history reaches {values.min()!r} <= -a1/c1 = {lower!r}")
    if values.max() >= upper:
        violations.append(f"history reaches {values.max()!r} >= a1(kappa1+kappa2)/(gamma c1) = {upper!r}")
    return GuardReport(not violations, (lower, upper), reach, violations)


def check_trajectory_bounds(sol: DenseSolution, interval: tuple, per_step: int = 8) -> tuple:
    """``(inside, min, max)`` of the first component over the computed range."""
    ts = sol.dense_times(per_step)
    u = sol(ts)[:, 0]
    lo, hi = interval
    return bool(u.min() > lo and u.max() < hi), float(u.min()), float(u.max())
