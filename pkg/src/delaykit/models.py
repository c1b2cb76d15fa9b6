"""Catalog of built-in delay problems.

Each entry builds a :class:`DdeProblem` from a flat parameter map and may
carry a closed-form solution and exact breaking points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .core import (
    ClampedStateDependent,
    Constant,
    DdeProblem,
    HistoryFunction,
    HistoryPiece,
    StateDependent,
    Threshold,
)
from .lambert import lambert_w
from .threshold import AuditReport, ThresholdSlot, ThresholdSpec, audit_problem, augment_problem, initial_threshold_delay

CATALOG: dict = {}


def _register(entry: ModelCatalogEntry) -> ModelCatalogEntry:
    CATALOG[entry.name] = entry
    return entry

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class ModelCatalogEntry:
    """A named model: factory, defaults, presets and optional exact data.

    ``exact_solution(params)`` returns a callable ``t -> u(t)`` (scalar or
    vector) and ``exact_breakpoints(params)`` a list of ``(location, order)``.
    """

    name: str
    factory: Callable[[dict], DdeProblem]
    defaults: dict
    presets: dict = field(default_factory=dict)
    exact_solution: Optional[Callable[[dict], Callable]] = None
    exact_breakpoints: Optional[Callable[[dict], list]] = None
    description: str = ""

    def params(self, overrides: Optional[dict] = None, preset: Optional[str] = None) -> dict:
        out = dict(self.defaults)
        if preset is not None:
            if preset not in self.presets:
                raise KeyError(f"model {self.name!r} has no preset {preset!r}; choose from {sorted(self.presets)}")
            out.update(self.presets[preset])
        for key, value in (overrides or {}).items():
            if key not in out:
                raise KeyError(f"model {self.name!r} has no parameter {key!r}; known: {sorted(out)}")
            out[key] = value
        return out

    def build(self, overrides: Optional[dict] = None, preset: Optional[str] = None) -> DdeProblem:
        return self.factory(self.params(overrides, preset))


def _scalar(fn):
    """Wrap a scalar right-hand side ``fn(t, u, delayed_values)`` for vectors."""

    def rhs(t, u, delayed):
        return np.array([fn(t, u[0], [d[0] for d in delayed])])

    return rhs


# ---------------------------------------------------------------------------
# Convergence test problems
# ---------------------------------------------------------------------------


def _test1_problem(params: dict) -> DdeProblem:
    def rhs(t, u, delayed):
        return delayed[0] / (2.0 * math.sqrt(t))

    return DdeProblem(
        dimension=1,
        rhs=rhs,
        delays=[StateDependent(lambda t, u: t - (u[0] - SQRT2 + 1.0), monotone=True)],
        history=HistoryFunction.constant(1.0, 1.0),
        t0=1.0,
        tf=float(params["tf"]),
        name="test1",
        max_delay=1.0,
    )


def test1_exact(t: float) -> float:
    """Closed-form solution of the first test problem on ``[1, 5]``."""
    if t <= 2.0:
        return math.sqrt(t)
    return t / 4.0 + 0.5 + (1.0 - 1.0 / SQRT2) * math.sqrt(t)


def model_test1(params: Optional[dict] = None) -> ModelCatalogEntry:
    """Scalar problem whose delayed argument is ``u - sqrt(2) + 1``.

    The solution is ``sqrt(t)`` up to the order-one breaking point ``t = 2``.
    """
    return CATALOG["test1"]


W1 = lambert_w(1.0)


def _test2_problem(params: dict) -> DdeProblem:
    def rhs(t, u, delayed):
        return -u - delayed[0]

    hist = HistoryFunction(
        [
            HistoryPiece(-math.inf, -1.0, lambda t: np.zeros(1)),
            HistoryPiece(-1.0, 0.0, lambda t: np.ones(1)),
        ],
        [(-1.0, -1)],
    )
    return DdeProblem(
        dimension=1,
        rhs=rhs,
        delays=[StateDependent(lambda t, u: 1.0 + u[0], monotone=True)],
        history=hist,
        t0=0.0,
        tf=float(params["tf"]),
        name="test2",
        max_delay=2.0,
    )


def test2_exact(t: float) -> float:
    """Closed-form solution of the second test problem on ``[0, 1]``."""
    if t <= W1:
        return math.exp(-t)
    return -1.0 + math.exp(-t) * (1.0 + 1.0 / W1)


def model_test2(params: Optional[dict] = None) -> ModelCatalogEntry:
    """Scalar problem with a jump in the history at ``t = -1``.

    The delayed argument reaches the jump at ``t = W(1)``.
    """
    return CATALOG["test2"]



_register(
    ModelCatalogEntry(
        "test1", _test1_problem, {"tf": 5.0},
        exact_solution=lambda p: test1_exact,
        exact_breakpoints=lambda p: [(1.0, 0), (2.0, 1)],
        description="u' = u(u - sqrt2 + 1) / (2 sqrt t), history 1 on t <= 1",
    )
)
_register(
    ModelCatalogEntry(
        "test2", _test2_problem, {"tf": 1.0},
        exact_solution=lambda p: test2_exact,
        exact_breakpoints=lambda p: [(-1.0, -1), (0.0, 0), (W1, 0)],
        description="u' = -u - u(t - 1 - u), history 0 before -1 and 1 on [-1, 0]",
    )
)


# ---------------------------------------------------------------------------
# Hill functions
# ---------------------------------------------------------------------------


def hill(u, low: float, high: float, theta: float, n: float):
    """``(low theta**n + high u**n) / (theta**n + u**n)``, with ``u`` clipped at 0."""
    un = np.maximum(u, 0.0) ** n
    tn = theta**n
    return (low * tn + high * un) / (tn + un)


def hill_derivative(u, low: float, high: float, theta: float, n: float):
    """Derivative of :func:`hill` in ``u`` (zero for ``u <= 0``)."""
    u = np.maximum(u, 0.0)
    tn = theta**n
    un = u**n
    dun = n * u ** (n - 1) if n != 1 else np.ones_like(u)
    return (high - low) * tn * dun / (tn + un) ** 2


def _check_exponents(*exps):
    for e in exps:
        if e < 1:
            raise ValueError(f"Hill exponents must be >= 1, got {e!r}")


# ---------------------------------------------------------------------------
# Two state-dependent delays
# ---------------------------------------------------------------------------


def twostatedep_bounds(params: dict) -> tuple:
    """Invariant interval ``(-a1/c1, a1 (k1 + k2) / (gamma c1))`` and history reach."""
    g, k1, k2 = params["gamma"], params["kappa1"], params["kappa2"]
    a1, a2, c1, c2 = params["a1"], params["a2"], params["c1"], params["c2"]
    lower = -a1 / c1
    upper = a1 * (k1 + k2) / (g * c1)
    reach = max(a1 + (k1 + k2) * c1 * a1 / (g * c1), a2 + (k1 + k2) * c2 * a1 / (g * c1))
    return lower, upper, reach


def _twostatedep_problem(params: dict) -> DdeProblem:
    g, k1, k2 = float(params["gamma"]), float(params["kappa1"]), float(params["kappa2"])
    a = (float(params["a1"]), float(params["a2"]))
    c = (float(params["c1"]), float(params["c2"]))
    kind = ClampedStateDependent if params["clamped"] else StateDependent

    def rhs(t, u, delayed):
        return -g * u - k1 * delayed[0] - k2 * delayed[1]

    delays = [kind(lambda t, u, a=a[j], c=c[j]: a + c * u[0]) for j in range(2)]
    history = params.get("history_function")
    if history is None:
        history = HistoryFunction.constant(float(params["history"]), 0.0)
    _, _, reach = twostatedep_bounds(params)
    return DdeProblem(
        dimension=1, rhs=rhs, delays=delays, history=history, t0=0.0,
        tf=float(params["tf"]), name="twostatedep", max_delay=reach,
    )


def model_two_state_dependent(params: Optional[dict] = None) -> ModelCatalogEntry:
    """``u' = -gamma u - sum_j kappa_j u(t - a_j - c_j u(t))``.

    With ``clamped`` set, each delayed argument is ``min(t, t - a_j - c_j u)``.
    """
    return CATALOG["twostatedep"]


_register(
    ModelCatalogEntry(
        "twostatedep", _twostatedep_problem,
        {"gamma": 4.75, "kappa1": 4.44, "kappa2": 3.0, "a1": 1.3, "a2": 6.0, "c1": 1.0, "c2": 1.0,
         "clamped": False, "history": 0.1, "tf": 100.0},
        presets={
            "advex": {"gamma": 1.0, "kappa1": 2.0, "kappa2": 2.0, "a1": 1.0, "a2": 2.0,
                      "c1": 0.5, "c2": 0.4, "clamped": True, "history": 0.5},
            "tori_a": {"gamma": 4.75, "kappa1": 4.44, "kappa2": 3.0, "a1": 1.3, "a2": 6.0,
                       "c1": 1.0, "c2": 1.0, "clamped": False},
            "tori_b": {"gamma": 4.75, "kappa1": 6.93, "kappa2": 3.0, "a1": 1.3, "a2": 6.0,
                       "c1": 1.0, "c2": 1.0, "clamped": False},
        },
        description="u' = -gamma u - kappa1 u(t - a1 - c1 u) - kappa2 u(t - a2 - c2 u)",
    )
)


# ---------------------------------------------------------------------------
# Non-unique example
# ---------------------------------------------------------------------------


def winston_history(t: float) -> float:
    """Initial function, continuous but not Lipschitz at ``t = -1``."""
    if t <= -1.0:
        return -1.0
    if t <= -7.0 / 8.0:
        return 1.5 * np.cbrt(t + 1.0) - 1.0
    return 10.0 / 7.0 * t + 1.0


def winston_candidates() -> tuple:
    """The two closed-form solutions on ``[0, 1/4]``."""
    return (lambda t: 1.0 + t, lambda t: 1.0 + t - t**1.5)


def _winston_problem(params: dict) -> DdeProblem:
    def rhs(t, u, delayed):
        return -delayed[0]

    hist = HistoryFunction(
        [
            HistoryPiece(-math.inf, -1.0, lambda t: np.array([-1.0])),
            HistoryPiece(-1.0, -0.875, lambda t: np.array([1.5 * np.cbrt(t + 1.0) - 1.0])),
            HistoryPiece(-0.875, 0.0, lambda t: np.array([10.0 / 7.0 * t + 1.0])),
        ],
        [(-1.0, 0), (-0.875, 0)],
    )
    return DdeProblem(
        dimension=1, rhs=rhs, delays=[StateDependent(lambda t, u: abs(u[0]))], history=hist,
        t0=0.0, tf=float(params["tf"]), name="winston", max_delay=2.0,
    )


def model_winston(params: Optional[dict] = None) -> ModelCatalogEntry:
    """``u' = -u(t - |u(t)|)`` with a history admitting two solutions.

    Uniqueness fails because the history is not Lipschitz; both candidates
    are returned by :func:`winston_candidates` and neither is asserted.
    """
    return CATALOG["winston"]


_register(
    ModelCatalogEntry(
        "winston", _winston_problem, {"tf": 0.25},
        description="u' = -u(t - |u|); two solutions 1 + t and 1 + t - t^1.5",
    )
)


# ---------------------------------------------------------------------------
# Scalar threshold model
# ---------------------------------------------------------------------------


def scalar_threshold_functions(params: dict) -> tuple:
    """Production ``g``, velocity ``V`` and their derivatives."""
    _check_exponents(params["n"], params["m"])
    gp = (params["g_minus"], params["g_plus"], params["theta_g"], params["n"])
    vp = (params["v_minus"], params["v_plus"], params["theta_v"], params["m"])
    return (
        lambda u: hill(u, *gp),
        lambda u: hill_derivative(u, *gp),
        lambda u: hill(u, *vp),
        lambda u: hill_derivative(u, *vp),
    )


def scalar_threshold_spec(params: dict) -> ThresholdSpec:
    _, _, V, _ = scalar_threshold_functions(params)
    lo, hi = sorted((float(params["v_minus"]), float(params["v_plus"])))
    return ThresholdSpec.on_component(V, 0, float(params["a"]), lo, hi)


def scalar_threshold_problem(params: dict) -> DdeProblem:
    """Unaugmented problem whose delay is a :class:`Threshold`."""
    beta, mu, gamma = float(params["beta"]), float(params["mu"]), float(params["gamma"])
    g, _, V, _ = scalar_threshold_functions(params)
    spec = scalar_threshold_spec(params)

    def rhs(t, u, delayed, taus):
        ud = delayed[0][0]
        return np.array([beta * math.exp(-mu * taus[0]) * V(u[0]) / V(ud) * g(ud) - gamma * u[0]])

    return DdeProblem(
        dimension=1, rhs=rhs, delays=[Threshold(spec)],
        history=HistoryFunction.constant(float(params["history"]), 0.0),
        t0=0.0, tf=float(params["tf"]), name="scalar_threshold",
    )


def _scalar_threshold_augmented(params: dict) -> DdeProblem:
    return augment_problem(
        scalar_threshold_problem(params), penalty=float(params["penalty"]),
        tau0_shift=float(params["tau0_shift"]),
    )


def model_scalar_threshold(params: Optional[dict] = None) -> ModelCatalogEntry:
    """``u' = beta e^(-mu tau) V(u) / V(u(t - tau)) g(u(t - tau)) - gamma u``.

    ``tau`` is the threshold delay of velocity ``V``; ``g`` and ``V`` are Hill
    functions. The factory returns the augmented ``(u, tau)`` system.
    """
    return CATALOG["scalar_threshold"]


_SCALAR_GUP = {"beta": 1.4, "mu": 0.2, "gamma": 0.8, "a": 1.0, "g_minus": 0.5, "g_plus": 1.0,
               "theta_g": 1.0, "n": 20.0, "v_minus": 0.1, "v_plus": 2.0, "theta_v": 0.5, "m": 20.0}
_SCALAR_GCONST = {"beta": 1.4, "mu": 0.2, "gamma": 0.8, "a": 1.0, "g_minus": 1.0, "g_plus": 1.0,
                  "theta_g": 1.0, "n": 1.0, "v_minus": 0.1, "v_plus": 2.0, "theta_v": 1.0, "m": 2.0}

_register(
    ModelCatalogEntry(
        "scalar_threshold", _scalar_threshold_augmented,
        dict(_SCALAR_GUP, history=1.0, tf=50.0, penalty=0.0, tau0_shift=0.0),
        presets={"g_up_v_up": dict(_SCALAR_GUP), "g_const_v_up": dict(_SCALAR_GCONST)},
        description="scalar DDE with one threshold delay and Hill production and velocity",
    )
)


# ---------------------------------------------------------------------------
# Gene expression models
# ---------------------------------------------------------------------------


def _repression(params: dict) -> Callable:
    theta, n = float(params["theta_f"]), float(params["n"])
    return lambda e: hill(e, 1.0, 0.0, theta, n)


def _goodwin_problem(params: dict) -> DdeProblem:
    bM, bI, bE = (float(params[k]) for k in ("beta_M", "beta_I", "beta_E"))
    gM, gI, gE = (float(params[k]) for k in ("gamma_M", "gamma_I", "gamma_E"))
    mu, tM, tI = float(params["mu"]), float(params["tau_M"]), float(params["tau_I"])
    f = _repression(params)
    cM, cI = bM * math.exp(-mu * tM), bI * math.exp(-mu * tI)

    def rhs(t, u, delayed):
        M, I, E = u
        return np.array([cM * f(delayed[0][2]) - gM * M, cI * delayed[1][0] - gI * I, bE * I - gE * E])

    return DdeProblem(
        dimension=3, rhs=rhs, delays=[Constant(tM), Constant(tI)],
        history=HistoryFunction.constant([params["M0"], params["I0"], params["E0"]], 0.0),
        t0=0.0, tf=float(params["tf"]), name="goodwin", max_delay=max(tM, tI),
    )


def model_goodwin(params: Optional[dict] = None) -> ModelCatalogEntry:
    """Goodwin operon with constant transcription and translation delays.

    ``f`` is the repression Hill function ``theta**n / (theta**n + E**n)``.
    """
    return CATALOG["goodwin"]


_GENE_DEFAULTS = {"beta_M": 1.0, "beta_I": 1.0, "beta_E": 1.0, "gamma_M": 0.5, "gamma_I": 0.5,
                  "gamma_E": 0.5, "mu": 0.05, "theta_f": 1.0, "n": 10.0,
                  "M0": 0.5, "I0": 0.5, "E0": 0.5, "tf": 100.0}

_register(
    ModelCatalogEntry(
        "goodwin", _goodwin_problem, dict(_GENE_DEFAULTS, tau_M=2.0, tau_I=1.0),
        description="M' = bM e^(-mu tM) f(E(t - tM)) - gM M; I' = bI e^(-mu tI) M(t - tI) - gI I; E' = bE I - gE E",
    )
)


def operon_problem(params: dict) -> DdeProblem:
    """Operon model with two threshold delays, before augmentation."""
    bM, bI, bE = (float(params[k]) for k in ("beta_M", "beta_I", "beta_E"))
    gM, gI, gE = (float(params[k]) for k in ("gamma_M", "gamma_I", "gamma_E"))
    mu = float(params["mu"])
    f = _repression(params)
    vm = (params["vM_minus"], params["vM_plus"], params["theta_vM"], params["m_M"])
    vi = (params["vI_minus"], params["vI_plus"], params["theta_vI"], params["m_I"])
    _check_exponents(params["n"], params["m_M"], params["m_I"])

    def v_M(e):
        return hill(e, *vm)

    def v_I(m):
        return hill(m, *vi)

    spec_M = ThresholdSpec.on_component(v_M, 2, float(params["a_M"]), *sorted(vm[:2]), name="tau_M")
    spec_I = ThresholdSpec.on_component(v_I, 0, float(params["a_I"]), *sorted(vi[:2]), name="tau_I")

    def rhs(t, u, delayed, taus):
        M, I, E = u
        dM, dI = delayed
        prod_M = bM * math.exp(-mu * taus[0]) * v_M(E) / v_M(dM[2]) * f(dM[2])
        prod_I = bI * math.exp(-mu * taus[1]) * v_I(M) / v_I(dI[0]) * dI[0]
        return np.array([prod_M - gM * M, prod_I - gI * I, bE * I - gE * E])

    return DdeProblem(
        dimension=3, rhs=rhs, delays=[Threshold(spec_M), Threshold(spec_I)],
        history=HistoryFunction.constant([params["M0"], params["I0"], params["E0"]], 0.0),
        t0=0.0, tf=float(params["tf"]), name="operon",
    )


def _operon_augmented(params: dict) -> DdeProblem:
    return augment_problem(operon_problem(params))


def model_operon_state_dependent(params: Optional[dict] = None) -> ModelCatalogEntry:
    """Operon model whose transcription and translation delays are thresholds.

    Each delay has its own velocity (``v_M`` of ``E`` and ``v_I`` of ``M``), so
    no single change of time variable makes both constant. The factory
    returns the augmented system ``(M, I, E, tau_M, tau_I)``.
    """
    return CATALOG["operon"]


_register(
    ModelCatalogEntry(
        "operon", _operon_augmented,
        dict(_GENE_DEFAULTS, a_M=2.0, a_I=1.0, vM_minus=0.5, vM_plus=1.5, theta_vM=1.0, m_M=2.0,
             vI_minus=0.5, vI_plus=1.5, theta_vI=1.0, m_I=2.0),
        description="Goodwin operon with threshold delays a_M = int v_M(E), a_I = int v_I(M)",
    )
)


# ---------------------------------------------------------------------------
# Cell population models
# ---------------------------------------------------------------------------


def _g0_problem(params: dict) -> DdeProblem:
    kappa, gamma, tau = float(params["kappa"]), float(params["gamma"]), float(params["tau"])
    f, theta, s = float(params["f"]), float(params["theta"]), float(params["s"])
    amp = 2.0 * math.exp(-gamma * tau)

    def beta(q):
        return f * theta**s / (theta**s + max(q, 0.0) ** s)

    def rhs(t, u, delayed):
        q, qd = u[0], delayed[0][0]
        return np.array([-(kappa + beta(q)) * q + amp * beta(qd) * qd])

    return DdeProblem(
        dimension=1, rhs=rhs, delays=[Constant(tau)],
        history=HistoryFunction.constant(float(params["history"]), 0.0),
        t0=0.0, tf=float(params["tf"]), name="g0_cellcycle", max_delay=tau,
        meta={"amplification": amp},
    )


def g0_amplification(params: dict) -> float:
    """Cell-cycle amplification ``2 exp(-gamma tau)``."""
    return 2.0 * math.exp(-float(params["gamma"]) * float(params["tau"]))


def model_g0_cellcycle(params: Optional[dict] = None) -> ModelCatalogEntry:
    """Resting-phase stem cells ``Q' = -(kappa + b(Q)) Q + A b(Q(t - tau)) Q(t - tau)``.

    ``b(Q) = f theta**s / (theta**s + Q**s)`` and ``A = 2 exp(-gamma tau)``.
    """
    return CATALOG["g0_cellcycle"]


_register(
    ModelCatalogEntry(
        "g0_cellcycle", _g0_problem,
        {"kappa": 0.1, "gamma": 0.1, "tau": 2.0, "f": 1.0, "theta": 1.0, "s": 2.0,
         "history": 0.5, "tf": 100.0},
        description="Q' = -(kappa + beta(Q)) Q + 2 e^(-gamma tau) beta(Q(t - tau)) Q(t - tau)",
    )
)


def hematopoiesis_functions(params: dict) -> dict:
    """Cytokine-dependent rates; ``G`` is a forcing with default constant ``G0``."""

    def sat(lo, hi, b):
        return lambda g: lo + (hi - lo) * g / (g + b)

    return {
        "G": params.get("forcing") or (lambda t, g0=float(params["G0"]): g0 + 0.0 * np.asarray(t)),
        "kappa_N": sat(0.0, params["kappa_N_max"], params["b_kappa"]),
        "eta": sat(params["eta_min"], params["eta_max"], params["b_eta"]),
        "V": sat(1.0, params["V_max"], params["b_V"]),
        "phi": sat(params["phi_min"], params["phi_max"], params["b_phi"]),
    }


def _hema_problem(params: dict) -> DdeProblem:
    fn = hematopoiesis_functions(params)
    G, kN, eta, V, phi = fn["G"], fn["kappa_N"], fn["eta"], fn["V"], fn["phi"]
    kd, tQ, tNP = float(params["kappa_delta"]), float(params["tau_Q"]), float(params["tau_NP"])
    AQ = 2.0 * math.exp(-float(params["gamma_Q"]) * tQ)
    gNR, gN, gNM = float(params["gamma_NR"]), float(params["gamma_N"]), float(params["gamma_NM"])
    f, theta, s = float(params["f_Q"]), float(params["theta_Q"]), float(params["s_Q"])
    a = float(params["a_NM"])

    def beta(q):
        return f * theta**s / (theta**s + max(q, 0.0) ** s)

    spec = ThresholdSpec(lambda t, u: V(G(t)), a, 1.0, float(params["V_max"]), time_dependent=True, name="tau_NM")
    history = HistoryFunction.constant([params["Q0"], params["NR0"], params["N0"], 0.0, 0.0], 0.0)
    tau_nm0 = initial_threshold_delay(spec, history, 0.0)
    nodes, weights = np.polynomial.legendre.leggauss(8)
    lo, hi = -tau_nm0 - tNP, -tau_nm0
    ss = 0.5 * (lo + hi) + 0.5 * (hi - lo) * nodes
    an0 = math.exp(0.5 * (hi - lo) * float(weights @ eta(G(ss))) - gNM * tau_nm0)
    u0 = [params["Q0"], params["NR0"], params["N0"], tau_nm0, an0]
    history = HistoryFunction.constant(u0, 0.0)

    def rhs(t, u, delayed):
        q, nr, n, tnm, an = u
        qQ, qN = delayed[0][0], delayed[1][0]
        g_now, g_m, g_n = G(t), G(t - tnm), G(t - tNP - tnm)
        ratio = V(g_now) / V(g_m)
        dtau = 1.0 - ratio
        return np.array([
            -(kN(g_now) + kd + beta(q)) * q + AQ * beta(qQ) * qQ,
            an * kN(g_n) * qN * ratio - (gNR + phi(g_now)) * nr,
            phi(g_now) * nr - gN * n,
            dtau,
            an * ((1.0 - dtau) * (eta(g_m) - eta(g_n)) - gNM * dtau),
        ])

    return DdeProblem(
        dimension=5, rhs=rhs,
        delays=[Constant(tQ), StateDependent(lambda t, u: tNP + u[3], monotone=True)],
        history=history, t0=0.0, tf=float(params["tf"]), name="hematopoiesis",
        max_delay=max(tQ, tNP + spec.tau_max),
        meta={"thresholds": [ThresholdSlot(1, spec, 3)], "base_dimension": 3, "amplification_index": 4,
              "functions": fn, "tau_NP": tNP, "gamma_NM": gNM},
    )


def hematopoiesis_audit(sol, times=None, per_step: int = 2) -> dict:
    """Residuals of both integral conditions along a hematopoiesis run.

    ``maturation`` is the threshold residual of the maturation delay and
    ``amplification`` compares ``log A_N`` with
    ``int_{t - tau_N}^{t - tau_NM} eta(G) - gamma_NM tau_NM``.
    """
    meta = sol.problem.meta
    fn, tnp, gnm = meta["functions"], meta["tau_NP"], meta["gamma_NM"]
    (maturation,) = audit_problem(sol, times=times, per_step=per_step)
    ts = maturation.times
    state = sol(ts)
    tnm = state[:, 3]
    lo, hi = ts - tnp - tnm, ts - tnm
    nodes, weights = np.polynomial.legendre.leggauss(8)
    # eta(G) is smooth in time, so a composite rule on four panels suffices
    panels = 4
    total = np.zeros_like(ts)
    for k in range(panels):
        a = lo + (hi - lo) * k / panels
        b = lo + (hi - lo) * (k + 1) / panels
        ss = 0.5 * (a + b)[:, None] + 0.5 * (b - a)[:, None] * nodes
        total += 0.5 * (b - a) * (fn["eta"](fn["G"](ss)) @ weights)
    amplification = np.log(state[:, 4]) - (total - gnm * tnm)
    return {"maturation": maturation, "amplification": AuditReport(ts, amplification, tnm)}


def model_hematopoiesis(params: Optional[dict] = None) -> ModelCatalogEntry:
    """Stem cells ``Q``, marrow reservoir ``N_R`` and circulating neutrophils ``N``.

    The maturation delay and the amplification factor are carried as extra
    components in differentiated form; ``forcing`` (a callable ``t -> G``)
    overrides the constant cytokine level ``G0``. Rates are illustrative.
    """
    return CATALOG["hematopoiesis"]


_register(
    ModelCatalogEntry(
        "hematopoiesis", _hema_problem,
        {"kappa_delta": 0.014, "tau_Q": 2.8, "gamma_Q": 0.03, "f_Q": 8.0, "theta_Q": 0.08, "s_Q": 4.0,
         "kappa_N_max": 0.0146, "b_kappa": 0.4, "eta_min": 1.5, "eta_max": 2.5, "b_eta": 0.4,
         "V_max": 2.0, "b_V": 0.4, "phi_min": 0.3, "phi_max": 2.0, "b_phi": 0.4,
         "gamma_NR": 0.0064, "gamma_N": 2.0, "gamma_NM": 0.15, "tau_NP": 7.3, "a_NM": 3.5,
         "G0": 0.4, "Q0": 1.1, "NR0": 2.3, "N0": 0.3, "tf": 50.0, "forcing": None},
        description="neutrophil model with a cytokine-paced maturation threshold delay",
    )
)
