"""Coefficient tables of the explicit continuous Runge-Kutta methods.

Every weight is stored as an exact rational polynomial in the step fraction
``theta``; ``coeffs[m]`` multiplies ``theta**m``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction as F
from itertools import combinations_with_replacement
from typing import Optional

import numpy as np

Poly = tuple  # tuple of Fractions, lowest degree first


def _poly(*coeffs) -> Poly:
    return tuple(F(c) for c in coeffs)


def poly_eval(p: Poly, x):
    acc = F(0) if isinstance(x, F) else 0.0
    for c in reversed(p):
        acc = acc * x + c
    return acc


def _poly_add(p: Poly, q: Poly) -> list:
    n = max(len(p), len(q))
    return [(p[i] if i < len(p) else 0) + (q[i] if i < len(q) else 0) for i in range(n)]


def _stage_interpolant(a_row: list, c_i: F) -> list:
    """Quadratic-in-theta stage weights reproducing ``a_row`` at ``theta = c_i``.

    ``a_ij(theta) = a_ij s**2 + c_i delta_j1 s (1 - s)`` with ``s = theta / c_i``.
    The weights sum to ``theta`` and satisfy the second-order condition
    whenever the discrete row does.
    """
    out = []
    for j, a in enumerate(a_row):
        p = [F(0), F(0), F(a) / (c_i * c_i)]
        if j == 0:
            p[1] += F(1)
            p[2] -= F(1) / c_i
        out.append(tuple(p))
    return out


@dataclass(frozen=True)
class FcrkTableau:
    """Nodes and weight polynomials of one explicit FCRK method.

    ``a[i][j]`` (``j < i``) is the stage-interpolant weight polynomial used for
    overlapping, ``b[i]`` the continuous output weight, ``p`` the uniform order
    and ``b_embedded`` an optional lower-order weight vector for error
    estimates.
    """

    name: str
    c: tuple
    a: tuple
    b: tuple
    p: int
    b_embedded: Optional[tuple] = None
    _arrays: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def stages(self) -> int:
        return len(self.c)

    def a_discrete(self, i: int, j: int) -> F:
        return poly_eval(self.a[i][j], self.c[i])

    # float views used by the stepper ------------------------------------

    def _build(self):
        if self._arrays:
            return self._arrays
        s = self.stages
        deg_b = max(len(p) for p in self.b)
        B = np.zeros((deg_b, s))
        for i, p in enumerate(self.b):
            B[: len(p), i] = [float(x) for x in p]
        deg_a = max([len(p) for row in self.a for p in row] + [1])
        Apoly = np.zeros((s, deg_a, s))
        Adisc = np.zeros((s, s))
        for i in range(s):
            for j, p in enumerate(self.a[i]):
                Apoly[i, : len(p), j] = [float(x) for x in p]
                Adisc[i, j] = float(self.a_discrete(i, j))
        self._arrays.update(
            B=B, Apoly=Apoly, Adisc=Adisc, c=np.array([float(x) for x in self.c]),
            b1=B.sum(axis=0),
            bhat=None if self.b_embedded is None else np.array([float(x) for x in self.b_embedded]),
        )
        return self._arrays

    @property
    def B(self) -> np.ndarray:
        """``B[m, i]``: coefficient of ``theta**m`` in ``b_i``."""
        return self._build()["B"]

    @property
    def A_poly(self) -> np.ndarray:
        """``A_poly[i, m, j]``: coefficient of ``theta**m`` in ``a_ij``."""
        return self._build()["Apoly"]

    @property
    def A(self) -> np.ndarray:
        return self._build()["Adisc"]

    @property
    def c_float(self) -> np.ndarray:
        return self._build()["c"]

    @property
    def b_end(self) -> np.ndarray:
        return self._build()["b1"]

    @property
    def b_hat(self) -> Optional[np.ndarray]:
        return self._build()["bhat"]


def _make(name, c, A_rows, b, p, b_embedded=None) -> FcrkTableau:
    c = tuple(F(x) for x in c)
    a = [()]
    for i in range(1, len(c)):
        a.append(tuple(_stage_interpolant(A_rows[i], c[i])))
    return FcrkTableau(
        name=name, c=c, a=tuple(a), b=tuple(tuple(F(x) for x in q) for q in b), p=p,
        b_embedded=None if b_embedded is None else tuple(F(x) for x in b_embedded),
    )


FCRK1 = _make("fcrk1", [0], [[]], [_poly(0, 1)], 1)

FCRK2 = _make(
    "fcrk2", [0, 1], [[], [1]],
    [_poly(0, 1, F(-1, 2)), _poly(0, 0, F(1, 2))], 2,
    b_embedded=[1, 0],
)

# Four stages, last stage evaluated at the new point. Continuous weights are
# the cubic Hermite interpolant through (u_n, k_1) and (u_{n+1}, k_4).
FCRK3 = _make(
    "fcrk3", [0, F(1, 2), F(2, 3), 1],
    [[], [F(1, 2)], [F(2, 9), F(4, 9)], [F(1, 4), 0, F(3, 4)]],
    [
        _poly(0, 1, F(-5, 4), F(1, 2)),
        _poly(0),
        _poly(0, 0, F(9, 4), F(-3, 2)),
        _poly(0, 0, -1, 1),
    ],
    3,
    b_embedded=[0, 1, 0, 0],
)

# Seven stages of the Dormand-Prince 5(4) pair, advanced with its embedded
# fourth-order weights so the uniform order is exactly four.
_DP_A = [
    [],
    [F(1, 5)],
    [F(3, 40), F(9, 40)],
    [F(44, 45), F(-56, 15), F(32, 9)],
    [F(19372, 6561), F(-25360, 2187), F(64448, 6561), F(-212, 729)],
    [F(9017, 3168), F(-355, 33), F(46732, 5247), F(49, 176), F(-5103, 18656)],
    [F(35, 384), F(0), F(500, 1113), F(125, 192), F(-2187, 6784), F(11, 84)],
]
_DP_P = [
    [F(1), F(-8048581381, 2820520608), F(8663915743, 2820520608), F(-12715105075, 11282082432)],
    [F(0), F(0), F(0), F(0)],
    [F(0), F(131558114200, 32700410799), F(-68118460800, 10900136933), F(87487479700, 32700410799)],
    [F(0), F(-1754552775, 470086768), F(14199869525, 1410260304), F(-10690763975, 1880347072)],
    [F(0), F(127303824393, 49829197408), F(-318862633887, 49829197408), F(701980252875, 199316789632)],
    [F(0), F(-282668133, 205662961), F(2019193451, 616988883), F(-1453857185, 822651844)],
    [F(0), F(40617522, 29380423), F(-110615467, 29380423), F(69997945, 29380423)],
]
_DP_BHAT = [F(5179, 57600), 0, F(7571, 16695), F(393, 640), F(-92097, 339200), F(187, 2100), F(1, 40)]

_DP_B = _DP_A[6] + [F(0)]


def _fourth_order_weights() -> list:
    # Shampine's dense output plus theta**4 (bhat - b): the correction
    # annihilates every condition up to order four, so the continuous order
    # stays four while the step itself uses the fourth-order weights.
    out = []
    for row, b5, b4 in zip(_DP_P, _DP_B, _DP_BHAT):
        poly = [F(0)] + list(row)
        poly[4] += F(b4) - b5
        out.append(tuple(poly))
    return out


FCRK4 = _make(
    "fcrk4", [0, F(1, 5), F(3, 10), F(4, 5), F(8, 9), 1, 1],
    _DP_A,
    _fourth_order_weights(),
    4,
    b_embedded=_DP_B,
)

TABLEAUX = {t.name: t for t in (FCRK1, FCRK2, FCRK3, FCRK4)}


# ---------------------------------------------------------------------------
# Order conditions
# ---------------------------------------------------------------------------


def rooted_trees(order: int) -> list:
    """All rooted trees with ``order`` nodes as nested sorted tuples."""
    if order == 1:
        return [()]
    trees = set()
    # children multisets whose orders sum to order - 1
    for parts in _partitions(order - 1):
        pools = [rooted_trees(k) for k in parts]
        for combo in _product_multiset(parts, pools):
            trees.add(tuple(sorted(combo)))
    return sorted(trees)


def _partitions(n: int, largest: Optional[int] = None):
    largest = n if largest is None else largest
    if n == 0:
        yield ()
        return
    for k in range(min(n, largest), 0, -1):
        for rest in _partitions(n - k, k):
            yield (k,) + rest


def _product_multiset(parts, pools):
    # group equal part sizes so children of equal order are chosen as multisets
    groups = {}
    for k, pool in zip(parts, pools):
        groups.setdefault(k, [pool, 0])[1] += 1
    choices = [list(combinations_with_replacement(pool, cnt)) for pool, cnt in groups.values()]

    def rec(i):
        if i == len(choices):
            yield ()
            return
        for pick in choices[i]:
            for rest in rec(i + 1):
                yield pick + rest

    yield from rec(0)


def tree_order(t) -> int:
    return 1 + sum(tree_order(ch) for ch in t)


def tree_density(t) -> int:
    g = tree_order(t)
    for ch in t:
        g *= tree_density(ch)
    return g


def _weights(t, A, s):
    """Elementary weight vector of tree ``t`` for discrete matrix ``A``."""
    phi = [F(1)] * s
    for ch in t:
        inner = _weights(ch, A, s)
        Ainner = [sum((A[i][j] * inner[j] for j in range(i)), F(0)) for i in range(s)]
        phi = [x * y for x, y in zip(phi, Ainner)]
    return phi


def _residual_poly(weights: list, phi: list, t) -> list:
    """Coefficients of ``sum_i w_i(theta) phi_i - theta**rho / gamma``."""
    acc = [F(0)]
    for w, f in zip(weights, phi):
        acc = _poly_add(acc, [x * f for x in w])
    rho = tree_order(t)
    target = [F(0)] * (rho + 1)
    target[rho] = F(1, tree_density(t))
    return [x - y for x, y in zip(_poly_add(acc, [0] * len(target)), _poly_add(target, [0] * len(acc)))]


@dataclass
class OrderReport:
    """Residuals of the order conditions of one tableau."""

    continuous: dict  # tree -> max |coefficient residual| of b(theta)
    discrete: dict  # tree -> |residual| at theta = 1
    stage_orders: list  # uniform order of each stage interpolant
    stage_consistency: float  # max |a_ij(c_i) - a_ij|

    @property
    def max_residual(self) -> float:
        return max(list(self.continuous.values()) + [0.0])


def verify_order_conditions(tableau: FcrkTableau, up_to_order: Optional[int] = None) -> OrderReport:
    """Check the continuous order conditions of ``tableau`` up to ``up_to_order``."""
    q = tableau.p if up_to_order is None else up_to_order
    if q > tableau.p:
        raise ValueError(f"requested order {q} exceeds the method order {tableau.p}")
    s = tableau.stages
    A = [[tableau.a_discrete(i, j) for j in range(i)] for i in range(s)]
    cont, disc = {}, {}
    for rho in range(1, q + 1):
        for t in rooted_trees(rho):
            phi = _weights(t, A, s)
            res = _residual_poly(tableau.b, phi, t)
            cont[t] = float(max(abs(x) for x in res))
            disc[t] = float(abs(sum(res, F(0))))
    stage_orders = []
    consistency = 0.0
    for i in range(1, s):
        for j, p in enumerate(tableau.a[i]):
            consistency = max(consistency, float(abs(poly_eval(p, tableau.c[i]) - A[i][j])))
        order = 0
        for rho in range(1, 6):
            ok = all(
                all(x == 0 for x in _residual_poly(list(tableau.a[i]) + [()] * (s - i), _weights(t, A, s), t))
                for t in rooted_trees(rho)
            )
            if not ok:
                break
            order = rho
        stage_orders.append(order)
    return OrderReport(cont, disc, stage_orders, consistency)
