"""Principal branch of the Lambert W function."""

import math


def lambert_w(x: float) -> float:
    """Principal branch ``W(x)`` solving ``W exp(W) = x`` for ``x >= -1/e``.

    Halley iteration started from ``log(1 + x)`` (or from the branch-point
    expansion near ``-1/e``).

    Parameters
    ----------
    x : float
        Argument, at least ``-1/e``.

    Returns
    -------
    float
        ``W(x)`` with ``|W exp(W) - x| <= 1e-15 * max(1, |x|)``.
    """
    x = float(x)
    branch = -1.0 / math.e
    if x < branch:
        if x > branch - 1e-16:
            return -1.0
        raise ValueError(f"lambert_w is undefined for x < -1/e, got {x!r}")
    if x == 0.0:
        return 0.0
    if x == math.e:
        return 1.0
    if x < -0.25:
        q = math.sqrt(max(2.0 * (math.e * x + 1.0), 0.0))
        w = -1.0 + q - q * q / 3.0 + 11.0 / 72.0 * q**3
    else:
        w = math.log1p(x)
        if x > 3.0:
            w -= math.log(w)
    for _ in range(100):
        ew = math.exp(w)
        f = w * ew - x
        if w == -1.0:
            break
        wp1 = w + 1.0
        step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1))
        w_new = w - step
        if w_new == w or abs(step) <= 1e-17 * max(1.0, abs(w_new)):
            w = w_new
            break
        w = w_new
    return w
