"""Small numeric helpers: vectorized monotone inversion, exact sums, grids."""

import math
from fractions import Fraction

import numpy as np

from .errors import RangeError


def log_grid(lo, hi, n):
    return np.exp(np.linspace(math.log(lo), math.log(hi), int(n)))


def decade_grid(lo, hi, per_decade):
    n = max(2, int(round(per_decade * math.log10(hi / lo))) + 1)
    return log_grid(lo, hi, n)


def solve_increasing(f, y, t_max=math.inf, strict=False, max_bisect=80):
    """Invert a nondecreasing ``f`` on ``[0, t_max]`` elementwise.

    Returns the boundary point of ``{t : f(t) < y}`` (or ``{t : f(t) <= y}``
    when ``strict``), i.e. the smallest t with ``f(t) >= y`` (``> y``).
    The bracket is located on powers of two, then bisected to the last ulp.
    Raises ``RangeError`` when ``f(t_max)`` does not reach ``y``.
    """
    y = np.asarray(y, dtype=float)
    scalar = y.ndim == 0
    y = np.atleast_1d(y)
    if np.any(y < 0) or not np.all(np.isfinite(y)):
        raise RangeError("inverse requested for negative or non-finite value")

    def below(t):
        v = f(t)
        return v <= y if strict else v < y

    out = np.zeros_like(y)
    if not strict:
        active = y > 0
    else:
        active = np.ones_like(y, dtype=bool)
    if not np.any(active):
        return out[0] if scalar else out

    k = np.zeros(y.shape, dtype=np.int64)
    capped = np.zeros(y.shape, dtype=bool)
    finite_cap = math.isfinite(t_max)
    # grow upward
    for _ in range(1100):
        hi = np.ldexp(1.0, k)
        if finite_cap:
            over = hi >= t_max
            capped |= over & active
            hi = np.where(over, t_max, hi)
        grow = active & below(hi) & ~capped
        if not np.any(grow):
            break
        k = np.where(grow, k + 1, k)
    hi = np.ldexp(1.0, k)
    if finite_cap:
        hi = np.where(capped, t_max, hi)
    bad = active & below(hi)
    if np.any(bad):
        raise RangeError(
            f"value {float(y[bad][0]):.6g} is beyond the evaluable range (t_max={t_max:.6g})"
        )
    # shrink downward so that lo = hi/2 is strictly below
    lo = hi * 0.5
    for _ in range(1100):
        shrink = active & ~below(lo) & (lo > 0)
        if not np.any(shrink):
            break
        hi = np.where(shrink, lo, hi)
        lo = np.where(shrink, lo * 0.5, lo)
    for _ in range(max_bisect):
        mid = 0.5 * (lo + hi)
        b = below(mid)
        lo = np.where(b, mid, lo)
        hi = np.where(b, hi, mid)
        if np.all(hi - lo <= 4 * np.spacing(hi)):
            break
    out = np.where(active, hi, 0.0)
    return out[0] if scalar else out


def exact_sum(values):
    """Exact sum of float64 values as a ``Fraction``.

    Floats are dyadic rationals, so mantissas are shifted to a common exponent
    and added as Python integers.
    """
    arr = np.asarray(values, dtype=float).ravel()
    arr = arr[arr != 0.0]
    if arr.size == 0:
        return Fraction(0)
    mant, expo = np.frexp(arr)
    ints = (mant * 2.0**53).astype(np.int64)
    expo = expo.astype(np.int64) - 53
    e0 = int(expo.min())
    shifts = (expo - e0).tolist()
    total = 0
    for m, s in zip(ints.tolist(), shifts):
        total += m << s
    return Fraction(total, 1) * (Fraction(2) ** e0)


def fd_derivative(f, t, rel=1e-6):
    t = np.asarray(t, dtype=float)
    h = rel * np.maximum(np.abs(t), 1e-300)
    lo = np.maximum(t - h, 0.0)
    return (f(t + h) - f(lo)) / (t + h - lo)
