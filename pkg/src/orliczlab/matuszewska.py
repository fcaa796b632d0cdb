"""Matuszewska-Orlicz function ``M(t) = limsup_s A(st)/A(s)`` and its index.

The limsup is proxied by the maximum over the top decades of a geometric
s-grid.  Closed-form families evaluate ``A(st)/A(s)`` in log space, so their
s-grid may reach far beyond the float range of ``A`` itself.
"""

import csv
import math
from dataclasses import dataclass

import numpy as np

from ._numeric import solve_increasing
from .errors import InvalidProfileError, RangeError
from .young import YoungFunction, indices_of

# log10 of the default s-grid upper end for analytic / generic families
ANALYTIC_LOG10_HI = 1000.0
GENERIC_LOG10_HI = 12.0


@dataclass(frozen=True)
class SGrid:
    """Geometric grid ``10**linspace(log10_lo, log10_hi)`` with a top window."""

    log10_lo: float = 0.0
    log10_hi: float = ANALYTIC_LOG10_HI
    per_decade: int = 16
    window_decades: float = 3.0

    def window(self):
        lo = max(self.log10_lo, self.log10_hi - self.window_decades)
        n = max(2, int(round(self.per_decade * (self.log10_hi - lo))) + 1)
        return np.linspace(lo, self.log10_hi, n) * math.log(10.0)

    def refined(self, factor=2):
        return SGrid(self.log10_lo, self.log10_hi, self.per_decade * factor, self.window_decades)

    def as_dict(self):
        return {
            "log10_lo": self.log10_lo,
            "log10_hi": self.log10_hi,
            "per_decade": self.per_decade,
            "window_decades": self.window_decades,
        }


def default_s_grid(Y, t_hi=1e3):
    if Y.analytic_tail:
        return SGrid()
    hi = GENERIC_LOG10_HI
    if math.isfinite(Y.t_max):
        # margin keeps s*t inside the table despite rounding in 10**x
        hi = min(hi, math.log10(Y.t_max / t_hi) - 1e-9)
    return SGrid(log10_hi=hi)


def _check_grid(Y, s_grid, t):
    if s_grid.log10_hi < 6:
        raise RangeError(
            f"s-grid ends at 1e{s_grid.log10_hi:.3g}; the limsup proxy needs at least 1e6 "
            f"(t_max={Y.t_max:.3g} is too small for t up to {t:.3g})"
        )


def mo_function(Y: YoungFunction, t, s_grid=None):
    """Max of ``A(s t) / A(s)`` over the top window of ``s_grid``."""
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t_arr <= 0):
        raise RangeError("M(t) is sampled at t > 0")
    s_grid = s_grid or default_s_grid(Y, float(t_arr.max()))
    _check_grid(Y, s_grid, float(t_arr.max()))
    Ls = s_grid.window()
    out = np.empty_like(t_arr)
    for i, tv in enumerate(t_arr):
        try:
            lr = Y.log_ratio(Ls, math.log(tv))
        except RangeError as exc:
            raise RangeError(
                f"A(s t) overflows for t={tv:.4g}; use a smaller t or a closed-form family"
            ) from exc
        if not np.all(np.isfinite(lr)):
            raise RangeError(f"non-finite A(st)/A(s) at t={tv:.4g}")
        out[i] = math.exp(float(lr.max()))
    return out if np.ndim(t) else float(out[0])


def profile_t_grid(lo=1e-3, hi=1e3, per_decade=40):
    """Log grid through t = 1 (needed for both sides of the index checks)."""
    n_lo = int(round(per_decade * math.log10(1.0 / lo)))
    n_hi = int(round(per_decade * math.log10(hi)))
    left = np.exp(np.linspace(math.log(lo), 0.0, n_lo + 1))
    right = np.exp(np.linspace(0.0, math.log(hi), n_hi + 1))
    grid = np.concatenate([left[:-1], [1.0], right[1:]])
    return grid


@dataclass(frozen=True)
class MatuszewskaProfile:
    base: YoungFunction
    t_grid: np.ndarray
    M_values: np.ndarray
    p_infinity: float
    p_infinity_uncertainty: float
    s_grid_spec: SGrid

    def metadata(self):
        return {
            "limsup_proxy": "max over top window of the s-grid",
            "s_grid": self.s_grid_spec.as_dict(),
            "p_infinity": self.p_infinity,
            "p_infinity_uncertainty": self.p_infinity_uncertainty,
        }

    def as_young(self):
        return ProfileYoung(self.t_grid, self.M_values)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "M", "lnM_over_lnt"])
            for t, m in zip(self.t_grid.tolist(), self.M_values.tolist()):
                ratio = "" if t == 1.0 else repr(math.log(m) / math.log(t))
                w.writerow([repr(t), repr(m), ratio])


def _index_from(t_grid, M):
    above = t_grid > 1
    if not np.any(above):
        raise InvalidProfileError("profile has no samples with t > 1")
    if np.any(M[above] <= 0):
        raise InvalidProfileError("non-positive M value on t > 1")
    r = np.log(M[above]) / np.log(t_grid[above])
    p_inf = float(r.min())
    return p_inf, float(r[-1] - p_inf)


def build_profile(Y, t_grid=None, s_grid=None):
    t_grid = profile_t_grid() if t_grid is None else np.asarray(t_grid, dtype=float)
    s_grid = s_grid or default_s_grid(Y, float(t_grid.max()))
    M = mo_function(Y, t_grid, s_grid)
    p_inf, unc = _index_from(t_grid, M)
    return MatuszewskaProfile(Y, t_grid, M, p_inf, unc, s_grid)


def mo_index(P: MatuszewskaProfile):
    """Inf over sampled ``t > 1`` of ``ln M(t) / ln t``."""
    return _index_from(P.t_grid, P.M_values)[0]


def check_sandwich(P: MatuszewskaProfile, eps, rtol=1e-12):
    """Smallest sampled ``t0 >= 1`` with ``t^p <= M(t) <= t^(p+eps)`` for all ``t >= t0``."""
    mask = P.t_grid >= 1
    t = P.t_grid[mask]
    M = P.M_values[mask]
    p = P.p_infinity
    ok = (t**p <= M * (1 + rtol)) & (M <= t ** (p + eps) * (1 + rtol))
    bad = np.flatnonzero(~ok)
    if bad.size == 0:
        return True, float(t[0])
    first = int(bad[-1]) + 1
    if first >= t.size - 1:
        return False, math.nan
    return True, float(t[first])


def check_M_young(P: MatuszewskaProfile, rtol=1e-9, upper_decades=1.0):
    """Grid evidence that ``M`` is a Young function.

    Checks nonnegative nondecreasing values, convexity (nondecreasing chord
    slopes), ``M(t) <= t^{p-}`` for ``t < 1`` (which forces ``M(t)/t -> 0``)
    and that ``M(t)/t`` increases over the top decades of the grid.
    """
    t, M = P.t_grid, P.M_values
    if np.any(M < 0) or np.any(np.diff(M) < -rtol * M[1:]):
        return False
    slopes = np.diff(M) / np.diff(t)
    if np.any(np.diff(slopes) < -rtol * np.abs(slopes[1:]) - 1e-300):
        return False
    p_minus = indices_of(P.base).p_minus
    small = t < 1
    if np.any(M[small] > t[small] ** p_minus * (1 + rtol)):
        return False
    top = t >= t[-1] / 10**upper_decades
    q = M[top] / t[top]
    return bool(np.all(np.diff(q) > 0))


def check_M_dominates(P: MatuszewskaProfile, t):
    """``M(t) >= A(t)`` at a sampled ``t > 1`` (holds when ``A(1) = 1`` and ``A`` is a power)."""
    M = mo_function(P.base, t, P.s_grid_spec)
    return bool(M >= float(P.base.A(t)) * (1 - 1e-12))


def check_scaling(P: MatuszewskaProfile, samples, slack=1e-2):
    """``min(s^p+, s^p-) M(t) <= M(st) <= max(...) M(t)`` on ``(s, t)`` samples."""
    idx = indices_of(P.base)
    st = np.asarray(samples, dtype=float).reshape(-1, 2)
    s, t = st[:, 0], st[:, 1]
    Mt = mo_function(P.base, t, P.s_grid_spec)
    Mst = mo_function(P.base, s * t, P.s_grid_spec)
    lo = np.minimum(s**idx.p_plus, s**idx.p_minus) * Mt
    hi = np.maximum(s**idx.p_plus, s**idx.p_minus) * Mt
    return bool(np.all(lo <= Mst * (1 + slack)) and np.all(Mst <= hi * (1 + slack)))


class ProfileYoung(YoungFunction):
    """Young function through sampled points, log-log linear in between.

    Outside the sampled range the end segments are continued as powers, so
    the inverse is exact piecewise root extraction.
    """

    family = "profile"

    def __init__(self, t, values):
        t = np.asarray(t, dtype=float)
        v = np.asarray(values, dtype=float)
        if np.any(v <= 0) or np.any(np.diff(t) <= 0) or np.any(np.diff(v) <= 0):
            raise InvalidProfileError("profile must be positive and strictly increasing")
        self.lt = np.log(t)
        self.lv = np.log(v)
        self.slopes = np.diff(self.lv) / np.diff(self.lt)
        if np.any(self.slopes <= 1):
            raise InvalidProfileError("profile grows no faster than linearly somewhere")

    def _seg(self, L):
        return np.clip(np.searchsorted(self.lt, L, side="right") - 1, 0, self.slopes.size - 1)

    def log_A(self, L):
        L = np.asarray(L, dtype=float)
        k = self._seg(L)
        return self.lv[k] + self.slopes[k] * (L - self.lt[k])

    def _A(self, t):
        t = np.asarray(t, dtype=float)
        pos = t > 0
        with np.errstate(divide="ignore"):
            L = np.log(np.where(pos, t, 1.0))
        return np.where(pos, np.exp(self.log_A(L)), 0.0)

    def _a(self, t):
        t = np.asarray(t, dtype=float)
        pos = t > 0
        ts = np.where(pos, t, 1.0)
        L = np.log(ts)
        k = self._seg(L)
        return np.where(pos, self.slopes[k] * np.exp(self.log_A(L)) / ts, 0.0)

    def A_inv(self, y):
        y = np.asarray(y, dtype=float)
        if np.any(y < 0):
            raise RangeError("inverse of a negative value")
        pos = y > 0
        with np.errstate(divide="ignore"):
            ly = np.log(np.where(pos, y, 1.0))
        k = np.clip(np.searchsorted(self.lv, ly, side="right") - 1, 0, self.slopes.size - 1)
        L = self.lt[k] + (ly - self.lv[k]) / self.slopes[k]
        return np.where(pos, np.exp(L), 0.0)

    def params(self):
        return {"family": self.family, "n_nodes": int(self.lt.size)}


def invert_profile(P: MatuszewskaProfile, y):
    """``M^{-1}(y)`` by bisection on the interpolated profile."""
    Yp = P.as_young()
    return solve_increasing(Yp._A, y)
