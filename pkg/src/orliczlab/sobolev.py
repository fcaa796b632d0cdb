"""Orlicz-Sobolev conjugate ``A_n = A o H^{-1}``.

``H(t) = (int_0^t (tau / A(tau))^{1/(n-1)} dtau)^{(n-1)/n}`` is tabulated on a
log grid with Gauss-Legendre cells in ``ln tau``.  The first cell ``[0, t_lo]``
uses the local power law of ``A`` at ``t_lo``, which is exact for powers and
whose relative error for other families is of the order of the index drift
on ``[0, t_lo]``.
"""

import csv
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ._numeric import log_grid
from .errors import DomainError, RangeError, UnsupportedRegimeError
from .young import (
    OVERFLOW_CAP,
    GrowthIndices,
    TabulatedYoung,
    YoungFunction,
    estimate_indices,
    indices_of,
    sobolev_exponent,
)

_GL_X, _GL_W = np.polynomial.legendre.leggauss(10)
T_LO = 1e-12
T_HI = 1e100


def _log_integrand(Y, n, L):
    """``log`` of ``tau * (tau/A(tau))^{1/(n-1)}`` at ``tau = e^L`` (integrand in ``ln tau``)."""
    if Y.analytic_tail:
        lA = Y.log_A(L)
    else:
        with np.errstate(divide="ignore"):
            lA = np.log(Y._A(np.exp(L)))
    return L + (L - lA) / (n - 1)


def _gl_log(Y, n, la, lb):
    """``int_{e^la}^{e^lb} (tau/A)^{1/(n-1)} dtau`` for arrays of endpoints."""
    la = np.asarray(la, dtype=float)[..., None]
    lb = np.asarray(lb, dtype=float)[..., None]
    half = 0.5 * (lb - la)
    x = la + half * (_GL_X + 1.0)
    vals = np.exp(_log_integrand(Y, n, x))
    return (half * vals * _GL_W).sum(axis=-1)


def _local_index(Y, t):
    t = np.asarray(t, dtype=float)
    return t * Y._a(t) / Y._A(t)


class HTable:
    """Cumulative quadrature table of ``I(t) = int_0^t (tau/A)^{1/(n-1)}``."""

    def __init__(self, base: YoungFunction, n: int, t_lo=T_LO, t_hi=T_HI, per_decade=32):
        self.base = base
        self.n = int(n)
        t_hi = min(t_hi, base.t_max)
        if not t_lo < t_hi:
            raise RangeError("empty H table range")
        nodes = log_grid(t_lo, t_hi, max(2, int(round(per_decade * math.log10(t_hi / t_lo)))) + 1)
        if isinstance(base, TabulatedYoung):
            # quadrature cells must not straddle kinks of the tabulated density
            extra = base.t_nodes[(base.t_nodes > t_lo) & (base.t_nodes < t_hi)]
            nodes = np.unique(np.concatenate([nodes, extra]))
        self.nodes = nodes
        self.lnodes = np.log(nodes)
        self.per_decade = per_decade
        p0 = float(_local_index(base, t_lo))
        self.beta0 = 1.0 + (1.0 - p0) / (n - 1)
        if self.beta0 <= 0:
            raise UnsupportedRegimeError(
                f"integrand is not integrable at 0 (local index {p0:.4g} >= n={n})"
            )
        w0 = math.exp(float(_log_integrand(base, n, math.log(t_lo)))) / t_lo
        first = t_lo * w0 / self.beta0
        cells = _gl_log(base, n, self.lnodes[:-1], self.lnodes[1:])
        self.I = np.concatenate([[first], first + np.cumsum(cells)])
        self.lI = np.log(self.I)
        self.lH = (n - 1) / n * self.lI
        self.t_lo = float(nodes[0])
        self.t_hi = float(nodes[-1])
        self.H_max = float(np.exp(self.lH[-1]))

    # -- H and derivatives ------------------------------------------------
    def I_of(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        if np.any(t < 0) or np.any(t > self.t_hi * (1 + 1e-15)):
            raise RangeError(f"t outside H table [0, {self.t_hi:.4g}]")
        small = (t > 0) & (t < self.t_lo)
        out[small] = self.I[0] * (t[small] / self.t_lo) ** self.beta0
        big = t >= self.t_lo
        if np.any(big):
            tb = np.minimum(t[big], self.t_hi)
            lt = np.log(tb)
            k = np.clip(np.searchsorted(self.lnodes, lt, side="right") - 1, 0, self.nodes.size - 1)
            part = _gl_log(self.base, self.n, self.lnodes[k], lt)
            out[big] = self.I[k] + part
        return out

    def H(self, t):
        I = self.I_of(t)
        return I ** ((self.n - 1) / self.n)

    def w(self, t):
        t = np.asarray(t, dtype=float)
        return np.exp(_log_integrand(self.base, self.n, np.log(t))) / t

    def dH(self, t):
        """``H'(t) = (n-1)/n * I^{-1/n} * w(t)``."""
        t = np.asarray(t, dtype=float)
        return (self.n - 1) / self.n * self.I_of(t) ** (-1.0 / self.n) * self.w(t)

    def d2H(self, t):
        t = np.asarray(t, dtype=float)
        n = self.n
        I = self.I_of(t)
        w = self.w(t)
        dw = w * (1.0 / t - self.base._a(t) / self.base._A(t)) / (n - 1)
        return (n - 1) / n * (-(1.0 / n) * I ** (-1.0 / n - 1) * w * w + I ** (-1.0 / n) * dw)

    # -- inverse ----------------------------------------------------------
    def H_inv(self, s, rtol=1e-14, max_newton=12):
        s = np.asarray(s, dtype=float)
        scalar = s.ndim == 0
        s = np.atleast_1d(s)
        if np.any(s < 0) or not np.all(np.isfinite(s)):
            raise RangeError("H^{-1} of a negative or non-finite value")
        if np.any(s > self.H_max * (1 + 1e-15)):
            raise RangeError(f"s beyond the H table range (H_max={self.H_max:.4g})")
        out = np.zeros_like(s)
        pos = s > 0
        ls = np.log(s[pos])
        lI_target = ls * self.n / (self.n - 1)
        small = lI_target < self.lI[0]
        res = np.empty_like(ls)
        # exact inverse of the power law on [0, t_lo]
        res[small] = self.t_lo * np.exp((lI_target[small] - self.lI[0]) / self.beta0)
        big = ~small
        if np.any(big):
            tgt = lI_target[big]
            k = np.clip(np.searchsorted(self.lI, tgt, side="right") - 1, 0, self.nodes.size - 2)
            lo, hi = self.lnodes[k], self.lnodes[k + 1]
            frac = (tgt - self.lI[k]) / (self.lI[k + 1] - self.lI[k])
            x = lo + frac * (hi - lo)
            for _ in range(max_newton):
                t = np.exp(x)
                I = self.I_of(t)
                f = np.log(I) - tgt
                # d ln I / d ln t = t w / I
                slope = t * self.w(t) / I
                lo = np.where(f < 0, x, lo)
                hi = np.where(f > 0, x, hi)
                x_new = x - f / slope
                x_new = np.where((x_new <= lo) | (x_new >= hi), 0.5 * (lo + hi), x_new)
                done = np.abs(f) <= rtol
                x = np.where(done, x, x_new)
                if np.all(done):
                    break
            res[big] = np.exp(x)
        out[pos] = res
        return out[0] if scalar else out


class SobolevAn(YoungFunction):
    """``A_n(s) = A(H^{-1}(s))`` with density ``a(H^{-1}(s)) / H'(H^{-1}(s))``."""

    family = "sobolev_conjugate"

    def __init__(self, table: HTable):
        self.table = table
        self.base = table.base
        self.t_max = table.H_max

    def _A(self, s):
        return self.base._A(self.table.H_inv(s))

    def _a(self, s):
        s = np.asarray(s, dtype=float)
        tau = self.table.H_inv(s)
        pos = tau > 0
        ts = np.where(pos, tau, 1.0)
        return np.where(pos, self.base._a(ts) / self.table.dH(ts), 0.0)

    def da(self, s):
        s = self._check(s)
        tau = self.table.H_inv(s)
        pos = tau > 0
        ts = np.where(pos, tau, 1.0)
        h1 = self.table.dH(ts)
        h2 = self.table.d2H(ts)
        a = self.base._a(ts)
        da = self.base.da(ts)
        val = (da / h1 - a * h2 / h1**2) / h1
        return np.where(pos, val, 0.0)

    def A_inv(self, y):
        y = np.asarray(y, dtype=float)
        return self.table.H(self.base.A_inv(y))

    def params(self):
        return {"family": self.family, "base": self.base.params(), "n": self.table.n}


@dataclass
class SobolevConjugate:
    base: YoungFunction
    n: int
    table: HTable
    An: SobolevAn
    base_indices: GrowthIndices

    def H(self, t):
        return self.table.H(t)

    def H_inv(self, s):
        return self.table.H_inv(s)

    @cached_property
    def pn_indices(self):
        lo = float(self.table.H(1e-6))
        hi = float(self.table.H(min(1e6, self.table.t_hi)))
        return estimate_indices(self.An, (lo, hi), n_samples=2048)

    def star_bounds(self):
        """``((p-)_*, (p+)_*)``."""
        return (
            sobolev_exponent(self.base_indices.p_minus, self.n),
            sobolev_exponent(self.base_indices.p_plus, self.n),
        )

    def to_csv(self, path, t=None):
        t = log_grid(1e-3, 1e3, 121) if t is None else np.asarray(t, dtype=float)
        H = self.table.H(t)
        An = self.An.A(t)
        an = self.An.a(t)
        Hi = self.table.H_inv(t)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "H", "H_inv", "An", "an"])
            for row in zip(t.tolist(), H.tolist(), Hi.tolist(), An.tolist(), an.tolist()):
                w.writerow([repr(v) for v in row])


def _require_regime(Y, n):
    if int(n) != n or n < 2:
        raise DomainError(f"dimension must be an integer >= 2, got {n}")
    idx = indices_of(Y)
    if idx.p_plus >= n:
        raise UnsupportedRegimeError(
            f"p+ = {idx.p_plus:.4g} >= n = {n}: the Orlicz-Sobolev conjugate is only "
            "supported for p+ < n"
        )
    return idx


def build_H(Y: YoungFunction, n: int, per_decade=32, t_lo=T_LO, t_hi=T_HI):
    _require_regime(Y, n)
    return HTable(Y, n, t_lo=t_lo, t_hi=t_hi, per_decade=per_decade)


def H_inverse(table: HTable, s):
    return table.H_inv(s)


def build_An(Y: YoungFunction, n: int, per_decade=32, t_lo=T_LO, t_hi=T_HI):
    idx = _require_regime(Y, n)
    table = HTable(Y, n, t_lo=t_lo, t_hi=t_hi, per_decade=per_decade)
    return SobolevConjugate(Y, int(n), table, SobolevAn(table), idx)


# ---------------------------------------------------------------- checks


def _decade_increments(Y, n, edges_log10):
    L = np.asarray(edges_log10, dtype=float) * math.log(10.0)
    # subdivide each decade for accuracy
    sub = 8
    out = []
    for a, b in zip(L[:-1], L[1:]):
        pts = np.linspace(a, b, sub + 1)
        out.append(float(_gl_log(Y, n, pts[:-1], pts[1:]).sum()))
    return np.array(out)


def check_integrability(Y: YoungFunction, n: int, decades=10, ratio_threshold=0.95):
    """Numeric evidence for divergence at infinity and convergence at 0.

    Decade increments ``d_m`` of the partial integrals are compared over the
    last four decades: at infinity the integral is declared divergent when
    every ratio ``d_{m+1}/d_m`` stays above ``ratio_threshold`` (the partial
    sums keep growing without geometric decay); at zero it is declared
    convergent when every ratio falls below it (a Cauchy sequence).
    """
    hi = decades
    if math.isfinite(Y.t_max):
        hi = min(hi, math.floor(math.log10(Y.t_max)))
    if hi < 5:
        raise RangeError("need the Young function on at least [1, 1e5]")
    inc_inf = _decade_increments(Y, n, np.arange(0, hi + 1))
    r_inf = inc_inf[1:] / inc_inf[:-1]
    at_infinity = bool(np.all(r_inf[-4:] >= ratio_threshold))
    inc0 = _decade_increments(Y, n, -np.arange(0, decades + 1)[::-1])[::-1]
    r0 = inc0[1:] / inc0[:-1]
    at_zero = bool(np.all(r0[-4:] < ratio_threshold))
    return at_infinity, at_zero


def _fit_bounds(f_vals, t, e_lo, e_hi, rtol):
    c1 = f_vals[0] / t[0] ** e_lo
    c2 = f_vals[0] / t[0] ** e_hi
    ok = np.all(c1 * t**e_lo <= f_vals * (1 + rtol)) and np.all(f_vals <= c2 * t**e_hi * (1 + rtol))
    return bool(ok), float(c1), float(c2)


def check_H_bounds(S: SobolevConjugate, t_range=(1.0, 1e4), n_samples=512, rtol=1e-9):
    """``C1 t^{n/(n-p-)} <= H^{-1}(t) <= C2 t^{n/(n-p+)}``, constants fitted at range start."""
    lo, hi = t_range
    if lo < 1:
        raise DomainError("H bounds are checked on t >= 1")
    t = log_grid(lo, hi, n_samples)
    n = S.n
    e1 = n / (n - S.base_indices.p_minus)
    e2 = n / (n - S.base_indices.p_plus)
    return _fit_bounds(S.table.H_inv(t), t, e1, e2, rtol)


def check_An_power_bounds(S: SobolevConjugate, t_range=(1.0, 1e4), n_samples=512, rtol=1e-9):
    """``C1 t^{(p-)_*} <= A_n(t) <= C2 t^{(p+)_*}``, constants fitted at range start."""
    lo, hi = t_range
    if lo < 1:
        raise DomainError("power bounds are checked on t >= 1")
    t = log_grid(lo, hi, n_samples)
    e1, e2 = S.star_bounds()
    return _fit_bounds(S.An.A(t), t, e1, e2, rtol)


def delta0(p_plus, n):
    return 2.0 ** (1.0 - p_plus / n) - 1.0


def check_cotaH(S: SobolevConjugate, rtol=1e-10):
    """``H(2t) >= 2^{1 - p+/n} H(t)`` on the table nodes."""
    t = S.table.nodes
    t = t[2 * t <= S.table.t_hi]
    c = 2.0 ** (1.0 - S.base_indices.p_plus / S.n)
    return bool(np.all(S.table.H(2 * t) >= c * S.table.H(t) * (1 - rtol)))


def check_An_delta2(S: SobolevConjugate, t_range=None, n_samples=1024, rtol=1e-9, cota_rtol=1e-10):
    """Returns ``(ok, C0, delta0)`` for ``A_n((1+delta0) t) <= C0 A_n(t)``.

    ``ok`` requires the doubling bound on ``H``, a finite ``C0`` and the
    bound ``C0 <= 2^{p+}`` that the doubling bound implies.
    """
    p_plus = S.base_indices.p_plus
    d0 = delta0(p_plus, S.n)
    if t_range is None:
        t_range = (float(S.table.H(1e-6)), float(S.table.H(1e6)))
    t = log_grid(t_range[0], t_range[1], n_samples)
    c0 = float(np.max(S.An.A((1 + d0) * t) / S.An.A(t)))
    ok = check_cotaH(S, cota_rtol) and c0 < OVERFLOW_CAP and c0 <= 2.0**p_plus * (1 + rtol)
    return bool(ok), c0, d0


def check_composition(S: SobolevConjugate, rtol=1e-9):
    """``A_n(H(t)) = A(t)`` on the table nodes inside ``[1e-6, 1e6]``."""
    t = S.table.nodes
    t = t[(t >= 1e-6) & (t <= 1e6)]
    lhs = S.An.A(S.table.H(t))
    rhs = S.base.A(t)
    return bool(np.all(np.abs(lhs - rhs) <= rtol * rhs))


def pn_within_star_bounds(S: SobolevConjugate, tol=1e-6):
    lo, hi = S.star_bounds()
    pn = S.pn_indices
    return bool(lo - tol <= pn.p_minus <= pn.p_plus <= hi + tol)
