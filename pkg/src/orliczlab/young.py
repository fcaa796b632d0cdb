"""Young functions, complementary functions, growth indices and comparisons.

A Young function is ``A(t) = int_0^t a`` with ``a`` right-continuous,
nondecreasing, ``a(0) = 0`` and ``a > 0`` on ``(0, inf)``.  Every "for all t"
statement checked here is a check on a finite log-spaced grid, so verdicts
are numeric evidence, not proofs.
"""

import csv
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._numeric import fd_derivative, log_grid, solve_increasing
from .errors import (
    DegenerateInputError,
    DomainError,
    NotDelta2Error,
    RangeError,
)

#: searched constants above this are reported as failures
OVERFLOW_CAP = 1e12
DEFAULT_RANGE = (1e-8, 1e8)


class YoungFunction:
    """Base class; subclasses provide ``_A`` and ``_a`` on arrays."""

    family = "abstract"
    t_max = math.inf

    # -- evaluation -------------------------------------------------------
    def _check(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(np.isnan(t)):
            raise DomainError("NaN argument")
        if np.any(t < 0):
            raise DomainError("Young functions are evaluated at t >= 0")
        if np.any(t > self.t_max):
            raise RangeError(f"t > t_max = {self.t_max:.6g} for {self.family}")
        return t

    def A(self, t):
        t = self._check(t)
        return self._A(t)

    def a(self, t):
        t = self._check(t)
        return self._a(t)

    def da(self, t):
        """Derivative of the density (finite differences unless overridden)."""
        t = self._check(t)
        return fd_derivative(self._a, t)

    def A_inv(self, y):
        return solve_increasing(self._A, y, t_max=self.t_max)

    #: True when ``log_A`` is evaluated analytically for any log-argument
    analytic_tail = False

    def log_A(self, L):
        """``log A(exp(L))``; overflow is reported as a range error."""
        L = np.asarray(L, dtype=float)
        with np.errstate(over="ignore"):
            t = np.exp(L)
        if np.any(~np.isfinite(t)) or np.any(t > self.t_max):
            raise RangeError(f"exp({float(np.max(L)):.4g}) is beyond t_max of {self.family}")
        with np.errstate(divide="ignore"):
            return np.log(self._A(t))

    def log_ratio(self, L, lt):
        """``log(A(e^L e^lt) / A(e^L))``."""
        L = np.asarray(L, dtype=float)
        return self.log_A(L + lt) - self.log_A(L)

    def __call__(self, t):
        return self.A(t)

    # -- structure --------------------------------------------------------
    def indices(self):
        """Exact global growth indices when known in closed form, else None."""
        return None

    def conjugate(self):
        return ConjugateYoung(self)

    def params(self):
        return {"family": self.family}

    def __repr__(self):
        body = ", ".join(f"{k}={v!r}" for k, v in self.params().items() if k != "family")
        return f"{type(self).__name__}({body})"


class PowerYoung(YoungFunction):
    """``A(t) = coef * t**p``."""

    family = "power"

    def __init__(self, p, coef=1.0):
        if not p > 1:
            raise DomainError(f"power Young function needs p > 1, got {p}")
        if not coef > 0:
            raise DomainError("coef must be positive")
        self.p = float(p)
        self.coef = float(coef)

    def _A(self, t):
        return self.coef * t**self.p

    def _a(self, t):
        return self.coef * self.p * t ** (self.p - 1)

    def da(self, t):
        t = self._check(t)
        with np.errstate(divide="ignore"):
            return self.coef * self.p * (self.p - 1) * t ** (self.p - 2)

    def A_inv(self, y):
        y = np.asarray(y, dtype=float)
        if np.any(y < 0):
            raise RangeError("inverse of a negative value")
        return (y / self.coef) ** (1.0 / self.p)

    analytic_tail = True

    def log_A(self, L):
        return math.log(self.coef) + self.p * np.asarray(L, dtype=float)

    def log_ratio(self, L, lt):
        return np.full(np.shape(L), self.p * lt)

    def indices(self):
        return GrowthIndices(self.p, self.p, 2.0**self.p, (0.0, math.inf), exact=True)

    def conjugate(self):
        p = self.p
        pc = p / (p - 1)
        coef = (p - 1) / p * (self.coef * p) ** (-1.0 / (p - 1))
        return PowerYoung(pc, coef)

    def params(self):
        return {"family": self.family, "p": self.p, "coef": self.coef}


class PowerLogYoung(YoungFunction):
    """``A(t) = t**p * log(1 + t)**q``; indices ``p`` (at infinity) and ``p+q`` (at 0)."""

    family = "power_log"

    def __init__(self, p, q=1.0):
        if not p > 1:
            raise DomainError(f"power_log needs p > 1, got {p}")
        if not q > 0:
            raise DomainError(f"power_log needs q > 0, got {q}")
        self.p = float(p)
        self.q = float(q)

    def _A(self, t):
        return t**self.p * np.log1p(t) ** self.q

    def _a(self, t):
        p, q = self.p, self.q
        t = np.asarray(t, dtype=float)
        pos = t > 0
        ts = np.where(pos, t, 1.0)
        L = np.log1p(ts)
        val = p * ts ** (p - 1) * L**q + q * ts**p * L ** (q - 1) / (1 + ts)
        return np.where(pos, val, 0.0)

    def da(self, t):
        p, q = self.p, self.q
        t = self._check(t)
        pos = t > 0
        ts = np.where(pos, t, 1.0)
        L = np.log1p(ts)
        val = (
            p * (p - 1) * ts ** (p - 2) * L**q
            + 2 * p * q * ts ** (p - 1) * L ** (q - 1) / (1 + ts)
            - q * ts**p * L ** (q - 1) / (1 + ts) ** 2
        )
        if q != 1.0:
            val = val + q * (q - 1) * ts**p * L ** (q - 2) / (1 + ts) ** 2
        if p + q >= 2:
            at0 = 0.0 if p + q > 2 else 2.0
        else:
            at0 = math.inf
        return np.where(pos, val, at0)

    analytic_tail = True

    def log_A(self, L):
        L = np.asarray(L, dtype=float)
        # log(1 + e^L) without overflow, then its log
        return self.p * L + self.q * np.log(np.logaddexp(0.0, L))

    def log_ratio(self, L, lt):
        L = np.asarray(L, dtype=float)
        lp = np.log(np.logaddexp(0.0, L + lt)) - np.log(np.logaddexp(0.0, L))
        return self.p * lt + self.q * lp

    def indices(self):
        return GrowthIndices(
            self.p, self.p + self.q, 2.0 ** (self.p + self.q), (0.0, math.inf), exact=True
        )

    def params(self):
        return {"family": self.family, "p": self.p, "q": self.q}


class PiecewisePowerYoung(YoungFunction):
    """Continuous ``c_i t**p_i`` on ``[b_i, b_{i+1})`` with nondecreasing exponents.

    ``A_inf = max(t**p-, t**p+)`` is the case ``exponents=(p-, p+)``,
    ``breakpoints=(1,)``.
    """

    family = "piecewise_power"

    def __init__(self, exponents, breakpoints=()):
        exps = [float(e) for e in exponents]
        bps = [float(b) for b in breakpoints]
        if len(exps) != len(bps) + 1:
            raise DomainError("need exactly one more exponent than breakpoints")
        if exps[0] <= 1 or any(e2 < e1 for e1, e2 in zip(exps, exps[1:])):
            raise DomainError("exponents must exceed 1 and be nondecreasing (convexity)")
        if any(b <= 0 for b in bps) or any(b2 <= b1 for b1, b2 in zip(bps, bps[1:])):
            raise DomainError("breakpoints must be positive and increasing")
        coefs = [1.0]
        for b, e0, e1 in zip(bps, exps, exps[1:]):
            coefs.append(coefs[-1] * b ** (e0 - e1))
        self.exponents = tuple(exps)
        self.breakpoints = tuple(bps)
        self._coefs = np.array(coefs)
        self._exps = np.array(exps)
        self._bps = np.array(bps)

    def _segment(self, t):
        return np.searchsorted(self._bps, t, side="right")

    def _A(self, t):
        t = np.asarray(t, dtype=float)
        k = self._segment(t)
        return self._coefs[k] * t ** self._exps[k]

    def _a(self, t):
        t = np.asarray(t, dtype=float)
        k = self._segment(t)
        e = self._exps[k]
        return self._coefs[k] * e * t ** (e - 1)

    def da(self, t):
        t = self._check(t)
        k = self._segment(t)
        e = self._exps[k]
        with np.errstate(divide="ignore"):
            return self._coefs[k] * e * (e - 1) * t ** (e - 2)

    def A_inv(self, y):
        y = np.asarray(y, dtype=float)
        if np.any(y < 0):
            raise RangeError("inverse of a negative value")
        levels = self._coefs[1:] * self._bps ** self._exps[1:]
        k = np.searchsorted(levels, y, side="right")
        return (y / self._coefs[k]) ** (1.0 / self._exps[k])

    analytic_tail = True

    def log_A(self, L):
        L = np.asarray(L, dtype=float)
        k = np.searchsorted(np.log(self._bps), L, side="right")
        return np.log(self._coefs[k]) + self._exps[k] * L

    def indices(self):
        lo, hi = self.exponents[0], self.exponents[-1]
        return GrowthIndices(lo, hi, 2.0**hi, (0.0, math.inf), exact=True)

    def params(self):
        return {
            "family": self.family,
            "exponents": list(self.exponents),
            "breakpoints": list(self.breakpoints),
        }


class TabulatedYoung(YoungFunction):
    """Density given by monotone samples ``(t_i, a_i)``.

    ``interpolation="linear"`` integrates the piecewise-linear interpolant
    (cumulative trapezoid); ``"step"`` uses the right-continuous step density.
    ``error_bound[i]`` bounds ``|A_true(t_i) - A_table(t_i)|`` for any monotone
    density through the samples.
    """

    family = "table"

    def __init__(self, t, a, interpolation="linear", source=None):
        t = np.asarray(t, dtype=float)
        a = np.asarray(a, dtype=float)
        if t.ndim != 1 or t.shape != a.shape or t.size < 2:
            raise DomainError("table needs two equal-length 1-D columns")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(a))):
            raise DomainError("table contains non-finite values")
        if np.any(np.diff(t) <= 0):
            raise DomainError("t column must be strictly increasing")
        if t[0] < 0:
            raise DomainError("t column must start at t >= 0")
        if t[0] > 0:
            t = np.concatenate([[0.0], t])
            a = np.concatenate([[0.0], a])
        if a[0] != 0:
            raise DomainError("density must vanish at t = 0")
        if np.any(np.diff(a) < 0):
            raise DomainError("density samples must be nondecreasing")
        if interpolation not in ("linear", "step"):
            raise DomainError(f"unknown interpolation {interpolation!r}")
        self.interpolation = interpolation
        self.t_nodes = t
        self.a_nodes = a
        self.t_max = float(t[-1])
        self.source = source
        h = np.diff(t)
        if interpolation == "linear":
            cells = 0.5 * (a[:-1] + a[1:]) * h
            errs = 0.5 * (a[1:] - a[:-1]) * h
        else:
            cells = a[:-1] * h
            errs = (a[1:] - a[:-1]) * h
        self.A_nodes = np.concatenate([[0.0], np.cumsum(cells)])
        self.error_bound = np.concatenate([[0.0], np.cumsum(errs)])
        self._slopes = np.diff(a) / h

    @classmethod
    def from_csv(cls, path, interpolation="linear"):
        rows = []
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if [c.strip() for c in header] != ["t", "a_of_t"]:
                raise DomainError(f"{path}: expected header 't,a_of_t', got {header}")
            for line_no, row in enumerate(reader, start=2):
                if not row:
                    continue
                try:
                    rows.append((float(row[0]), float(row[1])))
                except (ValueError, IndexError) as exc:
                    raise DomainError(f"{path}:{line_no}: bad row {row}") from exc
        arr = np.array(rows)
        return cls(arr[:, 0], arr[:, 1], interpolation=interpolation, source=str(path))

    def _locate(self, t):
        k = np.searchsorted(self.t_nodes, t, side="right") - 1
        return np.clip(k, 0, self.t_nodes.size - 2)

    def _a(self, t):
        t = np.asarray(t, dtype=float)
        k = self._locate(t)
        if self.interpolation == "step":
            return self.a_nodes[k]
        return self.a_nodes[k] + self._slopes[k] * (t - self.t_nodes[k])

    def _A(self, t):
        t = np.asarray(t, dtype=float)
        k = self._locate(t)
        dt = t - self.t_nodes[k]
        if self.interpolation == "step":
            return self.A_nodes[k] + self.a_nodes[k] * dt
        return self.A_nodes[k] + dt * (self.a_nodes[k] + 0.5 * self._slopes[k] * dt)

    def da(self, t):
        t = self._check(t)
        if self.interpolation == "step":
            return np.zeros_like(t)
        return self._slopes[self._locate(t)]

    def params(self):
        return {
            "family": self.family,
            "interpolation": self.interpolation,
            "n_nodes": int(self.t_nodes.size),
            "t_max": self.t_max,
            "source": self.source,
        }


class ConjugateYoung(YoungFunction):
    """Complementary function ``sup_t (s t - A(t))`` of an arbitrary base.

    The density is the right-continuous generalized inverse of the base
    density, ``sup{t : a(t) <= s}``; the value uses Young's equality
    ``A~(s) = s * a~(s) - A(a~(s))``.
    """

    family = "conjugate"

    def __init__(self, base):
        if isinstance(base, TabulatedYoung):
            pos = base.a_nodes[1:]
            if np.ptp(pos) == 0:
                raise DegenerateInputError(
                    "tabulated density has zero dynamic range; its conjugate is degenerate"
                )
        self.base = base
        if math.isfinite(base.t_max):
            self.t_max = float(base._a(np.array(base.t_max)))
        else:
            self.t_max = math.inf

    def _a(self, s):
        s = np.asarray(s, dtype=float)
        return solve_increasing(self.base._a, s, t_max=self.base.t_max, strict=True)

    def _A(self, s):
        s = np.asarray(s, dtype=float)
        t = self._a(s)
        return np.maximum(s * t - self.base._A(t), 0.0)

    def indices(self):
        idx = self.base.indices()
        if idx is None:
            return None
        lo = idx.p_plus / (idx.p_plus - 1)
        hi = idx.p_minus / (idx.p_minus - 1)
        return GrowthIndices(lo, hi, 2.0**hi, (0.0, math.inf), exact=True)

    def params(self):
        return {"family": self.family, "base": self.base.params()}


# ---------------------------------------------------------------- indices


@dataclass(frozen=True)
class GrowthIndices:
    p_minus: float
    p_plus: float
    delta2_constant: float
    sample_range: tuple
    exact: bool = False

    def __post_init__(self):
        if not (1 < self.p_minus <= self.p_plus < math.inf):
            raise DomainError(
                f"indices must satisfy 1 < p- <= p+ < inf, got {self.p_minus}, {self.p_plus}"
            )


def sobolev_exponent(p, n):
    """``p_* = n p / (n - p)`` for ``1 < p < n``."""
    if not p < n:
        raise DomainError("Sobolev exponent needs p < n")
    return n * p / (n - p)


def eval_A(Y, t):
    return Y.A(t)


def eval_A_inverse(Y, y):
    y = np.asarray(y, dtype=float)
    if np.any(y < 0):
        raise RangeError("A^{-1} of a negative value")
    if math.isfinite(Y.t_max) and np.any(y > Y._A(np.array(Y.t_max))):
        raise RangeError(f"y beyond A(t_max) for {Y.family}")
    return Y.A_inv(y)


def conjugate(Y):
    return Y.conjugate()


def _default_range(Y, lo=DEFAULT_RANGE[0], hi=DEFAULT_RANGE[1]):
    return lo, min(hi, Y.t_max)


def index_ratio(Y, t):
    t = np.asarray(t, dtype=float)
    return t * Y.a(t) / Y.A(t)


def estimate_indices(Y, t_range=None, n_samples=4096, slope_threshold=0.25):
    """Extremes of ``t a(t) / A(t)`` and of ``A(2t)/A(t)`` on a log grid.

    A ratio that climbs monotonically at the top of the grid faster than
    ``slope_threshold`` per e-fold of t is diagnosed as non-Delta_2.
    """
    lo, hi = t_range if t_range is not None else _default_range(Y)
    if not (0 < lo < hi <= Y.t_max):
        raise RangeError(f"need 0 < t_lo < t_hi <= t_max, got [{lo}, {hi}]")
    if n_samples < 16:
        raise DomainError("n_samples must be >= 16")
    t = log_grid(lo, hi, n_samples)
    ratio = index_ratio(Y, t)
    tail = max(8, n_samples // 10)
    rt = ratio[-tail:]
    lt = np.log(t[-tail:])
    slope = (rt[-1] - rt[0]) / (lt[-1] - lt[0])
    if np.all(np.diff(rt) > 0) and slope > slope_threshold:
        raise NotDelta2Error(
            f"t a(t)/A(t) grows without bound near t={hi:.3g} (slope {slope:.3g} per e-fold)",
            ratio_tail=list(zip(t[-tail:].tolist(), rt.tolist())),
        )
    p_minus = float(ratio.min())
    p_plus = float(ratio.max())
    if p_minus <= 1:
        raise NotDelta2Error(
            f"lower index {p_minus:.4g} <= 1: the complementary function fails Delta_2"
        )
    t2 = t[2 * t <= Y.t_max]
    d2 = float(np.max(Y.A(2 * t2) / Y.A(t2))) if t2.size else math.nan
    return GrowthIndices(p_minus, p_plus, d2, (float(lo), float(hi)), exact=False)


def indices_of(Y, t_range=None):
    """Exact indices when the family knows them, else a grid estimate."""
    idx = Y.indices()
    if idx is not None:
        return idx
    return estimate_indices(Y, t_range)


def check_delta2_refined(Y, delta, t_range=None, n_samples=4096, cap=OVERFLOW_CAP):
    """Smallest sampled ``C_delta`` with ``A((1+delta) t) <= C_delta A(t)``."""
    if not delta > 0:
        raise DomainError("delta must be positive")
    lo, hi = t_range if t_range is not None else _default_range(Y)
    hi = min(hi, Y.t_max / (1 + delta))
    t = log_grid(lo, hi, n_samples)
    with np.errstate(over="ignore", invalid="ignore"):
        c = float(np.max(Y.A((1 + delta) * t) / Y.A(t)))
    ok = math.isfinite(c) and c < cap
    return ok, c


def verify_sum_inequality(Y, eta, samples, p_plus=None, cap=OVERFLOW_CAP):
    """Find ``C_eta`` with ``A(s+t) <= C_eta A(s) + (1+eta)^{p+} A(t)`` on samples."""
    if not eta > 0:
        raise DomainError("eta must be positive")
    if p_plus is None:
        p_plus = indices_of(Y).p_plus
    st = np.asarray(samples, dtype=float).reshape(-1, 2)
    s, t = st[:, 0], st[:, 1]
    lhs = Y.A(s + t)
    tail = (1 + eta) ** p_plus * Y.A(t)
    As = Y.A(s)
    excess = lhs - tail
    pos = As > 0
    if np.any(~pos & (excess > 1e-12 * np.abs(lhs))):
        return False, math.inf
    need = np.where(pos, excess / np.where(pos, As, 1.0), 0.0)
    c = float(max(0.0, need.max(initial=0.0)))
    return c < cap, c


def verify_scaling_inequality(Y, samples, indices=None, rtol=1e-9):
    """``min(s^p-, s^p+) A(t) <= A(st) <= max(s^p-, s^p+) A(t)`` on every sample."""
    idx = indices if indices is not None else indices_of(Y)
    st = np.asarray(samples, dtype=float).reshape(-1, 2)
    s, t = st[:, 0], st[:, 1]
    At = Y.A(t)
    mid = Y.A(s * t)
    lo = np.minimum(s**idx.p_minus, s**idx.p_plus) * At
    hi = np.maximum(s**idx.p_minus, s**idx.p_plus) * At
    return bool(np.all(lo <= mid * (1 + rtol)) and np.all(mid <= hi * (1 + rtol)))


# ---------------------------------------------------------------- comparison


class Relation(enum.Enum):
    LE = "LE"
    EQUIV = "EQUIV"
    ESSENTIALLY_SMALLER = "ESSENTIALLY_SMALLER"
    UNDECIDED = "UNDECIDED"


@dataclass(frozen=True)
class GeometricProbe:
    lo: float = 1.0
    hi: float = 1e12
    per_decade: int = 32
    window_decades: float = 3.0

    def grid(self):
        n = int(round(self.per_decade * math.log10(self.hi / self.lo))) + 1
        return log_grid(self.lo, self.hi, n)


CANDIDATE_CONSTANTS = tuple(2.0**k for k in range(-4, 9))


@dataclass(frozen=True)
class ComparisonVerdict:
    relation: Relation
    witness_constant: float
    witness_threshold: float
    limit_samples: list = field(default_factory=list)
    evidence: str = "numeric"


def _le_witness(Y1, Y2, t, window_start):
    for c in CANDIDATE_CONSTANTS:
        with np.errstate(over="ignore"):
            ok = Y1.A(t) <= Y2.A(c * t) * (1 + 1e-12)
        bad = np.flatnonzero(~ok)
        first = 0 if bad.size == 0 else int(bad[-1]) + 1
        if first <= window_start:
            return c, (0.0 if first == 0 else float(t[first]))
    return None


def compare(Y1, Y2, probe=None, small=1e-6, log_decay=-0.5):
    """Classify ``Y1`` against ``Y2`` from sampled tail behaviour.

    ``ESSENTIALLY_SMALLER`` (``Y1 << Y2``) when, for every candidate ``c``,
    ``Y1(c t)/Y2(t)`` is nonincreasing over the top decades of the probe and
    either ends below ``small`` or decays at least like ``(log t)**log_decay``.
    """
    probe = probe or GeometricProbe()
    t = probe.grid()
    lt = np.log10(t)
    window_start = int(np.searchsorted(lt, lt[-1] - probe.window_decades))
    tw = t[window_start:]
    essentially = True
    for c in CANDIDATE_CONSTANTS:
        with np.errstate(over="ignore", invalid="ignore"):
            r = Y1.A(c * tw) / Y2.A(tw)
        if not np.all(np.isfinite(r)):
            essentially = False
            break
        monotone = np.all(np.diff(r) <= 1e-12 * r[:-1])
        if r[-1] < small and monotone:
            continue
        if not monotone or r[-1] <= 0 or r[0] <= 0:
            essentially = False
            break
        decay = (math.log(r[-1]) - math.log(r[0])) / (
            math.log(math.log(tw[-1])) - math.log(math.log(tw[0]))
        )
        if decay > log_decay:
            essentially = False
            break
    with np.errstate(over="ignore", invalid="ignore"):
        tail = Y1.A(tw) / Y2.A(tw)
    samples = list(zip(tw[:: max(1, tw.size // 16)].tolist(), tail[:: max(1, tw.size // 16)].tolist()))
    if essentially:
        return ComparisonVerdict(
            Relation.ESSENTIALLY_SMALLER, CANDIDATE_CONSTANTS[-1], float(tw[0]), samples
        )
    w12 = _le_witness(Y1, Y2, t, window_start)
    w21 = _le_witness(Y2, Y1, t, window_start)
    if w12 is not None and w21 is not None:
        return ComparisonVerdict(Relation.EQUIV, w12[0], w12[1], samples)
    if w12 is not None:
        return ComparisonVerdict(Relation.LE, w12[0], w12[1], samples)
    return ComparisonVerdict(Relation.UNDECIDED, math.nan, math.nan, samples)


def a_infinity(idx):
    """``A_inf(t) = max(t^{p+}, t^{p-})``."""
    if idx.p_minus == idx.p_plus:
        return PowerYoung(idx.p_minus)
    return PiecewisePowerYoung((idx.p_minus, idx.p_plus), (1.0,))


# ---------------------------------------------------------------- config


def young_from_config(block, base_dir="."):
    """Build a Young function from a parsed config block (a dict)."""
    fam = block.get("family")
    if fam == "power":
        return PowerYoung(block["p"], block.get("coef", 1.0))
    if fam == "power_log":
        return PowerLogYoung(block["p"], block.get("q", 1.0))
    if fam == "piecewise_power":
        return PiecewisePowerYoung(block["exponents"], block.get("breakpoints", ()))
    if fam == "table":
        path = Path(block["path"])
        if not path.is_absolute():
            path = Path(base_dir) / path
        return TabulatedYoung.from_csv(path, block.get("interpolation", "linear"))
    raise DomainError(f"unknown Young family {fam!r}")
