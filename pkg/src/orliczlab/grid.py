"""Box domains, grid functions, modulars and Luxemburg norms.

Nodal values live on a tensor grid; integrals use cell-centred quadrature
(node averages times cell volume).  Gradients are P1 element gradients: in
1-D one per cell, in 2-D one per triangle with each cell split along its
anti-diagonal, so every element gradient is exact for affine functions.
"""

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize

from . import _kernels
from .errors import ConfigError, DomainError, RangeError
from .young import YoungFunction, indices_of

MIN_CELLS = 8


@dataclass(frozen=True)
class Domain:
    lower: tuple
    upper: tuple
    cells: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lower))
        hi = tuple(float(v) for v in np.atleast_1d(self.upper))
        nc = tuple(int(v) for v in np.atleast_1d(self.cells))
        if not (len(lo) == len(hi) == len(nc)) or len(lo) not in (1, 2):
            raise DomainError("domains are 1-D or 2-D boxes")
        if any(b <= a for a, b in zip(lo, hi)):
            raise DomainError("box extents must be positive")
        if any(c < MIN_CELLS for c in nc):
            raise DomainError(f"need at least {MIN_CELLS} cells per axis")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "cells", nc)

    @classmethod
    def unit(cls, d, cells):
        return cls((0.0,) * d, (1.0,) * d, (cells,) * d)

    @property
    def dim(self):
        return len(self.cells)

    @property
    def h(self):
        return tuple((b - a) / c for a, b, c in zip(self.lower, self.upper, self.cells))

    @property
    def cell_volume(self):
        return float(np.prod(self.h))

    @property
    def node_shape(self):
        return tuple(c + 1 for c in self.cells)

    def axes(self):
        return [np.linspace(a, b, c + 1) for a, b, c in zip(self.lower, self.upper, self.cells)]

    def mesh(self):
        return np.meshgrid(*self.axes(), indexing="ij")

    def cell_centers(self):
        ax = [0.5 * (x[1:] + x[:-1]) for x in self.axes()]
        return np.meshgrid(*ax, indexing="ij")

    def boundary_mask(self):
        m = np.zeros(self.node_shape, dtype=bool)
        if self.dim == 1:
            m[0] = m[-1] = True
        else:
            m[0, :] = m[-1, :] = m[:, 0] = m[:, -1] = True
        return m

    def refined(self, factor=2):
        return Domain(self.lower, self.upper, tuple(c * factor for c in self.cells))


@dataclass(frozen=True)
class GridFunction:
    domain: Domain
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.domain.node_shape:
            raise DomainError(f"values shape {v.shape} != node shape {self.domain.node_shape}")
        if not np.all(np.isfinite(v)):
            raise DomainError("grid function has non-finite values")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_callable(cls, domain, f, zero_boundary=False):
        v = np.asarray(f(*domain.mesh()), dtype=float) * np.ones(domain.node_shape)
        if zero_boundary:
            v = np.where(domain.boundary_mask(), 0.0, v)
        return cls(domain, v)

    @classmethod
    def zeros(cls, domain):
        return cls(domain, np.zeros(domain.node_shape))

    def cell_values(self):
        if self.domain.dim == 1:
            return _kernels.active.cell_average_1d(self.values)
        return _kernels.active.cell_average_2d(self.values)

    def is_boundary_zero(self):
        return bool(np.all(self.values[self.domain.boundary_mask()] == 0))

    def __mul__(self, c):
        return GridFunction(self.domain, self.values * float(c))

    __rmul__ = __mul__

    def __add__(self, other):
        return GridFunction(self.domain, self.values + other.values)

    def __sub__(self, other):
        return GridFunction(self.domain, self.values - other.values)

    def to_csv(self, path):
        coords = [c.ravel() for c in self.domain.mesh()]
        names = ["x", "y"][: self.domain.dim]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(names + ["value"])
            for row in zip(*[c.tolist() for c in coords], self.values.ravel().tolist()):
                w.writerow([repr(v) for v in row])

    @classmethod
    def from_csv(cls, domain, path):
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))[1:]
        vals = np.array([float(r[-1]) for r in rows]).reshape(domain.node_shape)
        return cls(domain, vals)


@dataclass(frozen=True)
class GridMeasure:
    domain: Domain
    cell_mass: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.cell_mass, dtype=float)
        if m.shape != self.domain.cells:
            raise DomainError(f"mass shape {m.shape} != cells {self.domain.cells}")
        if np.any(m < 0) or not np.all(np.isfinite(m)):
            raise DomainError("cell masses must be finite and nonnegative")
        object.__setattr__(self, "cell_mass", m)

    @classmethod
    def lebesgue(cls, domain):
        return cls(domain, np.full(domain.cells, domain.cell_volume))

    def total(self):
        return float(self.cell_mass.sum())

    def to_csv(self, path):
        idx = np.indices(self.domain.cells).reshape(self.domain.dim, -1)
        names = ["i", "j"][: self.domain.dim]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(names + ["mass"])
            for k, m in enumerate(self.cell_mass.ravel().tolist()):
                w.writerow([str(int(i)) for i in idx[:, k]] + [repr(m)])


@dataclass(frozen=True)
class ElementGradient:
    """Per-element gradient components and element masses (volumes)."""

    domain: Domain
    components: tuple
    element_mass: float

    def magnitude(self):
        if len(self.components) == 1:
            return np.abs(self.components[0])
        return np.hypot(self.components[0], self.components[1])


def discrete_gradient(u: GridFunction):
    dom = u.domain
    k = _kernels.active
    if dom.dim == 1:
        g = k.diff_1d(u.values, dom.h[0])
        return ElementGradient(dom, (g,), dom.cell_volume)
    gx1, gy1, gx2, gy2 = k.tri_gradients(u.values, dom.h[0], dom.h[1])
    gx = np.stack([gx1, gx2])
    gy = np.stack([gy1, gy2])
    return ElementGradient(dom, (gx, gy), 0.5 * dom.cell_volume)


# ---------------------------------------------------------------- modular / norm


def _cells(u, domain=None):
    if isinstance(u, GridFunction):
        return u.cell_values(), u.domain
    arr = np.asarray(u, dtype=float)
    if domain is None or arr.shape != domain.cells:
        raise DomainError("raw arrays must be cell-valued and come with their domain")
    return arr, domain


def _masses(values, domain, weight):
    if weight is None:
        return np.full(values.shape, domain.cell_volume)
    if isinstance(weight, GridMeasure):
        return weight.cell_mass
    return np.broadcast_to(np.asarray(weight, dtype=float), values.shape)


def modular_values(Y: YoungFunction, values, masses):
    """``sum A(|v|) m`` for flat value/mass arrays."""
    v = np.abs(np.asarray(values, dtype=float)).ravel()
    m = np.asarray(masses, dtype=float).ravel()
    keep = (v > 0) & (m > 0)
    if not np.any(keep):
        return 0.0
    vals = Y.A(v[keep])
    if not np.all(np.isfinite(vals)):
        raise RangeError("modular overflow")
    return float(np.dot(vals, m[keep]))


def modular(Y: YoungFunction, u, weight=None, domain=None):
    """``Phi_A(u) = sum_cells A(|u_cell|) * mass``."""
    c, dom = _cells(u, domain)
    return modular_values(Y, c, _masses(c, dom, weight))


def gradient_modular(Y: YoungFunction, u: GridFunction):
    g = discrete_gradient(u)
    return modular_values(Y, g.magnitude(), np.full(g.magnitude().shape, g.element_mass))


@dataclass(frozen=True)
class NormResult:
    value: float
    modular_at_norm: float
    evaluations: int
    bracket: tuple = field(default=())


def luxemburg_values(Y: YoungFunction, values, masses, rtol=1e-15):
    """``inf{lam > 0 : sum A(|v|/lam) m <= 1}`` for flat arrays.

    The root of ``log Phi(e^x)`` is bracketed as
    ``[max|v| / A^{-1}(1/M) * 1e-3, max|v| * 1e3]`` (expanded on failure)
    and refined with Brent's method down to ``rtol`` in ``lam``.
    """
    v = np.abs(np.asarray(values, dtype=float)).ravel()
    m = np.asarray(masses, dtype=float).ravel()
    if not np.all(np.isfinite(v)):
        raise DomainError("non-finite values")
    keep = (v > 0) & (m > 0)
    v, m = v[keep], m[keep]
    if v.size == 0:
        return NormResult(0.0, 0.0, 0)
    vmax = float(v.max())
    count = [0]

    def phi(lam):
        count[0] += 1
        if vmax / lam > Y.t_max:
            return math.inf
        with np.errstate(over="ignore"):
            return float(np.dot(Y.A(v / lam), m))

    def g(x):
        p = phi(math.exp(x))
        return math.log(p) if p > 0 else -math.inf

    total = float(m.sum())
    try:
        lo = vmax / float(Y.A_inv(1.0 / total)) * 1e-3
    except RangeError:
        lo = vmax / Y.t_max
    hi = vmax * 1e3
    lo_x, hi_x = math.log(lo), math.log(hi)
    for _ in range(200):
        if g(lo_x) > 0:
            break
        lo_x -= math.log(1e3)
    for _ in range(200):
        if g(hi_x) < 0:
            break
        hi_x += math.log(1e3)
    x = brentq(g, lo_x, hi_x, xtol=1e-300, rtol=max(rtol, 4 * np.finfo(float).eps), maxiter=500)
    lam = math.exp(x)
    # the norm is an infimum: step to the smallest float with Phi <= 1
    while phi(lam) > 1.0:
        lam = float(np.nextafter(lam, math.inf))
    return NormResult(lam, phi(lam), count[0], (math.exp(lo_x), math.exp(hi_x)))


def luxemburg_norm(Y: YoungFunction, u, weight=None, domain=None, rtol=1e-15):
    """Luxemburg norm of a grid function (or cell array) w.r.t. cell volume or a weight."""
    c, dom = _cells(u, domain)
    return luxemburg_values(Y, c, _masses(c, dom, weight), rtol).value


def gradient_norm(Y: YoungFunction, u: GridFunction, rtol=1e-15):
    g = discrete_gradient(u)
    mag = g.magnitude()
    return luxemburg_values(Y, mag, np.full(mag.shape, g.element_mass), rtol).value


def check_norm_modular_bounds(Y, u, idx=None, rtol=1e-8, domain=None):
    """``min(|u|^p-, |u|^p+) <= Phi(u) <= max(|u|^p-, |u|^p+)``."""
    idx = idx or indices_of(Y)
    nrm = luxemburg_norm(Y, u, domain=domain)
    phi = modular(Y, u, domain=domain)
    lo = min(nrm**idx.p_minus, nrm**idx.p_plus)
    hi = max(nrm**idx.p_minus, nrm**idx.p_plus)
    return bool(lo * (1 - rtol) <= phi <= hi * (1 + rtol))


# ---------------------------------------------------------------- Sobolev constant


def bump(domain: Domain, center, width, power=2.0, amplitude=1.0):
    """``amplitude * (1 - |x - c|^2 / w^2)_+^power`` on the nodes."""
    X = domain.mesh()
    c = np.atleast_1d(np.asarray(center, dtype=float))
    r2 = sum((x - ci) ** 2 for x, ci in zip(X, c)) / width**2
    v = amplitude * np.clip(1.0 - r2, 0.0, None) ** power
    v = np.where(domain.boundary_mask(), 0.0, v)
    return GridFunction(domain, v)


def bump_fits(domain, center, width):
    c = np.atleast_1d(np.asarray(center, dtype=float))
    return all(lo <= ci - width and ci + width <= hi for ci, lo, hi in zip(c, domain.lower, domain.upper))


@dataclass(frozen=True)
class BumpFamily:
    centers: tuple
    widths: tuple
    powers: tuple = (2.0,)
    descend: bool = False
    extra: tuple = ()

    def describe(self):
        return {
            "kind": "radial bumps (1-|x-c|^2/w^2)_+^k",
            "centers": [list(np.atleast_1d(c).astype(float)) for c in self.centers],
            "widths": [float(w) for w in self.widths],
            "powers": [float(k) for k in self.powers],
            "descend": self.descend,
            "extra_members": len(self.extra),
        }


@dataclass(frozen=True)
class SobolevConstantEstimate:
    value: float
    family: dict
    is_upper_bound_of_inf: bool = True
    best: dict = field(default_factory=dict)
    ratios: tuple = ()


def sobolev_ratio(Y, target, u: GridFunction):
    """``|grad u|_A / |u|_target``."""
    An = getattr(target, "An", target)
    return gradient_norm(Y, u) / luxemburg_norm(An, u)


def estimate_sobolev_constant(Y, target, dom: Domain, family: BumpFamily):
    """Minimum of ``|grad phi|_A / |phi|_{A_n}`` over a bump family (an upper bound of S_A)."""
    members = []
    for c in family.centers:
        for w in family.widths:
            if not bump_fits(dom, c, w):
                continue
            for k in family.powers:
                members.append(({"center": list(np.atleast_1d(c).astype(float)), "width": float(w), "power": float(k)},
                                bump(dom, c, w, k)))
    for i, u in enumerate(family.extra):
        members.append(({"extra": i}, u))
    if not members:
        raise ConfigError("empty test-function family (no bump fits inside the domain)")
    ratios = []
    for params, u in members:
        if not np.any(u.values):
            continue
        ratios.append((sobolev_ratio(Y, target, u), params))
    if not ratios:
        raise ConfigError("every family member vanishes on the grid")
    best_val, best = min(ratios, key=lambda r: r[0])
    if family.descend and "center" in best:
        best_val, best = _descend(Y, target, dom, best, best_val)
    return SobolevConstantEstimate(
        float(best_val), family.describe(), True, best, tuple(r[0] for r in ratios)
    )


def _descend(Y, target, dom, start, start_val):
    d = dom.dim
    x0 = np.array(start["center"] + [math.log(start["width"]), math.log(start["power"])])
    hmin = min(dom.h)

    def obj(x):
        c, w, k = x[:d], math.exp(x[d]), math.exp(x[d + 1])
        if w < 4 * hmin or k < 1.0 or not bump_fits(dom, c, w):
            return math.inf
        return sobolev_ratio(Y, target, bump(dom, c, w, k))

    res = minimize(obj, x0, method="Nelder-Mead", options={"maxiter": 60, "xatol": 1e-3, "fatol": 1e-6})
    if res.fun < start_val:
        x = res.x
        return float(res.fun), {
            "center": x[:d].tolist(),
            "width": math.exp(x[d]),
            "power": math.exp(x[d + 1]),
            "descended": True,
        }
    return start_val, start
