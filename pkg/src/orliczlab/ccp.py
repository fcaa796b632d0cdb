"""Concentration diagnostics for blow-up (bubble) sequences.

Bubbles are ``u_k = s_k P((x - x0)/eps_k)`` with ``P(y) = (1 - |y|^2)_+^k``.
The measures ``nu = A_n(|u|) dx`` and ``mu = A(|grad u|) dx`` are stored as
cell masses; atoms are read off the finest member, which stands in for the
weak-* limit on a fixed grid.
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.optimize import brentq

from ._numeric import exact_sum
from .errors import DegenerateInputError, DomainError, UnderResolvedError
from .grid import (
    BumpFamily,
    Domain,
    GridFunction,
    GridMeasure,
    discrete_gradient,
    estimate_sobolev_constant,
    gradient_norm,
    luxemburg_norm,
    modular,
)
from .matuszewska import MatuszewskaProfile, invert_profile
from .young import GrowthIndices, YoungFunction, a_infinity

GRADIENT_BOUNDED = "gradient-A-bounded"
MASS_ONE = "An-mass-one"
ATOM_RADIUS = 3
DEFAULT_SAFETY = 0.9


@dataclass(frozen=True)
class BubbleSpec:
    centers: tuple
    scales: tuple
    normalization: str = GRADIENT_BOUNDED
    bound: float = 1.0
    profile_power: float = 2.0

    def __post_init__(self):
        if self.normalization not in (GRADIENT_BOUNDED, MASS_ONE):
            raise DomainError(f"unknown normalization {self.normalization!r}")
        if any(e <= 0 for e in self.scales):
            raise DomainError("scales must be positive")
        if any(b > a for a, b in zip(self.scales, self.scales[1:])):
            raise DomainError("scales must be nonincreasing")


def profile(dom: Domain, centers, eps, power=2.0):
    X = dom.mesh()
    v = np.zeros(dom.node_shape)
    for c in centers:
        c = np.atleast_1d(np.asarray(c, dtype=float))
        r2 = sum((x - ci) ** 2 for x, ci in zip(X, c)) / eps**2
        v += np.clip(1.0 - r2, 0.0, None) ** power
    return np.where(dom.boundary_mask(), 0.0, v)


def make_bubbles(dom: Domain, spec: BubbleSpec, Y: YoungFunction, S=None):
    """Normalized bubble sequence; ``S`` (a SobolevConjugate) is needed for ``An-mass-one``."""
    hmax = max(dom.h)
    out = []
    for eps in spec.scales:
        if eps < 4 * hmax * (1 - 1e-12):
            raise UnderResolvedError(f"scale {eps:.4g} < 4h = {4 * hmax:.4g}")
        P = GridFunction(dom, profile(dom, spec.centers, eps, spec.profile_power))
        if not np.any(P.values):
            raise UnderResolvedError(f"bubble of scale {eps:.4g} misses every interior node")
        if spec.normalization == GRADIENT_BOUNDED:
            s = spec.bound / gradient_norm(Y, P)
        else:
            if S is None:
                raise DomainError("An-mass-one normalization needs the Sobolev conjugate")
            An = S.An

            def g(ls, P=P):
                return math.log(modular(An, P * math.exp(ls)))

            # keep s * max P inside the evaluable range of A_n
            hi = min(60.0, math.log(An.t_max / float(np.abs(P.values).max())) - 1e-9)
            s = math.exp(brentq(g, -60.0, hi, xtol=1e-14, rtol=1e-15))
        out.append(P * s)
    return out


def measure_pair(Y: YoungFunction, S, u: GridFunction):
    """``(nu, mu)`` cell measures: ``A_n(|u|) h^d`` and ``A(|grad u|) h^d``."""
    dom = u.domain
    c = np.abs(u.cell_values())
    nu = np.zeros(dom.cells)
    pos = c > 0
    nu[pos] = S.An.A(c[pos]) * dom.cell_volume
    g = discrete_gradient(u)
    e = g.magnitude()
    Ae = np.zeros_like(e)
    gp = e > 0
    Ae[gp] = Y.A(e[gp]) * g.element_mass
    mu = Ae if dom.dim == 1 else Ae.sum(axis=0)
    return GridMeasure(dom, nu), GridMeasure(dom, mu)


# ---------------------------------------------------------------- atoms


@dataclass(frozen=True)
class Atom:
    x: tuple
    nu: float
    mu: float
    seed: tuple
    nu_exact: Fraction = field(repr=False, default=Fraction(0))


@dataclass(frozen=True)
class AtomReport:
    atoms: tuple
    delta: float
    residual_mass: float
    residual_exact: Fraction = field(repr=False, default=Fraction(0))
    total_exact: Fraction = field(repr=False, default=Fraction(0))

    def mass_balance_exact(self):
        """``sum nu_i + residual == total`` in exact rational arithmetic."""
        return sum((a.nu_exact for a in self.atoms), Fraction(0)) + self.residual_exact == self.total_exact


def detect_atoms(nu: GridMeasure, mu: GridMeasure, delta, radius=ATOM_RADIUS):
    """Greedy atom extraction from cell masses.

    Seeds are visited in decreasing ``nu`` order; each unassigned seed grows a
    block of cells within ``radius`` (Chebyshev distance).  Blocks reaching
    ``delta`` become atoms located at their ``nu``-weighted centroid.
    """
    if not delta > 0:
        raise DomainError("delta must be positive")
    dom = nu.domain
    m = nu.cell_mass
    shape = m.shape
    assigned = np.zeros(shape, dtype=bool)
    centers = dom.cell_centers()
    block_cells = (2 * radius + 1) ** dom.dim
    order = np.argsort(-m.ravel(), kind="stable")
    atoms = []
    for flat in order:
        val = m.flat[flat]
        if val * block_cells < delta or val <= 0:
            break
        if assigned.flat[flat]:
            continue
        seed = np.unravel_index(flat, shape)
        sl = tuple(slice(max(0, i - radius), min(n, i + radius + 1)) for i, n in zip(seed, shape))
        free = ~assigned[sl]
        blk = np.where(free, m[sl], 0.0)
        nu_i = exact_sum(blk)
        if nu_i < Fraction(delta):
            continue
        assigned[sl] |= free
        w = blk / blk.sum()
        x = tuple(float((w * c[sl]).sum()) for c in centers)
        mu_i = float(np.where(free, mu.cell_mass[sl], 0.0).sum())
        atoms.append(Atom(x, float(nu_i), mu_i, tuple(int(i) for i in seed), nu_i))
    atoms.sort(key=lambda a: a.x)
    residual = exact_sum(m[~assigned])
    return AtomReport(tuple(atoms), float(delta), float(residual), residual, exact_sum(m))


# ---------------------------------------------------------------- inequalities


@dataclass(frozen=True)
class RHResult:
    ok: bool
    lhs: float
    rhs: float
    vacuous: bool = False


def verify_reverse_holder(S_est, Mn: MatuszewskaProfile, idx: GrowthIndices, phi: GridFunction,
                          nu: GridMeasure, mu: GridMeasure, safety=DEFAULT_SAFETY):
    """``safety * S * |phi|_{M_n, nu} <= |phi|_{A_inf, mu}``.

    ``S`` is only an upper bound of the optimal constant, hence the safety
    factor below one.
    """
    if not 0 < safety <= 1:
        raise DomainError("safety must lie in (0, 1]")
    S = getattr(S_est, "value", S_est)
    if nu.total() == 0 or mu.total() == 0:
        return RHResult(True, 0.0, 0.0, vacuous=True)
    Mn_y = Mn.as_young()
    Ainf = a_infinity(idx)
    lhs = safety * S * luxemburg_norm(Mn_y, phi, weight=nu)
    rhs = luxemburg_norm(Ainf, phi, weight=mu)
    return RHResult(bool(lhs <= rhs), lhs, rhs)


@dataclass(frozen=True)
class AtomRelation:
    ok: bool
    lhs: float
    rhs: float
    excluded: bool = False


def verify_atom_relation(S_est, Mn: MatuszewskaProfile, idx: GrowthIndices, report: AtomReport,
                         safety=DEFAULT_SAFETY):
    """``safety * S / M_n^{-1}(1/nu_i) <= 1 / A_inf^{-1}(1/mu_i)`` for each atom."""
    if not report.atoms:
        raise DegenerateInputError("atom report is empty")
    S = getattr(S_est, "value", S_est)
    Ainf = a_infinity(idx)
    out = []
    for a in report.atoms:
        if a.nu <= 0 or a.mu <= 0:
            out.append(AtomRelation(False, math.nan, math.nan, excluded=True))
            continue
        lhs = safety * S / float(invert_profile(Mn, 1.0 / a.nu))
        rhs = 1.0 / float(Ainf.A_inv(1.0 / a.mu))
        out.append(AtomRelation(bool(lhs <= rhs), lhs, rhs))
    return out


def brezis_lieb_residual(B: YoungFunction, f_k, f: GridFunction, phi: GridFunction):
    """``|int (B(|f_k|) - B(|f - f_k|)) phi - int B(|f|) phi|`` for each member."""
    vol = f.domain.cell_volume
    ph = phi.cell_values()

    def integral(g):
        c = np.abs(g.cell_values())
        return float(np.dot(B.A(c).ravel(), ph.ravel()) * vol)

    base = integral(f)
    return [abs(integral(fk) - integral(f - fk) - base) for fk in f_k]


def brezis_lieb_scale(B: YoungFunction, f: GridFunction, phi: GridFunction):
    """``int B(|f|) |phi|``, the reference size of the residual."""
    c = np.abs(f.cell_values())
    return float(np.dot(B.A(c).ravel(), np.abs(phi.cell_values()).ravel()) * f.domain.cell_volume)


def flat_top_cutoff(dom: Domain, center, r_in=0.3, r_out=0.45):
    """Smooth radial cutoff: 1 on ``|x-c| <= r_in``, 0 beyond ``r_out``."""
    X = dom.mesh()
    c = np.atleast_1d(np.asarray(center, dtype=float))
    r = np.sqrt(sum((x - ci) ** 2 for x, ci in zip(X, c)))
    s = np.clip((r - r_in) / (r_out - r_in), 0.0, 1.0)
    v = np.cos(0.5 * math.pi * s) ** 2
    return GridFunction(dom, np.where(dom.boundary_mask(), 0.0, v))


def bubble_sobolev_estimate(Y, S, dom: Domain, spec: BubbleSpec, descend=False):
    """Sobolev-constant upper bound from bumps that include the bubble profile."""
    fam = BumpFamily(
        centers=tuple(tuple(np.atleast_1d(c).astype(float)) for c in spec.centers[:1]),
        widths=tuple(float(e) for e in spec.scales),
        powers=tuple(sorted({float(spec.profile_power), 3.0})),
        descend=descend,
    )
    return estimate_sobolev_constant(Y, S, dom, fam)


@dataclass(frozen=True)
class CCPRow:
    k: int
    eps: float
    nu_total: float
    mu_total: float
    n_atoms: int
    rh_lhs: float
    rh_rhs: float
    rh_ok: bool
    bl_residual: float


def run_sequence(Y, S, Mn, idx, dom, spec, S_est, delta_fraction=0.1, phi=None,
                 f=None, B=None, safety=DEFAULT_SAFETY):
    """Per-member diagnostics: total masses, atoms, RH values and the Brezis-Lieb residual."""
    members = make_bubbles(dom, spec, Y, S)
    phi = phi or flat_top_cutoff(dom, spec.centers[0])
    B = B or Y
    f = f or GridFunction.from_callable(
        dom, lambda *x: np.prod([np.sin(math.pi * xi) for xi in x], axis=0), zero_boundary=True
    )
    bl = brezis_lieb_residual(B, [f + u for u in members], f, phi)
    rows = []
    reports = []
    for k, (eps, u) in enumerate(zip(spec.scales, members), start=1):
        nu, mu = measure_pair(Y, S, u)
        rep = detect_atoms(nu, mu, delta_fraction * nu.total())
        rh = verify_reverse_holder(S_est, Mn, idx, phi, nu, mu, safety)
        reports.append(rep)
        rows.append(CCPRow(k, float(eps), nu.total(), mu.total(), len(rep.atoms),
                           rh.lhs, rh.rhs, rh.ok, bl[k - 1]))
    return rows, reports, members
