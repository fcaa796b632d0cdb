"""Discrete mountain-pass solver for ``-div(a(|grad u|) grad u / |grad u|) = a_n(|u|) sgn u + lam f(u)``.

The functional is ``F(u) = int A(|grad u|_eps) - A(eps) - A_n(|u|) - lam F(u)``
with P1 element gradients and cell-averaged potential terms; its gradient is
the exact nodal derivative of the discrete energy.  The saddle is located by
a path method (descend the highest node of a discretized path, re-equidistribute)
and then polished with Newton's method on the sparse Hessian.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from . import _kernels
from .errors import DomainError, GeometryError, RangeError
from .grid import Domain, GridFunction, gradient_norm, luxemburg_values
from .young import PowerYoung, Relation, YoungFunction, compare, indices_of


@dataclass(frozen=True)
class ProblemSpec:
    A: YoungFunction
    dom: Domain
    lam: float
    r: float
    gamma: float
    S: object = None
    include_critical: bool = True
    eps_reg: float = None

    def __post_init__(self):
        if self.include_critical and self.S is None:
            raise DomainError("the critical term needs a Sobolev conjugate")
        if not self.r > 1:
            raise DomainError("r must exceed 1")
        if self.lam < 0:
            raise DomainError("lambda must be nonnegative")
        if self.eps_reg is None:
            object.__setattr__(self, "eps_reg", 1e-8 * min(self.dom.h))

    @property
    def B(self):
        """Young bound on ``F``: here ``F`` itself, ``t^r / r``."""
        return PowerYoung(self.r, 1.0 / self.r)

    def with_lambda(self, lam):
        return replace(self, lam=float(lam))

    def hypotheses(self):
        """Closed-form checks of the growth window ``p+ < gamma``, ``p+ < r <= r < p_n-``."""
        idx = indices_of(self.A)
        out = {"p_plus<gamma": idx.p_plus < self.gamma, "p_plus<r": idx.p_plus < self.r}
        if self.include_critical:
            pn_minus = self.S.pn_indices.p_minus
            out["gamma<pn_minus"] = self.gamma < pn_minus
            out["r<pn_minus"] = self.r < pn_minus
            out["B<<An"] = compare(self.B, self.S.An).relation is Relation.ESSENTIALLY_SMALLER
        return out


def f_nonlinearity(r, t):
    t = np.asarray(t, dtype=float)
    return np.sign(t) * np.abs(t) ** (r - 1)


def F_primitive(r, t):
    return np.abs(np.asarray(t, dtype=float)) ** r / r


def check_AR(P: ProblemSpec, samples):
    """``f(t) t <= gamma F(t)`` on samples."""
    t = np.asarray(samples, dtype=float)
    lhs = f_nonlinearity(P.r, t) * t
    rhs = P.gamma * F_primitive(P.r, t)
    return bool(np.all(lhs <= rhs * (1 + 1e-12) + 1e-300))


# ---------------------------------------------------------------- discrete energy


class DiscreteFunctional:
    """Energy, gradient and Hessian on the interior nodes of ``P.dom``."""

    def __init__(self, P: ProblemSpec, kernels=None):
        self.P = P
        self.k = kernels or _kernels.active
        self.dom = P.dom
        self.vol = self.dom.cell_volume
        self.interior = ~self.dom.boundary_mask()
        self.n_free = int(self.interior.sum())
        self._stiff = None
        self._stiff_lu = None

    # -- pieces
    def _grads(self, u):
        d = self.dom
        if d.dim == 1:
            return (self.k.diff_1d(u, d.h[0]),)
        return self.k.tri_gradients(u, d.h[0], d.h[1])

    def _cell(self, u):
        return self.k.cell_average_1d(u) if self.dom.dim == 1 else self.k.cell_average_2d(u)

    def _cell_scatter(self, c):
        return self.k.cell_scatter_1d(c) if self.dom.dim == 1 else self.k.cell_scatter_2d(c)

    def _elem_mass(self):
        return self.vol if self.dom.dim == 1 else 0.5 * self.vol

    def _reg_mag(self, grads):
        d = self.dom
        e2 = self.P.eps_reg**2
        if d.dim == 1:
            return np.sqrt(grads[0] ** 2 + e2), None
        gx1, gy1, gx2, gy2 = grads
        return np.sqrt(gx1**2 + gy1**2 + e2), np.sqrt(gx2**2 + gy2**2 + e2)

    def _potential(self, c):
        P = self.P
        val = P.lam * F_primitive(P.r, c)
        if P.include_critical:
            val = val + P.S.An.A(np.abs(c))
        return val

    def _potential_d(self, c):
        P = self.P
        val = P.lam * f_nonlinearity(P.r, c)
        if P.include_critical:
            val = val + np.sign(c) * P.S.An.a(np.abs(c))
        return val

    def _potential_dd(self, c):
        P = self.P
        val = P.lam * (P.r - 1) * np.abs(c) ** (P.r - 2)
        if P.include_critical:
            val = val + P.S.An.da(np.abs(c))
        return val

    # -- public
    def full(self, u):
        u = np.asarray(u, dtype=float)
        if u.shape == self.dom.node_shape:
            return u
        out = np.zeros(self.dom.node_shape)
        out[self.interior] = u
        return out

    def gradient_energy(self, u):
        u = self.full(u)
        A = self.P.A
        me = self._elem_mass()
        r1, r2 = self._reg_mag(self._grads(u))
        base = float(A.A(self.P.eps_reg))
        total = (A.A(r1) - base).sum()
        if r2 is not None:
            total += (A.A(r2) - base).sum()
        return float(total * me)

    def potential_energy(self, u):
        c = self._cell(self.full(u))
        v = self._potential(c)
        if not np.all(np.isfinite(v)):
            raise RangeError("potential overflow")
        return float(v.sum() * self.vol)

    def energy(self, u):
        return self.gradient_energy(u) - self.potential_energy(u)

    def grad_A_part(self, u):
        """Nodal derivative of the gradient energy (full node array)."""
        u = self.full(u)
        d = self.dom
        A = self.P.A
        me = self._elem_mass()
        grads = self._grads(u)
        r1, r2 = self._reg_mag(grads)
        q1 = A.a(r1) / r1 * me
        if d.dim == 1:
            return self.k.diff_scatter_1d(q1 * grads[0], d.h[0])
        q2 = A.a(r2) / r2 * me
        gx1, gy1, gx2, gy2 = grads
        return self.k.tri_scatter(q1 * gx1, q1 * gy1, q2 * gx2, q2 * gy2, d.h[0], d.h[1])

    def gradient(self, u):
        """Exact derivative of ``energy`` w.r.t. the interior nodal values."""
        u = self.full(u)
        g = self.grad_A_part(u) - self._cell_scatter(self._potential_d(self._cell(u))) * self.vol
        return g[self.interior]

    def residual_norm(self, g, conj=None):
        """Luxemburg norm (w.r.t. the complementary function) of the strong residual ``g / h^d``."""
        conj = conj or self.P.A.conjugate()
        vals = np.asarray(g) / self.vol
        return luxemburg_values(conj, vals, np.full(vals.shape, self.vol)).value

    # -- linear algebra
    def _node_index(self):
        idx = -np.ones(self.dom.node_shape, dtype=np.int64)
        idx[self.interior] = np.arange(self.n_free)
        return idx

    def stiffness(self):
        """Dirichlet stiffness matrix of the P1 Laplacian (the H^1_0 inner product)."""
        if self._stiff is None:
            d = self.dom
            if d.dim == 1:
                h = d.h[0]
                n = self.n_free
                self._stiff = sp.diags([-np.ones(n - 1), 2 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1]).tocsc() / h
            else:
                hx, hy = d.h
                nx, ny = d.cells[0] - 1, d.cells[1] - 1
                Tx = sp.diags([-np.ones(nx - 1), 2 * np.ones(nx), -np.ones(nx - 1)], [-1, 0, 1])
                Ty = sp.diags([-np.ones(ny - 1), 2 * np.ones(ny), -np.ones(ny - 1)], [-1, 0, 1])
                self._stiff = (sp.kron(Tx, sp.eye(ny)) * (hy / hx) + sp.kron(sp.eye(nx), Ty) * (hx / hy)).tocsc()
            self._stiff_lu = splu(self._stiff)
        return self._stiff

    def precondition(self, g):
        self.stiffness()
        return self._stiff_lu.solve(np.asarray(g, dtype=float))

    def h1_norm(self, v):
        K = self.stiffness()
        return math.sqrt(max(float(v @ (K @ v)), 0.0))

    def hessian(self, u):
        """Sparse Hessian of ``energy`` on the interior nodes."""
        u = self.full(u)
        d = self.dom
        A = self.P.A
        idx = self._node_index()
        rows, cols, vals = [], [], []

        def add_block(nodes, grads_phi, D, mass):
            # nodes: list of index arrays (m,), grads_phi: list of (gx, gy) per node, D: (m, 2, 2)
            for a, (na, ga) in enumerate(zip(nodes, grads_phi)):
                for b, (nb, gb) in enumerate(zip(nodes, grads_phi)):
                    v = mass * np.einsum("i,mij,j->m", ga, D, gb)
                    keep = (na >= 0) & (nb >= 0)
                    rows.append(na[keep])
                    cols.append(nb[keep])
                    vals.append(v[keep])

        def dmat(gvec, r):
            a_r = A.a(r)
            da_r = A.da(r)
            q = a_r / r
            outer = np.einsum("mi,mj->mij", gvec, gvec) / (r**2)[:, None, None]
            eye = np.eye(gvec.shape[1])[None]
            return q[:, None, None] * eye + (da_r - q)[:, None, None] * outer

        if d.dim == 1:
            h = d.h[0]
            g = self._grads(u)[0]
            r = np.sqrt(g**2 + self.P.eps_reg**2)
            D = dmat(g[:, None], r)
            n0 = idx[:-1]
            n1 = idx[1:]
            add_block([n0, n1], [np.array([-1.0 / h]), np.array([1.0 / h])], D, self.vol)
            c = self._cell(u)
            w = self._potential_dd(c) * self.vol * 0.25
            for na in (n0, n1):
                for nb in (n0, n1):
                    keep = (na >= 0) & (nb >= 0)
                    rows.append(na[keep])
                    cols.append(nb[keep])
                    vals.append(-w[keep])
        else:
            hx, hy = d.h
            gx1, gy1, gx2, gy2 = self._grads(u)
            r1, r2 = self._reg_mag((gx1, gy1, gx2, gy2))
            me = 0.5 * self.vol
            D1 = dmat(np.stack([gx1.ravel(), gy1.ravel()], axis=1), r1.ravel())
            D2 = dmat(np.stack([gx2.ravel(), gy2.ravel()], axis=1), r2.ravel())
            n00 = idx[:-1, :-1].ravel()
            n10 = idx[1:, :-1].ravel()
            n01 = idx[:-1, 1:].ravel()
            n11 = idx[1:, 1:].ravel()
            add_block([n00, n10, n01],
                      [np.array([-1 / hx, -1 / hy]), np.array([1 / hx, 0.0]), np.array([0.0, 1 / hy])], D1, me)
            add_block([n11, n01, n10],
                      [np.array([1 / hx, 1 / hy]), np.array([-1 / hx, 0.0]), np.array([0.0, -1 / hy])], D2, me)
            c = self._cell(u).ravel()
            w = self._potential_dd(c) * self.vol / 16.0
            corners = (n00, n10, n01, n11)
            for na in corners:
                for nb in corners:
                    keep = (na >= 0) & (nb >= 0)
                    rows.append(na[keep])
                    cols.append(nb[keep])
                    vals.append(-w[keep])
        H = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.n_free, self.n_free),
        )
        return H.tocsc()


def functional_eval(P: ProblemSpec, u: GridFunction):
    return DiscreteFunctional(P).energy(u.values)


def functional_gradient(P: ProblemSpec, u: GridFunction):
    """Nodal gradient of the discrete functional as a grid function (zero on the boundary)."""
    J = DiscreteFunctional(P)
    return GridFunction(P.dom, J.full(J.gradient(u.values)))


# ---------------------------------------------------------------- geometry


def sphere_directions(P: ProblemSpec, modes=3):
    """Unit directions ``|grad v|_A = 1``: sine modes and a few interior bumps."""
    dom = P.dom
    X = dom.mesh()
    dirs = []
    ks = range(1, modes + 1)
    if dom.dim == 1:
        for k in ks:
            dirs.append(np.sin(k * math.pi * X[0]))
    else:
        for k in ks:
            for l in ks:
                dirs.append(np.sin(k * math.pi * X[0]) * np.sin(l * math.pi * X[1]))
    mid = [0.5 * (a + b) for a, b in zip(dom.lower, dom.upper)]
    for w in (0.4, 0.25):
        r2 = sum((x - c) ** 2 for x, c in zip(X, mid)) / w**2
        dirs.append(np.clip(1 - r2, 0, None) ** 2)
    out = []
    for v in dirs:
        v = np.where(dom.boundary_mask(), 0.0, v)
        g = GridFunction(dom, v)
        out.append(v / gradient_norm(P.A, g))
    return out


@dataclass
class GeometryResult:
    rho: float
    alpha: float
    u0: np.ndarray
    u0_energy: float
    u0_gradient_norm: float
    alphas: list
    certified: dict


def verify_geometry(P: ProblemSpec, rho_grid=None, max_doublings=60, inner_fraction=0.5):
    """Sampled mountain-pass geometry: ``F >= alpha > 0`` on a sphere, ``F(u0) < 0`` beyond it.

    A finite set of directions only overestimates the infimum over the sphere
    near the ridge, so the sphere is kept inside the mountain: ``rho`` is the
    largest grid radius not exceeding ``inner_fraction`` times the smallest
    ray maximizer ``argmax_t F(t v)`` among the sampled directions.
    """
    J = DiscreteFunctional(P)
    dirs = sphere_directions(P)
    rho_grid = np.geomspace(1e-4, 10.0, 51) if rho_grid is None else np.asarray(rho_grid, dtype=float)
    table = np.full((len(rho_grid), len(dirs)), -math.inf)
    for i, rho in enumerate(rho_grid):
        for k, v in enumerate(dirs):
            try:
                table[i, k] = J.energy(rho * v)
            except RangeError:
                pass
    alphas = [(float(rho), float(row.min())) for rho, row in zip(rho_grid, table)]
    peak = float(min(rho_grid[int(np.argmax(table[:, k]))] for k in range(len(dirs))))
    good = [(rho, a) for rho, a in alphas if a > 0 and rho <= inner_fraction * peak]
    if not good:
        raise GeometryError("no sampled radius gives a positive energy floor (lambda too large for this grid?)")
    rho, alpha = good[-1]
    v = dirs[0]
    t = rho
    E = J.energy(t * v)
    for _ in range(max_doublings):
        if E < 0 and t > rho:
            break
        t *= 2.0
        E = J.energy(t * v)
    else:
        raise GeometryError("ray march did not reach negative energy")
    u0 = t * v
    gn = gradient_norm(P.A, GridFunction(P.dom, u0))
    cert = {
        "i_sphere_floor_positive": alpha > 0,
        "ii_zero_below_alpha": J.energy(np.zeros(P.dom.node_shape)) < alpha,
        "iii_u0_outside_and_negative": bool(gn > rho and E < 0),
    }
    return GeometryResult(float(rho), float(alpha), u0, float(E), float(gn), alphas, cert)


# ---------------------------------------------------------------- path method


@dataclass
class MountainPassResult:
    u_star: GridFunction
    c_level: float
    ps_trace: list
    geometry: GeometryResult
    nontrivial: bool
    converged: bool
    residual: float
    norm_u: float
    phases: list = field(default_factory=list)
    max_gradient_norm: float = math.nan


def _equidistribute(path, J):
    """Reparametrize the path by H^1_0 arc length (endpoints fixed)."""
    seg = np.array([J.h1_norm(b - a) for a, b in zip(path[:-1], path[1:])])
    s = np.concatenate([[0.0], np.cumsum(seg)])
    if s[-1] == 0:
        return path
    target = np.linspace(0, s[-1], len(path))
    out = [path[0]]
    for tgt in target[1:-1]:
        k = min(int(np.searchsorted(s, tgt, side="right")) - 1, len(path) - 2)
        w = (tgt - s[k]) / seg[k] if seg[k] > 0 else 0.0
        out.append((1 - w) * path[k] + w * path[k + 1])
    out.append(path[-1])
    return out


def run_mountain_pass(P: ProblemSpec, path_nodes=24, max_iters=400, tol=1e-6, geometry=None,
                      mpa_tol=5e-2, newton_iters=40):
    """Path method followed by a Newton polish of the highest path node."""
    J = DiscreteFunctional(P)
    geom = geometry or verify_geometry(P)
    conj = P.A.conjugate()
    u0 = geom.u0[J.interior]
    theta = np.linspace(0.0, 1.0, path_nodes)
    path = [0.5 * (1 - math.cos(math.pi * th)) * u0 for th in theta]
    energies = np.array([J.energy(p) for p in path])
    trace, phases = [], []
    step = 1.0
    max_grad = 0.0

    def grad_norm_A(x):
        return gradient_norm(P.A, GridFunction(P.dom, J.full(x)))

    for it in range(max_iters):
        j = int(np.argmax(energies[1:-1])) + 1
        u = path[j]
        g = J.gradient(u)
        res = J.residual_norm(g, conj)
        trace.append((float(energies[j]), float(res)))
        phases.append("path")
        max_grad = max(max_grad, grad_norm_A(u))
        d = J.precondition(g)
        # keep the node at its place along the path: remove the tangential part
        tan = path[j + 1] - path[j - 1]
        K = J.stiffness()
        Kt = K @ tan
        tt = float(tan @ Kt)
        if tt > 0:
            d = d - (float(d @ Kt) / tt) * tan
        dd = float(g @ d)
        if dd <= 0 or math.sqrt(dd) <= mpa_tol * max(1.0, math.sqrt(abs(energies[j]))):
            break
        seg = np.mean([J.h1_norm(b - a) for a, b in zip(path[:-1], path[1:])])
        tau = min(step, 0.5 * seg / math.sqrt(max(float(d @ (J.stiffness() @ d)), 1e-300)))
        accepted = False
        for _ in range(40):
            cand = u - tau * d
            Ec = J.energy(cand)
            if Ec <= energies[j] - 1e-4 * tau * dd and Ec < energies[j]:
                accepted = True
                break
            tau *= 0.5
        if not accepted:
            break
        path[j] = cand
        energies[j] = Ec
        step = min(2.0 * tau, 1e6)
        old_max = float(energies.max())
        new_path = _equidistribute(path, J)
        new_E = np.array([J.energy(p) for p in new_path])
        if new_E.max() <= old_max:
            path, energies = new_path, new_E

    j = int(np.argmax(energies[1:-1])) + 1
    u = path[j].copy()
    converged = False
    g = J.gradient(u)
    res = J.residual_norm(g, conj)
    for _ in range(newton_iters):
        if res < tol:
            converged = True
            break
        H = J.hessian(u)
        try:
            du = splu(H).solve(g)
        except RuntimeError:
            break
        t = 1.0
        ok = False
        for _ in range(30):
            cand = u - t * du
            try:
                gc = J.gradient(cand)
                rc = J.residual_norm(gc, conj)
            except RangeError:
                rc = math.inf
            if rc < res:
                ok = True
                break
            t *= 0.5
        if not ok:
            break
        u, g, res = cand, gc, rc
        trace.append((float(J.energy(u)), float(res)))
        phases.append("newton")
        max_grad = max(max_grad, grad_norm_A(u))
    if res < tol:
        converged = True
    u_full = J.full(u)
    u_star = GridFunction(P.dom, u_full)
    norm_u = gradient_norm(P.A, u_star)
    c = J.energy(u)
    return MountainPassResult(
        u_star=u_star,
        c_level=float(c),
        ps_trace=trace,
        geometry=geom,
        nontrivial=bool(norm_u > 1e3 * tol),
        converged=converged,
        residual=float(res),
        norm_u=float(norm_u),
        phases=phases,
        max_gradient_norm=float(max_grad),
    )


@dataclass(frozen=True)
class SweepRow:
    lam: float
    c_lambda: float
    nontrivial: bool
    converged: bool
    error: str = ""


def lambda_sweep(P_template: ProblemSpec, lambdas, **kw):
    lambdas = [float(x) for x in lambdas]
    if any(b <= a for a, b in zip(lambdas, lambdas[1:])):
        raise DomainError("lambda list must be increasing")
    rows = []
    for lam in lambdas:
        P = P_template.with_lambda(lam)
        try:
            res = run_mountain_pass(P, **kw)
            rows.append(SweepRow(lam, res.c_level, res.nontrivial, res.converged))
        except (GeometryError, RangeError) as exc:
            rows.append(SweepRow(lam, math.nan, False, False, str(exc)))
    return rows


def desk_spec(lam=10.0, cells=64, S=None):
    """The 2-D desk-scale problem: ``A = t^1.5``, ``n = 2``, ``f = t^2``, ``gamma = 3``."""
    from .sobolev import build_An

    A = PowerYoung(1.5)
    S = S or build_An(A, 2)
    return ProblemSpec(A=A, dom=Domain.unit(2, cells), lam=lam, r=3.0, gamma=3.0, S=S)


def proxy_1d_spec(cells=128):
    """1-D proxy ``-u'' = u^3`` on (0,1): ``A = t^2/2``, ``F = t^4/4``, no critical term."""
    return ProblemSpec(A=PowerYoung(2.0, 0.5), dom=Domain.unit(1, cells), lam=1.0, r=4.0,
                       gamma=4.0, include_critical=False)
