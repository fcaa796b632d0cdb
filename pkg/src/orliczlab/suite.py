"""Inequality suite: every elementary estimate as a named boolean check."""

import numpy as np

from .grid import Domain, GridFunction, check_norm_modular_bounds
from .matuszewska import build_profile, check_sandwich
from .sobolev import (
    build_An,
    check_An_delta2,
    check_An_power_bounds,
    check_composition,
    check_cotaH,
    check_H_bounds,
)
from .young import (
    check_delta2_refined,
    indices_of,
    verify_scaling_inequality,
    verify_sum_inequality,
)

DELTAS = (0.25, 0.5, 1.0, 3.0)

TOLERANCES = {
    "scaling_rtol": 1e-9,
    "norm_modular_rtol": 1e-8,
    "H_bounds_rtol": 1e-9,
    "An_power_rtol": 1e-9,
    "H_doubling_rtol": 1e-10,
    "An_delta2_rtol": 1e-9,
    "composition_rtol": 1e-9,
    "sandwich_rtol": 1e-12,
    "index_slack": 1e-9,
}


def _tol(tol):
    out = dict(TOLERANCES)
    out.update(tol or {})
    return out


def _pairs(rng, lo, hi, n):
    return np.exp(rng.uniform(np.log(lo), np.log(hi), size=(n, 2)))


def young_checks(Y, seed=0, eta=0.1, n_pairs=1000, tol=None):
    tol = _tol(tol)
    rng = np.random.default_rng(seed)
    idx = indices_of(Y)
    out = {}
    ok, c_eta = verify_sum_inequality(Y, eta, _pairs(rng, 1e-2, 1e2, n_pairs), idx.p_plus)
    out["sum_inequality"] = ok
    out["scaling_sandwich"] = verify_scaling_inequality(Y, _pairs(rng, 1e-2, 1e2, n_pairs), idx,
                                                         rtol=tol["scaling_rtol"])
    d2 = [check_delta2_refined(Y, d)[0] for d in DELTAS]
    out["delta2_refined_equivalence"] = all(d2) or not any(d2)
    out["delta2_refined"] = all(d2)
    return out, {"C_eta": c_eta, "eta": eta}


def norm_checks(Y, seed=0, n_functions=20, cells=16, tol=None):
    tol = _tol(tol)
    rng = np.random.default_rng(seed)
    dom = Domain.unit(2, cells)
    idx = indices_of(Y)
    ok = True
    for _ in range(n_functions):
        scale = 10.0 ** rng.uniform(-2, 2)
        u = GridFunction(dom, scale * rng.standard_normal(dom.node_shape))
        ok &= check_norm_modular_bounds(Y, u, idx, rtol=tol["norm_modular_rtol"])
    return {"norm_modular_bounds": bool(ok)}


def sobolev_checks(Y, n, tol=None, S=None):
    tol = _tol(tol)
    S = S or build_An(Y, n)
    okH = check_H_bounds(S, rtol=tol["H_bounds_rtol"])[0]
    okP = check_An_power_bounds(S, rtol=tol["An_power_rtol"])[0]
    ok_d2, c0, d0 = check_An_delta2(S, rtol=tol["An_delta2_rtol"], cota_rtol=tol["H_doubling_rtol"])
    out = {
        "H_bounds": okH,
        "An_power_bounds": okP,
        "H_doubling": check_cotaH(S, rtol=tol["H_doubling_rtol"]),
        "An_delta2_inheritance": ok_d2,
        "composition_identity": check_composition(S, rtol=tol["composition_rtol"]),
    }
    return out, {"C0": c0, "delta0": d0}, S


def matuszewska_checks(Y, eps=0.2, tol=None):
    tol = _tol(tol)
    P = build_profile(Y)
    ok, t0 = check_sandwich(P, eps, rtol=tol["sandwich_rtol"])
    idx = indices_of(Y)
    sl = tol["index_slack"]
    within = idx.p_minus - sl <= P.p_infinity <= idx.p_plus + sl
    return {"sandwich": ok, "p_minus<=p_inf<=p_plus": bool(within)}, {"p_infinity": P.p_infinity, "t0": t0}


def inequality_suite(Y, n, seed=0, tol=None):
    """All checks for one Young function; returns ``(checks, values)``."""
    checks, values = {}, {}
    c, v = young_checks(Y, seed, tol=tol)
    checks.update(c)
    values.update(v)
    checks.update(norm_checks(Y, seed, tol=tol))
    c, v, _ = sobolev_checks(Y, n, tol=tol)
    checks.update(c)
    values.update(v)
    c, v = matuszewska_checks(Y, tol=tol)
    checks.update(c)
    values.update(v)
    return checks, values
