"""``orlicz`` batch front end: config in, CSV tables plus a JSON manifest out.

Exit codes: 0 success, 1 an inequality check returned false (or a numeric
failure mid-run, with partial outputs flagged), 2 configuration error.
"""

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from ._kernels import backend_name
from ._numeric import log_grid
from .config import COMMANDS, load_config
from .errors import ConfigError, DomainError, NotDelta2Error, OrliczError, UnsupportedRegimeError
from .suite import TOLERANCES as SUITE_TOLERANCES

EXIT_OK, EXIT_FALSE, EXIT_CONFIG = 0, 1, 2

_SOBOLEV_TOL = {k: SUITE_TOLERANCES[k] for k in
                ("H_bounds_rtol", "An_power_rtol", "H_doubling_rtol", "An_delta2_rtol", "composition_rtol")}

TOLERANCES = {
    "inspect": {"sandwich_rtol": 1e-12, "M_young_rtol": 1e-9, "index_slack": 1e-9},
    "conjugate": {"young_inequality_rtol": 1e-12, "young_equality_rtol": 1e-9},
    "sobolev": dict(_SOBOLEV_TOL, star_bounds_tol=1e-6),
    "norm": {"luxemburg_rtol": 1e-15, "norm_modular_rtol": 1e-8},
    "ccp": {"bl_rel_threshold": 1e-3},
    "solve": {"newton_tol": 1e-6, "mpa_tol": 5e-2},
    "sweep": {"newton_tol": 1e-6, "mpa_tol": 5e-2},
    "verify": dict(SUITE_TOLERANCES, young_inequality_rtol=1e-12),
}


# ---------------------------------------------------------------- output


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else repr(v)
    return v


class Outputs:
    """Atomic writer: every file goes to a temp name in the target dir, then ``os.replace``."""

    def __init__(self, root: Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.written = []

    def _commit(self, name, writer):
        fd, tmp = tempfile.mkstemp(prefix=f".{name}.", suffix=".tmp", dir=self.root)
        os.close(fd)
        try:
            writer(tmp)
            os.replace(tmp, self.root / name)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
        if name != "manifest.json":
            data = (self.root / name).read_bytes()
            self.written = [w for w in self.written if w["name"] != name]
            self.written.append({"name": name, "sha256": hashlib.sha256(data).hexdigest()})

    def csv(self, name, header, rows):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])
        text = buf.getvalue()
        self._commit(name, lambda p: Path(p).write_text(text, encoding="utf-8", newline=""))

    def via(self, name, fn):
        """Let ``fn(path)`` write the file, then publish it atomically."""
        self._commit(name, fn)

    def json(self, name, obj):
        text = json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"
        self._commit(name, lambda p: Path(p).write_text(text, encoding="utf-8", newline=""))


class Run:
    def __init__(self, cfg, out: Outputs, tol_scale):
        self.cfg = cfg
        self.out = out
        self.tol_scale = tol_scale
        defaults = TOLERANCES[cfg.command]
        overrides = cfg.section("tolerances")
        self.tol = {k: float(overrides.get(k, v)) * tol_scale for k, v in defaults.items()}
        self.checks = {}
        self.values = {}
        self.params = {}

    def check(self, name, ok):
        self.checks[name] = bool(ok)

    def manifest(self, status, code, error=None):
        m = {
            "tool": "orlicz",
            "version": __version__,
            "command": self.cfg.command,
            "config": str(self.cfg.path),
            "config_sha256": self.cfg.sha256,
            "tol_scale": self.tol_scale,
            "tolerances": self.tol,
            "parameters": self.params,
            "backend": backend_name(),
            "status": status,
            "exit_code": code,
            "checks": self.checks,
            "values": self.values,
            "outputs": sorted(self.out.written, key=lambda w: w["name"]),
        }
        if error:
            m["error"] = error
        self.out.json("manifest.json", m)


# ---------------------------------------------------------------- builders


def _young(run):
    from .young import young_from_config

    blk = run.cfg.section("young")
    run.params["young"] = blk
    try:
        return young_from_config(blk, run.cfg.base_dir)
    except (DomainError, OSError, ValueError) as exc:
        raise run.cfg.error("young", None, f"invalid Young function: {exc}") from None


def _sobolev(run, Y, default_n=None):
    from .sobolev import build_An

    blk = run.cfg.section("sobolev")
    n = blk.get("n", default_n)
    run.params["n"] = n
    per = blk.get("per_decade", 32)
    run.params["per_decade"] = per
    try:
        return build_An(Y, n, per_decade=per)
    except UnsupportedRegimeError as exc:
        raise run.cfg.error("sobolev", "n", f"unsupported regime: {exc}") from None


def _domain(run):
    from .grid import Domain

    d = run.cfg.section("domain")
    dim = d.get("dim", 2)
    cells = d.get("cells", 64)
    lo = tuple(float(x) for x in d.get("lower", [0.0] * dim))
    hi = tuple(float(x) for x in d.get("upper", [1.0] * dim))
    run.params["domain"] = {"dim": dim, "cells": cells, "lower": lo, "upper": hi}
    return Domain(lo, hi, (cells,) * dim)


# ---------------------------------------------------------------- commands


def cmd_inspect(run):
    from .matuszewska import build_profile, check_M_young, check_sandwich
    from .young import check_delta2_refined, estimate_indices, index_ratio

    Y = _young(run)
    blk = run.cfg.section("inspect")
    lo, hi, n = blk.get("t_lo", 1e-3), blk.get("t_hi", 1e3), blk.get("n_samples", 241)
    run.params["inspect"] = {"t_lo": lo, "t_hi": hi, "n_samples": n}
    t = log_grid(lo, hi, n)
    t = t[t <= Y.t_max]
    run.out.csv("young.csv", ["t", "A", "a", "ta_over_A"],
                zip(t.tolist(), Y.A(t).tolist(), Y.a(t).tolist(), index_ratio(Y, t).tolist()))
    try:
        est = estimate_indices(Y)
        run.values.update(p_minus=est.p_minus, p_plus=est.p_plus, delta2_constant=est.delta2_constant)
        run.check("delta2", True)
    except NotDelta2Error as exc:
        run.values["not_delta2"] = str(exc)
        run.check("delta2", False)
        return
    exact = Y.indices()
    if exact is not None:
        run.values.update(exact_p_minus=exact.p_minus, exact_p_plus=exact.p_plus)
    idx = exact or est
    run.check("delta2_refined", check_delta2_refined(Y, 1.0)[0])
    P = build_profile(Y)
    run.out.via("matuszewska.csv", P.to_csv)
    run.values.update(p_infinity=P.p_infinity, p_infinity_uncertainty=P.p_infinity_uncertainty)
    run.values["s_grid"] = P.s_grid_spec.as_dict()
    run.params.update(sandwich_eps=0.2, delta2_delta=1.0)
    ok, t0 = check_sandwich(P, 0.2, rtol=run.tol["sandwich_rtol"])
    run.check("matuszewska_sandwich", ok)
    run.check("matuszewska_is_young", check_M_young(P, rtol=run.tol["M_young_rtol"]))
    sl = run.tol["index_slack"]
    run.check("p_minus<=p_inf<=p_plus", idx.p_minus - sl <= P.p_infinity <= idx.p_plus + sl)


def cmd_conjugate(run):
    Y = _young(run)
    C = Y.conjugate()
    blk = run.cfg.section("conjugate")
    s_lo, s_hi = blk.get("s_lo", 1e-3), blk.get("s_hi", 1e3)
    n, n_pairs, seed = blk.get("n_points", 121), blk.get("n_pairs", 10000), blk.get("seed", 0)
    run.params["conjugate"] = {"s_lo": s_lo, "s_hi": s_hi, "n_points": n, "n_pairs": n_pairs, "seed": seed}
    s = log_grid(s_lo, s_hi, n)
    s = s[s <= C.t_max]
    run.out.csv("conjugate.csv", ["s", "A_conj", "a_conj"], zip(s.tolist(), C.A(s).tolist(), C.a(s).tolist()))
    rng = np.random.default_rng(seed)
    st = np.exp(rng.uniform(math.log(s_lo), math.log(s_hi), size=(n_pairs, 2)))
    ss, tt = st[:, 0], np.minimum(st[:, 1], Y.t_max)
    ss = np.minimum(ss, C.t_max)
    rhs = Y.A(tt) + C.A(ss)
    run.check("young_inequality", np.all(ss * tt <= rhs * (1 + run.tol["young_inequality_rtol"])))
    # equality at s = a(t)
    t = log_grid(s_lo, s_hi, n)
    t = t[(t <= Y.t_max) & (Y.a(t) <= C.t_max)]
    a = Y.a(t)
    gap = np.abs(t * a - Y.A(t) - C.A(a)) / np.maximum(t * a, 1e-300)
    run.values["max_equality_gap"] = float(gap.max(initial=0.0))
    run.check("young_equality", np.all(gap <= run.tol["young_equality_rtol"]))
    idx = C.indices()
    if idx is not None:
        run.values.update(conj_p_minus=idx.p_minus, conj_p_plus=idx.p_plus)


def cmd_sobolev(run):
    from .sobolev import check_integrability, pn_within_star_bounds
    from .suite import sobolev_checks

    Y = _young(run)
    S = _sobolev(run, Y)
    run.out.via("sobolev.csv", S.to_csv)
    checks, vals, _ = sobolev_checks(Y, S.n, tol=run.tol, S=S)
    run.values.update(vals)
    for k, v in checks.items():
        run.check(k, v)
    at_inf, at_zero = check_integrability(Y, S.n)
    run.values.update(diverges_at_infinity=at_inf, converges_at_zero=at_zero)
    pn = S.pn_indices
    lo, hi = S.star_bounds()
    run.values.update(pn_minus=pn.p_minus, pn_plus=pn.p_plus, star_lo=lo, star_hi=hi)
    run.check("pn_within_star_bounds", pn_within_star_bounds(S, tol=run.tol["star_bounds_tol"]))


def _grid_function(run, dom):
    from .grid import GridFunction, bump

    f = run.cfg.section("function")
    kind = f.get("kind", "sine")
    amp = float(f.get("amplitude", 1.0))
    run.params["function"] = dict(f, kind=kind, amplitude=amp)
    if kind == "sine":
        lo, hi = dom.lower, dom.upper
        return GridFunction.from_callable(
            dom, lambda *x: amp * np.prod([np.sin(math.pi * (xi - a) / (b - a)) for xi, a, b in zip(x, lo, hi)],
                                          axis=0), zero_boundary=True)
    if kind == "constant":
        return GridFunction(dom, np.full(dom.node_shape, amp))
    if kind == "bump":
        center = tuple(f.get("center", [0.5 * (a + b) for a, b in zip(dom.lower, dom.upper)]))
        if len(center) != dom.dim:
            raise run.cfg.error("function", "center", f"expected {dom.dim} coordinates")
        return bump(dom, center, f.get("width", 0.25), f.get("power", 2.0), amp)
    p = Path(f["path"])
    p = p if p.is_absolute() else run.cfg.base_dir / p
    try:
        return GridFunction.from_csv(dom, p)
    except (OSError, ValueError, IndexError) as exc:
        raise run.cfg.error("function", "path", f"cannot read grid function: {exc}") from None


def cmd_norm(run):
    from .grid import check_norm_modular_bounds, gradient_modular, gradient_norm, luxemburg_norm, modular
    from .young import indices_of

    Y = _young(run)
    dom = _domain(run)
    u = _grid_function(run, dom)
    rt = run.tol["luxemburg_rtol"]
    rows = [
        ("luxemburg_norm", luxemburg_norm(Y, u, rtol=rt)),
        ("modular", modular(Y, u)),
        ("gradient_norm", gradient_norm(Y, u, rtol=rt) if np.any(u.values) else 0.0),
        ("gradient_modular", gradient_modular(Y, u)),
        ("max_abs", float(np.abs(u.values).max())),
    ]
    run.out.csv("norm.csv", ["quantity", "value"], rows)
    run.values.update(dict(rows))
    run.check("norm_modular_bounds",
              check_norm_modular_bounds(Y, u, indices_of(Y), rtol=run.tol["norm_modular_rtol"]))


def cmd_ccp(run):
    from .ccp import (
        ATOM_RADIUS, BubbleSpec, brezis_lieb_scale, bubble_sobolev_estimate, flat_top_cutoff,
        run_sequence, verify_atom_relation,
    )
    from .grid import GridFunction
    from .matuszewska import build_profile
    from .young import indices_of

    Y = _young(run)
    S = _sobolev(run, Y)
    dom = _domain(run)
    b = run.cfg.section("bubbles")
    scales = tuple(b["scales"]) if "scales" in b else tuple(2.0 ** -k for k in range(1, b["k_max"] + 1))
    spec = BubbleSpec(
        centers=tuple(tuple(float(x) for x in c) for c in b["centers"]),
        scales=tuple(float(e) for e in scales),
        normalization=b.get("normalization", "gradient-A-bounded"),
        bound=float(b.get("bound", 1.0)),
        profile_power=float(b.get("profile_power", 2.0)),
    )
    delta_fraction = b.get("delta_fraction", 0.1)
    safety = b.get("safety", 0.9)
    rh_from = b.get("rh_from", 1)
    run.params["bubbles"] = {"centers": spec.centers, "scales": spec.scales, "normalization": spec.normalization,
                             "bound": spec.bound, "profile_power": spec.profile_power,
                             "delta_fraction": delta_fraction, "safety": safety, "rh_from": rh_from,
                             "atom_radius": ATOM_RADIUS}
    if rh_from > len(scales):
        raise run.cfg.error("bubbles", "rh_from", "exceeds the number of sequence members")
    idx = indices_of(Y)
    Mn = build_profile(S.An)
    S_est = bubble_sobolev_estimate(Y, S, dom, spec)
    run.values.update(sobolev_constant_estimate=S_est.value, Mn_p_infinity=Mn.p_infinity)
    phi = flat_top_cutoff(dom, spec.centers[0])
    f = GridFunction.from_callable(
        dom, lambda *x: np.prod([np.sin(math.pi * (xi - a) / (c - a)) for xi, a, c in zip(x, dom.lower, dom.upper)],
                                axis=0), zero_boundary=True)
    rows, reports, _ = run_sequence(Y, S, Mn, idx, dom, spec, S_est, delta_fraction, phi=phi, f=f,
                                    safety=safety)
    scale = brezis_lieb_scale(Y, f, phi)
    run.out.csv("ccp.csv", ["k", "eps", "nu_total", "mu_total", "n_atoms", "rh_lhs", "rh_rhs", "rh_ok",
                            "bl_residual", "bl_relative"],
                [(r.k, r.eps, r.nu_total, r.mu_total, r.n_atoms, r.rh_lhs, r.rh_rhs, r.rh_ok,
                  r.bl_residual, r.bl_residual / scale) for r in rows])
    rep = reports[-1]
    rel = []
    if rep.atoms:
        rel = verify_atom_relation(S_est, Mn, idx, rep, safety)
    names = ["x", "y"][: dom.dim]
    run.out.csv("atoms.csv", names + ["nu", "mu", "relation_lhs", "relation_rhs", "relation_ok"],
                [tuple(a.x) + (a.nu, a.mu, r.lhs, r.rhs, r.ok) for a, r in zip(rep.atoms, rel)])
    run.values.update(residual_mass=rep.residual_mass, n_atoms=len(rep.atoms),
                      bl_relative_finest=rows[-1].bl_residual / scale)
    run.check("reverse_holder", all(r.rh_ok for r in rows[rh_from - 1:]))
    run.check("atoms_found", bool(rep.atoms))
    run.check("atom_relation", bool(rel) and all(r.ok for r in rel))
    run.check("mass_balance_exact", rep.mass_balance_exact())
    run.check("brezis_lieb", rows[-1].bl_residual / scale <= run.tol["bl_rel_threshold"])


def _problem(run):
    from .mountain_pass import ProblemSpec

    Y = _young(run)
    p = run.cfg.section("problem")
    crit = p.get("include_critical", True)
    S = _sobolev(run, Y) if crit else None
    dom = _domain(run)
    run.params["problem"] = dict(p, include_critical=crit)
    try:
        P = ProblemSpec(A=Y, dom=dom, lam=float(p.get("lam", p.get("lambdas", [0.0])[0])), r=float(p["r"]),
                        gamma=float(p["gamma"]), S=S, include_critical=crit)
    except DomainError as exc:
        raise run.cfg.error("problem", None, str(exc)) from None
    run.params["eps_reg"] = P.eps_reg
    hyp = P.hypotheses()
    for k, v in hyp.items():
        run.check(f"hypothesis_{k}", v)
    kw = {"path_nodes": p.get("path_nodes", 24), "max_iters": p.get("max_iters", 400),
          "tol": run.tol["newton_tol"], "mpa_tol": run.tol["mpa_tol"]}
    return P, kw


def cmd_solve(run):
    from .mountain_pass import run_mountain_pass

    P, kw = _problem(run)
    res = run_mountain_pass(P, **kw)
    run.out.via("solution.csv", res.u_star.to_csv)
    run.out.csv("trace.csv", ["iter", "energy", "residual"],
                [(i, e, r) for i, (e, r) in enumerate(res.ps_trace)])
    g = res.geometry
    run.values.update(c_lambda=res.c_level, residual=res.residual, norm_u=res.norm_u, rho=g.rho, alpha=g.alpha,
                      u0_energy=g.u0_energy, path_iterations=res.phases.count("path"),
                      newton_iterations=res.phases.count("newton"))
    for k, v in g.certified.items():
        run.check(f"geometry_{k}", v)
    run.check("c_at_least_alpha", res.c_level >= g.alpha)
    run.check("converged", res.converged)
    run.check("nontrivial", res.nontrivial)


def cmd_sweep(run):
    from .mountain_pass import lambda_sweep

    P, kw = _problem(run)
    lambdas = run.cfg.get("problem", "lambdas")
    rows = lambda_sweep(P, lambdas, **kw)
    run.out.csv("sweep.csv", ["lambda", "c_lambda", "nontrivial"], [(r.lam, r.c_lambda, r.nontrivial) for r in rows])
    run.values["errors"] = {repr(r.lam): r.error for r in rows if r.error}
    cs = [r.c_lambda for r in rows]
    run.check("all_converged", all(r.converged for r in rows))
    run.check("all_nontrivial", all(r.nontrivial for r in rows))
    run.check("c_decreasing", all(math.isfinite(c) for c in cs) and all(b < a for a, b in zip(cs, cs[1:])))


def cmd_verify(run):
    from .suite import inequality_suite

    Y = _young(run)
    blk = run.cfg.section("verify")
    seed, eta = blk.get("seed", 0), blk.get("eta", 0.1)
    n = run.cfg.get("sobolev", "n", 4)
    run.params.update(seed=seed, eta=eta, n=n)
    _sobolev(run, Y, default_n=4)  # validates the regime (exit 2 when p+ >= n)
    checks, values = inequality_suite(Y, n, seed=seed, tol=run.tol)
    C = Y.conjugate()
    rng = np.random.default_rng(seed)
    st = np.exp(rng.uniform(math.log(1e-2), math.log(1e2), size=(1000, 2)))
    checks["young_inequality"] = bool(np.all(st[:, 0] * st[:, 1] <= (Y.A(st[:, 1]) + C.A(st[:, 0]))
                                             * (1 + run.tol["young_inequality_rtol"])))
    for k, v in checks.items():
        run.check(k, v)
    run.values.update(values)
    run.out.csv("verify.csv", ["check", "passed"], checks.items())


HANDLERS = {
    "inspect": cmd_inspect, "conjugate": cmd_conjugate, "sobolev": cmd_sobolev, "norm": cmd_norm,
    "ccp": cmd_ccp, "solve": cmd_solve, "sweep": cmd_sweep, "verify": cmd_verify,
}


# ---------------------------------------------------------------- entry point


def run_command(command, config, out=None, tol_scale=1.0, stderr=None):
    """Run one command; returns the exit code."""
    stderr = stderr or sys.stderr
    if not (isinstance(tol_scale, (int, float)) and math.isfinite(tol_scale) and tol_scale > 0):
        print(f"error: --tol-scale must be a positive finite number, got {tol_scale!r}", file=stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(config, command, TOLERANCES[command].keys())
    except ConfigError as exc:
        print(f"config error: {exc}", file=stderr)
        return EXIT_CONFIG
    out_dir = Path(out) if out else cfg.path.parent / f"{cfg.path.stem}_out"
    run = Run(cfg, Outputs(out_dir), float(tol_scale))
    try:
        HANDLERS[command](run)
    except ConfigError as exc:
        print(f"config error: {exc}", file=stderr)
        run.manifest("config-error", EXIT_CONFIG, str(exc))
        return EXIT_CONFIG
    except (OrliczError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numeric failure: {type(exc).__name__}: {exc}", file=stderr)
        run.manifest("partial", EXIT_FALSE, f"{type(exc).__name__}: {exc}")
        return EXIT_FALSE
    failed = [k for k, v in run.checks.items() if not v]
    code = EXIT_FALSE if failed else EXIT_OK
    run.manifest("verification-failed" if failed else "ok", code)
    for k, v in run.checks.items():
        print(f"{'PASS' if v else 'FAIL'} {k}")
    print(f"outputs: {out_dir}")
    return code


def main(argv=None):
    ap = argparse.ArgumentParser(prog="orlicz", description="Numerical toolkit for Orlicz-Sobolev experiments.")
    ap.add_argument("--version", action="version", version=f"orlicz {__version__}")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="TOML experiment config")
    ap.add_argument("--out", default=None, help="output directory (default: <config stem>_out next to the config)")
    ap.add_argument("--tol-scale", type=float, default=1.0, help="multiply every tolerance by this factor")
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    return run_command(args.command, args.config, args.out, args.tol_scale)


if __name__ == "__main__":
    sys.exit(main())
