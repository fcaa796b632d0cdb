"""Independent oracles for derived reference values.

Nothing here imports orliczlab: every value is recomputed from closed forms,
brute-force grids, mpmath quadrature or an ODE shooting solve.  Run
``python3 tests/oracles.py`` to regenerate ``tests/fixtures/derived.json``;
the test suite only reads the frozen file (and ``test_oracles.py`` checks
that the frozen numbers still match the oracles).
"""

import json
import math
from pathlib import Path

import mpmath as mp
import numpy as np
from scipy.integrate import solve_ivp, trapezoid
from scipy.optimize import brentq

FIXTURE = Path(__file__).parent / "fixtures" / "derived.json"


def tabulated_trapezoid_A(t_eval=3.0, n=10_000, t_max=10.0):
    """Cumulative trapezoid of a(t) = 2t on an n-point grid, evaluated by linear interpolation."""
    t = np.linspace(0.0, t_max, n)
    a = 2 * t
    A = np.concatenate([[0.0], np.cumsum(0.5 * (a[1:] + a[:-1]) * np.diff(t))])
    return float(np.interp(t_eval, t, A))


def grid_sup_conjugate(p, s, n=1_000_000):
    """sup_t (s t - t^p / p) over a 10^6-point log grid around the maximiser."""
    t = np.geomspace(1e-6, 1e6, n)
    return float(np.max(s * t - t**p / p))


def dense_index_extrema(n=10_000_000):
    """min/max of t a(t)/A(t) for t^2 log(1+t) on [1, 1e6], 10^7 log samples."""
    t = np.geomspace(1.0, 1e6, n)
    L = np.log1p(t)
    r = 2.0 + t / ((1 + t) * L)
    return float(r.min()), float(r.max())


def delta2_grid_max(delta=1.0, n=1_000_000):
    """max over [1, 1e6] of A((1+delta)t)/A(t) for t^2 log(1+t)."""
    t = np.geomspace(1.0, 1e6, n)
    return float(np.max((1 + delta) ** 2 * np.log1p((1 + delta) * t) / np.log1p(t)))


def sum_inequality_C(eta=0.1, n=801):
    """Minimal C with (s+t)^2 <= C s^2 + (1+eta)^2 t^2 over a grid on [0.1, 10]^2."""
    g = np.geomspace(0.1, 10.0, n)
    s, t = np.meshgrid(g, g, indexing="ij")
    return float(np.max(((s + t) ** 2 - (1 + eta) ** 2 * t**2) / s**2))


def closed_form_sobolev():
    """A = t^2, n = 4: H(t) = (3/2)^{3/4} t^{1/2}, H^{-1}(s) = (2/3)^{3/2} s^2, A_n = (8/27) t^4."""
    return {"H1": 1.5**0.75, "Hinv1": (2 / 3) ** 1.5, "An_coef": 8 / 27, "delta0_p2_n4": 2**0.5 - 1}


def mp_H(t, n=4, p=2.0, log_factor=True):
    """H(t) = (int_0^t (tau / A(tau))^{1/(n-1)} dtau)^{(n-1)/n} via mpmath quadrature."""
    mp.mp.dps = 30

    def A(x):
        return x**p * (mp.log1p(x) if log_factor else 1)

    f = lambda x: (x / A(x)) ** (mp.mpf(1) / (n - 1))
    pts = [mp.mpf(0)] + [mp.mpf(10) ** k for k in range(-12, int(math.log10(t)) + 1) if 10.0**k < t] + [mp.mpf(t)]
    val = mp.fsum(mp.quad(f, [a, b]) for a, b in zip(pts[:-1], pts[1:]))
    return float(val ** (mp.mpf(n - 1) / n))


def sine_sobolev_ratio_1d():
    """A = t^2, target t^6 on (0,1), u = sin(pi x): |u'|_{A} / |u|_{t^6}.

    Luxemburg norms of homogeneous functions are L^p norms: |u'|_2 = pi/sqrt(2)
    and |sin|_6 = (int sin^6)^{1/6} = (5/16)^{1/6}.
    """
    return float(mp.pi / mp.sqrt(2) / mp.mpf(5 / 16) ** (mp.mpf(1) / 6))


def proxy_1d_mountain_pass():
    """Positive solution of -u'' = u^3 on (0,1), u(0)=u(1)=0, by shooting.

    Energy c = int u'^2/2 - u^4/4 and max u.
    """
    def shoot(v0):
        sol = solve_ivp(lambda x, y: [y[1], -y[0] ** 3], (0, 1), [0.0, v0], rtol=1e-12, atol=1e-12)
        return sol.y[0, -1]

    # first positive zero at x=1 (no interior zero)
    v0 = brentq(shoot, 1.0, 20.0, xtol=1e-14)
    xs = np.linspace(0, 1, 200001)
    sol = solve_ivp(lambda x, y: [y[1], -y[0] ** 3], (0, 1), [0.0, v0], rtol=1e-12, atol=1e-12,
                    t_eval=xs, dense_output=True)
    u, du = sol.y
    c = float(trapezoid(0.5 * du**2 - 0.25 * u**4, xs))
    return {"slope0": float(v0), "c": c, "max_u": float(u.max())}


def M_power_log_limit(t=2.0):
    """Limit of A(st)/A(s) for t^2 log(1+t) as s -> inf: t^2."""
    return t**2


def all_values():
    tmin, tmax = dense_index_extrema()
    return {
        "tabulated_A_at_3": tabulated_trapezoid_A(),
        "conj_half_square": {str(s): grid_sup_conjugate(2.0, s) for s in (0.5, 1.0, 2.0)},
        "conj_quartic_at_1": grid_sup_conjugate(4.0, 1.0),
        "tlog_index_min": tmin,
        "tlog_index_max": tmax,
        "tlog_delta2_C1": delta2_grid_max(),
        "t2_C_eta_0.1": sum_inequality_C(),
        "sobolev_closed_form": closed_form_sobolev(),
        "tlog_H_n4": {str(t): mp_H(t) for t in (0.01, 1.0, 100.0)},
        "sine_ratio_1d": sine_sobolev_ratio_1d(),
        "proxy_1d": proxy_1d_mountain_pass(),
        "M_tlog_at_2": M_power_log_limit(),
    }


if __name__ == "__main__":
    FIXTURE.parent.mkdir(exist_ok=True)
    FIXTURE.write_text(json.dumps(all_values(), indent=2, sort_keys=True) + "\n")
    print(FIXTURE.read_text())
