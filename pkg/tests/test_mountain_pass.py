import math

import numpy as np
import pytest

from orliczlab.errors import DomainError
from orliczlab.grid import Domain, GridFunction
from orliczlab.mountain_pass import (
    DiscreteFunctional,
    ProblemSpec,
    check_AR,
    desk_spec,
    functional_eval,
    functional_gradient,
    lambda_sweep,
    proxy_1d_spec,
    run_mountain_pass,
    verify_geometry,
)
from orliczlab.young import PowerYoung


@pytest.fixture(scope="module")
def desk32(S_t15_n2):
    return desk_spec(lam=10.0, cells=32, S=S_t15_n2)


@pytest.fixture(scope="module")
def proxy_result():
    return run_mountain_pass(proxy_1d_spec(256))


def test_zero_function(desk32):
    u = GridFunction(desk32.dom, np.zeros(desk32.dom.node_shape))
    assert functional_eval(desk32, u) == 0.0
    assert np.all(functional_gradient(desk32, u).values == 0.0)


def test_sine_gradient_energy_1d():
    P = ProblemSpec(A=PowerYoung(2.0, 0.5), dom=Domain.unit(1, 512), lam=0.0, r=4.0, gamma=4.0,
                    include_critical=False)
    x = P.dom.mesh()[0]
    val = functional_eval(P, GridFunction(P.dom, np.sin(math.pi * x)))
    assert val == pytest.approx(math.pi**2 / 4, rel=1e-5)


def test_directional_derivative(desk32):
    J = DiscreteFunctional(desk32)
    rng = np.random.default_rng(3)
    X, Y = desk32.dom.mesh()
    u = (3 * np.sin(math.pi * X) * np.sin(math.pi * Y))[J.interior]
    g = J.gradient(u)
    tau = 1e-5
    for _ in range(20):
        v = rng.standard_normal(J.n_free)
        fd = (J.energy(u + tau * v) - J.energy(u - tau * v)) / (2 * tau)
        assert fd == pytest.approx(float(g @ v), rel=1e-4, abs=1e-9)


def test_quadratic_gradient_is_five_point_laplacian():
    dom = Domain.unit(2, 16)
    P = ProblemSpec(A=PowerYoung(2.0, 1.0), dom=dom, lam=0.0, r=3.0, gamma=3.0,
                    include_critical=False, eps_reg=1e-150)
    J = DiscreteFunctional(P)
    rng = np.random.default_rng(0)
    u = np.where(dom.boundary_mask(), 0.0, rng.standard_normal(dom.node_shape))
    lap = np.zeros_like(u)
    lap[1:-1, 1:-1] = (u[2:, 1:-1] + u[:-2, 1:-1] + u[1:-1, 2:] + u[1:-1, :-2] - 4 * u[1:-1, 1:-1])
    np.testing.assert_allclose(J.grad_A_part(u)[1:-1, 1:-1], -2 * lap[1:-1, 1:-1], atol=1e-10)
    assert J.gradient_energy(u) == pytest.approx(-float((u * lap).sum()), rel=1e-12)


def test_ambrosetti_rabinowitz():
    t = np.geomspace(1e-6, 1e6, 200)
    base = dict(A=PowerYoung(1.5), dom=Domain.unit(1, 8), lam=1.0, r=3.0, include_critical=False)
    assert check_AR(ProblemSpec(gamma=3.0, **base), t)
    assert check_AR(ProblemSpec(gamma=3.5, **base), t)
    assert not check_AR(ProblemSpec(gamma=2.5, **base), t)
    assert check_AR(ProblemSpec(gamma=3.0, **base), [0.0])


def test_spec_validation(S_t15_n2):
    dom = Domain.unit(1, 8)
    with pytest.raises(DomainError):
        ProblemSpec(A=PowerYoung(1.5), dom=dom, lam=1.0, r=3.0, gamma=3.0)
    with pytest.raises(DomainError):
        ProblemSpec(A=PowerYoung(1.5), dom=dom, lam=-1.0, r=3.0, gamma=3.0, include_critical=False)
    with pytest.raises(DomainError):
        ProblemSpec(A=PowerYoung(1.5), dom=dom, lam=1.0, r=1.0, gamma=3.0, include_critical=False)


def test_hypotheses(desk32):
    assert all(desk32.hypotheses().values())


def test_scaling_upper_bound(desk32):
    J = DiscreteFunctional(desk32)
    X, Y = desk32.dom.mesh()
    u = (np.sin(math.pi * X) * np.sin(math.pi * Y))[J.interior]
    GA = J.gradient_energy(u)
    c = J._cell(J.full(u))
    An = float(desk32.S.An.A(np.abs(c)).sum() * J.vol)
    B = float((np.abs(c) ** 3 / 3).sum() * J.vol)
    pn_minus = desk32.S.pn_indices.p_minus
    for t in (1.0, 1.5, 2.0, 4.0):
        bound = t**1.5 * GA - t**pn_minus * An - desk32.lam * t**3 * B
        assert J.energy(t * u) <= bound + 1e-9 * abs(bound) + 1e-12


def test_geometry_2d(S_t15_n2):
    P = desk_spec(lam=1.0, cells=32, S=S_t15_n2)
    g = verify_geometry(P)
    assert any(a > 0 for rho, a in g.alphas if 0 < rho < 1)
    assert g.alpha > 0
    assert all(g.certified.values())
    assert g.u0_energy < 0 and g.u0_gradient_norm > g.rho


def test_ray_energy_diverges(desk32):
    J = DiscreteFunctional(desk32)
    X, Y = desk32.dom.mesh()
    v = (np.sin(math.pi * X) * np.sin(math.pi * Y))[J.interior]
    E = [J.energy(t * v) for t in (1.0, 4.0, 16.0, 64.0)]
    assert all(b < a for a, b in zip(E[1:], E[2:]))
    assert E[-1] < -1e6


def test_proxy_level_matches_oracle(proxy_result, derived):
    ref = derived["proxy_1d"]
    assert proxy_result.converged and proxy_result.nontrivial
    assert proxy_result.c_level == pytest.approx(ref["c"], rel=1e-3)
    assert proxy_result.u_star.values.max() == pytest.approx(ref["max_u"], rel=1e-3)


def test_proxy_second_order(derived, proxy_result):
    ref = derived["proxy_1d"]["c"]
    coarse = run_mountain_pass(proxy_1d_spec(64))
    e_fine = abs(proxy_result.c_level - ref)
    e_coarse = abs(coarse.c_level - ref)
    assert e_coarse / e_fine > 8


def test_proxy_solution_symmetric_positive(proxy_result):
    u = proxy_result.u_star.values
    assert np.all(u[1:-1] > 0)
    np.testing.assert_allclose(u, u[::-1], atol=1e-6)


def test_ps_trace(proxy_result):
    path_E = [e for (e, _), ph in zip(proxy_result.ps_trace, proxy_result.phases) if ph == "path"]
    res = [r for (_, r), ph in zip(proxy_result.ps_trace, proxy_result.phases) if ph == "newton"]
    assert all(b <= a + 1e-12 for a, b in zip(path_E, path_E[1:]))
    assert all(b < a for a, b in zip(res, res[1:]))
    assert proxy_result.residual < 1e-6
    assert math.isfinite(proxy_result.max_gradient_norm)
    assert proxy_result.max_gradient_norm < 10 * proxy_result.geometry.u0_gradient_norm


def test_level_at_least_alpha(proxy_result):
    assert proxy_result.c_level >= proxy_result.geometry.alpha


def test_sweep_decreasing(S_t15_n2):
    P = desk_spec(lam=1.0, cells=16, S=S_t15_n2)
    rows = lambda_sweep(P, [1.0, 10.0, 100.0])
    c = [r.c_lambda for r in rows]
    assert all(r.converged and r.nontrivial for r in rows)
    assert all(x >= 0 for x in c)
    assert c[0] > c[1] > c[2]


def test_sweep_rejects_unsorted(desk32):
    with pytest.raises(DomainError):
        lambda_sweep(desk32, [10.0, 1.0])
