import math
from fractions import Fraction

import numpy as np
import pytest

from orliczlab.ccp import (
    MASS_ONE,
    AtomReport,
    Atom,
    BubbleSpec,
    brezis_lieb_residual,
    brezis_lieb_scale,
    detect_atoms,
    flat_top_cutoff,
    make_bubbles,
    measure_pair,
    verify_atom_relation,
    verify_reverse_holder,
)
from orliczlab.errors import DegenerateInputError, DomainError, UnderResolvedError
from orliczlab.grid import Domain, GridFunction, GridMeasure, gradient_norm, modular
from orliczlab.matuszewska import build_profile
from orliczlab.young import PowerYoung

Y = PowerYoung(1.5)
DOM = Domain.unit(2, 128)
SCALES = tuple(2.0**-k for k in range(1, 6))


@pytest.fixture(scope="module")
def Mn(S_t15_n2):
    return build_profile(S_t15_n2.An)


def single(scales=SCALES, **kw):
    return BubbleSpec(centers=((0.5, 0.5),), scales=scales, **kw)


class TestBubbles:
    def test_gradient_normalization(self):
        for u in make_bubbles(DOM, single(), Y):
            assert gradient_norm(Y, u) == pytest.approx(1.0, abs=1e-6)

    def test_constant_scale_identical(self):
        us = make_bubbles(DOM, single((0.25, 0.25, 0.25)), Y)
        assert all(np.array_equal(us[0].values, u.values) for u in us)

    def test_two_centers_disjoint(self):
        spec = BubbleSpec(centers=((0.25, 0.5), (0.75, 0.5)), scales=(0.1,))
        u = make_bubbles(DOM, spec, Y)[0]
        X, _ = DOM.mesh()
        mid = np.abs(X - 0.5) < 1e-12
        assert np.all(u.values[mid] == 0)
        assert np.any(u.values[X < 0.5]) and np.any(u.values[X > 0.5])

    def test_under_resolved(self):
        with pytest.raises(UnderResolvedError):
            make_bubbles(DOM, single((4 * DOM.h[0] * 0.9,)), Y)

    def test_bad_spec(self):
        with pytest.raises(DomainError):
            BubbleSpec(centers=((0.5, 0.5),), scales=(0.1, 0.2))
        with pytest.raises(DomainError):
            BubbleSpec(centers=((0.5, 0.5),), scales=(0.1,), normalization="other")

    def test_mass_one(self, S_t15_n2):
        for u in make_bubbles(DOM, single(normalization=MASS_ONE), Y, S_t15_n2):
            nu, _ = measure_pair(Y, S_t15_n2, u)
            assert nu.total() == pytest.approx(1.0, abs=1e-6)


class TestMeasures:
    def test_zero(self, S_t15_n2):
        nu, mu = measure_pair(Y, S_t15_n2, GridFunction.zeros(DOM))
        assert nu.total() == 0 and mu.total() == 0

    def test_total_matches_modular(self, S_t15_n2):
        u = make_bubbles(DOM, single((0.25,)), Y)[0]
        nu, mu = measure_pair(Y, S_t15_n2, u)
        assert nu.total() == pytest.approx(modular(S_t15_n2.An, u), rel=1e-12)
        assert mu.total() == pytest.approx(1.0, rel=1e-6)


class TestAtoms:
    def test_diffuse_no_atoms(self, S_t15_n2):
        u = GridFunction.from_callable(DOM, lambda x, y: np.sin(np.pi * x) * np.sin(np.pi * y), zero_boundary=True)
        nu, mu = measure_pair(Y, S_t15_n2, u)
        rep = detect_atoms(nu, mu, 0.5 * nu.total())
        assert rep.atoms == ()
        assert rep.residual_exact == rep.total_exact
        assert rep.mass_balance_exact()

    def test_single_atom_located(self, S_t15_n2):
        u = make_bubbles(DOM, single((2.0**-5,)), Y)[0]
        nu, mu = measure_pair(Y, S_t15_n2, u)
        rep = detect_atoms(nu, mu, 0.1 * nu.total())
        assert len(rep.atoms) == 1
        x = np.array(rep.atoms[0].x)
        assert np.all(np.abs(x - 0.5) <= DOM.h[0])
        assert rep.mass_balance_exact()

    def test_two_equal_atoms(self, S_t15_n2):
        spec = BubbleSpec(centers=((0.25, 0.5), (0.75, 0.5)), scales=(2.0**-5,))
        u = make_bubbles(DOM, spec, Y)[0]
        nu, mu = measure_pair(Y, S_t15_n2, u)
        rep = detect_atoms(nu, mu, 0.1 * nu.total())
        assert len(rep.atoms) == 2
        a, b = rep.atoms
        assert abs(a.nu - b.nu) / max(a.nu, b.nu) < 0.05
        assert a.x[0] < 0.5 < b.x[0]

    def test_bad_delta(self, S_t15_n2):
        nu = GridMeasure.lebesgue(DOM)
        with pytest.raises(DomainError):
            detect_atoms(nu, nu, 0.0)


class TestReverseHolder:
    def test_zero_phi(self, S_t15_n2, Mn):
        u = make_bubbles(DOM, single((0.125,)), Y)[0]
        nu, mu = measure_pair(Y, S_t15_n2, u)
        r = verify_reverse_holder(4.29, Mn, Y.indices(), GridFunction.zeros(DOM), nu, mu)
        assert r.ok and r.lhs == 0.0 and r.rhs == 0.0

    def test_corpus(self, S_t15_n2, Mn):
        from orliczlab.ccp import bubble_sobolev_estimate

        spec = single()
        S_est = bubble_sobolev_estimate(Y, S_t15_n2, DOM, spec)
        phi = flat_top_cutoff(DOM, (0.5, 0.5))
        for u in make_bubbles(DOM, spec, Y)[1:]:
            nu, mu = measure_pair(Y, S_t15_n2, u)
            assert verify_reverse_holder(S_est, Mn, Y.indices(), phi, nu, mu, 0.9).ok

    def test_bad_safety(self, S_t15_n2, Mn):
        nu = GridMeasure.lebesgue(DOM)
        with pytest.raises(DomainError):
            verify_reverse_holder(1.0, Mn, Y.indices(), GridFunction.zeros(DOM), nu, nu, 1.5)


class TestAtomRelation:
    def _report(self, nu, mu):
        a = Atom((0.5, 0.5), nu, mu, (0, 0), Fraction(nu))
        return AtomReport((a,), 0.1, 0.0)

    def test_power_reduction(self, Mn):
        # pure powers: M_n^{-1}(1/nu) = nu^{-1/6}, A_inf^{-1}(1/mu) = mu^{-1/1.5}
        rel = verify_atom_relation(4.0, Mn, Y.indices(), self._report(1e-4, 0.9), 0.9)[0]
        assert rel.lhs == pytest.approx(0.9 * 4.0 * 1e-4 ** (1 / 6), rel=1e-9)
        assert rel.rhs == pytest.approx(0.9 ** (1 / 1.5), rel=1e-9)

    def test_monotone_in_nu(self, Mn):
        lhs = [verify_atom_relation(4.0, Mn, Y.indices(), self._report(nu, 0.9))[0].lhs for nu in (1e-2, 1e-4, 1e-6)]
        assert lhs[0] > lhs[1] > lhs[2]

    def test_empty(self, Mn):
        with pytest.raises(DegenerateInputError):
            verify_atom_relation(4.0, Mn, Y.indices(), AtomReport((), 0.1, 0.0))


class TestBrezisLieb:
    def test_identical(self):
        f = GridFunction.from_callable(DOM, lambda x, y: x * y)
        phi = flat_top_cutoff(DOM, (0.5, 0.5))
        assert brezis_lieb_residual(Y, [f, f], f, phi) == [0.0, 0.0]

    def test_zero_f(self):
        phi = flat_top_cutoff(DOM, (0.5, 0.5))
        us = make_bubbles(DOM, single(), Y)
        assert brezis_lieb_residual(Y, us, GridFunction.zeros(DOM), phi) == [0.0] * len(us)

    def test_decreasing(self):
        f = GridFunction.from_callable(DOM, lambda x, y: np.sin(np.pi * x) * np.sin(np.pi * y), zero_boundary=True)
        phi = flat_top_cutoff(DOM, (0.5, 0.5))
        r = brezis_lieb_residual(Y, [f + u for u in make_bubbles(DOM, single(), Y)], f, phi)
        assert np.all(np.diff(r) < 0)
        assert brezis_lieb_scale(Y, f, phi) > r[-1]
