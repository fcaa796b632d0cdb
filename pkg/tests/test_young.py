import math

import numpy as np
import pytest

from orliczlab.errors import DegenerateInputError, DomainError, NotDelta2Error, RangeError
from orliczlab.young import (
    ConjugateYoung,
    PiecewisePowerYoung,
    PowerLogYoung,
    PowerYoung,
    Relation,
    TabulatedYoung,
    a_infinity,
    check_delta2_refined,
    compare,
    estimate_indices,
    eval_A,
    eval_A_inverse,
    indices_of,
    verify_scaling_inequality,
    verify_sum_inequality,
    young_from_config,
)


def t2_table(n=10_000, t_max=10.0):
    t = np.linspace(0, t_max, n)
    return TabulatedYoung(t, 2 * t)


class TestEvalA:
    def test_zero(self):
        assert eval_A(PowerYoung(2), 0.0) == 0.0

    def test_square(self):
        assert eval_A(PowerYoung(2), 3.0) == 9.0

    def test_tabulated_trapezoid(self, derived):
        v = float(eval_A(t2_table(), 3.0))
        assert abs(v - 9.0) / 9.0 < 1e-6
        # the independent cumulative-trapezoid oracle lands in the same band
        assert abs(derived["tabulated_A_at_3"] - 9.0) / 9.0 < 1e-6

    def test_tabulated_error_bound_covers_truth(self):
        Y = TabulatedYoung(np.linspace(0, 10, 101), 3 * np.linspace(0, 10, 101) ** 2)
        exact = Y.t_nodes**3
        assert np.all(np.abs(Y.A_nodes - exact) <= Y.error_bound + 1e-9)

    def test_negative_rejected(self):
        with pytest.raises(DomainError):
            eval_A(PowerYoung(2), -1.0)

    def test_nan_rejected(self):
        with pytest.raises(DomainError):
            eval_A(PowerYoung(2), math.nan)

    def test_beyond_table(self):
        with pytest.raises(RangeError):
            eval_A(t2_table(), 11.0)

    def test_power_log_values(self):
        Y = PowerLogYoung(2.0)
        t = np.array([0.5, 1.0, 7.0])
        assert np.allclose(Y.A(t), t**2 * np.log1p(t), rtol=1e-14)


class TestInverse:
    def test_sqrt(self):
        assert eval_A_inverse(PowerYoung(2), 9.0) == pytest.approx(3.0, rel=1e-15)

    def test_zero(self):
        assert eval_A_inverse(PowerYoung(2), 0.0) == 0.0

    def test_tabulated_cubic(self):
        t = np.linspace(0, 10, 100_001)
        Y = TabulatedYoung(t, t**2)
        assert abs(float(eval_A_inverse(Y, 9.0)) - 3.0) < 1e-8

    def test_generic_inverse(self):
        Y = PowerLogYoung(2.5)
        for y in (1e-6, 0.3, 42.0, 1e8):
            assert float(Y.A(eval_A_inverse(Y, y))) == pytest.approx(y, rel=1e-12)

    def test_piecewise_inverse(self):
        Y = PiecewisePowerYoung((2.0, 4.0), (1.0,))
        for y in (0.25, 1.0, 16.0):
            assert float(Y.A(Y.A_inv(y))) == pytest.approx(y, rel=1e-13)

    def test_negative(self):
        with pytest.raises(RangeError):
            eval_A_inverse(PowerYoung(2), -1.0)


class TestConjugate:
    @pytest.mark.parametrize("s", [0.5, 1.0, 2.0])
    def test_half_square(self, s, derived):
        C = ConjugateYoung(PowerYoung(2.0, 0.5))
        oracle = derived["conj_half_square"][str(s)]
        assert float(C.A(s)) == pytest.approx(oracle, rel=1e-8)
        assert float(C.A(s)) == pytest.approx(s * s / 2, rel=1e-12)

    def test_quartic(self, derived):
        C = ConjugateYoung(PowerYoung(4.0, 0.25))
        assert float(C.A(1.0)) == pytest.approx(derived["conj_quartic_at_1"], rel=1e-6)

    def test_young_equality_case(self):
        Y = PowerYoung(2.0, 0.5)
        C = Y.conjugate()
        assert 1.0 <= float(Y.A(1.0) + C.A(1.0)) + 1e-15

    def test_closed_form_matches_generic(self):
        Y = PowerYoung(3.0)
        s = np.geomspace(1e-2, 1e2, 50)
        assert np.allclose(Y.conjugate().A(s), ConjugateYoung(Y).A(s), rtol=1e-10)

    def test_biconjugate(self):
        for Y in (PowerYoung(1.5), PowerYoung(2.0, 0.5), PowerYoung(4.0, 0.25)):
            t = np.geomspace(1e-2, 1e2, 40)
            CC = ConjugateYoung(ConjugateYoung(Y))
            assert np.allclose(CC.A(t), Y.A(t), rtol=1e-6)

    def test_constant_table_degenerate(self):
        with pytest.raises(DegenerateInputError):
            ConjugateYoung(TabulatedYoung([0.0, 1.0, 2.0], [0.0, 1.0, 1.0]))

    def test_tabulated_conjugate_density_right_continuous(self):
        # flat segment a = 1 on [1, 2]: inverse density jumps to the right end
        Y = TabulatedYoung([0.0, 1.0, 2.0, 3.0], [0.0, 1.0, 1.0, 2.0])
        C = ConjugateYoung(Y)
        assert float(C.a(1.0)) == pytest.approx(2.0)
        assert float(C.a(0.5)) == pytest.approx(0.5)


class TestIndices:
    @pytest.mark.parametrize("p", [1.5, 2.0, 3.7])
    def test_power_exact(self, p):
        idx = estimate_indices(PowerYoung(p))
        assert idx.p_minus == pytest.approx(p, abs=1e-12)
        assert idx.p_plus == pytest.approx(p, abs=1e-12)

    def test_delta2_constant(self):
        assert estimate_indices(PowerYoung(2)).delta2_constant == pytest.approx(4.0, rel=1e-12)

    def test_power_log_range(self, derived):
        idx = estimate_indices(PowerLogYoung(2.0), t_range=(1.0, 1e6))
        assert 2 < idx.p_minus <= idx.p_plus < 3
        # 4096 samples sit inside the 10^7-sample dense oracle's extremes
        assert idx.p_minus >= derived["tlog_index_min"] - 1e-9
        assert idx.p_plus <= derived["tlog_index_max"] + 1e-9
        assert idx.p_minus == pytest.approx(derived["tlog_index_min"], abs=1e-4)
        assert idx.p_plus == pytest.approx(derived["tlog_index_max"], abs=1e-4)

    def test_exp_density_not_delta2(self):
        t = np.linspace(0, 40, 4001)
        Y = TabulatedYoung(t, np.expm1(t))
        with pytest.raises(NotDelta2Error):
            estimate_indices(Y, t_range=(1.0, 39.0))

    def test_beyond_table_range(self):
        with pytest.raises(RangeError):
            estimate_indices(t2_table(), t_range=(1.0, 20.0))

    def test_indices_of_prefers_exact(self):
        idx = indices_of(PowerLogYoung(2.0))
        assert (idx.p_minus, idx.p_plus, idx.exact) == (2.0, 3.0, True)


class TestDelta2Refined:
    def test_square(self):
        assert check_delta2_refined(PowerYoung(2), 1.0) == (True, pytest.approx(4.0, rel=1e-12))

    def test_cube(self):
        ok, c = check_delta2_refined(PowerYoung(3), 0.5)
        assert ok and c == pytest.approx(3.375, rel=1e-12)

    def test_power_log(self, derived):
        ok, c = check_delta2_refined(PowerLogYoung(2.0), 1.0, t_range=(1.0, 1e6))
        assert ok and c <= 8.0
        assert c == pytest.approx(derived["tlog_delta2_C1"], rel=1e-4)

    def test_bad_delta(self):
        with pytest.raises(DomainError):
            check_delta2_refined(PowerYoung(2), 0.0)


class TestSumInequality:
    def test_unit_pair(self):
        ok, c = verify_sum_inequality(PowerYoung(2), 1.0, [(1.0, 1.0)])
        assert ok and c <= 1.0

    def test_grid(self, derived):
        g = np.geomspace(0.1, 10, 201)
        s, t = np.meshgrid(g, g)
        ok, c = verify_sum_inequality(PowerYoung(2), 0.1, np.column_stack([s.ravel(), t.ravel()]))
        assert ok and math.isfinite(c)
        assert c <= derived["t2_C_eta_0.1"] + 1e-9
        assert c == pytest.approx(derived["t2_C_eta_0.1"], rel=1e-3)

    def test_zero_s(self):
        ok, c = verify_sum_inequality(PowerYoung(2), 0.5, [(0.0, 3.0)])
        assert ok and c == 0.0


class TestScaling:
    def test_power_equality(self):
        rng = np.random.default_rng(1)
        st = rng.uniform(0.01, 100, (200, 2))
        assert verify_scaling_inequality(PowerYoung(2.5), st)

    def test_identity_scaling(self):
        assert verify_scaling_inequality(PowerLogYoung(2), [(1.0, 3.0), (1.0, 0.1)])

    def test_power_log_random(self):
        rng = np.random.default_rng(2)
        st = np.exp(rng.uniform(math.log(0.01), math.log(100), (1000, 2)))
        assert verify_scaling_inequality(PowerLogYoung(2), st)


class TestCompare:
    def test_power_gap(self):
        assert compare(PowerYoung(2), PowerYoung(4)).relation is Relation.ESSENTIALLY_SMALLER

    def test_identity(self):
        v = compare(PowerYoung(2), PowerYoung(2))
        assert v.relation is Relation.EQUIV
        assert v.witness_constant == 1.0 and v.witness_threshold == 0.0

    def test_log_gap(self):
        assert compare(PowerYoung(2), PowerLogYoung(2)).relation is Relation.ESSENTIALLY_SMALLER

    def test_reverse_not_smaller(self):
        assert compare(PowerYoung(4), PowerYoung(2)).relation is not Relation.ESSENTIALLY_SMALLER


class TestAInfinity:
    def test_branches(self):
        from orliczlab.young import GrowthIndices

        A = a_infinity(GrowthIndices(2.0, 4.0, 16.0, (0, math.inf), True))
        assert float(A.A(0.5)) == pytest.approx(0.25)
        assert float(A.A(2.0)) == pytest.approx(16.0)
        assert float(A.A(1.0)) == pytest.approx(1.0)
        ok, c = check_delta2_refined(A, 1.0, t_range=(1e-3, 1e3))
        assert ok and c <= 2.0**4 * (1 + 1e-12)


class TestConfigBlock:
    def test_families(self, tmp_path):
        assert isinstance(young_from_config({"family": "power", "p": 2}), PowerYoung)
        assert isinstance(young_from_config({"family": "power_log", "p": 2, "q": 1}), PowerLogYoung)
        p = tmp_path / "a.csv"
        p.write_text("t,a_of_t\n0,0\n1,2\n2,4\n")
        Y = young_from_config({"family": "table", "path": "a.csv"}, tmp_path)
        assert float(Y.A(2.0)) == pytest.approx(4.0)

    def test_bad_header(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text("x,y\n0,0\n1,1\n")
        with pytest.raises(DomainError):
            TabulatedYoung.from_csv(p)

    def test_nonmonotone_table(self):
        with pytest.raises(DomainError):
            TabulatedYoung([0, 1, 2], [0, 2, 1])

    def test_unknown_family(self):
        with pytest.raises(DomainError):
            young_from_config({"family": "exp"})
