import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import special
from scipy.integrate import quad
from scipy.stats import qmc

import specfun
from errors import DomainError


class TestHyp2f1One:
    def test_zero_argument(self):
        assert specfun.hyp2f1_one(2.0, 3.0, 0.0).value == 1.0

    @pytest.mark.parametrize("z", [-5.0, -1.0, -0.7, -0.3, 0.3, 0.5, 0.7, 0.95])
    def test_logarithm_identity(self, z):
        expected = -math.log(1.0 - z) / z
        assert_allclose(specfun.hyp2f1_one(1.0, 2.0, z).value, expected, rtol=1e-10)

    def test_known_points(self):
        assert_allclose(specfun.hyp2f1_one(1.0, 2.0, 0.5).value, 1.3862944, rtol=1e-7)
        assert_allclose(specfun.hyp2f1_one(1.0, 2.0, -1.0).value, 0.6931472, rtol=1e-7)

    @pytest.mark.parametrize("z", [-3.0, -0.6, 0.2, 0.8, 0.99])
    def test_matches_scipy(self, z):
        assert_allclose(specfun.hyp2f1_one(1.5, 2.7, z).value,
                        special.hyp2f1(1.0, 1.5, 2.7, z), rtol=1e-10)

    def test_degenerate_parameters_use_integral(self):
        # c - 1 - b integer: 2F1(1, b; b; z) = 1 / (1 - z)
        assert_allclose(specfun.hyp2f1_one(2.5, 2.5, 0.8).value, 5.0, rtol=1e-9)

    def test_error_bound_reported(self):
        res = specfun.hyp2f1_one(1.5, 2.7, 0.9)
        assert 0.0 <= res.abs_error_bound <= 1e-10 * max(1.0, abs(res.value))

    def test_domain(self):
        with pytest.raises(DomainError):
            specfun.hyp2f1_one(1.0, 2.0, 1.0)
        with pytest.raises(DomainError):
            specfun.hyp2f1_one(1.0, -2.0, 0.1)


class TestUpperIncGamma:
    def test_positive_s(self):
        assert_allclose(specfun.upper_inc_gamma(1.0, 1.0).value, math.exp(-1.0), rtol=1e-12)
        assert_allclose(specfun.upper_inc_gamma(0.5, 0.0).value, math.sqrt(math.pi), rtol=1e-12)

    def test_negative_half(self):
        expected = 2.0 * (math.exp(-1.0) - math.sqrt(math.pi) * special.erfc(1.0))
        assert_allclose(specfun.upper_inc_gamma(-0.5, 1.0).value, expected, rtol=1e-10)

    def test_zero_s_is_exp1(self):
        assert_allclose(specfun.upper_inc_gamma(0.0, 0.3).value, special.exp1(0.3), rtol=1e-12)

    @pytest.mark.parametrize("s,x", [(-0.5, 0.2), (-0.75, 2.0), (-1.5, 0.5), (-0.25, 10.0)])
    def test_negative_s_quadrature(self, s, x):
        expected, _ = quad(lambda t: t ** (s - 1.0) * math.exp(-t), x, math.inf, epsrel=1e-12)
        assert_allclose(specfun.upper_inc_gamma(s, x).value, expected, rtol=1e-9)

    def test_recurrence_grid(self):
        # Gamma(s+1, x) = s Gamma(s, x) + x^s e^-x
        for s in np.linspace(-0.85, 2.95, 20):
            for x in np.geomspace(1e-3, 20.0, 25):
                lhs = specfun.upper_inc_gamma(s + 1.0, x).value
                rhs = s * specfun.upper_inc_gamma(s, x).value + x ** s * math.exp(-x)
                assert_allclose(rhs, lhs, rtol=1e-10, err_msg=f"s={s}, x={x}")

    def test_domain(self):
        with pytest.raises(DomainError):
            specfun.upper_inc_gamma(-0.5, 0.0)
        with pytest.raises(DomainError):
            specfun.upper_inc_gamma(1.0, -1.0)


class TestErfcx:
    def test_values(self):
        assert specfun.erfcx(0.0).value == 1.0
        assert_allclose(specfun.erfcx(1.0).value, 0.4275836, rtol=1e-7)

    def test_asymptote(self):
        assert_allclose(specfun.erfcx(50.0).value, 1.0 / (50.0 * math.sqrt(math.pi)), rtol=1e-4)

    def test_no_overflow(self):
        value = specfun.erfcx(1e6).value
        assert math.isfinite(value) and value > 0

    def test_strictly_decreasing(self):
        xs = np.concatenate(([0.0], np.geomspace(1e-3, 1e6, 2000)))
        values = np.array([specfun.erfcx(x).value for x in xs])
        assert np.all(values > 0)
        assert np.all(np.diff(values) < 0)

    def test_reproduces_erfc(self):
        xs = np.linspace(0.0, 5.0, 101)
        rebuilt = [specfun.erfcx(x).value * math.exp(-x * x) for x in xs]
        assert_allclose(rebuilt, special.erfc(xs), rtol=1e-12)

    def test_domain(self):
        with pytest.raises(DomainError):
            specfun.erfcx(-1.0)


class TestIntegralI1:
    @pytest.mark.parametrize("x,y,z,nu", [
        (1.5, 1.0, -0.5, 0.2),
        (2.0, 1.0, -0.5, 1.0),
        (2.5, 1.0 / 30.0, -0.5, 1e-3),
        (1.5, 1.0 / 3.0, -0.5, 50.0),
        (1.7, 0.3, -0.3, 5.0),
    ])
    def test_matches_quadrature(self, x, y, z, nu):
        closed = specfun.integral_i1(x, y, z, nu).value
        oracle = specfun.integral_i1_quadrature(x, y, z, nu).value
        assert_allclose(closed, oracle, rtol=1e-7)

    def test_tiny_value_far_from_origin(self):
        # 값이 1e-12 근처라 절대 허용오차로는 적분 기준값이 틀어짐
        args = (2.8998, 3.3988, -0.8820, 9125.8)
        assert_allclose(specfun.integral_i1(*args).value,
                        specfun.integral_i1_quadrature(*args).value, rtol=1e-8)

    def test_large_nu_vanishes(self):
        assert specfun.integral_i1(1.5, 2.0, -0.5, 1e8).value < 1e-6

    def test_domain(self):
        with pytest.raises(DomainError):
            specfun.integral_i1(0.5, 1.0, -0.6, 1.0)
        with pytest.raises(DomainError):
            specfun.integral_i1(1.5, 0.0, -0.5, 1.0)


class TestIntegralI0:
    def test_arctan_reduction(self):
        assert_allclose(specfun.integral_i0(1.0, 1.0, 4.0).value, math.pi / 8.0, rtol=1e-10)
        expected = (math.pi / 2.0 - math.atan(2.0)) / 4.0
        assert_allclose(specfun.integral_i0(4.0, 1.0, 4.0).value, expected, rtol=1e-10)

    @pytest.mark.parametrize("y,z,nu", [(0.7, 1.3, 3.5), (1e-2, 1e4, 4.0), (30.0, 0.5, 3.0), (1.0 / 90.0, 810000.0, 4.0)])
    def test_matches_quadrature(self, y, z, nu):
        assert_allclose(specfun.integral_i0(y, z, nu).value,
                        specfun.integral_i0_quadrature(y, z, nu).value, rtol=1e-8)

    def test_domain(self):
        with pytest.raises(DomainError):
            specfun.integral_i0(1.0, 1.0, 2.0)
        with pytest.raises(DomainError):
            specfun.integral_i0(0.0, 1.0, 4.0)


@pytest.mark.slow
class TestClosedFormsOnQuasiRandomGrid:
    """Closed forms vs quadrature on 1000 scrambled Halton points each."""

    def test_i1(self, seed):
        pts = qmc.Halton(d=4, scramble=True, seed=seed).random(1000)
        worst = 0.0
        for u in pts:
            x = 1.0 + 2.0 * u[0]
            y = 10.0 ** (-2.0 + 3.0 * u[1])
            z = -0.9 + 0.8 * u[2]
            nu = 10.0 ** (-3.0 + 7.0 * u[3])
            closed = specfun.integral_i1(x, y, z, nu).value
            oracle = specfun.integral_i1_quadrature(x, y, z, nu).value
            worst = max(worst, abs(closed - oracle) / abs(oracle))
        assert worst < 1e-6

    def test_i0(self, seed):
        pts = qmc.Halton(d=3, scramble=True, seed=seed).random(1000)
        worst = 0.0
        for u in pts:
            y = 10.0 ** (-3.0 + 6.0 * u[0])
            z = 10.0 ** (-1.0 + 5.0 * u[1])
            nu = 2.5 + 3.5 * u[2]
            closed = specfun.integral_i0(y, z, nu).value
            oracle = specfun.integral_i0_quadrature(y, z, nu).value
            worst = max(worst, abs(closed - oracle) / abs(oracle))
        assert worst < 1e-6


class TestEvalResult:
    def test_float_conversion(self):
        res = specfun.erfcx(0.0)
        assert float(res) == 1.0
        assert np.isfinite(res.abs_error_bound)
