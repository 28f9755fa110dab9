import math
import warnings

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dpbayes import specfun
from dpbayes.bayesfactor import log_ratio_z
from dpbayes.specfun import (
    ConvergenceError,
    DomainError,
    SeriesControl,
    SeriesPrecisionWarning,
    hyp1f1,
    hyp2f1,
    log_gamma,
    log_hyp1f1,
    log_hyp2f1,
)

mpmath.mp.dps = 50


def rel(a, b):
    return abs(a - b) / abs(b)


class TestLogGamma:
    def test_one(self):
        assert log_gamma(1.0) == 0.0

    def test_half(self):
        assert log_gamma(0.5) == pytest.approx(0.5723649429247001, rel=1e-14)

    @pytest.mark.parametrize("x", [10.5, 0.01, 3.25, 171.5, 1e5])
    def test_against_mpmath(self, x):
        assert rel(log_gamma(x), float(mpmath.loggamma(x))) <= 1e-12

    @pytest.mark.parametrize("x", [0.0, -1.0, math.inf, math.nan])
    def test_domain(self, x):
        with pytest.raises(DomainError):
            log_gamma(x)

    def test_array(self):
        out = log_gamma(np.array([1.0, 2.0, 3.0]))
        np.testing.assert_allclose(out, [0.0, 0.0, math.log(2.0)], atol=1e-15)


class TestSeriesControl:
    def test_defaults(self):
        ctl = SeriesControl()
        assert ctl.rel_tolerance == 1e-13 and ctl.max_terms == 10_000

    @pytest.mark.parametrize("tol", [0.0, 1e-6, 0.1, -1e-10])
    def test_bad_tolerance(self, tol):
        with pytest.raises(ValueError):
            SeriesControl(rel_tolerance=tol)

    def test_bad_terms(self):
        with pytest.raises(ValueError):
            SeriesControl(max_terms=99)


class TestHyp1f1:
    def test_zero_argument(self):
        assert hyp1f1(1.5, 0.5, 0.0) == 1.0

    def test_identity_at_two(self):
        assert hyp1f1(1.0, 2.0, 2.0) == pytest.approx(3.1945280494653248, rel=1e-13)

    @pytest.mark.parametrize(
        "a,b,x",
        [(1.5, 0.5, 10.0), (1.5, 0.5, 0.3), (2.5, 1.5, 37.0), (6.0, 5.0, 120.0), (1.5, 0.5, -5.0)],
    )
    def test_against_mpmath(self, a, b, x):
        assert rel(hyp1f1(a, b, x), float(mpmath.hyp1f1(a, b, x))) <= 1e-12

    def test_large_argument_no_overflow(self):
        ref = float(mpmath.log(mpmath.hyp1f1(1.5, 0.5, 700)))
        assert rel(log_hyp1f1(1.5, 0.5, 700.0), ref) <= 1e-13
        assert math.isfinite(hyp1f1(1.5, 0.5, 700.0))

    def test_beyond_double_range_in_log(self):
        ref = float(mpmath.log(mpmath.hyp1f1(1.5, 0.5, 5000)))
        assert rel(log_hyp1f1(1.5, 0.5, 5000.0), ref) <= 1e-12

    def test_convergence_error_carries_partial_sum(self):
        with pytest.raises(ConvergenceError) as info:
            hyp1f1(1.5, 0.5, 700.0, SeriesControl(max_terms=100))
        assert info.value.n_terms == 100
        assert math.isfinite(info.value.partial_value)

    def test_nonpositive_integer_b(self):
        with pytest.raises(DomainError):
            hyp1f1(1.0, -2.0, 1.0)

    def test_log_requires_positive_value(self):
        with pytest.raises(DomainError):
            log_hyp1f1(1.5, 0.5, -5.0)

    @settings(max_examples=200, deadline=None)
    @given(st.floats(0.01, 50.0))
    def test_exp_identity(self, x):
        assert rel(hyp1f1(1.0, 2.0, x) * x, math.expm1(x)) <= 1e-10

    @settings(max_examples=100, deadline=None)
    @given(st.floats(0.1, 10.0), st.floats(0.1, 10.0), st.floats(0.0, 100.0), st.floats(0.01, 5.0))
    def test_increasing(self, a, b, x, dx):
        assert hyp1f1(a, b, x + dx) > hyp1f1(a, b, x)

    def test_vectorized_shape(self):
        x = np.linspace(0, 3, 12).reshape(3, 4)
        out = hyp1f1(1.0, 2.0, x)
        assert out.shape == (3, 4)
        assert out[0, 0] == 1.0


class TestHyp2f1:
    def test_zero_argument(self):
        assert hyp2f1(2.0, 3.0, 1.5, 0.0) == 1.0

    def test_identity_example(self):
        assert hyp2f1(2.0, 5.0, 5.0, 0.3) == pytest.approx(2.0408163265306123, rel=1e-13)

    @pytest.mark.parametrize(
        "a,b,c,x",
        [(3.0, 2.5, 0.5, 0.8), (5.5, 1.5, 0.5, 0.4), (51.0, 2.0, 1.5, 0.97), (13.0, 1.5, 0.5, 0.95), (2.0, 3.0, 1.5, -0.5)],
    )
    def test_against_mpmath(self, a, b, c, x):
        assert rel(hyp2f1(a, b, c, x), float(mpmath.hyp2f1(a, b, c, x))) <= 1e-11

    def test_log_form(self):
        ref = float(mpmath.log(mpmath.hyp2f1(51, 2, 1.5, 0.97)))
        assert rel(log_hyp2f1(51.0, 2.0, 1.5, 0.97), ref) <= 1e-12

    def test_lossy_transform_is_flagged(self):
        # Euler form cancels badly here and the raw series needs more than
        # the default term budget: the result must come with a warning.
        ref = float(mpmath.log(mpmath.hyp2f1(61, 2, 1.5, 0.99)))
        with pytest.warns(SeriesPrecisionWarning):
            rough = log_hyp2f1(61.0, 2.0, 1.5, 0.99)
        assert rel(rough, ref) <= 1e-6
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            fine = log_hyp2f1(61.0, 2.0, 1.5, 0.99, SeriesControl(max_terms=200_000))
        assert rel(fine, ref) <= 1e-12

    @pytest.mark.parametrize("x", [1.0, 1.5, -1.0])
    def test_domain(self, x):
        with pytest.raises(DomainError):
            hyp2f1(1.0, 1.0, 2.0, x)

    def test_nonpositive_integer_c(self):
        with pytest.raises(DomainError):
            hyp2f1(1.0, 1.0, 0.0, 0.5)

    def test_warns_without_transformation_near_one(self):
        # c - a - b > 0, so no Euler transform applies above 0.9
        with pytest.warns(SeriesPrecisionWarning):
            value = hyp2f1(0.5, 0.5, 3.0, 0.95)
        assert rel(value, float(mpmath.hyp2f1(0.5, 0.5, 3.0, 0.95))) <= 1e-10

    def test_no_warning_for_transformed_case(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            hyp2f1(13.0, 1.5, 0.5, 0.95)

    @pytest.mark.parametrize("a", [0.5, 1.0, 2.0, 5.0])
    def test_power_identity(self, a):
        x = np.linspace(0.0, 0.9, 181)
        got = hyp2f1(a, 3.0, 3.0, x)
        np.testing.assert_allclose(got, (1.0 - x) ** -a, rtol=1e-10)

    def test_terminating_euler_form(self):
        # 2F1((nu+1)/2, 3/2; 1/2; x) = (1-x)^(-nu/2-3/2) (1 + nu x)
        nu, x = 23.0, 0.93
        assert rel(hyp2f1((nu + 1) / 2, 1.5, 0.5, x), (1 - x) ** (-nu / 2 - 1.5) * (1 + nu * x)) <= 1e-12


def test_z_ratio_no_overflow_on_range():
    z = np.linspace(-40, 40, 81)
    for tau2 in (1e-3, 1.0, 100.0, 1e4):
        out = log_ratio_z(z, tau2)
        assert np.all(np.isfinite(out))


def test_public_names():
    assert set(specfun.__all__) >= {"hyp1f1", "hyp2f1", "log_gamma"}
