"""Tests for expansion and rate fits."""

import math
import random

import numpy as np
import pytest

from bergman_lab.asymptotics import (
    DegenerateData,
    RankDeficient,
    expansion_order,
    fit_expansion,
    fit_rate,
    loglog_slope,
    predicted_coefficients,
)
from bergman_lab.geometry import ChartPoint, reference_form

A_GRID = [10.0, 20.0, 50.0, 100.0, 200.0, 500.0, 1000.0]


class TestFitExpansion:
    """Tests for P_p / A_p^n = b_0 + b_1 / A_p + ..."""

    def test_projective_line(self):
        """P_p = p + 1 gives b_0 = b_1 = 1."""
        fit = fit_expansion([(p, float(p), p + 1.0) for p in range(10, 81, 10)], order=1)
        assert fit.coefficient(0) == pytest.approx(1.0, abs=1e-10)
        assert fit.coefficient(1) == pytest.approx(1.0, abs=1e-8)
        assert fit.residual < 1e-12

    def test_scaled_form(self):
        """P_p = 3p + 1 gives b_0 = 3."""
        fit = fit_expansion([(p, float(p), 3.0 * p + 1.0) for p in range(10, 81, 10)], order=1)
        assert fit.coefficients == pytest.approx((3.0, 1.0), abs=1e-8)

    def test_product(self):
        """(p + 1)^2 / p^2 = 1 + 2/p + 1/p^2."""
        samples = [(p, float(p), (p + 1.0) ** 2) for p in range(5, 41, 5)]
        fit = fit_expansion(samples, order=2, n=2)
        assert fit.coefficients == pytest.approx((1.0, 2.0, 1.0), abs=1e-6)

    def test_sample_order_is_irrelevant(self):
        samples = [(p, float(p), p + 1.0 + 0.3 / p**2) for p in range(10, 81, 10)]
        shuffled = list(samples)
        random.Random(0).shuffle(shuffled)
        assert fit_expansion(shuffled, 1).coefficients == fit_expansion(samples, 1).coefficients

    def test_too_few_values(self):
        with pytest.raises(RankDeficient):
            fit_expansion([(1, 1.0, 2.0), (2, 2.0, 3.0), (3, 3.0, 4.0)], order=2)

    def test_duplicates_do_not_count(self):
        with pytest.raises(RankDeficient):
            fit_expansion([(1, 1.0, 2.0), (1, 1.0, 2.0), (2, 2.0, 3.0)], order=1)


class TestExpansionOrder:
    @pytest.mark.parametrize(
        "a, order", [(0.5, 0), (1.0, 0), (1.5, 1), (2.0, 1), (2.5, 2), (math.inf, 2)]
    )
    def test_order(self, a, order):
        assert expansion_order(a) == order


class TestPredictedCoefficients:
    """b_0 and b_1 from the volume ratio and the scalar curvature."""

    def test_line(self, line):
        point = ChartPoint(0, (0.2,))
        assert predicted_coefficients(line, reference_form(line), point) == pytest.approx(
            (1.0, 1.0)
        )

    def test_doubled_line(self, line):
        """omega = 2 theta has b_0 = 2 and r = 4 pi, so b_1 = 1."""
        omega = reference_form(line).scaled(2.0)
        point = ChartPoint(0, (0.0,))
        assert predicted_coefficients(line, omega, point) == pytest.approx((2.0, 1.0))

    def test_product(self, product):
        point = ChartPoint(0, (0.1, -0.3j))
        predicted = predicted_coefficients(product, reference_form(product), point)
        assert predicted == pytest.approx((1.0, 2.0))

    def test_torus(self, torus):
        point = ChartPoint(0, (0.25 + 0.5j,))
        predicted = predicted_coefficients(torus, reference_form(torus), point)
        assert predicted == pytest.approx((1.0, 0.0))


class TestFitRate:
    """Tests for |value| ~ c log A / A + c' A^-a."""

    def test_log_term(self):
        records = [(A, 2.0 * math.log(A) / A) for A in A_GRID]
        fit = fit_rate(records, terms="log")
        assert fit.c_log == pytest.approx(2.0)
        assert fit.r_squared == pytest.approx(1.0)

    def test_full_on_log_data(self):
        records = [(A, 2.0 * math.log(A) / A) for A in A_GRID]
        fit = fit_rate(records)
        assert fit.r_squared > 0.999
        np.testing.assert_allclose(fit.predict(A_GRID), [v for _, v in records], rtol=0.02)

    def test_full_recovers_power(self):
        records = [(A, A**-0.5) for A in A_GRID]
        fit = fit_rate(records)
        assert fit.a_hat == pytest.approx(0.5, abs=0.03)
        assert fit.r_squared > 0.999

    def test_power_only(self):
        records = [(A, 3.0 * A**-0.7) for A in A_GRID]
        fit = fit_rate(records, terms="power")
        assert fit.a_hat == pytest.approx(0.7)
        assert fit.c_power == pytest.approx(3.0)

    def test_signs_are_ignored(self):
        records = [(A, (-1) ** i * A**-0.5) for i, A in enumerate(A_GRID)]
        assert fit_rate(records, terms="power").a_hat == pytest.approx(0.5)

    def test_exact_data(self):
        fit = fit_rate([(A, 0.0) for A in A_GRID])
        assert fit.exact

    def test_record_order_is_irrelevant(self):
        records = [(A, 0.7 * math.log(A) / A + A**-0.8) for A in A_GRID]
        shuffled = list(reversed(records))
        first, second = fit_rate(records), fit_rate(shuffled)
        assert first.c_log == second.c_log
        assert first.c_power == second.c_power
        assert first.a_hat == second.a_hat

    def test_too_few_points(self):
        with pytest.raises(DegenerateData):
            fit_rate([(10.0, 0.1), (20.0, 0.05), (40.0, 0.02)])

    def test_zero_mixed_with_data(self):
        with pytest.raises(DegenerateData):
            fit_rate([(A, 0.0 if A == 50.0 else 1.0 / A) for A in A_GRID])

    def test_small_A_rejected(self):
        with pytest.raises(DegenerateData):
            fit_rate([(A, 1.0 / A) for A in (1.0, 2.0, 4.0, 8.0)])

    def test_unknown_terms(self):
        with pytest.raises(ValueError):
            fit_rate([(A, 1.0 / A) for A in A_GRID], terms="cubic")


class TestLogLogSlope:
    def test_power_law(self):
        x = np.array([1.0, 2.0, 4.0, 8.0])
        fit = loglog_slope(x, 5.0 * x**-2)
        assert fit.slope == pytest.approx(-2.0)
        assert fit.r_squared == pytest.approx(1.0)

    def test_linear_x(self):
        x = np.array([1.0, 2.0, 3.0, 4.0])
        assert loglog_slope(x, np.exp(-0.3 * x), log_x=False).slope == pytest.approx(-0.3)

    def test_single_point(self):
        with pytest.raises(DegenerateData):
            loglog_slope([1.0], [1.0])
