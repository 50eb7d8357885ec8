"""Tests for theta functions with characteristics."""

import math

import numpy as np
import pytest

from bergman_lab.geometry import make_model
from bergman_lab.theta import theta_values, truncation_order


def raw(torus, degree, z):
    """Holomorphic theta values with the norm factor removed."""
    values, _ = theta_values(torus, degree, z)
    return values * np.exp(math.pi * degree * z.imag**2 / torus.tau.imag)[:, None]


class TestTruncation:
    def test_shrinks_with_degree(self):
        assert truncation_order(40, 1j) <= truncation_order(2, 1j)

    def test_positive(self):
        assert truncation_order(1, 3j) >= 2


class TestThetaValues:
    """Tests for the norm-scaled theta basis."""

    def test_shape(self, torus):
        z = np.array([0.1 + 0.2j, 0.4 + 0.7j])
        values, slopes = theta_values(torus, 3, z, derivatives=True)
        assert values.shape == (2, 3)
        assert slopes.shape == (2, 3)

    def test_lattice_invariant_norm(self, torus):
        """|u_j|_h is periodic under the lattice."""
        z = np.array([0.2 + 0.3j])
        base, _ = theta_values(torus, 4, z)
        for shift in (1.0, torus.tau, 2.0 - torus.tau):
            moved, _ = theta_values(torus, 4, z + shift)
            np.testing.assert_allclose(np.abs(moved), np.abs(base), rtol=1e-12)

    def test_translation_by_one(self, torus):
        """u_j(z + 1/d) = exp(2 pi i j / d) u_j(z)."""
        degree = 3
        z = np.array([0.1 + 0.4j])
        shifted = raw(torus, degree, z + 1.0 / degree)
        expected = raw(torus, degree, z) * np.exp(2j * math.pi * np.arange(degree) / degree)
        np.testing.assert_allclose(shifted, expected, rtol=1e-10)

    def test_derivative(self, torus):
        """The returned slopes are the z-derivatives of the holomorphic values."""
        degree = 2
        z = np.array([0.3 + 0.45j])
        _, slopes = theta_values(torus, degree, z, derivatives=True)
        slopes = slopes * np.exp(math.pi * degree * z.imag**2 / torus.tau.imag)[:, None]
        step = 1e-5
        numeric = (raw(torus, degree, z + step) - raw(torus, degree, z - step)) / (2 * step)
        np.testing.assert_allclose(slopes, numeric, rtol=1e-6)

    def test_no_overflow_at_high_degree(self, torus):
        values, _ = theta_values(torus, 400, np.array([0.5 + 0.99j]))
        assert np.all(np.isfinite(values))
        assert np.abs(values).max() < 10.0

    @pytest.mark.parametrize("tau", [0.5 + 1.5j, -0.3 + 0.8j])
    def test_skew_lattice(self, tau):
        torus = make_model("flat-torus", {"tau": tau})
        values, _ = theta_values(torus, 5, np.array([0.25 + 0.25j]))
        assert np.all(np.isfinite(values))
