"""Tests for section bases, Gram matrices and Bergman kernels."""

import math

import numpy as np
import pytest

from bergman_lab import bergman
from bergman_lab.bergman import (
    BergmanError,
    GramMatrix,
    IllConditioned,
    bergman_function,
    bergman_kernel2,
    dimension,
    fubini_study_current,
    gram_matrix,
    kernel_bounds,
    log_kernel_l1,
    orthonormal_basis,
    orthonormalize,
    raw_basis,
)
from bergman_lab.bundles import make_bundle
from bergman_lab.geometry import (
    ChartPoint,
    NotPositive,
    PointSet,
    default_rule,
    integrate,
    reference_matrix,
    sample_grid,
)


class TestDimension:
    """Tests for d_p = dim H^0."""

    def test_line(self, line):
        assert dimension(make_bundle(line, 7)) == 8

    def test_product(self, product):
        assert dimension(make_bundle(product, [2, 3])) == 12

    def test_torus(self, torus):
        assert dimension(make_bundle(torus, 5)) == 5

    def test_basis_matches_dimension(self, product):
        """The canonical basis has one section per dimension."""
        bundle = make_bundle(product, [2, 1])
        assert raw_basis(bundle).size == dimension(bundle)


class TestBergmanFunction:
    """P_p is constant and equal to d_p on the homogeneous models."""

    @pytest.mark.parametrize("p", [1, 4, 10, 25])
    def test_line(self, line, p):
        """On the projective line P_p = p + 1."""
        onb = orthonormal_basis(make_bundle(line, p))
        values = bergman_function(onb, sample_grid(line, 50))
        np.testing.assert_allclose(values, p + 1, rtol=1e-8)

    def test_line_both_charts(self, line):
        """The value is the same through either chart."""
        onb = orthonormal_basis(make_bundle(line, 5))
        assert bergman_function(onb, ChartPoint(0, (0.0,))) == pytest.approx(6.0, rel=1e-10)
        assert bergman_function(onb, ChartPoint(1, (0.0,))) == pytest.approx(6.0, rel=1e-10)

    def test_product(self, product):
        """On the product P_p = (p + 1)^2 for bidegree (p, p)."""
        onb = orthonormal_basis(make_bundle(product, 3))
        np.testing.assert_allclose(bergman_function(onb, sample_grid(product, 25)), 16.0, rtol=1e-8)

    @pytest.mark.parametrize("degree", [1, 3, 8])
    def test_torus(self, torus, degree):
        """On the square torus P_p = p."""
        onb = orthonormal_basis(make_bundle(torus, degree))
        np.testing.assert_allclose(bergman_function(onb, sample_grid(torus, 36)), degree, rtol=1e-8)

    def test_perturbed_integrates_to_dimension(self, line, catalog):
        """The integral of P_p over the Gram rule is d_p for any metric."""
        weight = catalog.weight(line, "psi-re-1")
        onb = orthonormal_basis(make_bundle(line, 8, [(weight, 1.0)]))
        total = integrate(line, lambda pts: bergman_function(onb, pts), onb.gram.rule)
        assert total.real == pytest.approx(9.0, rel=1e-8)

    def test_perturbed_is_not_constant(self, line, catalog):
        """A non-constant weight makes P_p vary."""
        weight = catalog.weight(line, "psi-re-1")
        onb = orthonormal_basis(make_bundle(line, 8, [(weight, 1.0)]))
        values = bergman_function(onb, sample_grid(line, 50))
        assert values.max() - values.min() > 1e-3

    def test_chart_agreement_on_overlap(self, line, catalog):
        """z in chart 0 and 1/z in chart 1 give the same P_p for 0.5 < |z| < 2."""
        weight = catalog.weight(line, "psi-re-1")
        onb = orthonormal_basis(make_bundle(line, 7, [(weight, 1.0)]))
        radii = np.array([0.55, 0.8, 1.0, 1.3, 1.9])
        angles = np.linspace(0.0, 2 * math.pi, 7, endpoint=False)
        z = (radii[:, None] * np.exp(1j * angles[None, :])).ravel()
        south = PointSet(np.zeros(len(z), dtype=int), z[:, None])
        north = PointSet(np.ones(len(z), dtype=int), (1.0 / z)[:, None])
        np.testing.assert_allclose(
            bergman_function(onb, north), bergman_function(onb, south), rtol=1e-8
        )
        np.testing.assert_allclose(
            bergman_kernel2(onb, north, north), bergman_kernel2(onb, south, south), rtol=1e-8
        )


class TestKernel:
    """Tests for the off-diagonal kernel."""

    def test_diagonal_is_bergman_function(self, line, line_onb):
        grid = sample_grid(line, 10)
        diagonal = np.diag(bergman_kernel2(line_onb, grid, grid))
        np.testing.assert_allclose(diagonal, bergman_function(line_onb, grid), rtol=1e-10)

    def test_cauchy_schwarz(self, line, line_onb):
        """|P(x, y)|^2 <= P(x) P(y)."""
        grid = sample_grid(line, 12)
        kernel = bergman_kernel2(line_onb, grid, grid)
        diagonal = bergman_function(line_onb, grid)
        assert np.all(kernel**2 <= np.outer(diagonal, diagonal) * (1 + 1e-10))

    def test_antipodal_vanishes(self, line_onb):
        """On the projective line the kernel between 0 and infinity is zero."""
        assert bergman_kernel2(line_onb, ChartPoint(0, (0.0,)), ChartPoint(1, (0.0,))) < 1e-12

    @pytest.mark.parametrize("p", [1, 6, 15, 40])
    def test_closed_form_from_origin(self, line, p):
        """|P_p(0, z)| = (p + 1) / (1 + |z|^2)^(p/2)."""
        onb = orthonormal_basis(make_bundle(line, p))
        z = np.array([0.1, 0.5 - 0.5j, 1.0j, -2.0, 3.0 + 1.0j])
        points = PointSet(np.zeros(len(z), dtype=int), z[:, None])
        expected = (p + 1) / (1.0 + np.abs(z) ** 2) ** (p / 2)
        np.testing.assert_allclose(
            bergman_kernel2(onb, ChartPoint(0, (0.0,)), points), expected, rtol=1e-8, atol=1e-12
        )

    @pytest.mark.parametrize("p", [1, 5, 12, 20])
    def test_projection_is_idempotent(self, line, p):
        """int |P(x, y)|^2 dv(y) = P(x)."""
        onb = orthonormal_basis(make_bundle(line, p))
        points = [ChartPoint(0, (0.0,)), ChartPoint(0, (0.7 - 0.2j,)), ChartPoint(1, (0.4j,))]
        for x in points:
            total = integrate(line, lambda pts: bergman_kernel2(onb, x, pts) ** 2, onb.gram.rule)
            assert total.real == pytest.approx(bergman_function(onb, x), abs=1e-6)

    def test_perturbed_projection_is_idempotent(self, line, catalog):
        weight = catalog.weight(line, "psi-re-1")
        onb = orthonormal_basis(make_bundle(line, 8, [(weight, 1.0)]))
        x = ChartPoint(0, (0.3 + 0.3j,))
        total = integrate(line, lambda pts: bergman_kernel2(onb, x, pts) ** 2, onb.gram.rule)
        assert total.real == pytest.approx(bergman_function(onb, x), abs=1e-6)

    def test_single_point_shapes(self, line, line_onb):
        grid = sample_grid(line, 5)
        value = bergman_kernel2(line_onb, ChartPoint(0, (0.3,)), ChartPoint(0, (0.1,)))
        assert isinstance(value, float)
        assert bergman_kernel2(line_onb, ChartPoint(0, (0.3,)), grid).shape == (5,)
        assert bergman_kernel2(line_onb, grid, ChartPoint(0, (0.3,))).shape == (5,)


class TestGramMatrix:
    """Tests for Gram assembly and orthonormalization."""

    def test_not_hermitian(self):
        with pytest.raises(BergmanError):
            GramMatrix.from_matrix([[1.0, 0.5], [0.0, 1.0]])

    def test_not_positive(self):
        with pytest.raises(NotPositive):
            GramMatrix.from_matrix([[1.0, 2.0], [2.0, 1.0]])

    def test_condition_limit(self, line, monkeypatch):
        """Conditions above the limit raise IllConditioned."""
        monkeypatch.setattr(bergman, "MAX_CONDITION", 0.5)
        with pytest.raises(IllConditioned):
            gram_matrix(raw_basis(make_bundle(line, 3)))

    def test_monomials_are_orthogonal(self, line):
        """FS monomials are orthogonal with |z^j|^2 = j!(d-j)!/(d+1)!."""
        gram = gram_matrix(raw_basis(make_bundle(line, 4)))
        expected = [math.factorial(j) * math.factorial(4 - j) / math.factorial(5) for j in range(5)]
        np.testing.assert_allclose(gram.matrix, np.diag(expected), atol=1e-13)

    def test_dense_matches_structured(self, product, catalog):
        """The factorized product Gram agrees with brute-force assembly."""
        weight = catalog.weight(product, "psi-re-1")
        basis = raw_basis(make_bundle(product, [2, 2], [(weight, 0.5)]))
        rule = default_rule(product, [2, 2])
        dense = bergman._dense_gram(basis, rule)
        np.testing.assert_allclose(gram_matrix(basis, rule).matrix, dense, atol=1e-12)

    @pytest.mark.parametrize("limit", [1e6, 0.5])
    def test_whitening(self, product, monkeypatch, limit):
        """Both whitening paths give T^H G T = I."""
        monkeypatch.setattr(bergman, "CHOLESKY_CONDITION", limit)
        gram = gram_matrix(raw_basis(make_bundle(product, [2, 1])))
        onb = orthonormalize(gram)
        identity = onb.transform.conj().T @ gram.matrix @ onb.transform
        np.testing.assert_allclose(identity, np.eye(gram.size), atol=1e-10)
        assert onb.method == ("cholesky" if limit > 1 else "svd")


class TestFubiniStudyCurrent:
    """gamma_p equals c_1(L, h) when P_p is constant."""

    def test_line(self, line, line_onb):
        grid = sample_grid(line, 30)
        current = fubini_study_current(line_onb, grid)
        expected = 6.0 * reference_matrix(line, grid)
        np.testing.assert_allclose(current, expected, rtol=1e-8, atol=1e-14)

    def test_torus(self, torus):
        onb = orthonormal_basis(make_bundle(torus, 4))
        grid = sample_grid(torus, 16)
        current = fubini_study_current(onb, grid)
        np.testing.assert_allclose(current, 4.0 * reference_matrix(torus, grid), rtol=1e-8)

    def test_product(self, product):
        onb = orthonormal_basis(make_bundle(product, [2, 3]))
        grid = sample_grid(product, 9)
        reference = reference_matrix(product, grid)
        expected = reference * np.array([2.0, 3.0])[None, None, :]
        np.testing.assert_allclose(fubini_study_current(onb, grid), expected, rtol=1e-8, atol=1e-12)


class TestSummaries:
    """Tests for grid summaries of P_p."""

    def test_kernel_bounds(self, line, line_onb):
        assert kernel_bounds(line_onb, sample_grid(line, 20), 6.0) == pytest.approx(7.0 / 6.0)

    def test_log_kernel_l1(self, line, line_onb):
        rule = default_rule(line, 6)
        assert log_kernel_l1(line_onb, rule, 6.0) == pytest.approx(math.log(7.0) / 6.0, rel=1e-10)
