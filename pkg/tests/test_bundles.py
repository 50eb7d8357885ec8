"""Tests for Hermitian line bundles, curvature and bundle sequences."""

import math

import numpy as np
import pytest

from bergman_lab.bundles import (
    BundleError,
    NonPositiveRay,
    PositivityLost,
    SequenceKind,
    approximation_defect,
    chern_curvature,
    curvature_lower_bound,
    diophantine_ray,
    make_bundle,
    mass,
    multi_ray,
    perturbed_power,
    power_ray,
    spectral_gap_bound,
)
from bergman_lab.geometry import ChartPoint, sample_grid


class TestMakeBundle:
    """Tests for bundle construction."""

    def test_product_degree_broadcasts(self, product):
        """A single degree on the product means bidegree (d, d)."""
        assert make_bundle(product, 3).degree == (3, 3)

    def test_negative_degree_rejected(self, line):
        """Negative degrees raise BundleError."""
        with pytest.raises(BundleError):
            make_bundle(line, -1)

    def test_large_perturbation_loses_positivity(self, line, catalog):
        """A weight whose Levi form beats the degree is rejected."""
        weight = catalog.weight(line, "psi-re-1")
        with pytest.raises(PositivityLost):
            make_bundle(line, 1, [(weight, 2.0)])

    def test_tensor_adds_degrees(self, product):
        """Tensor products add bidegrees."""
        bundle = make_bundle(product, [1, 2]).tensor(make_bundle(product, [2, 0]))
        assert bundle.degree == (3, 2)


class TestCurvature:
    """Tests for curvature bounds and masses."""

    def test_chern_curvature_single_point(self, line):
        """O(3) has curvature 3 / (pi (1 + |z|^2)^2) at a chart point."""
        matrix = chern_curvature(make_bundle(line, 3), ChartPoint(0, (0.5,)))
        assert matrix.shape == (1, 1)
        assert matrix[0, 0].real == pytest.approx(3.0 / (math.pi * 1.25**2))

    def test_chern_curvature_rejects_lost_positivity(self, line, catalog):
        """Evaluation re-checks positivity for unchecked bundles."""
        weight = catalog.weight(line, "psi-re-1")
        bundle = make_bundle(line, 1, [(weight, 2.0)], check=False)
        with pytest.raises(PositivityLost):
            chern_curvature(bundle, sample_grid(line, 50))

    def test_mass_is_degree(self, line):
        """The mass of O(3) is 3."""
        assert mass(make_bundle(line, 3)) == pytest.approx(3.0, abs=1e-10)

    def test_perturbation_keeps_mass(self, line, catalog):
        """dd^c psi integrates to zero, so the mass stays the degree."""
        weight = catalog.weight(line, "psi-re-1")
        assert mass(make_bundle(line, 2, [(weight, 1.0)])) == pytest.approx(2.0, abs=1e-8)

    def test_product_mass(self, product):
        """c_1(O(1, 2)) ^ theta integrates to 3."""
        assert mass(make_bundle(product, [1, 2])) == pytest.approx(3.0, abs=1e-10)

    def test_lower_bound_and_gap(self, line):
        """O(2) has curvature eigenvalue 4 pi and gap bound 8 pi - C."""
        grid = sample_grid(line, 20)
        bundle = make_bundle(line, 2)
        assert curvature_lower_bound(bundle, grid) == pytest.approx(4 * math.pi)
        assert spectral_gap_bound(bundle, grid, 1.0) == pytest.approx(8 * math.pi - 1.0)


class TestSequences:
    """Tests for power, perturbed and multi-ray sequences."""

    def test_power_ray(self, line):
        """L_p = F^p with A_p = p and limit form c_1(F)."""
        seq = power_ray(make_bundle(line, 2))
        assert seq.kind is SequenceKind.POWER_RAY
        assert seq.A(5) == 5.0
        assert seq.bundle_at(5).degree == (10,)
        assert seq.limit_form.reference_multiple == 2.0

    def test_perturbed_scale(self, line, catalog):
        """The weight enters with scale p^(1 - a)."""
        seq = perturbed_power(make_bundle(line, 1), catalog.weight(line, "psi-re-1"), 0.5)
        bundle = seq.bundle_at(4)
        assert bundle.degree == (4,)
        assert bundle.perturbations[-1][1] == pytest.approx(2.0)

    def test_perturbed_rate(self, line, catalog):
        """A_p^-1 c_1(L_p) approaches omega like p^-a."""
        seq = perturbed_power(make_bundle(line, 1), catalog.weight(line, "psi-re-1"), 0.5)
        grid = sample_grid(line, 30)
        ratio = approximation_defect(seq, 16, grid) / approximation_defect(seq, 4, grid)
        assert ratio == pytest.approx(0.5, rel=1e-10)

    def test_perturbed_needs_positive_exponent(self, line, catalog):
        """a <= 0 is rejected."""
        with pytest.raises(ValueError):
            perturbed_power(make_bundle(line, 1), catalog.weight(line, "psi-re-1"), 0.0)

    def test_unperturbed_power_is_exact(self, line):
        """The power ray has zero approximation defect."""
        seq = power_ray(make_bundle(line, 1))
        assert approximation_defect(seq, 7, sample_grid(line, 10)) == pytest.approx(0.0, abs=1e-12)

    def test_multi_ray_exponents(self, line):
        """Two rays round r_j p to integers and tensor the powers."""
        seq = multi_ray([make_bundle(line, 1), make_bundle(line, 1)], ["1", "sqrt(2)"], depth=4)
        assert seq.exponents_at(5) == (5, 7)
        assert seq.bundle_at(5).degree == (12,)
        assert seq.limit_form.reference_multiple == pytest.approx(1.0 + math.sqrt(2.0))


class TestDiophantineRay:
    """Tests for integer approximations of real rays."""

    def test_convergents_of_sqrt2(self):
        """Continued-fraction denominators 1, 2, 5, 12, 29 with C <= 1."""
        approximation = diophantine_ray(["sqrt(2)"], 5)
        assert [t.p for t in approximation.tuples] == [1, 2, 5, 12, 29]
        assert approximation.exponents(12) == (17,)
        assert approximation.bound <= 1.0
        assert approximation.verify()

    def test_rational_ray_extends_by_multiples(self):
        """A rational ray is padded with multiples of its denominator."""
        approximation = diophantine_ray(["1/2"], 3)
        assert approximation.exponents(2) == (1,)
        assert approximation.exponents(4) == (2,)

    def test_non_positive_ray(self):
        """Rays must be positive."""
        with pytest.raises(NonPositiveRay):
            diophantine_ray(["-1"], 3)

    def test_errors_shrink_like_p_squared(self):
        """Every listed tuple satisfies |m/p - r| p^2 <= C."""
        approximation = diophantine_ray(["sqrt(3)", "sqrt(5)"], 6)
        for entry in approximation.tuples:
            errors = np.abs(np.array(entry.m) / entry.p - np.array(approximation.values))
            assert np.all(errors * entry.p**2 <= approximation.bound + 1e-12)
