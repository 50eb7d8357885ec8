"""Tests for the psi and phi catalogs."""

import numpy as np
import pytest

from bergman_lab.catalog import CatalogError, CatalogManager, UnknownCatalogEntry, get_catalog
from bergman_lab.geometry import ModelKind, PointSet, sample_grid, to_chart

FORM_IDS = ["phi-one", "phi-cap-north", "phi-re-moment", "phi-bump-eq", "phi-im-moment"]


class TestCatalogManager:
    """Tests for loading and looking up catalog entries."""

    @pytest.mark.parametrize("kind", list(ModelKind))
    def test_five_forms_per_model(self, catalog, kind):
        """Every model ships the same five test forms."""
        assert catalog.form_ids(kind) == FORM_IDS

    def test_unknown_entry(self, catalog, line):
        """Unknown identifiers raise UnknownCatalogEntry, which is also a KeyError."""
        with pytest.raises(UnknownCatalogEntry):
            catalog.weight(line, "psi-missing")
        with pytest.raises(KeyError):
            catalog.test_form(line, "phi-missing")

    def test_empty_directory(self, tmp_path):
        """A directory without YAML files is an error."""
        with pytest.raises(CatalogError):
            CatalogManager(tmp_path).load()

    def test_lookups_are_cached(self, catalog, line):
        """The same model and identifier give the same object."""
        assert catalog.test_form(line, "phi-one") is catalog.test_form(line, "phi-one")

    def test_default_catalog_uses_config_dir(self, config_dir):
        """get_catalog reads the directory named by BERGMAN_LAB_CONFIG."""
        assert get_catalog().catalog_dir == config_dir / "catalog"


class TestTestForm:
    """Tests for test form evaluation and C^2 bounds."""

    @pytest.mark.parametrize("identifier", FORM_IDS)
    def test_chart_overlap_agreement(self, catalog, line, identifier):
        """Values agree on chart overlaps within 1e-8."""
        phi = catalog.test_form(line, identifier)
        points = sample_grid(line, 30)
        moved = to_chart(line, points, 1 - int(points.chart_ids[0]))
        keep = np.abs(moved.coords[:, 0]) < 1e6
        original = phi.value(points.take(keep))
        other = phi.value(PointSet(moved.chart_ids[keep], moved.coords[keep]))
        assert np.max(np.abs(original - other)) < 1e-8

    def test_constant_form_norm(self, catalog, line):
        """phi = 1 has C^2 bound 1.05."""
        assert catalog.test_form(line, "phi-one").c2_norm == pytest.approx(1.05)

    def test_norm_bounds_values(self, catalog, torus):
        """The certified bound exceeds the sup of |phi|."""
        phi = catalog.test_form(torus, "phi-cap-north")
        assert phi.c2_norm >= np.abs(phi.value(sample_grid(torus, 100))).max()

    def test_product_forms_multiply(self, catalog, product, line):
        """Product test forms are phi(z) phi(w)."""
        phi = catalog.test_form(product, "phi-re-moment")
        factor = catalog.test_form(line, "phi-re-moment")
        points = sample_grid(product, 9)
        first = PointSet(points.chart_ids & 1, points.coords[:, :1])
        second = PointSet((points.chart_ids >> 1) & 1, points.coords[:, 1:])
        assert np.allclose(phi.value(points), factor.value(first) * factor.value(second))


class TestWeightFunction:
    """Tests for weights and their Levi forms."""

    def test_linear_weight_levi_range(self, catalog, line):
        """psi-re-1 has relative Levi form -0.9 x1, so its range is about [-0.9, 0.9]."""
        low, high = catalog.weight(line, "psi-re-1").levi_bounds
        assert low == pytest.approx(-0.9, abs=0.02)
        assert high == pytest.approx(0.9, abs=0.02)

    def test_zero_weight(self, catalog, torus):
        """psi-zero vanishes with its Levi form."""
        weight = catalog.weight(torus, "psi-zero")
        points = sample_grid(torus, 16)
        assert np.all(weight.value(points) == 0.0)
        assert weight.levi_sup == 0.0
