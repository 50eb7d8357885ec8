"""Shared pytest fixtures for bergman-lab tests."""

import shutil
from pathlib import Path

import pytest

from bergman_lab.bergman import orthonormal_basis
from bergman_lab.bundles import make_bundle
from bergman_lab.catalog import CatalogManager, reset_catalog
from bergman_lab.geometry import ModelKind, make_model

REPO_CONFIG = Path(__file__).resolve().parents[1] / "config"


@pytest.fixture
def line():
    return make_model(ModelKind.PROJECTIVE_LINE)


@pytest.fixture
def product():
    return make_model(ModelKind.PROJECTIVE_PRODUCT)


@pytest.fixture
def torus():
    return make_model(ModelKind.FLAT_TORUS, {"tau": 1j})


@pytest.fixture(scope="session")
def catalog():
    manager = CatalogManager(REPO_CONFIG / "catalog")
    manager.load()
    return manager


@pytest.fixture
def line_onb(line):
    """Orthonormal basis of O(6) with the Fubini-Study metric."""
    return orthonormal_basis(make_bundle(line, 6))


@pytest.fixture
def config_dir(tmp_path, monkeypatch):
    """Copy of the repository config directory, selected through the environment."""
    target = tmp_path / "config"
    shutil.copytree(REPO_CONFIG, target)
    monkeypatch.setenv("BERGMAN_LAB_CONFIG", str(target))
    reset_catalog()
    yield target
    reset_catalog()
