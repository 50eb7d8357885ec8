"""Catalog of weight perturbations (psi) and test forms (phi)."""

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable

import numpy as np
import yaml

from bergman_lab.geometry import (
    KahlerModel,
    ModelKind,
    PointSet,
    PointsLike,
    as_point_set,
    factor_charts,
    make_model,
    real_derivatives,
    reference_matrix,
    relative_eigenvalues,
    sample_grid,
    sphere_coordinates,
    torus_lattice_coords,
)

logger = logging.getLogger(__name__)

C2_MARGIN = 1.05


class CatalogError(Exception):
    """Malformed or inconsistent catalog data."""


class UnknownCatalogEntry(CatalogError, KeyError):
    """Requested psi or phi identifier is not in the catalog."""


# Sphere families return (value, unit-sphere Laplacian) of (x1, x2, x3).
SphereFamily = Callable[[dict], Callable[[np.ndarray, np.ndarray, np.ndarray], tuple]]
# Torus families return (value, f_ss, f_st, f_tt) of the lattice coordinates (s, t).
TorusFamily = Callable[[dict], Callable[[np.ndarray, np.ndarray], tuple]]


def _sphere_constant(params: dict):
    value = float(params.get("value", 1.0))

    def evaluate(x1, x2, x3):
        return np.full_like(x3, value), np.zeros_like(x3)
    return evaluate


def _sphere_linear(params: dict):
    eps = float(params.get("epsilon", 1.0))
    d1, d2, d3 = (float(c) for c in params.get("direction", (1.0, 0.0, 0.0)))

    def evaluate(x1, x2, x3):
        value = eps * (d1 * x1 + d2 * x2 + d3 * x3)
        return value, -2.0 * value
    return evaluate


def _zonal(f, df, d2f):
    def evaluate(x1, x2, x3):
        value = f(x3)
        laplacian = (1.0 - x3**2) * d2f(x3) - 2.0 * x3 * df(x3)
        return value, laplacian
    return evaluate


def _sphere_zonal_exp(params: dict):
    eps = float(params.get("epsilon", 1.0))
    kappa = float(params.get("kappa", 1.0))

    def f(x3):
        return eps * np.exp(kappa * (x3 - 1.0))
    return _zonal(f, lambda x3: kappa * f(x3), lambda x3: kappa**2 * f(x3))


def _sphere_zonal_gauss(params: dict):
    eps = float(params.get("epsilon", 1.0))
    lam = float(params.get("lambda", 1.0))

    def f(x3):
        return eps * np.exp(-lam * x3**2)
    return _zonal(
        f,
        lambda x3: -2.0 * lam * x3 * f(x3),
        lambda x3: (4.0 * lam**2 * x3**2 - 2.0 * lam) * f(x3),
    )


def _torus_constant(params: dict):
    value = float(params.get("value", 1.0))

    def evaluate(s, t):
        zero = np.zeros_like(s)
        return np.full_like(s, value), zero, zero, zero
    return evaluate


def _torus_plane_wave(params: dict):
    eps = float(params.get("epsilon", 1.0))
    ks = float(params.get("ks", 1))
    kt = float(params.get("kt", 0))
    phase = float(params.get("phase", 0.0))

    def evaluate(s, t):
        value = eps * np.cos(2.0 * math.pi * (ks * s + kt * t) + phase)
        scale = -(2.0 * math.pi) ** 2 * value
        return value, ks * ks * scale, ks * kt * scale, kt * kt * scale
    return evaluate


def _torus_bump(params: dict):
    eps = float(params.get("epsilon", 1.0))
    two_pi = 2.0 * math.pi

    def evaluate(s, t):
        g = eps * np.exp(np.cos(two_pi * s) + np.cos(two_pi * t) - 2.0)
        ss = two_pi**2 * (np.sin(two_pi * s) ** 2 - np.cos(two_pi * s)) * g
        st = two_pi**2 * np.sin(two_pi * s) * np.sin(two_pi * t) * g
        tt = two_pi**2 * (np.sin(two_pi * t) ** 2 - np.cos(two_pi * t)) * g
        return g, ss, st, tt
    return evaluate


def _torus_band(params: dict):
    eps = float(params.get("epsilon", 1.0))
    lam = float(params.get("lambda", 1.0))

    def evaluate(s, t):
        u = np.sin(math.pi * t) ** 2
        du = math.pi * np.sin(2.0 * math.pi * t)
        d2u = 2.0 * math.pi**2 * np.cos(2.0 * math.pi * t)
        g = eps * np.exp(-lam * u)
        zero = np.zeros_like(s)
        return g, zero, zero, (lam**2 * du**2 - lam * d2u) * g
    return evaluate


SPHERE_FAMILIES: dict[str, SphereFamily] = {
    "constant": _sphere_constant,
    "linear": _sphere_linear,
    "zonal-exp": _sphere_zonal_exp,
    "zonal-gauss": _sphere_zonal_gauss,
}

TORUS_FAMILIES: dict[str, TorusFamily] = {
    "constant": _torus_constant,
    "plane-wave": _torus_plane_wave,
    "torus-bump": _torus_bump,
    "torus-band": _torus_band,
}


@dataclass(frozen=True)
class CatalogEntry:
    """Raw catalog record as read from YAML."""
    identifier: str
    family: str
    params: dict = field(default_factory=dict, hash=False)
    description: str = ""


class _CatalogFunction:
    """Shared evaluation machinery for psi and phi entries."""

    def __init__(
        self,
        entry: CatalogEntry,
        model: KahlerModel,
        factor: "_CatalogFunction | None" = None,
    ):
        self.entry = entry
        self.model = model
        self.factor = factor
        self._sphere = None
        self._torus = None
        if model.kind is ModelKind.PROJECTIVE_LINE:
            self._sphere = _lookup(SPHERE_FAMILIES, entry)(entry.params)
        elif model.kind is ModelKind.FLAT_TORUS:
            self._torus = _lookup(TORUS_FAMILIES, entry)(entry.params)
        elif factor is None:
            raise CatalogError(f"product entry {entry.identifier} needs a projective-line factor")

    @property
    def identifier(self) -> str:
        return self.entry.identifier

    def _line_parts(self, chart: np.ndarray, zeta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return self._sphere(*sphere_coordinates(chart, zeta))

    def _torus_parts(self, z: np.ndarray) -> tuple:
        s, t = torus_lattice_coords(self.model, z)
        return self._torus(s, t)

    def _torus_laplacian(self, f_ss, f_st, f_tt) -> np.ndarray:
        tau = self.model.tau
        ratio = tau.real / tau.imag
        return (1.0 + ratio**2) * f_ss - 2.0 * ratio / tau.imag * f_st + f_tt / tau.imag**2


def _lookup(families: dict, entry: CatalogEntry):
    try:
        return families[entry.family]
    except KeyError:
        raise CatalogError(f"unknown family {entry.family!r} for {entry.identifier}") from None


class WeightFunction(_CatalogFunction):
    """A smooth real weight psi used to perturb Hermitian metrics."""

    def value(self, x: PointsLike):
        points, single = as_point_set(x)
        if self._torus is not None:
            values = self._torus_parts(points.coords[:, 0])[0]
        elif self._sphere is not None:
            values = self._line_parts(points.chart_ids, points.coords[:, 0])[0]
        else:
            first, second = factor_charts(self.model, points)
            values = self.factor._line_parts(*first)[0] + self.factor._line_parts(*second)[0]
        return float(values[0]) if single else values

    def relative_levi(self, points: PointSet) -> np.ndarray:
        """Diagonal of dd^c psi relative to the reference form, shape (N, n)."""
        if self._torus is not None:
            _, f_ss, f_st, f_tt = self._torus_parts(points.coords[:, 0])
            laplacian = self._torus_laplacian(f_ss, f_st, f_tt)
            return (self.model.tau.imag * laplacian / (2.0 * math.pi))[:, None]
        if self._sphere is not None:
            return 2.0 * self._line_parts(points.chart_ids, points.coords[:, 0])[1][:, None]
        parts = factor_charts(self.model, points)
        columns = [2.0 * self.factor._line_parts(*part)[1] for part in parts]
        return np.stack(columns, axis=1)

    def levi_matrix(self, x: PointsLike) -> np.ndarray:
        """Matrix of dd^c psi = (2/pi) d dbar psi, shape (N, n, n)."""
        points, single = as_point_set(x)
        relative = self.relative_levi(points)
        reference = reference_matrix(self.model, points)
        out = reference * relative[:, :, None]
        return out[0] if single else out

    @cached_property
    def levi_bounds(self) -> tuple[float, float]:
        """Range of relative Levi eigenvalues over a dense check grid."""
        points = sample_grid(self.model, 4096)
        reference = reference_matrix(self.model, points)
        eigenvalues = relative_eigenvalues(self.levi_matrix(points), reference)
        return float(eigenvalues.min()), float(eigenvalues.max())

    @property
    def levi_sup(self) -> float:
        low, high = self.levi_bounds
        return max(abs(low), abs(high))


class TestForm(_CatalogFunction):
    """A C^2 test function paired against currents."""

    __test__ = False

    def value(self, x: PointsLike):
        points, single = as_point_set(x)
        if self._torus is not None:
            values = self._torus_parts(points.coords[:, 0])[0]
        elif self._sphere is not None:
            values = self._line_parts(points.chart_ids, points.coords[:, 0])[0]
        else:
            first, second = factor_charts(self.model, points)
            values = self.factor._line_parts(*first)[0] * self.factor._line_parts(*second)[0]
        return float(values[0]) if single else values

    __call__ = value

    @cached_property
    def c2_norm(self) -> float:
        """Certified C^2 bound: grid sup of |phi| and its real partials to order 2, times 1.05."""
        points = c2_grid(self.model)
        value, grad, hess = real_derivatives(self.value, points)
        measured = max(np.abs(value).max(), np.abs(grad).max(), np.abs(hess).max())
        logger.debug(f"C2 norm of {self.identifier} on {self.model.describe()}: {measured:.6g}")
        return C2_MARGIN * float(measured)


def c2_grid(model: KahlerModel) -> PointSet:
    """Closed unit discs of every chart (torus: fundamental domain)."""
    if model.kind is ModelKind.FLAT_TORUS:
        grid = np.arange(24) / 24
        S, T = np.meshgrid(grid, grid, indexing="ij")
        z = (S + T * model.tau).ravel()
        return PointSet(np.zeros(z.size, dtype=int), z.reshape(-1, 1))

    def disc(n_radii: int, n_angles: int) -> np.ndarray:
        radii = np.linspace(0.0, 1.0, n_radii)
        angles = 2.0 * math.pi * np.arange(n_angles) / n_angles
        return (radii[:, None] * np.exp(1j * angles)[None, :]).ravel()

    if model.kind is ModelKind.PROJECTIVE_LINE:
        zeta = disc(13, 24)
        chart_ids = np.concatenate([np.zeros(zeta.size, dtype=int), np.ones(zeta.size, dtype=int)])
        return PointSet(chart_ids, np.concatenate([zeta, zeta]).reshape(-1, 1))

    zeta = disc(6, 10)
    a = np.repeat(zeta, zeta.size)
    b = np.tile(zeta, zeta.size)
    sets = [
        PointSet(np.full(a.size, chart, dtype=int), np.stack([a, b], axis=1))
        for chart in range(4)
    ]
    return PointSet.concatenate(sets)


class CatalogManager:
    """Loads psi and phi catalogs from YAML files in a directory."""

    def __init__(self, catalog_dir: Path | str):
        self.catalog_dir = Path(catalog_dir)
        self.entries: dict[str, dict[ModelKind, dict[str, CatalogEntry]]] = {"psi": {}, "phi": {}}
        self._weights: dict[tuple[KahlerModel, str], WeightFunction] = {}
        self._forms: dict[tuple[KahlerModel, str], TestForm] = {}

    def load(self) -> None:
        """Read every ``*.yaml`` file of the catalog directory."""
        files = sorted(self.catalog_dir.glob("*.yaml"))
        if not files:
            raise CatalogError(f"no catalog files in {self.catalog_dir}")
        for path in files:
            with open(path) as f:
                data = yaml.safe_load(f) or {}
            for section in ("psi", "phi"):
                for kind_name, entries in (data.get(section) or {}).items():
                    kind = ModelKind(kind_name)
                    bucket = self.entries[section].setdefault(kind, {})
                    for identifier, record in (entries or {}).items():
                        bucket[identifier] = CatalogEntry(
                            identifier=identifier,
                            family=record["family"],
                            params=dict(record.get("params") or {}),
                            description=record.get("description", ""),
                        )
        logger.debug(
            f"Loaded catalog from {self.catalog_dir}: "
            f"{sum(len(v) for v in self.entries['psi'].values())} psi, "
            f"{sum(len(v) for v in self.entries['phi'].values())} phi entries"
        )

    def _entry(self, section: str, kind: ModelKind, identifier: str) -> CatalogEntry:
        try:
            return self.entries[section][kind][identifier]
        except KeyError:
            raise UnknownCatalogEntry(
                f"{section} entry {identifier!r} not defined for {kind.value}"
            ) from None

    def _build(self, section: str, model: KahlerModel, identifier: str, cls):
        entry = self._entry(section, model.kind, identifier)
        factor = None
        if model.kind is ModelKind.PROJECTIVE_PRODUCT:
            line = make_model(ModelKind.PROJECTIVE_LINE)
            factor_id = entry.params.get("factor", identifier)
            factor = cls(self._entry(section, ModelKind.PROJECTIVE_LINE, factor_id), line)
        return cls(entry, model, factor)

    def weight(self, model: KahlerModel, identifier: str) -> WeightFunction:
        key = (model, identifier)
        if key not in self._weights:
            self._weights[key] = self._build("psi", model, identifier, WeightFunction)
        return self._weights[key]

    def test_form(self, model: KahlerModel, identifier: str) -> TestForm:
        key = (model, identifier)
        if key not in self._forms:
            self._forms[key] = self._build("phi", model, identifier, TestForm)
        return self._forms[key]

    def weight_ids(self, kind: ModelKind) -> list[str]:
        return list(self.entries["psi"].get(kind, {}))

    def form_ids(self, kind: ModelKind) -> list[str]:
        return list(self.entries["phi"].get(kind, {}))

    def test_forms(
        self, model: KahlerModel, identifiers: list[str] | None = None
    ) -> list[TestForm]:
        identifiers = identifiers or self.form_ids(model.kind)
        return [self.test_form(model, identifier) for identifier in identifiers]


_default_manager: CatalogManager | None = None


def get_catalog() -> CatalogManager:
    """Catalog loaded from the configured directory (cached per process)."""
    global _default_manager
    if _default_manager is None:
        from bergman_lab.config import get_config

        manager = CatalogManager(get_config().catalog_dir)
        manager.load()
        _default_manager = manager
    return _default_manager


def reset_catalog() -> None:
    """Forget the cached catalog (used when the config directory changes)."""
    global _default_manager
    _default_manager = None
