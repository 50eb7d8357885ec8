"""Model Kähler manifolds: charts, reference metrics, quadrature and curvature.

Conventions used throughout the package:

- A real (1,1)-form is stored by its coefficient matrix H, meaning
  alpha = (i/2) * sum H_jk dz_j ^ dzbar_k.  With this normalization
  alpha^n / n! = det(H) times Lebesgue measure of the chart.
- ``dd^c = (i/pi) d dbar``.  A metric written |e|^2 = exp(-2 phi) has
  curvature c_1 = dd^c phi, whose matrix is (2/pi) [d_j dbar_k phi].
- The projective line has two charts: 0 is the affine coordinate z,
  1 is w = 1/z.  The product uses bit 0 of the chart id for the first
  factor and bit 1 for the second.  The torus has one chart.
"""

import itertools
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterator, Sequence

import numpy as np
from scipy.special import roots_legendre

logger = logging.getLogger(__name__)

GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))
VOLUME_TOLERANCE = 1e-10


class GeometryError(Exception):
    """Base class for geometry failures."""


class InvalidParams(GeometryError, ValueError):
    """Model parameters outside their admissible range."""


class NonFiniteIntegrand(GeometryError, ArithmeticError):
    """An integrand evaluated to NaN or infinity at a quadrature node."""


class NotPositive(GeometryError, ValueError):
    """A (1,1)-form expected to be positive definite is not."""


class ModelKind(Enum):
    """The three model manifolds."""
    PROJECTIVE_LINE = "projective-line"
    PROJECTIVE_PRODUCT = "projective-product"
    FLAT_TORUS = "flat-torus"


@dataclass(frozen=True)
class ChartPoint:
    """A point of a model given by its chart and chart coordinates."""
    chart_id: int
    coords: tuple[complex, ...]


@dataclass(frozen=True)
class KahlerModel:
    """A model manifold with its normalized reference Kähler form."""
    kind: ModelKind
    complex_dim: int
    tau: complex | None = None

    @property
    def chart_ids(self) -> tuple[int, ...]:
        if self.kind is ModelKind.PROJECTIVE_LINE:
            return (0, 1)
        if self.kind is ModelKind.PROJECTIVE_PRODUCT:
            return (0, 1, 2, 3)
        return (0,)

    @property
    def reference_scalar_curvature(self) -> float:
        """Scalar curvature of the reference metric (constant on every model)."""
        if self.kind is ModelKind.PROJECTIVE_LINE:
            return 8.0 * math.pi
        if self.kind is ModelKind.PROJECTIVE_PRODUCT:
            return 16.0 * math.pi
        return 0.0

    def describe(self) -> str:
        if self.kind is ModelKind.FLAT_TORUS:
            return f"{self.kind.value}(tau={self.tau})"
        return self.kind.value


@dataclass(frozen=True, eq=False)
class PointSet:
    """Vectorized collection of chart points.

    ``chart_ids`` has shape (N,) and ``coords`` has shape (N, n).
    """
    chart_ids: np.ndarray
    coords: np.ndarray

    def __len__(self) -> int:
        return len(self.chart_ids)

    def __iter__(self) -> Iterator[ChartPoint]:
        for i in range(len(self)):
            yield self.point(i)

    def point(self, index: int) -> ChartPoint:
        return ChartPoint(
            chart_id=int(self.chart_ids[index]),
            coords=tuple(complex(c) for c in self.coords[index]),
        )

    def take(self, index) -> "PointSet":
        return PointSet(self.chart_ids[index], self.coords[index])

    def shifted(self, delta: np.ndarray) -> "PointSet":
        """Same charts, coordinates moved by ``delta`` (broadcast over points)."""
        return PointSet(self.chart_ids, self.coords + delta)

    @classmethod
    def from_points(cls, points: Sequence[ChartPoint]) -> "PointSet":
        if not points:
            raise ValueError("empty point list")
        chart_ids = np.array([p.chart_id for p in points], dtype=int)
        coords = np.array([p.coords for p in points], dtype=complex)
        return cls(chart_ids, coords.reshape(len(points), -1))

    @classmethod
    def concatenate(cls, sets: Sequence["PointSet"]) -> "PointSet":
        return cls(
            np.concatenate([s.chart_ids for s in sets]),
            np.concatenate([s.coords for s in sets]),
        )


PointsLike = ChartPoint | PointSet | Sequence[ChartPoint]


def as_point_set(x: PointsLike) -> tuple[PointSet, bool]:
    """Normalize a point argument; the flag tells whether it was a single point."""
    if isinstance(x, PointSet):
        return x, False
    if isinstance(x, ChartPoint):
        return PointSet.from_points([x]), True
    return PointSet.from_points(list(x)), False


def _unwrap(values: np.ndarray, single: bool):
    return values[0] if single else values


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Nodes and positive weights integrating against dv_X."""
    model: KahlerModel
    nodes: PointSet
    weights: np.ndarray
    declared_degree: int
    radial: tuple[np.ndarray, np.ndarray] | None = None
    n_angle: int = 0
    factors: tuple["QuadratureRule", ...] = ()

    def __len__(self) -> int:
        return len(self.weights)

    @property
    def total_volume(self) -> float:
        return float(np.sum(self.weights))


def make_model(kind: ModelKind | str, params: dict | None = None) -> KahlerModel:
    """Build a model with its unit-volume reference metric."""
    kind = ModelKind(kind)
    params = params or {}
    if kind is ModelKind.PROJECTIVE_LINE:
        return KahlerModel(kind=kind, complex_dim=1)
    if kind is ModelKind.PROJECTIVE_PRODUCT:
        return KahlerModel(kind=kind, complex_dim=2)

    tau = parse_complex(params.get("tau", 1j))
    if not math.isfinite(tau.real) or not math.isfinite(tau.imag) or tau.imag <= 0:
        raise InvalidParams(f"flat torus needs Im(tau) > 0, got tau={tau}")
    return KahlerModel(kind=kind, complex_dim=1, tau=tau)


def parse_complex(value) -> complex:
    """Accept a complex, a number, a ``[re, im]`` pair or ``{"re": .., "im": ..}``."""
    if isinstance(value, dict):
        return complex(float(value.get("re", 0.0)), float(value.get("im", 0.0)))
    if isinstance(value, (list, tuple)):
        if len(value) != 2:
            raise InvalidParams(f"complex pair must have two entries, got {value!r}")
        return complex(float(value[0]), float(value[1]))
    if isinstance(value, str):
        return complex(value.replace(" ", "").replace("i", "j"))
    return complex(value)


# --- charts ---------------------------------------------------------------


def factor_charts(model: KahlerModel, points: PointSet) -> list[tuple[np.ndarray, np.ndarray]]:
    """Split points into per-factor (chart bit, coordinate) arrays."""
    if model.kind is ModelKind.PROJECTIVE_PRODUCT:
        return [
            (points.chart_ids & 1, points.coords[:, 0]),
            ((points.chart_ids >> 1) & 1, points.coords[:, 1]),
        ]
    return [(points.chart_ids, points.coords[:, 0])]


def sphere_coordinates(chart: np.ndarray, zeta: np.ndarray) -> tuple[np.ndarray, ...]:
    """Unit-sphere coordinates (x1, x2, x3) of projective-line points.

    Chart 0 point z maps to x1 + i x2 = 2z/(1+|z|^2), x3 = (|z|^2-1)/(|z|^2+1),
    so z = 0 is the south pole and z = infinity the north pole.
    """
    zeta = np.asarray(zeta, dtype=complex)
    r2 = np.abs(zeta) ** 2
    denom = 1.0 + r2
    planar = np.where(chart == 1, 2.0 * np.conj(zeta), 2.0 * zeta) / denom
    x3 = np.where(chart == 1, (1.0 - r2) / denom, (r2 - 1.0) / denom)
    return planar.real, planar.imag, x3


def sphere_to_chart(
    x1: np.ndarray, x2: np.ndarray, x3: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of :func:`sphere_coordinates`, picking the chart with |coordinate| <= 1."""
    planar = np.asarray(x1) + 1j * np.asarray(x2)
    x3 = np.asarray(x3, dtype=float)
    north = x3 > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        south_coord = planar / (1.0 - x3)
        north_coord = np.conj(planar) / (1.0 + x3)
    coords = np.where(north, north_coord, south_coord)
    return north.astype(int), coords


def chordal_distance(chart_a, zeta_a, chart_b, zeta_b) -> np.ndarray:
    """Chordal distance on the projective line (half the Euclidean sphere distance)."""
    a = np.stack(sphere_coordinates(np.asarray(chart_a), zeta_a))
    b = np.stack(sphere_coordinates(np.asarray(chart_b), zeta_b))
    return 0.5 * np.linalg.norm(a - b, axis=0)


def to_chart(model: KahlerModel, points: PointSet, chart_id: int) -> PointSet:
    """Re-express points in the given chart."""
    if model.kind is ModelKind.FLAT_TORUS:
        return points
    target_bits = [chart_id & 1, (chart_id >> 1) & 1]
    columns = []
    for index, (bits, zeta) in enumerate(factor_charts(model, points)):
        flip = bits != target_bits[index]
        with np.errstate(divide="ignore", invalid="ignore"):
            columns.append(np.where(flip, 1.0 / zeta, zeta))
    coords = np.stack(columns, axis=1)
    return PointSet(np.full(len(points), chart_id, dtype=int), coords)


def torus_lattice_coords(model: KahlerModel, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Real coordinates (s, t) with z = s + t*tau."""
    tau = model.tau
    t = np.imag(z) / tau.imag
    s = np.real(z) - t * tau.real
    return s, t


def reduce_to_fundamental_domain(model: KahlerModel, z: np.ndarray) -> np.ndarray:
    """Translate torus coordinates into the parallelogram spanned by 1 and tau."""
    s, t = torus_lattice_coords(model, np.asarray(z, dtype=complex))
    return np.mod(s, 1.0) + np.mod(t, 1.0) * model.tau


def chart_radius(model: KahlerModel) -> float:
    """Largest coordinate displacement used by local windows around a base point."""
    if model.kind is not ModelKind.FLAT_TORUS:
        return 2.0
    shortest = min(
        abs(a + b * model.tau)
        for a, b in itertools.product(range(-2, 3), repeat=2)
        if (a, b) != (0, 0)
    )
    return 0.5 * shortest


# --- reference metric -----------------------------------------------------


def _fs_density(zeta: np.ndarray) -> np.ndarray:
    return 1.0 / (math.pi * (1.0 + np.abs(zeta) ** 2) ** 2)


def reference_matrix(model: KahlerModel, points: PointSet) -> np.ndarray:
    """Matrix of the reference form at each point, shape (N, n, n)."""
    count = len(points)
    n = model.complex_dim
    out = np.zeros((count, n, n), dtype=complex)
    if model.kind is ModelKind.FLAT_TORUS:
        out[:, 0, 0] = 1.0 / model.tau.imag
        return out
    for index, (_, zeta) in enumerate(factor_charts(model, points)):
        out[:, index, index] = _fs_density(zeta)
    return out


@dataclass(frozen=True, eq=False)
class TwoForm:
    """A real (1,1)-form given by its coefficient matrix function.

    ``reference_multiple`` is set when the form is a constant multiple of the
    model's reference form; curvature quantities then use closed forms.
    """
    model: KahlerModel
    evaluator: Callable[[PointSet], np.ndarray]
    name: str = ""
    reference_multiple: float | None = None

    def matrix(self, x: PointsLike) -> np.ndarray:
        points, single = as_point_set(x)
        return _unwrap(np.asarray(self.evaluator(points), dtype=complex), single)

    def scaled(self, factor: float) -> "TwoForm":
        multiple = None if self.reference_multiple is None else factor * self.reference_multiple
        return TwoForm(
            model=self.model,
            evaluator=lambda pts: factor * self.evaluator(pts),
            name=f"{factor:g}*{self.name}",
            reference_multiple=multiple,
        )

    def __add__(self, other: "TwoForm") -> "TwoForm":
        if other.model != self.model:
            raise ValueError("forms live on different models")
        multiple = None
        if self.reference_multiple is not None and other.reference_multiple is not None:
            multiple = self.reference_multiple + other.reference_multiple
        return TwoForm(
            model=self.model,
            evaluator=lambda pts: self.evaluator(pts) + other.evaluator(pts),
            name=f"{self.name}+{other.name}",
            reference_multiple=multiple,
        )


def reference_form(model: KahlerModel) -> TwoForm:
    """The reference Kähler form of the model."""
    return TwoForm(
        model=model,
        evaluator=lambda pts: reference_matrix(model, pts),
        name="theta",
        reference_multiple=1.0,
    )


def volume_density(model: KahlerModel, x: PointsLike):
    """Density of dv_X against the chart's Lebesgue measure."""
    points, single = as_point_set(x)
    density = np.real(np.linalg.det(reference_matrix(model, points)))
    return float(density[0]) if single else density


# --- derivatives ----------------------------------------------------------


def real_derivatives(
    func: Callable[[PointSet], np.ndarray],
    points: PointSet,
    step: float = 1e-4,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Value, gradient and Hessian in real chart coordinates by central differences.

    Real coordinates are ordered (Re z_1, Im z_1, Re z_2, Im z_2, ...).
    Returns arrays of shape (N,), (N, D) and (N, D, D) with D = 2n.
    """
    n = points.coords.shape[1]
    dim = 2 * n
    directions = np.zeros((dim, n), dtype=complex)
    for j in range(n):
        directions[2 * j, j] = 1.0
        directions[2 * j + 1, j] = 1j

    def at(delta: np.ndarray) -> np.ndarray:
        return np.asarray(func(points.shifted(delta)), dtype=float)

    center = at(np.zeros(n, dtype=complex))
    grad = np.empty((len(points), dim))
    hess = np.empty((len(points), dim, dim))
    plus = [at(step * directions[a]) for a in range(dim)]
    minus = [at(-step * directions[a]) for a in range(dim)]
    for a in range(dim):
        grad[:, a] = (plus[a] - minus[a]) / (2.0 * step)
        hess[:, a, a] = (plus[a] - 2.0 * center + minus[a]) / step**2
    for a, b in itertools.combinations(range(dim), 2):
        da, db = step * directions[a], step * directions[b]
        mixed = (at(da + db) - at(da - db) - at(-da + db) + at(-da - db)) / (4.0 * step**2)
        hess[:, a, b] = mixed
        hess[:, b, a] = mixed
    return center, grad, hess


def complex_hessian(
    func: Callable[[PointSet], np.ndarray],
    points: PointSet,
    step: float = 1e-4,
) -> np.ndarray:
    """Matrix [d_j dbar_k f] of a real function, shape (N, n, n)."""
    _, _, hess = real_derivatives(func, points, step)
    n = points.coords.shape[1]
    out = np.empty((len(points), n, n), dtype=complex)
    for j in range(n):
        for k in range(n):
            xx = hess[:, 2 * j, 2 * k]
            yy = hess[:, 2 * j + 1, 2 * k + 1]
            xy = hess[:, 2 * j, 2 * k + 1]
            yx = hess[:, 2 * j + 1, 2 * k]
            out[:, j, k] = 0.25 * (xx + yy + 1j * (xy - yx))
    return out


# --- curvature ------------------------------------------------------------


def relative_matrices(h_forms: np.ndarray, h_theta: np.ndarray) -> np.ndarray:
    """Whiten stacked Hermitian matrices against H_theta: L^-1 H L^-H."""
    try:
        chol = np.linalg.cholesky(h_theta)
    except np.linalg.LinAlgError as exc:
        raise NotPositive("reference form is not positive definite") from exc
    inverse = np.linalg.inv(chol)
    relative = inverse @ h_forms @ np.conj(np.swapaxes(inverse, -1, -2))
    return 0.5 * (relative + np.conj(np.swapaxes(relative, -1, -2)))


def relative_eigenvalues(h_omega: np.ndarray, h_theta: np.ndarray) -> np.ndarray:
    """Ascending eigenvalues of H_omega relative to H_theta, shape (N, n)."""
    return np.linalg.eigvalsh(relative_matrices(h_omega, h_theta))


def curvature_eigenvalues(omega: TwoForm, theta: TwoForm, x: PointsLike):
    """The a_j = 2*pi*(eigenvalues of omega relative to theta), ascending."""
    points, single = as_point_set(x)
    eigenvalues = relative_eigenvalues(omega.matrix(points), theta.matrix(points))
    if np.any(eigenvalues <= 0):
        raise NotPositive(f"{omega.name or 'form'} is not positive definite at every point")
    values = 2.0 * math.pi * eigenvalues
    return [float(v) for v in values[0]] if single else values


def wedge_density(h_forms: Sequence[np.ndarray], h_theta: np.ndarray) -> np.ndarray:
    """Density of alpha_1 ^ ... ^ alpha_n against dv_X.

    With R_i the matrices relative to theta this is the inclusion-exclusion
    sum over subsets S of (-1)^(n-|S|) det(sum_{i in S} R_i), so theta^n
    has density n!.
    """
    n = h_theta.shape[-1]
    if len(h_forms) != n:
        raise ValueError(f"need {n} forms for a top-degree wedge, got {len(h_forms)}")
    relative = [relative_matrices(h, h_theta) for h in h_forms]
    total = np.zeros(h_theta.shape[0])
    for size in range(1, n + 1):
        sign = (-1.0) ** (n - size)
        for subset in itertools.combinations(range(n), size):
            partial = sum(relative[i] for i in subset)
            total += sign * np.real(np.linalg.det(partial))
    return total


def scalar_curvature(model: KahlerModel, x: PointsLike, form: TwoForm | None = None):
    """Scalar curvature of the Riemannian metric induced by ``form`` (default: reference).

    r = -4 tr(H^-1 d dbar log det H).  Multiples c*theta use r_theta / c; other
    forms fall back to central differences of log det H.
    """
    points, single = as_point_set(x)
    if form is None or form.reference_multiple is not None:
        multiple = 1.0 if form is None else form.reference_multiple
        values = np.full(len(points), model.reference_scalar_curvature / multiple)
        return float(values[0]) if single else values

    def log_det(pts: PointSet) -> np.ndarray:
        return np.log(np.real(np.linalg.det(form.matrix(pts))))

    ricci = complex_hessian(log_det, points)
    h = form.matrix(points)
    values = -4.0 * np.real(np.trace(np.linalg.solve(h, ricci), axis1=-2, axis2=-1))
    return float(values[0]) if single else values


# --- quadrature -----------------------------------------------------------


def projective_line_rule(model: KahlerModel, n_radial: int, n_angle: int) -> QuadratureRule:
    """Gauss-Legendre in s = |z|^2/(1+|z|^2) times uniform angles; dv = ds dtheta / 2pi."""
    x, w = roots_legendre(n_radial)
    s = 0.5 * (x + 1.0)
    s_weights = 0.5 * w
    theta = 2.0 * math.pi * np.arange(n_angle) / n_angle
    S, TH = np.meshgrid(s, theta, indexing="ij")
    north = S > 0.5
    coords = np.where(
        north,
        np.sqrt((1.0 - S) / S) * np.exp(-1j * TH),
        np.sqrt(S / (1.0 - S)) * np.exp(1j * TH),
    )
    weights = np.repeat(s_weights, n_angle) / n_angle
    nodes = PointSet(north.astype(int).ravel(), coords.reshape(-1, 1))
    return QuadratureRule(
        model=model,
        nodes=nodes,
        weights=weights,
        declared_degree=min(2 * n_radial - 1, n_angle - 1),
        radial=(s, s_weights),
        n_angle=n_angle,
    )


def product_rule(
    model: KahlerModel, first: QuadratureRule, second: QuadratureRule
) -> QuadratureRule:
    """Tensor product of two projective-line rules, first factor major."""
    a = np.repeat(np.arange(len(first)), len(second))
    b = np.tile(np.arange(len(second)), len(first))
    chart_ids = first.nodes.chart_ids[a] + 2 * second.nodes.chart_ids[b]
    coords = np.stack([first.nodes.coords[a, 0], second.nodes.coords[b, 0]], axis=1)
    return QuadratureRule(
        model=model,
        nodes=PointSet(chart_ids, coords),
        weights=np.outer(first.weights, second.weights).ravel(),
        declared_degree=min(first.declared_degree, second.declared_degree),
        factors=(first, second),
    )


def torus_rule(model: KahlerModel, n: int) -> QuadratureRule:
    """Uniform n x n trapezoid grid on the fundamental parallelogram."""
    grid = np.arange(n) / n
    S, T = np.meshgrid(grid, grid, indexing="ij")
    z = (S + T * model.tau).reshape(-1, 1)
    return QuadratureRule(
        model=model,
        nodes=PointSet(np.zeros(n * n, dtype=int), z.astype(complex)),
        weights=np.full(n * n, 1.0 / (n * n)),
        declared_degree=n - 1,
    )


def default_rule(
    model: KahlerModel, degree: int | Sequence[int], oversample: int = 1
) -> QuadratureRule:
    """Rule tied to the bundle degree so unperturbed Gram integrands are exact."""
    degrees = [degree] if isinstance(degree, int) else list(degree)
    if model.kind is ModelKind.PROJECTIVE_LINE:
        count = (2 * degrees[0] + 8) * oversample
        return projective_line_rule(model, count, count)
    if model.kind is ModelKind.PROJECTIVE_PRODUCT:
        if len(degrees) == 1:
            degrees = degrees * 2
        line = make_model(ModelKind.PROJECTIVE_LINE)
        rules = [
            projective_line_rule(line, (2 * d + 8) * oversample, (2 * d + 8) * oversample)
            for d in degrees
        ]
        return product_rule(model, rules[0], rules[1])
    return torus_rule(model, (4 * degrees[0] + 16) * oversample)


def pairing_rule(model: KahlerModel, resolution: int = 64) -> QuadratureRule:
    """Moderate fixed rule for smooth pairings that do not need degree exactness."""
    if model.kind is ModelKind.PROJECTIVE_LINE:
        return projective_line_rule(model, resolution, resolution)
    if model.kind is ModelKind.PROJECTIVE_PRODUCT:
        line = make_model(ModelKind.PROJECTIVE_LINE)
        factor = projective_line_rule(line, resolution // 2, resolution // 2)
        return product_rule(model, factor, factor)
    return torus_rule(model, resolution)


def integrate(
    model: KahlerModel,
    integrand: Callable[[PointSet], np.ndarray],
    rule: QuadratureRule,
) -> complex:
    """Sum of w_i * f(x_i) over the rule, reduced in node order by numpy's pairwise sum.

    ``integrand`` receives the whole node set; wrap scalar functions with
    :func:`pointwise`.
    """
    if rule.model != model:
        raise ValueError(f"rule built for {rule.model.describe()}, not {model.describe()}")
    values = np.asarray(integrand(rule.nodes), dtype=complex).reshape(-1)
    if values.shape[0] != len(rule):
        raise ValueError(f"integrand returned {values.shape[0]} values for {len(rule)} nodes")
    bad = ~np.isfinite(values)
    if np.any(bad):
        raise NonFiniteIntegrand(
            f"integrand is not finite at {int(bad.sum())} of {len(rule)} nodes"
        )
    return complex(np.sum(rule.weights * values))


def pointwise(func: Callable[[ChartPoint], complex]) -> Callable[[PointSet], np.ndarray]:
    """Adapt a per-point function to the vectorized integrand signature."""
    def vectorized(points: PointSet) -> np.ndarray:
        return np.array([func(p) for p in points], dtype=complex)
    return vectorized


# --- sample grids ---------------------------------------------------------


def fibonacci_sphere(count: int) -> PointSet:
    """Spherical Fibonacci lattice on the projective line."""
    index = np.arange(count)
    x3 = 1.0 - (2.0 * index + 1.0) / count
    radius = np.sqrt(np.clip(1.0 - x3**2, 0.0, None))
    angle = index * GOLDEN_ANGLE
    chart, coords = sphere_to_chart(radius * np.cos(angle), radius * np.sin(angle), x3)
    return PointSet(chart, coords.reshape(-1, 1))


def sample_grid(model: KahlerModel, count: int) -> PointSet:
    """Deterministic, roughly uniform evaluation grid of ``count`` points."""
    if count < 1:
        raise ValueError("grid needs at least one point")
    if model.kind is ModelKind.PROJECTIVE_LINE:
        return fibonacci_sphere(count)
    side = math.ceil(math.sqrt(count))
    if model.kind is ModelKind.PROJECTIVE_PRODUCT:
        factor = fibonacci_sphere(side)
        a = np.repeat(np.arange(side), side)[:count]
        b = np.tile(np.arange(side), side)[:count]
        chart_ids = factor.chart_ids[a] + 2 * factor.chart_ids[b]
        coords = np.stack([factor.coords[a, 0], factor.coords[b, 0]], axis=1)
        return PointSet(chart_ids, coords)
    offsets = (np.arange(side) + 0.5) / side
    S, T = np.meshgrid(offsets, offsets, indexing="ij")
    z = (S + T * model.tau).ravel()[:count]
    return PointSet(np.zeros(count, dtype=int), z.reshape(-1, 1))
