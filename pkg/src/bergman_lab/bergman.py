"""Holomorphic section bases, Gram matrices and Bergman kernels.

Sections are always evaluated already multiplied by their pointwise frame
norm, so ``|values|^2`` is the h_p-norm squared and nothing overflows at high
degree.  On the projective line the degree-d monomial z^k is evaluated as

    (r/sqrt(1+r^2))^k (1/sqrt(1+r^2))^(d-k) exp(i k arg z),

and in the chart w = 1/z the same section is w^(d-k).
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from bergman_lab.bundles import HermitianLineBundle, make_bundle
from bergman_lab.geometry import (
    KahlerModel,
    ModelKind,
    NotPositive,
    PointSet,
    PointsLike,
    QuadratureRule,
    as_point_set,
    default_rule,
    factor_charts,
    integrate,
    make_model,
    reduce_to_fundamental_domain,
)
from bergman_lab.theta import theta_values

logger = logging.getLogger(__name__)

CHUNK_SIZE = 4096
MAX_CONDITION = 1e8
CHOLESKY_CONDITION = 1e6
HERMITIAN_TOLERANCE = 1e-12
RICHARDSON_TOLERANCE = 1e-8


class BergmanError(Exception):
    """Base class for kernel computation failures."""


class IllConditioned(BergmanError):
    """Gram matrix condition number above the supported limit."""


def _chunks(count: int, size: int = CHUNK_SIZE):
    for start in range(0, count, size):
        yield slice(start, min(start + size, count))


# --- bases ----------------------------------------------------------------


def _line_sections(
    degree: int, chart: np.ndarray, zeta: np.ndarray, derivatives: bool
) -> tuple[np.ndarray, np.ndarray | None]:
    """Norm-scaled monomials of O(degree) and their chart derivatives, shape (N, d+1)."""
    r = np.abs(zeta)
    a = (r / np.sqrt(1.0 + r**2))[:, None]
    b = (1.0 / np.sqrt(1.0 + r**2))[:, None]
    angle = np.angle(zeta)[:, None]
    j = np.arange(degree + 1)[None, :]
    k = np.where(chart[:, None] == 1, degree - j, j)
    values = a**k * b ** (degree - k) * np.exp(1j * k * angle)
    if not derivatives:
        return values, None
    lowered = np.maximum(k - 1, 0)
    slopes = k * a**lowered * b ** (degree - lowered) * np.exp(1j * lowered * angle)
    return values, slopes


def _line_frame_norm(degree: int, zeta: np.ndarray) -> np.ndarray:
    return (1.0 + np.abs(zeta) ** 2) ** (-0.5 * degree)


@dataclass(frozen=True, eq=False)
class SectionBasis:
    """Canonical basis of H^0(X, L) for a model bundle.

    ``labels`` lists the exponent tuple (or theta characteristic index) of
    each basis section in chart 0.
    """
    bundle: HermitianLineBundle
    labels: tuple[tuple[int, ...], ...] = field(default=())

    @property
    def model(self) -> KahlerModel:
        return self.bundle.model

    @property
    def size(self) -> int:
        return len(self.labels)

    def _unperturbed(self, points: PointSet, derivatives: bool):
        model = self.model
        degree = self.bundle.degree
        if model.kind is ModelKind.PROJECTIVE_LINE:
            chart, zeta = factor_charts(model, points)[0]
            values, slopes = _line_sections(degree[0], chart, zeta, derivatives)
            return values, None if slopes is None else slopes[:, :, None]
        if model.kind is ModelKind.PROJECTIVE_PRODUCT:
            (c1, z1), (c2, z2) = factor_charts(model, points)
            v1, s1 = _line_sections(degree[0], c1, z1, derivatives)
            v2, s2 = _line_sections(degree[1], c2, z2, derivatives)
            count = len(points)
            values = (v1[:, :, None] * v2[:, None, :]).reshape(count, -1)
            if not derivatives:
                return values, None
            dz = (s1[:, :, None] * v2[:, None, :]).reshape(count, -1)
            dw = (v1[:, :, None] * s2[:, None, :]).reshape(count, -1)
            return values, np.stack([dz, dw], axis=2)
        values, slopes = theta_values(model, degree[0], points.coords[:, 0], derivatives)
        return values, None if slopes is None else slopes[:, :, None]

    def evaluate(self, x: PointsLike) -> np.ndarray:
        """Norm-scaled section values, shape (N, d_p)."""
        points, single = as_point_set(x)
        values, _ = self._unperturbed(points, derivatives=False)
        if self.bundle.is_perturbed:
            values = values * np.exp(-self.bundle.log_weight(points))[:, None]
        return values[0] if single else values

    def evaluate_with_derivatives(self, points: PointSet) -> tuple[np.ndarray, np.ndarray]:
        """Values (N, d_p) and holomorphic chart derivatives (N, d_p, n), same scaling."""
        values, slopes = self._unperturbed(points, derivatives=True)
        if self.bundle.is_perturbed:
            factor = np.exp(-self.bundle.log_weight(points))
            values = values * factor[:, None]
            slopes = slopes * factor[:, None, None]
        return values, slopes

    def frame_norm(self, points: PointSet) -> np.ndarray:
        """Pointwise norm |e|_h of the chart frame, shape (N,)."""
        model = self.model
        degree = self.bundle.degree
        if model.kind is ModelKind.FLAT_TORUS:
            y = reduce_to_fundamental_domain(model, points.coords[:, 0]).imag
            norm = np.exp(-math.pi * degree[0] * y**2 / model.tau.imag)
        else:
            norm = np.ones(len(points))
            for d, (_, zeta) in zip(degree, factor_charts(model, points)):
                norm = norm * _line_frame_norm(d, zeta)
        return norm * np.exp(-self.bundle.log_weight(points))

    def holomorphic_values(self, x: PointsLike) -> np.ndarray:
        """Raw chart values f_j (torus points taken at their reduced representative)."""
        points, single = as_point_set(x)
        values = self.evaluate(points) / self.frame_norm(points)[:, None]
        return values[0] if single else values


def raw_basis(bundle: HermitianLineBundle) -> SectionBasis:
    """The model's canonical basis: monomials, bi-monomials or theta functions."""
    degree = bundle.degree
    if bundle.model.kind is ModelKind.PROJECTIVE_LINE:
        labels = tuple((j,) for j in range(degree[0] + 1))
    elif bundle.model.kind is ModelKind.PROJECTIVE_PRODUCT:
        labels = tuple((j, k) for j in range(degree[0] + 1) for k in range(degree[1] + 1))
    else:
        labels = tuple((j,) for j in range(degree[0]))
    return SectionBasis(bundle=bundle, labels=labels)


def dimension(bundle: HermitianLineBundle) -> int:
    """d_p = dim H^0(X, L)."""
    degree = bundle.degree
    if bundle.model.kind is ModelKind.PROJECTIVE_LINE:
        return degree[0] + 1
    if bundle.model.kind is ModelKind.PROJECTIVE_PRODUCT:
        return (degree[0] + 1) * (degree[1] + 1)
    return degree[0]


# --- Gram matrices --------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GramMatrix:
    """Hermitian matrix G_jk = <f_j, f_k> with its Jacobi-scaled condition number."""
    matrix: np.ndarray
    condition: float
    basis: SectionBasis | None = None
    rule: QuadratureRule | None = None
    error_estimate: float = 0.0

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def from_matrix(
        cls,
        matrix,
        basis: SectionBasis | None = None,
        rule: QuadratureRule | None = None,
        error_estimate: float = 0.0,
    ) -> "GramMatrix":
        matrix = np.atleast_2d(np.asarray(matrix, dtype=complex))
        scale = np.abs(matrix).max() if matrix.size else 0.0
        asymmetry = np.abs(matrix - matrix.conj().T).max() if matrix.size else 0.0
        if asymmetry > HERMITIAN_TOLERANCE * max(scale, 1.0):
            raise BergmanError(f"Gram matrix is not Hermitian (asymmetry {asymmetry:.3g})")
        matrix = 0.5 * (matrix + matrix.conj().T)
        return cls(
            matrix=matrix,
            condition=_scaled_condition(matrix),
            basis=basis,
            rule=rule,
            error_estimate=error_estimate,
        )


def _jacobi_scale(matrix: np.ndarray) -> np.ndarray:
    diagonal = np.real(np.diag(matrix))
    if np.any(diagonal <= 0) or not np.all(np.isfinite(diagonal)):
        raise NotPositive("Gram matrix has a non-positive diagonal entry")
    return 1.0 / np.sqrt(diagonal)


def _scaled_condition(matrix: np.ndarray) -> float:
    scale = _jacobi_scale(matrix)
    eigenvalues = scipy.linalg.eigvalsh(scale[:, None] * matrix * scale[None, :])
    if eigenvalues[0] <= 0:
        raise NotPositive(
            f"Gram matrix is not positive definite (min eigenvalue {eigenvalues[0]:.3g})"
        )
    return float(eigenvalues[-1] / eigenvalues[0])


def _dense_gram(basis: SectionBasis, rule: QuadratureRule) -> np.ndarray:
    size = basis.size
    matrix = np.zeros((size, size), dtype=complex)
    for part in _chunks(len(rule)):
        values = basis.evaluate(rule.nodes.take(part))
        matrix += (np.conj(values).T * rule.weights[part]) @ values
    return matrix


def _line_gram(basis: SectionBasis, rule: QuadratureRule) -> np.ndarray:
    """Projective-line Gram from the radial x angular structure of the rule.

    With |u_j|^2 = s^j (1-s)^(d-j) and a weight factor W(s, theta), the entry
    G_jk is sum_a w_a amp_j amp_k What_a(k - j), where What_a is the discrete
    Fourier coefficient of W over the angular nodes of radial node a.
    """
    degree = basis.bundle.degree[0]
    s, s_weights = rule.radial
    j = np.arange(degree + 1)
    amplitude = np.exp(
        0.5 * j[None, :] * np.log(s)[:, None] + 0.5 * (degree - j)[None, :] * np.log1p(-s)[:, None]
    )
    if not basis.bundle.is_perturbed:
        return np.diag(s_weights @ amplitude**2).astype(complex)

    weight = np.exp(-2.0 * basis.bundle.log_weight(rule.nodes)).reshape(len(s), rule.n_angle)
    spectrum = np.fft.ifft(weight, axis=1)
    offsets = np.mod(j[None, :] - j[:, None], rule.n_angle)
    matrix = np.zeros((degree + 1, degree + 1), dtype=complex)
    step = max(1, 2_000_000 // (degree + 1) ** 2)
    for part in _chunks(len(s), step):
        outer = amplitude[part, :, None] * amplitude[part, None, :]
        matrix += np.einsum("a,ajk,ajk->jk", s_weights[part], outer, spectrum[part][:, offsets])
    return matrix


def _product_factor_bundles(bundle: HermitianLineBundle) -> list[HermitianLineBundle] | None:
    """Per-factor bundles when the weight splits as psi(z) + psi(w), else None."""
    for weight, _ in bundle.perturbations:
        if weight.factor is None or weight.entry.family != "product-sum":
            return None
    line = make_model(ModelKind.PROJECTIVE_LINE)
    perturbations = tuple((w.factor, s) for w, s in bundle.perturbations)
    return [make_bundle(line, d, perturbations, check=False) for d in bundle.degree]


def _assemble(basis: SectionBasis, rule: QuadratureRule) -> np.ndarray:
    kind = basis.model.kind
    if kind is ModelKind.PROJECTIVE_LINE and rule.radial is not None:
        if rule.n_angle >= 2 * basis.bundle.degree[0] + 1:
            return _line_gram(basis, rule)
    if kind is ModelKind.PROJECTIVE_PRODUCT and len(rule.factors) == 2:
        factors = _product_factor_bundles(basis.bundle)
        if factors is not None and all(
            f.radial is not None and f.n_angle >= 2 * b.degree[0] + 1
            for f, b in zip(rule.factors, factors)
        ):
            first, second = (_line_gram(raw_basis(b), f) for b, f in zip(factors, rule.factors))
            return np.kron(first, second)
    return _dense_gram(basis, rule)


def _scaled_difference(fine: np.ndarray, coarse: np.ndarray) -> float:
    scale = 1.0 / np.sqrt(np.real(np.diag(fine)))
    return float(np.abs(scale[:, None] * (fine - coarse) * scale[None, :]).max())


def gram_matrix(basis: SectionBasis, rule: QuadratureRule | None = None) -> GramMatrix:
    """Quadrature Gram matrix of a basis.

    Without an explicit rule the default rule for the bundle degree is used;
    perturbed weights get a rule with twice the nodes and a Richardson error
    estimate against the single rule.
    """
    bundle = basis.bundle
    error = 0.0
    if rule is None:
        oversample = 2 if bundle.is_perturbed else 1
        rule = default_rule(basis.model, bundle.degree, oversample=oversample)
        matrix = _assemble(basis, rule)
        if bundle.is_perturbed:
            coarse = _assemble(basis, default_rule(basis.model, bundle.degree))
            error = _scaled_difference(matrix, coarse)
            if error > RICHARDSON_TOLERANCE:
                logger.warning(
                    f"Gram of {bundle.describe()}: quadrature error estimate {error:.3g}"
                )
    else:
        matrix = _assemble(basis, rule)

    gram = GramMatrix.from_matrix(matrix, basis=basis, rule=rule, error_estimate=error)
    logger.debug(f"Gram of {bundle.describe()}: size {gram.size}, condition {gram.condition:.3g}")
    if gram.condition > MAX_CONDITION:
        raise IllConditioned(
            f"Gram of {bundle.describe()} has condition {gram.condition:.3g} > {MAX_CONDITION:g}"
        )
    return gram


# --- orthonormal bases ----------------------------------------------------


@dataclass(frozen=True, eq=False)
class OrthonormalBasis:
    """Sections S_k = sum_j T_jk f_j with T^H G T = I."""
    basis: SectionBasis | None
    transform: np.ndarray
    method: str
    gram: GramMatrix

    @property
    def size(self) -> int:
        return self.transform.shape[1]

    @property
    def bundle(self) -> HermitianLineBundle:
        return self.basis.bundle

    @property
    def model(self) -> KahlerModel:
        return self.basis.model

    def values(self, points: PointSet) -> np.ndarray:
        """Norm-scaled orthonormal sections, shape (N, d_p)."""
        out = np.empty((len(points), self.size), dtype=complex)
        for part in _chunks(len(points)):
            out[part] = self.basis.evaluate(points.take(part)) @ self.transform
        return out

    def monomial_coefficients(self, coefficients: np.ndarray) -> np.ndarray:
        """Coefficients in the raw basis of the section sum_k c_k S_k."""
        return self.transform @ np.asarray(coefficients, dtype=complex)


def orthonormalize(gram: GramMatrix) -> OrthonormalBasis:
    """Whitening transform of a Gram matrix: inverse Cholesky or eigen-whitening."""
    matrix = gram.matrix
    scale = _jacobi_scale(matrix)
    scaled = scale[:, None] * matrix * scale[None, :]
    if gram.condition < CHOLESKY_CONDITION:
        try:
            chol = scipy.linalg.cholesky(scaled, lower=True)
        except np.linalg.LinAlgError as exc:
            raise NotPositive("Gram matrix is not positive definite") from exc
        inverse = scipy.linalg.solve_triangular(chol, np.eye(len(scale)), lower=True)
        transform = scale[:, None] * inverse.conj().T
        method = "cholesky"
    else:
        eigenvalues, vectors = scipy.linalg.eigh(scaled)
        if eigenvalues[0] <= 0:
            raise NotPositive("Gram matrix is not positive definite")
        transform = scale[:, None] * (vectors / np.sqrt(eigenvalues)[None, :])
        method = "svd"
        logger.warning(f"Gram condition {gram.condition:.3g}: using eigen-whitening")
    return OrthonormalBasis(basis=gram.basis, transform=transform, method=method, gram=gram)


def orthonormal_basis(
    bundle: HermitianLineBundle, rule: QuadratureRule | None = None
) -> OrthonormalBasis:
    """raw_basis -> gram_matrix -> orthonormalize."""
    return orthonormalize(gram_matrix(raw_basis(bundle), rule))


# --- kernels --------------------------------------------------------------


def bergman_function(onb: OrthonormalBasis, x: PointsLike):
    """P_p(x) = sum |S_j(x)|^2_h."""
    points, single = as_point_set(x)
    out = np.empty(len(points))
    for part in _chunks(len(points)):
        out[part] = np.sum(np.abs(onb.values(points.take(part))) ** 2, axis=1)
    return float(out[0]) if single else out


def bergman_kernel2(onb: OrthonormalBasis, x: PointsLike, y: PointsLike):
    """|P_p(x, y)| with pointwise norms at both arguments.

    Single points give a float; point sets give the (len(x), len(y)) matrix.
    """
    xs, x_single = as_point_set(x)
    ys, y_single = as_point_set(y)
    kernel = np.abs(onb.values(xs) @ np.conj(onb.values(ys)).T)
    if x_single and y_single:
        return float(kernel[0, 0])
    if x_single:
        return kernel[0]
    if y_single:
        return kernel[:, 0]
    return kernel


def fubini_study_current(onb: OrthonormalBasis, x: PointsLike) -> np.ndarray:
    """Matrix of gamma_p = (i/2pi) d dbar log sum |S_j|^2 in chart coordinates.

    H_jk = (||F||^2 <F_j, F_k> - <F_j, F><F, F_k>) / (pi ||F||^4) with
    F_j = dF/dz_j.  The common real frame factor cancels.
    """
    points, single = as_point_set(x)
    n = onb.model.complex_dim
    out = np.empty((len(points), n, n), dtype=complex)
    for part in _chunks(len(points)):
        raw, slopes = onb.basis.evaluate_with_derivatives(points.take(part))
        values = raw @ onb.transform
        derivs = np.einsum("njc,jk->nkc", slopes, onb.transform)
        norm2 = np.sum(np.abs(values) ** 2, axis=1)
        cross = np.einsum("nkj,nkl->njl", derivs, np.conj(derivs))
        mixed = np.einsum("nkj,nk->nj", derivs, np.conj(values))
        out[part] = (
            cross / norm2[:, None, None]
            - mixed[:, :, None] * np.conj(mixed)[:, None, :] / norm2[:, None, None] ** 2
        ) / math.pi
    return out[0] if single else out


def kernel_bounds(onb: OrthonormalBasis, grid: PointSet, A_p: float) -> float:
    """Smallest M with A^n / M <= P_p <= M A^n on the grid."""
    ratio = bergman_function(onb, grid) / A_p ** onb.model.complex_dim
    return float(max(ratio.max(), 1.0 / ratio.min()))


def log_kernel_l1(onb: OrthonormalBasis, rule: QuadratureRule, A_p: float) -> float:
    """Integral of |log P_p| divided by A_p."""
    model = onb.model
    return integrate(model, lambda pts: np.abs(np.log(bergman_function(onb, pts))), rule).real / A_p
