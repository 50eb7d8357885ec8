"""The flat model kernel and the near-diagonal comparison with Bergman kernels."""

import functools
import logging
import math
from dataclasses import dataclass

import numpy as np
import sympy
from scipy.special import roots_legendre

from bergman_lab.bergman import OrthonormalBasis, bergman_kernel2
from bergman_lab.geometry import (
    ChartPoint,
    KahlerModel,
    PointSet,
    TwoForm,
    chart_radius,
    reference_matrix,
    relative_matrices,
)

logger = logging.getLogger(__name__)

GRID_SIDE = 9


class ModelKernelError(Exception):
    """Base class for model-kernel failures."""


class WindowTooLarge(ModelKernelError, ValueError):
    """A rescaled window leaves the chart around the base point."""


@dataclass(frozen=True, eq=False)
class ModelFrame:
    """Curvature eigenvalues and adapted coordinates at a base point.

    Chart coordinates near the base point are x0 + chart_map @ Z; in Z the
    reference form is the identity and omega is diag(a / 2pi) at Z = 0.
    """
    model: KahlerModel
    base_point: ChartPoint
    a: tuple[float, ...]
    chart_map: np.ndarray

    @property
    def complex_dim(self) -> int:
        return len(self.a)

    def points(self, Z: np.ndarray, scale: float = 1.0) -> PointSet:
        """Chart points x0 + scale * chart_map @ Z for Z of shape (N, n)."""
        Z = np.atleast_2d(np.asarray(Z, dtype=complex))
        coords = np.asarray(self.base_point.coords)[None, :] + scale * Z @ self.chart_map.T
        return PointSet(np.full(len(Z), self.base_point.chart_id, dtype=int), coords)

    def kappa(self, Z: np.ndarray) -> np.ndarray:
        """Volume distortion det H_theta(x0 + MZ) / det H_theta(x0); kappa(0) = 1."""
        base = PointSet.from_points([self.base_point])
        density0 = np.real(np.linalg.det(reference_matrix(self.model, base)))[0]
        density = np.real(np.linalg.det(reference_matrix(self.model, self.points(Z))))
        return density / density0


def make_frame(model: KahlerModel, omega: TwoForm, x0: ChartPoint) -> ModelFrame:
    """Diagonalize omega against the reference form at x0."""
    base = PointSet.from_points([x0])
    h_theta = reference_matrix(model, base)[0]
    relative = relative_matrices(omega.matrix(base), h_theta[None])[0]
    eigenvalues, vectors = np.linalg.eigh(relative)
    if np.any(eigenvalues <= 0):
        raise ValueError(f"{omega.name or 'form'} is not positive at {x0}")
    chol = np.linalg.cholesky(h_theta)
    chart_map = np.conj(np.linalg.solve(chol.conj().T, vectors))
    return ModelFrame(
        model=model,
        base_point=x0,
        a=tuple(float(2.0 * math.pi * v) for v in eigenvalues),
        chart_map=chart_map,
    )


@dataclass(frozen=True)
class ModelKernelValue:
    """One value of the model kernel with its arguments."""
    value: complex
    z: tuple[complex, ...]
    z_prime: tuple[complex, ...]


def model_kernel(frame: ModelFrame, Z, Z_prime):
    """Pi (a_j/2pi) exp(-1/4 sum a_j (|z_j|^2 + |z'_j|^2 - 2 z_j conj(z'_j))).

    Arguments broadcast over leading axes; the last axis has length n.
    """
    Z = np.asarray(Z, dtype=complex)
    Zp = np.asarray(Z_prime, dtype=complex)
    a = np.asarray(frame.a)
    exponent = -0.25 * np.sum(
        a * (np.abs(Z) ** 2 + np.abs(Zp) ** 2 - 2.0 * Z * np.conj(Zp)), axis=-1
    )
    value = np.prod(a / (2.0 * math.pi)) * np.exp(exponent)
    return complex(value) if np.ndim(value) == 0 else value


def model_kernel_value(frame: ModelFrame, Z, Z_prime) -> ModelKernelValue:
    return ModelKernelValue(
        value=model_kernel(frame, Z, Z_prime),
        z=tuple(complex(c) for c in np.atleast_1d(Z)),
        z_prime=tuple(complex(c) for c in np.atleast_1d(Z_prime)),
    )


# --- annihilation ---------------------------------------------------------


@functools.lru_cache(maxsize=32)
def _annihilation_functions(n: int, corruption: str | None):
    """Lambdified b_j^+ P(., Z') for j = 1..n, optionally with P multiplied by a factor."""
    z = sympy.symbols(f"z1:{n + 1}")
    zb = sympy.symbols(f"zb1:{n + 1}")
    zp = sympy.symbols(f"zp1:{n + 1}")
    zpb = sympy.symbols(f"zpb1:{n + 1}")
    a = sympy.symbols(f"a1:{n + 1}", positive=True)
    exponent = -sympy.Rational(1, 4) * sum(
        a[j] * (z[j] * zb[j] + zp[j] * zpb[j] - 2 * z[j] * zpb[j]) for j in range(n)
    )
    kernel = sympy.Mul(*[a[j] / (2 * sympy.pi) for j in range(n)]) * sympy.exp(exponent)
    if corruption:
        names = {str(s): s for s in (*z, *zb)}
        kernel = kernel * sympy.sympify(corruption, locals=names)
    residuals = [
        sympy.simplify(2 * sympy.diff(kernel, zb[j]) + a[j] / 2 * z[j] * kernel) for j in range(n)
    ]
    arguments = (*z, *zb, *zp, *zpb, *a)
    return [sympy.lambdify(arguments, r, modules="numpy") for r in residuals]


def annihilation_residual(frame: ModelFrame, Z, Z_prime, corruption: str | None = None):
    """sum_j |(2 d/dzbar_j + a_j z_j / 2) P(Z, Z')|, from symbolic derivatives.

    ``corruption`` is an optional factor in z1.., zb1.. multiplied into the
    kernel before differentiating.
    """
    single = np.ndim(Z) <= 1
    Z = np.atleast_2d(np.asarray(Z, dtype=complex))
    Zp = np.broadcast_to(np.atleast_2d(np.asarray(Z_prime, dtype=complex)), Z.shape)
    n = frame.complex_dim
    arguments = [*Z.T, *np.conj(Z).T, *Zp.T, *np.conj(Zp).T, *frame.a]
    total = np.zeros(len(Z))
    for residual in _annihilation_functions(n, corruption):
        values = np.broadcast_to(np.asarray(residual(*arguments), dtype=complex), total.shape)
        total = total + np.abs(values)
    return float(total[0]) if single else total


# --- reproducing property -------------------------------------------------


def line_grid(radius: float, side: int = GRID_SIDE) -> np.ndarray:
    """Square grid of side x side complex points in [-q, q]^2 kept inside |z| <= q."""
    ticks = np.linspace(-radius, radius, side)
    grid = (ticks[:, None] + 1j * ticks[None, :]).ravel()
    return grid[np.abs(grid) <= radius * (1.0 + 1e-12)]


def window_grid(n: int, radius: float, side: int = GRID_SIDE) -> np.ndarray:
    """Test arguments Z of shape (M, n), each nonzero in at most one coordinate.

    For n >= 2 this is the union of the coordinate discs of the window, not the
    product window: pairs (Z, Z') built from it move along the axes only.
    """
    line = line_grid(radius, side)
    blocks = []
    for j in range(n):
        block = np.zeros((len(line), n), dtype=complex)
        block[:, j] = line
        blocks.append(block)
    return np.concatenate(blocks)


def _line_kernel(a: float, z: np.ndarray, w: np.ndarray) -> np.ndarray:
    z, w = z[:, None], w[None, :]
    return (a / (2.0 * math.pi)) * np.exp(
        -0.25 * a * (np.abs(z) ** 2 + np.abs(w) ** 2 - 2.0 * z * np.conj(w))
    )


def reproducing_defect(
    frame: ModelFrame,
    box_radius: float,
    nodes_per_axis: int = 96,
    test_radius: float = 1.0,
) -> float:
    """Certified bound on |int P(Z,W) P(W,Z') dW - P(Z,Z')| over the product window.

    Z and Z' range over all of line_grid(test_radius)^n. The integral over the
    box [-R, R]^(2n) factorizes per coordinate and is computed with a
    Gauss-Legendre product rule; the Gaussian tail outside the box is bounded
    analytically. Per-axis suprema are combined by telescoping, so the bound
    holds for every pair of the product grid, off-axis pairs included.
    """
    x, w = roots_legendre(nodes_per_axis)
    x = box_radius * x
    w = box_radius * w
    nodes = (x[:, None] + 1j * x[None, :]).ravel()
    weights = np.outer(w, w).ravel()
    line = line_grid(test_radius)
    midpoint = 0.5 * np.abs(line[:, None] + line[None, :])
    gap = np.clip(box_radius - midpoint, 0.0, None)
    spread = np.abs(line[:, None] - line[None, :]) ** 2

    diff, computed, exact, tail = [], [], [], []
    for a in frame.a:
        integral = (_line_kernel(a, line, nodes) * weights[None, :]) @ _line_kernel(a, nodes, line)
        target = _line_kernel(a, line, line)
        diff.append(float(np.abs(integral - target).max()))
        computed.append(float(np.abs(integral).max()))
        exact.append(float(np.abs(target).max()))
        bound = (a / (2.0 * math.pi)) * np.exp(-a * spread / 8.0 - a * gap**2 / 2.0)
        tail.append(float(bound.max()))

    # prod I - prod E = sum_j (I_j - E_j) prod_{k<j} I_k prod_{k>j} E_k
    n = frame.complex_dim
    worst = sum(
        diff[j] * math.prod(computed[:j]) * math.prod(exact[j + 1 :]) for j in range(n)
    )
    worst += math.prod(c + t for c, t in zip(computed, tail)) - math.prod(computed)
    logger.debug(f"Reproducing defect at R={box_radius}: {worst:.3g}")
    return float(worst)


# --- rescaled comparison --------------------------------------------------


def rescaled_comparison(
    onb: OrthonormalBasis,
    frame: ModelFrame,
    A_p: float,
    window_radius: float,
) -> float:
    """sup over the window grid of |A^-n P_p(x, x') kappa^1/2 kappa'^1/2 - |P(Z, Z')||.

    x = x0 + M Z / sqrt(A) and x' = x0 + M Z' / sqrt(A).
    """
    n = frame.complex_dim
    Z = window_grid(n, window_radius)
    scale = 1.0 / math.sqrt(A_p)
    reach = float(np.abs(Z @ frame.chart_map.T).max()) * scale
    if reach > chart_radius(frame.model):
        raise WindowTooLarge(
            f"window radius {window_radius} at A_p={A_p:g} reaches {reach:.3g} in the chart "
            f"(limit {chart_radius(frame.model):g})"
        )
    points = frame.points(Z, scale)
    kernel = bergman_kernel2(onb, points, points) / A_p**n
    root_kappa = np.sqrt(frame.kappa(Z * scale))
    rescaled = kernel * root_kappa[:, None] * root_kappa[None, :]
    model = np.abs(model_kernel(frame, Z[:, None, :], Z[None, :, :]))
    return float(np.abs(rescaled - model).max())
