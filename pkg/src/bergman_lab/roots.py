"""Zeros of sections of O(d) on the projective line and of pairs on the product.

Polynomials are given by ascending monomial coefficients in chart 0.  Every
point is returned in the chart where its coordinate has modulus at most 1,
so the point at infinity is chart 1, coordinate 0.
"""

import logging

import numpy as np
import scipy.linalg
import sympy
from numpy.polynomial import polynomial as P
from scipy.special import gammaln

from bergman_lab.geometry import PointSet, sphere_coordinates

logger = logging.getLogger(__name__)

ZERO_COEFFICIENT = 1e-14
CLUSTER_TOLERANCE = 1e-8
PROJECTION_TOLERANCE = 1e-6
NEWTON_STEPS = 10
EXACT_BIDEGREE = 6
INTEGER_SCALE = 2**24
SINGULAR_TOLERANCE = 1e-10
TEST_POINTS = (0.3 + 0.7j, -0.6 + 0.2j, 1.1 - 0.4j)


class SectionError(Exception):
    """Base class for zero-finding failures."""


class ZeroSection(SectionError, ValueError):
    """The section is identically zero."""


class DegeneratePair(SectionError):
    """Two sections share a common component, so their zeros are not isolated."""


class ZeroSet:
    """Common zeros as weighted points."""

    def __init__(self, points: PointSet, multiplicities: np.ndarray, expected_total: int):
        self.points = points
        self.multiplicities = np.asarray(multiplicities, dtype=int)
        self.expected_total = expected_total

    def __len__(self) -> int:
        return len(self.multiplicities)

    @property
    def total(self) -> int:
        return int(self.multiplicities.sum())

    def __repr__(self) -> str:
        return f"ZeroSet({len(self)} points, total {self.total} of {self.expected_total})"


def _fs_scale(degree: int) -> np.ndarray:
    """Norms of z^j as sections of O(d): sqrt(j! (d-j)! / (d+1)!)."""
    j = np.arange(degree + 1)
    return np.exp(0.5 * (gammaln(j + 1) + gammaln(degree - j + 1) - gammaln(degree + 2)))


def _polish(coefficients: np.ndarray, zeta: complex) -> complex:
    """Newton steps on a univariate polynomial, kept only while |f| decreases."""
    derivative = P.polyder(coefficients)
    value = P.polyval(zeta, coefficients)
    for _ in range(NEWTON_STEPS):
        slope = P.polyval(zeta, derivative)
        if value == 0 or slope == 0:
            break
        candidate = zeta - value / slope
        new_value = P.polyval(candidate, coefficients)
        if not abs(new_value) < abs(value):
            break
        zeta, value = candidate, new_value
    return complex(zeta)


def _rechart(chart: int, zeta: complex) -> tuple[int, complex]:
    if abs(zeta) > 1.0:
        return 1 - chart, 1.0 / zeta
    return chart, zeta


def polynomial_roots(coefficients) -> list[tuple[int, complex]]:
    """All zeros on the projective line of sum a_j z^j of formal degree d, repeated by multiplicity.

    Coefficients negligible against the largest one (after scaling by the
    norms of z^j) are dropped; a degree drop of k is a zero of order k at
    infinity and k vanishing low coefficients a zero of order k at 0.
    """
    a = np.asarray(coefficients, dtype=complex)
    degree = len(a) - 1
    scaled = np.abs(a) * _fs_scale(degree)
    if not np.all(np.isfinite(scaled)) or scaled.max() == 0:
        raise ZeroSection("polynomial is identically zero")
    keep = np.nonzero(scaled > ZERO_COEFFICIENT * scaled.max())[0]
    low, top = int(keep[0]), int(keep[-1])
    roots = [(0, 0j)] * low + [(1, 0j)] * (degree - top)
    if top > low:
        core = a[low : top + 1]
        for z in scipy.linalg.eigvals(scipy.linalg.companion(core[::-1])):
            if abs(z) <= 1.0:
                chart, zeta, poly = 0, complex(z), a
            else:
                chart, zeta, poly = 1, complex(1.0 / z), a[::-1]
            roots.append(_rechart(chart, _polish(poly, zeta)))
    return roots


def _sphere_vectors(charts: np.ndarray, coords: np.ndarray) -> np.ndarray:
    """Unit-sphere images, shape (k, n, 3), of k points with n projective factors."""
    factors = []
    for j in range(coords.shape[1]):
        factors.append(np.stack(sphere_coordinates(charts[:, j], coords[:, j]), axis=-1))
    return np.stack(factors, axis=1)


def cluster_labels(charts: np.ndarray, coords: np.ndarray, tolerance: float) -> np.ndarray:
    """Greedy clustering by the largest factor chordal distance."""
    vectors = _sphere_vectors(charts, coords)
    labels = np.full(len(coords), -1)
    cluster = 0
    for i in range(len(coords)):
        if labels[i] >= 0:
            continue
        distance = 0.5 * np.linalg.norm(vectors - vectors[i], axis=2).max(axis=1)
        labels[(distance < tolerance) & (labels < 0)] = cluster
        cluster += 1
    return labels


def _merge(charts: np.ndarray, coords: np.ndarray, tolerance: float = CLUSTER_TOLERANCE):
    """Collapse clusters to their first member, returning (charts, coords, multiplicities)."""
    labels = cluster_labels(charts, coords, tolerance)
    first = np.array([np.nonzero(labels == c)[0][0] for c in range(labels.max() + 1)], dtype=int)
    return charts[first], coords[first], np.bincount(labels)


def _point_set(charts: np.ndarray, coords: np.ndarray) -> PointSet:
    """Per-factor chart bits (k, n) -> PointSet with combined chart ids."""
    weights = 1 << np.arange(charts.shape[1])
    return PointSet((charts * weights).sum(axis=1).astype(int), coords.astype(complex))


def line_zeros(coefficients) -> ZeroSet:
    """Zeros of a section of O(d) on the projective line with multiplicities summing to d."""
    a = np.asarray(coefficients, dtype=complex)
    roots = polynomial_roots(a)
    if not roots:
        return ZeroSet(PointSet(np.zeros(0, dtype=int), np.zeros((0, 1), dtype=complex)), [], 0)
    charts = np.array([[c] for c, _ in roots], dtype=int)
    coords = np.array([[z] for _, z in roots], dtype=complex)
    charts, coords, mult = _merge(charts, coords)
    return ZeroSet(_point_set(charts, coords), mult, len(a) - 1)


# --- pairs on the product -------------------------------------------------


def _oriented(C: np.ndarray, z_chart: int, w_chart: int) -> np.ndarray:
    if z_chart:
        C = C[::-1, :]
    if w_chart:
        C = C[:, ::-1]
    return C


def _bipoly(C: np.ndarray, z_chart: int, zeta: complex, w_chart: int, omega: complex):
    """Value and both partial derivatives of sum C_jk z^j w^k in the given charts."""
    oriented = _oriented(C, z_chart, w_chart)
    value = P.polyval2d(zeta, omega, oriented)
    d_zeta = P.polyval2d(zeta, omega, P.polyder(oriented, axis=0)) if oriented.shape[0] > 1 else 0j
    d_omega = P.polyval2d(zeta, omega, P.polyder(oriented, axis=1)) if oriented.shape[1] > 1 else 0j
    return complex(value), complex(d_zeta), complex(d_omega)


def _normalized_size(
    C: np.ndarray, z_chart: int, zeta: complex, w_chart: int, omega: complex
) -> float:
    d, e = C.shape[0] - 1, C.shape[1] - 1
    value = _bipoly(C, z_chart, zeta, w_chart, omega)[0]
    return abs(value) / ((1.0 + abs(zeta) ** 2) ** (0.5 * d) * (1.0 + abs(omega) ** 2) ** (0.5 * e))


def _gaussian_integer_poly(C: np.ndarray, z: sympy.Symbol, w: sympy.Symbol) -> sympy.Expr:
    scale = INTEGER_SCALE / np.abs(C).max()
    terms = []
    for (j, k), c in np.ndenumerate(C):
        re, im = int(round(c.real * scale)), int(round(c.imag * scale))
        if re or im:
            terms.append((re + im * sympy.I) * z**j * w**k)
    return sympy.Add(*terms)


def _exact_resultant(C1: np.ndarray, C2: np.ndarray) -> np.ndarray:
    """Ascending z-coefficients of Res_w(f, g) from integer-scaled coefficients."""
    z, w = sympy.symbols("z w")
    f = _gaussian_integer_poly(C1, z, w)
    g = _gaussian_integer_poly(C2, z, w)
    resultant = sympy.expand(sympy.resultant(f, g, w))
    if resultant == 0:
        raise DegeneratePair("resultant vanishes identically")
    coeffs = [complex(c) for c in sympy.Poly(resultant, z).all_coeffs()[::-1]]
    total = 2 * (C1.shape[0] - 1) * (C1.shape[1] - 1)
    out = np.zeros(total + 1, dtype=complex)
    out[: len(coeffs)] = coeffs
    return out / np.abs(out).max()


def _sylvester_coefficients(C1: np.ndarray, C2: np.ndarray) -> np.ndarray:
    """Sylvester matrix in w as a matrix polynomial in z, shape (d+1, 2e, 2e)."""
    d, e = C1.shape[0] - 1, C1.shape[1] - 1
    S = np.zeros((d + 1, 2 * e, 2 * e), dtype=complex)
    for row in range(e):
        for k in range(e + 1):
            S[:, row, row + e - k] = C1[:, k]
            S[:, e + row, row + e - k] = C2[:, k]
    return S


def _pencil_roots(C1: np.ndarray, C2: np.ndarray) -> list[tuple[int, complex]]:
    """z-projections of the common zeros from a companion linearization of the Sylvester matrix."""
    S = _sylvester_coefficients(C1, C2)
    degree, size = S.shape[0] - 1, S.shape[1]
    for point in TEST_POINTS:
        singular = scipy.linalg.svdvals(P.polyval(point, S))
        if singular[-1] >= SINGULAR_TOLERANCE * singular[0]:
            break
    else:
        raise DegeneratePair("Sylvester matrix is singular at every test point")

    block = degree * size
    A = np.zeros((block, block), dtype=complex)
    B = np.eye(block, dtype=complex)
    A[: block - size, size:] = np.eye(block - size)
    for k in range(degree):
        A[block - size :, k * size : (k + 1) * size] = -S[k]
    B[block - size :, block - size :] = S[degree]
    alpha, beta = scipy.linalg.eig(A, B, right=False, homogeneous_eigvals=True)
    roots = []
    for a, b in zip(alpha, beta):
        if abs(a) <= abs(b):
            roots.append((0, complex(a / b)))
        else:
            roots.append((1, complex(b / a)))
    return roots


def _w_candidates(C1: np.ndarray, C2: np.ndarray, z_chart: int, zeta: complex):
    """Zeros in w of f(z, .) at fixed z, falling back to g(z, .) if f vanishes there."""
    for primary in (C1, C2):
        coefficients = P.polyval(zeta, _oriented(primary, z_chart, 0))
        try:
            return polynomial_roots(coefficients)
        except ZeroSection:
            continue
    raise DegeneratePair(f"both sections vanish on the fibre over z={zeta}")


def _polish_pair(C1: np.ndarray, C2: np.ndarray, point: tuple[int, complex, int, complex]):
    z_chart, zeta, w_chart, omega = point

    def residual(zeta: complex, omega: complex) -> tuple:
        f = _bipoly(C1, z_chart, zeta, w_chart, omega)
        g = _bipoly(C2, z_chart, zeta, w_chart, omega)
        return f, g, np.hypot(abs(f[0]), abs(g[0]))

    f, g, size = residual(zeta, omega)
    for _ in range(NEWTON_STEPS):
        det = f[1] * g[2] - f[2] * g[1]
        if size == 0 or det == 0:
            break
        step_z = (f[0] * g[2] - f[2] * g[0]) / det
        step_w = (f[1] * g[0] - f[0] * g[1]) / det
        candidate = residual(zeta - step_z, omega - step_w)
        if not candidate[2] < size:
            break
        zeta, omega = zeta - step_z, omega - step_w
        f, g, size = candidate
    z_chart, zeta = _rechart(z_chart, zeta)
    w_chart, omega = _rechart(w_chart, omega)
    return z_chart, zeta, w_chart, omega


def product_zeros(C1, C2) -> ZeroSet:
    """Common zeros of two sections of O(d, e) on the product, 2de with multiplicity.

    ``C1`` and ``C2`` hold coefficients of z^j w^k at [j, k].  The first
    coordinate is found by eliminating w (exact resultant for small
    bidegrees, matrix-pencil eigenvalues otherwise), the second by picking
    among the zeros of f(z, .) those where |g| is smallest.
    """
    C1 = np.asarray(C1, dtype=complex)
    C2 = np.asarray(C2, dtype=complex)
    if C1.shape != C2.shape:
        raise ValueError(f"sections of different bidegree: {C1.shape} vs {C2.shape}")
    for C in (C1, C2):
        if not np.abs(C).max() > 0:
            raise ZeroSection("section is identically zero")
    C1 = C1 / np.abs(C1).max()
    C2 = C2 / np.abs(C2).max()
    d, e = C1.shape[0] - 1, C1.shape[1] - 1
    expected = 2 * d * e
    empty = ZeroSet(PointSet(np.zeros(0, dtype=int), np.zeros((0, 2), dtype=complex)), [], expected)
    if expected == 0:
        return empty

    full_degree = np.abs(C1[:, e]).max() > 0 and np.abs(C2[:, e]).max() > 0
    z_roots = None
    if d <= EXACT_BIDEGREE and e <= EXACT_BIDEGREE and full_degree:
        try:
            z_roots = polynomial_roots(_exact_resultant(C1, C2))
        except DegeneratePair:
            raise
        except Exception as e_exact:
            logger.warning(f"Exact resultant failed ({e_exact}); using the floating pencil")
    if z_roots is None:
        z_roots = _pencil_roots(C1, C2)

    z_charts = np.array([[c] for c, _ in z_roots], dtype=int)
    z_coords = np.array([[z] for _, z in z_roots], dtype=complex)
    labels = cluster_labels(z_charts, z_coords, PROJECTION_TOLERANCE)
    points = []
    for cluster in range(labels.max() + 1):
        members = np.nonzero(labels == cluster)[0]
        z_chart, zeta = int(z_charts[members[0], 0]), complex(z_coords[members[0], 0])
        candidates = sorted(
            _w_candidates(C1, C2, z_chart, zeta),
            key=lambda wc: _normalized_size(C2, z_chart, zeta, wc[0], wc[1])
            + _normalized_size(C1, z_chart, zeta, wc[0], wc[1]),
        )
        for i in range(len(members)):
            w_chart, omega = candidates[min(i, len(candidates) - 1)]
            points.append(_polish_pair(C1, C2, (z_chart, zeta, w_chart, omega)))

    charts = np.array([[zc, wc] for zc, _, wc, _ in points], dtype=int)
    coords = np.array([[z, w] for _, z, _, w in points], dtype=complex)
    charts, coords, mult = _merge(charts, coords)
    zeros = ZeroSet(_point_set(charts, coords), mult, expected)
    if zeros.total != expected:
        logger.warning(f"Found {zeros.total} common zeros, expected {expected}")
    return zeros
