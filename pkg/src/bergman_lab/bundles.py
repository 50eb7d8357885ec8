"""Hermitian line bundles, bundle sequences and diophantine rays."""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np
import sympy
from sympy.ntheory.continued_fraction import (
    continued_fraction_convergents,
    continued_fraction_iterator,
)

from bergman_lab.catalog import WeightFunction
from bergman_lab.geometry import (
    KahlerModel,
    ModelKind,
    PointSet,
    PointsLike,
    QuadratureRule,
    TwoForm,
    as_point_set,
    default_rule,
    integrate,
    pairing_rule,
    reference_matrix,
    relative_eigenvalues,
    wedge_density,
)

logger = logging.getLogger(__name__)

POSITIVITY_TOLERANCE = 1e-12


class BundleError(Exception):
    """Base class for bundle failures."""


class PositivityLost(BundleError):
    """A curvature form that must be positive has a non-positive eigenvalue."""


class NonPositiveRay(BundleError, ValueError):
    """A semiclassical ray has a non-positive entry."""


class SequenceKind(Enum):
    """How L_p is produced from p."""
    POWER_RAY = "power-ray"
    MULTI_RAY = "multi-ray"
    PERTURBED_POWER = "perturbed-power"


@dataclass(frozen=True, eq=False)
class HermitianLineBundle:
    """A line bundle on a model with metric h_std^degree * exp(-2 sum s*psi).

    ``degree`` is (d,) on the projective line and the torus and (d, e) on the
    product.  Each perturbation is a (psi, scale) pair.
    """
    model: KahlerModel
    degree: tuple[int, ...]
    perturbations: tuple[tuple[WeightFunction, float], ...] = ()

    @property
    def is_perturbed(self) -> bool:
        return any(scale != 0.0 for _, scale in self.perturbations)

    @property
    def total_degree(self) -> int:
        return sum(self.degree)

    def log_weight(self, points: PointSet) -> np.ndarray:
        """sum s*psi(x), so that |e|_h = |e|_std * exp(-log_weight)."""
        total = np.zeros(len(points))
        for weight, scale in self.perturbations:
            if scale != 0.0:
                total = total + scale * weight.value(points)
        return total

    def tensor(self, other: "HermitianLineBundle") -> "HermitianLineBundle":
        if other.model != self.model:
            raise BundleError("cannot tensor bundles on different models")
        degree = tuple(a + b for a, b in zip(self.degree, other.degree))
        return HermitianLineBundle(self.model, degree, self.perturbations + other.perturbations)

    def power(self, k: int) -> "HermitianLineBundle":
        if k < 0:
            raise BundleError(f"negative tensor power {k}")
        perturbations = tuple((w, k * s) for w, s in self.perturbations) if k else ()
        return HermitianLineBundle(self.model, tuple(k * d for d in self.degree), perturbations)

    def describe(self) -> str:
        name = f"O{self.degree if len(self.degree) > 1 else self.degree[0]}"
        for weight, scale in self.perturbations:
            name += f"*exp(-2*{scale:.4g}*{weight.identifier})"
        return name


def make_bundle(
    model: KahlerModel,
    degree: int | Sequence[int],
    perturbations: Sequence[tuple[WeightFunction, float]] = (),
    check: bool = True,
) -> HermitianLineBundle:
    """Build a bundle, checking curvature positivity at the quadrature nodes."""
    degrees = (degree,) if isinstance(degree, int) else tuple(int(d) for d in degree)
    expected = 2 if model.kind is ModelKind.PROJECTIVE_PRODUCT else 1
    if len(degrees) == 1 and expected == 2:
        degrees = degrees * 2
    if len(degrees) != expected:
        raise BundleError(f"{model.describe()} needs {expected} degree entries, got {degrees}")
    if any(d < 0 for d in degrees):
        raise BundleError(f"negative degree {degrees}")
    if model.kind is ModelKind.FLAT_TORUS and degrees[0] < 1:
        raise BundleError("torus polarization multiple must be at least 1")
    bundle = HermitianLineBundle(model, degrees, tuple(perturbations))
    if check and bundle.is_perturbed:
        check_positivity(bundle, default_rule(model, degrees).nodes)
    return bundle


def relative_curvature(bundle: HermitianLineBundle, points: PointSet) -> np.ndarray:
    """Diagonal entries of c_1 relative to the reference form, shape (N, n).

    Catalog weights have diagonal Levi forms in chart coordinates, so these
    are the relative eigenvalues.
    """
    out = np.tile(np.asarray(bundle.degree, dtype=float), (len(points), 1))
    for weight, scale in bundle.perturbations:
        if scale != 0.0:
            out = out + scale * weight.relative_levi(points)
    return out


def check_positivity(bundle: HermitianLineBundle, points: PointSet) -> None:
    """Raise PositivityLost unless c_1 is positive (semipositive on degree-0 factors)."""
    relative = relative_curvature(bundle, points)
    degree = np.asarray(bundle.degree)
    strict = degree > 0
    low = relative.min(axis=0)
    bad = (strict & (low <= POSITIVITY_TOLERANCE)) | (~strict & (low < -POSITIVITY_TOLERANCE))
    if np.any(bad):
        raise PositivityLost(
            f"curvature of {bundle.describe()} reaches {low.min():.3g} relative to the "
            f"reference form; the perturbation is too large"
        )


def curvature_matrix(bundle: HermitianLineBundle, points: PointSet) -> np.ndarray:
    """Matrix of c_1(L, h) at each point without positivity checks, shape (N, n, n)."""
    reference = reference_matrix(bundle.model, points)
    return reference * relative_curvature(bundle, points)[:, :, None]


def chern_curvature(bundle: HermitianLineBundle, x: PointsLike) -> np.ndarray:
    """Matrix of the curvature form c_1(L, h) = deg*omega_std + sum s*dd^c psi."""
    points, single = as_point_set(x)
    check_positivity(bundle, points)
    matrix = curvature_matrix(bundle, points)
    return matrix[0] if single else matrix


def curvature_form(bundle: HermitianLineBundle) -> TwoForm:
    """c_1(L, h) as a TwoForm."""
    multiple = None
    if not bundle.is_perturbed and len(set(bundle.degree)) == 1:
        multiple = float(bundle.degree[0])
    return TwoForm(
        model=bundle.model,
        evaluator=lambda pts: curvature_matrix(bundle, pts),
        name=f"c1({bundle.describe()})",
        reference_multiple=multiple,
    )


def curvature_lower_bound(bundle: HermitianLineBundle, grid: PointSet) -> float:
    """Grid minimum of the smallest curvature eigenvalue, 2*pi normalized."""
    relative = relative_eigenvalues(
        curvature_matrix(bundle, grid), reference_matrix(bundle.model, grid)
    )
    return float(2.0 * math.pi * relative.min())


def spectral_gap_bound(bundle: HermitianLineBundle, grid: PointSet, constant: float) -> float:
    """Lower bound 2*a_L - C for the spectrum of the Kodaira Laplacian on positive forms."""
    return 2.0 * curvature_lower_bound(bundle, grid) - constant


def mass(bundle: HermitianLineBundle, rule: QuadratureRule | None = None) -> float:
    """Integral of c_1(L, h) ^ theta^(n-1)."""
    model = bundle.model
    rule = rule or pairing_rule(model)

    def integrand(points: PointSet) -> np.ndarray:
        reference = reference_matrix(model, points)
        forms = [curvature_matrix(bundle, points)] + [reference] * (model.complex_dim - 1)
        return wedge_density(forms, reference)

    return integrate(model, integrand, rule).real


# --- diophantine rays -----------------------------------------------------


@dataclass(frozen=True)
class RayTuple:
    """One exponent vector m at denominator p with its achieved bound."""
    p: int
    m: tuple[int, ...]
    bound: float


@dataclass(frozen=True)
class RayApproximation:
    """Integer approximations m_p / p of a real ray r."""
    rays: tuple[str, ...]
    values: tuple[float, ...]
    tuples: tuple[RayTuple, ...]
    bound: float

    def exponents(self, p: int) -> tuple[int, ...] | None:
        for entry in self.tuples:
            if entry.p == p:
                return entry.m
        return None

    def verify(self) -> bool:
        """Recompute every tuple's achieved bound and compare with what is stored."""
        exprs = [sympy.sympify(r) for r in self.rays]
        increasing = all(b.p > a.p for a, b in zip(self.tuples, self.tuples[1:]))
        return increasing and all(
            _achieved_bound(exprs, entry.p, entry.m) <= entry.bound <= self.bound
            for entry in self.tuples
        )


def _parse_ray(value) -> sympy.Expr:
    if isinstance(value, str):
        expr = sympy.sympify(value)
    elif isinstance(value, float):
        expr = sympy.Rational(value)
    else:
        expr = sympy.sympify(value)
    positive = expr.is_positive
    if positive is None:
        positive = float(sympy.N(expr)) > 0
    if not positive:
        raise NonPositiveRay(f"ray entries must be positive, got {value!r}")
    return expr


def _achieved_bound(exprs: Sequence[sympy.Expr], p: int, m: Sequence[int]) -> float:
    worst = max(abs(sympy.Rational(mj, p) - r) * p**2 for r, mj in zip(exprs, m))
    return float(sympy.N(worst, 30))


def _round(expr: sympy.Expr, p: int) -> int:
    return int(sympy.floor(expr * p + sympy.Rational(1, 2)))


def diophantine_ray(rays: Sequence, depth: int) -> RayApproximation:
    """Exponent tuples m_p with |m_{j,p}/p - r_j| <= C/p^2 on the listed p.

    A single ray uses its continued-fraction convergents, extended by multiples
    of the last denominator when the ray is rational.  Several rays are rounded
    on the convergent denominators of the first irrational ray (or on multiples
    of the common denominator when all rays are rational).
    """
    if depth < 1:
        raise ValueError(f"depth must be at least 1, got {depth}")
    if not rays:
        raise ValueError("need at least one ray")
    exprs = [_parse_ray(r) for r in rays]

    pairs: list[tuple[int, tuple[int, ...]]] = []
    if len(exprs) == 1:
        for conv in continued_fraction_convergents(continued_fraction_iterator(exprs[0])):
            q, m = int(sympy.denom(conv)), int(sympy.numer(conv))
            if not pairs or q > pairs[-1][0]:
                pairs.append((q, (m,)))
            if len(pairs) == depth:
                break
        last = pairs[-1][0]
        multiple = 2
        while len(pairs) < depth:
            q = last * multiple
            pairs.append((q, (_round(exprs[0], q),)))
            multiple += 1
    else:
        irrational = next((e for e in exprs if e.is_rational is False), None)
        denominators: list[int] = []
        if irrational is not None:
            for conv in continued_fraction_convergents(continued_fraction_iterator(irrational)):
                q = int(sympy.denom(conv))
                if not denominators or q > denominators[-1]:
                    denominators.append(q)
                if len(denominators) == depth:
                    break
        else:
            common = math.lcm(*(int(sympy.denom(e)) for e in exprs))
            denominators = [common * k for k in range(1, depth + 1)]
        pairs = [(q, tuple(_round(e, q) for e in exprs)) for q in denominators]

    tuples = tuple(RayTuple(p=q, m=m, bound=_achieved_bound(exprs, q, m)) for q, m in pairs)
    approximation = RayApproximation(
        rays=tuple(str(e) for e in exprs),
        values=tuple(float(sympy.N(e, 20)) for e in exprs),
        tuples=tuples,
        bound=max(t.bound for t in tuples),
    )
    denominators = [t.p for t in tuples]
    logger.debug(f"Ray {approximation.rays}: p={denominators}, C={approximation.bound:.4g}")
    return approximation


# --- sequences ------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BundleSequence:
    """Rule p -> (L_p, h_p) with normalization A_p = p and limit form omega."""
    kind: SequenceKind
    model: KahlerModel
    base: tuple[HermitianLineBundle, ...]
    exponent: float = math.inf
    weight: WeightFunction | None = None
    approximation: RayApproximation | None = None

    def A(self, p: int) -> float:
        return float(p)

    @property
    def rays(self) -> tuple[float, ...]:
        if self.approximation is None:
            return (1.0,)
        return self.approximation.values

    def exponents_at(self, p: int) -> tuple[int, ...]:
        if self.kind is not SequenceKind.MULTI_RAY:
            return (p,)
        listed = self.approximation.exponents(p)
        if listed is not None:
            return listed
        return tuple(int(math.floor(r * p + 0.5)) for r in self.rays)

    def bundle_at(self, p: int) -> HermitianLineBundle:
        if p < 0:
            raise BundleError(f"negative index p={p}")
        if self.kind is SequenceKind.POWER_RAY:
            return self.base[0].power(p)
        if self.kind is SequenceKind.PERTURBED_POWER:
            powered = self.base[0].power(p)
            scale = float(p) ** (1.0 - self.exponent) if p > 0 else 0.0
            bundle = HermitianLineBundle(
                self.model, powered.degree, powered.perturbations + ((self.weight, scale),)
            )
            if p > 0:
                check_positivity(bundle, default_rule(self.model, bundle.degree).nodes)
            return bundle
        bundles = [f.power(m) for f, m in zip(self.base, self.exponents_at(p))]
        return _tensor_all(bundles)

    @property
    def limit_form(self) -> TwoForm:
        forms = [curvature_form(f).scaled(r) for f, r in zip(self.base, self.rays)]
        total = forms[0]
        for form in forms[1:]:
            total = total + form
        return total

    def describe(self) -> str:
        text = f"{self.kind.value} of {', '.join(b.describe() for b in self.base)}"
        if self.kind is SequenceKind.PERTURBED_POWER:
            text += f" by {self.weight.identifier} with a={self.exponent:g}"
        if self.kind is SequenceKind.MULTI_RAY:
            text += f" along r={self.approximation.rays}"
        return text


def _tensor_all(bundles: Sequence[HermitianLineBundle]) -> HermitianLineBundle:
    result = bundles[0]
    for bundle in bundles[1:]:
        result = result.tensor(bundle)
    return result


def power_ray(bundle: HermitianLineBundle) -> BundleSequence:
    """L_p = F^p with A_p = p and omega = c_1(F)."""
    _require_positive(bundle)
    return BundleSequence(SequenceKind.POWER_RAY, bundle.model, (bundle,))


def perturbed_power(
    bundle: HermitianLineBundle, weight: WeightFunction, a: float
) -> BundleSequence:
    """L_p = F^p with metric h^p * exp(-2 p^(1-a) psi), converging to c_1(F) at rate p^-a."""
    if not a > 0:
        raise ValueError(f"approximation exponent must be positive, got {a}")
    _require_positive(bundle)
    return BundleSequence(
        SequenceKind.PERTURBED_POWER, bundle.model, (bundle,), exponent=float(a), weight=weight
    )


def multi_ray(
    bundles: Sequence[HermitianLineBundle], rays: Sequence, depth: int = 8
) -> BundleSequence:
    """L_p = F_1^{m_1,p} x ... x F_k^{m_k,p} along a diophantine ray."""
    if len(bundles) != len(rays):
        raise BundleError(f"{len(bundles)} bundles for {len(rays)} rays")
    if any(b.model != bundles[0].model for b in bundles):
        raise BundleError("ray bundles live on different models")
    _require_positive(bundles[0])
    for bundle in bundles[1:]:
        if bundle.is_perturbed:
            check_positivity(bundle, default_rule(bundle.model, 1).nodes)
    approximation = diophantine_ray(rays, depth)
    return BundleSequence(
        SequenceKind.MULTI_RAY,
        bundles[0].model,
        tuple(bundles),
        exponent=2.0,
        approximation=approximation,
    )


def _require_positive(bundle: HermitianLineBundle) -> None:
    if any(d <= 0 for d in bundle.degree):
        raise PositivityLost(f"{bundle.describe()} is not positive")
    if bundle.is_perturbed:
        check_positivity(bundle, default_rule(bundle.model, bundle.degree).nodes)


def approximation_defect(seq: BundleSequence, p: int, grid: PointSet) -> float:
    """Grid max of the operator norm of A_p^-1 c_1(L_p) - omega measured against theta."""
    bundle = seq.bundle_at(p)
    difference = curvature_matrix(bundle, grid) / seq.A(p) - seq.limit_form.matrix(grid)
    eigenvalues = relative_eigenvalues(difference, reference_matrix(seq.model, grid))
    return float(np.abs(eigenvalues).max())

