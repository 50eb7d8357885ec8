"""Random holomorphic sections, their zero currents and exceptional sets."""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import gammaln
from scipy.stats import linregress, norm

from bergman_lab.bergman import (
    OrthonormalBasis,
    dimension,
    fubini_study_current,
    orthonormal_basis,
)
from bergman_lab.bundles import BundleSequence, curvature_matrix
from bergman_lab.catalog import TestForm
from bergman_lab.geometry import (
    KahlerModel,
    ModelKind,
    PointSet,
    QuadratureRule,
    TwoForm,
    integrate,
    pairing_rule,
    reference_matrix,
    wedge_density,
)
from bergman_lab.rng import SectionStream, section_stream
from bergman_lab.roots import DegeneratePair, ZeroSet, line_zeros, product_zeros
from bergman_lab.runner import run_ordered

logger = logging.getLogger(__name__)

MIN_EXCEPTIONAL_SAMPLES = 50
WILSON_CONFIDENCE = 0.95


@dataclass(frozen=True, eq=False)
class SectionSample:
    """Unit coefficient vector in an orthonormal basis, with its provenance."""
    coefficients: np.ndarray
    monomial: np.ndarray
    degree: tuple[int, ...]
    seed: int
    p: int
    index: int


def sample_section(onb: OrthonormalBasis, stream: SectionStream) -> SectionSample:
    """Draw from the Fubini-Study volume of P(H^0) via a normalized complex Gaussian."""
    draws = stream.complex_gaussian(onb.size)
    coefficients = draws / np.linalg.norm(draws)
    return SectionSample(
        coefficients=coefficients,
        monomial=onb.monomial_coefficients(coefficients),
        degree=onb.bundle.degree,
        seed=stream.seed,
        p=stream.p,
        index=stream.index,
    )


def zeros_cp1(sample: SectionSample) -> ZeroSet:
    """Zeros of a section of O(d) on the projective line; multiplicities sum to d."""
    if len(sample.degree) != 1:
        raise ValueError(f"expected a section on the projective line, got degree {sample.degree}")
    return line_zeros(sample.monomial)


def common_zeros_p1xp1(first: SectionSample, second: SectionSample) -> ZeroSet:
    """Common zeros of two sections of O(d, e) on the product; multiplicities sum to 2de."""
    if first.degree != second.degree or len(first.degree) != 2:
        raise ValueError(
            f"need two sections of one bidegree, got {first.degree} and {second.degree}"
        )
    shape = (first.degree[0] + 1, first.degree[1] + 1)
    return product_zeros(first.monomial.reshape(shape), second.monomial.reshape(shape))


# --- pairings -------------------------------------------------------------


MatrixField = Callable[[PointSet], np.ndarray]


def _wedge_pairing(
    model: KahlerModel,
    fields: Sequence[MatrixField],
    phi: TestForm,
    rule: QuadratureRule,
) -> float:
    """Integral of f_1 ^ ... ^ f_m ^ theta^(n-m) times phi."""
    def integrand(points: PointSet) -> np.ndarray:
        reference = reference_matrix(model, points)
        matrices = [f(points) for f in fields]
        matrices += [reference] * (model.complex_dim - len(matrices))
        return wedge_density(matrices, reference) * phi.value(points)

    return integrate(model, integrand, rule).real


def limit_pairing(
    omega: TwoForm, m: int, phi: TestForm, rule: QuadratureRule | None = None
) -> float:
    """Integral of omega^m ^ theta^(n-m) times phi."""
    rule = rule or pairing_rule(omega.model)
    return _wedge_pairing(omega.model, [omega.matrix] * m, phi, rule)


def zero_mass(zeros: ZeroSet, phi: TestForm) -> float:
    """<[s = 0], phi> = sum of multiplicity times phi at each zero."""
    if len(zeros) == 0:
        return 0.0
    return float(np.sum(zeros.multiplicities * phi.value(zeros.points)))


def pair_zero_current(
    zeros: ZeroSet,
    phi: TestForm,
    A_p: float,
    m: int,
    omega: TwoForm,
    rule: QuadratureRule | None = None,
) -> float:
    """A_p^-m <[s = 0], phi> - integral of omega^m phi, for isolated zeros (m = n)."""
    if m != omega.model.complex_dim:
        raise ValueError(f"zero currents are points only for m = n, got m={m}")
    return zero_mass(zeros, phi) / A_p**m - limit_pairing(omega, m, phi, rule)


def gamma_pairing(
    onbs: Sequence[OrthonormalBasis],
    phi: TestForm,
    rule: QuadratureRule | None = None,
    scale: float = 1.0,
) -> float:
    """Integral of (gamma_1 / scale) ^ ... ^ (gamma_m / scale) ^ theta^(n-m) times phi."""
    model = onbs[0].model
    rule = rule or pairing_rule(model)
    fields = [lambda pts, onb=onb: fubini_study_current(onb, pts) / scale for onb in onbs]
    return _wedge_pairing(model, fields, phi, rule)


def fs_current_pairing(
    onbs: OrthonormalBasis | Sequence[OrthonormalBasis],
    m: int,
    phi: TestForm,
    A_p: float,
    omega: TwoForm,
    rule: QuadratureRule | None = None,
) -> float:
    """Integral of (gamma_p^m / A_p^m - omega^m) ^ theta^(n-m) times phi."""
    if isinstance(onbs, OrthonormalBasis):
        onbs = [onbs] * m
    if len(onbs) != m:
        raise ValueError(f"need {m} orthonormal bases, got {len(onbs)}")
    model = omega.model
    if not 1 <= m <= model.complex_dim:
        raise ValueError(f"m must lie in [1, {model.complex_dim}], got {m}")
    rule = rule or pairing_rule(model)

    def integrand(points: PointSet) -> np.ndarray:
        reference = reference_matrix(model, points)
        rest = [reference] * (model.complex_dim - m)
        gamma = [fubini_study_current(onb, points) / A_p for onb in onbs]
        limit = [omega.matrix(points)] * m
        difference = wedge_density(gamma + rest, reference) - wedge_density(limit + rest, reference)
        return difference * phi.value(points)

    return integrate(model, integrand, rule).real


# --- degrees --------------------------------------------------------------


@dataclass(frozen=True)
class DegreeRecord:
    """Dimensions and intermediate degrees of the multi-projective section space."""
    d_p: int
    d_pm: int
    c_pm: float
    delta1: float
    delta2: float


def normalizing_constant(d_p: int, m: int) -> float:
    """c_{p,m} = ((d_p - 1)!)^(m / d_pm) / (d_pm!)^(1 / d_pm) with d_pm = m (d_p - 1).

    d_pm = 0 (a one-dimensional section space) gives 1.
    """
    d_pm = m * (d_p - 1)
    if d_pm == 0:
        return 1.0
    return math.exp((m * gammaln(d_p) - gammaln(d_pm + 1)) / d_pm)


def combinatorics(
    p: int,
    m: int,
    model: KahlerModel,
    seq: BundleSequence,
    rule: QuadratureRule | None = None,
) -> DegreeRecord:
    """d_p, d_pm, c_pm and the curvature integrals delta1, delta2 at index p."""
    if p < 1 or not 1 <= m <= model.complex_dim:
        raise ValueError(f"need p >= 1 and 1 <= m <= {model.complex_dim}, got p={p}, m={m}")
    bundle = seq.bundle_at(p)
    rule = rule or pairing_rule(model)
    d_p = dimension(bundle)
    c_pm = normalizing_constant(d_p, m)

    def curvature(points: PointSet) -> np.ndarray:
        return curvature_matrix(bundle, points)

    unit = _Constant(model)
    delta1 = _wedge_pairing(model, [curvature] * m, unit, rule)
    delta2 = _wedge_pairing(model, [curvature] * (m - 1), unit, rule) / c_pm
    return DegreeRecord(d_p=d_p, d_pm=m * (d_p - 1), c_pm=c_pm, delta1=delta1, delta2=delta2)


class _Constant:
    """The constant test function 1."""

    def __init__(self, model: KahlerModel):
        self.model = model

    def value(self, points: PointSet) -> np.ndarray:
        return np.ones(len(points))


# --- samples and exceptional sets -----------------------------------------


@dataclass(frozen=True)
class DiscrepancyRecord:
    """One measured <A_p^-m [s = 0] - omega^m, phi> with its provenance."""
    p: int
    A_p: float
    m: int
    form_id: str
    seed: int
    sample: int
    value: float


@dataclass(frozen=True, eq=False)
class SampleOutcome:
    """Zeros of one sample with its discrepancy records.

    ``deviation`` is the sup over the catalog of |<[s = 0] - gamma_p^m, phi>| / ||phi||_C2.
    """
    index: int
    zeros: ZeroSet | None
    records: tuple[DiscrepancyRecord, ...]
    deviation: float
    degenerate: bool = False


@dataclass
class SamplingContext:
    """Everything a sample needs, computed once per p."""
    seq: BundleSequence
    p: int
    m: int
    seed: int
    onb: OrthonormalBasis
    forms: list[TestForm]
    limit_integrals: dict[str, float] = field(default_factory=dict)
    gamma_integrals: dict[str, float] = field(default_factory=dict)
    norms: dict[str, float] = field(default_factory=dict)

    @property
    def A_p(self) -> float:
        return self.seq.A(self.p)


def make_sampling_context(
    seq: BundleSequence,
    p: int,
    m: int,
    seed: int,
    forms: Sequence[TestForm],
    rule: QuadratureRule | None = None,
) -> SamplingContext:
    """Orthonormal basis and the per-form integrals of omega^m and gamma_p^m."""
    model = seq.model
    if m != model.complex_dim:
        raise ValueError("zero currents are only implemented for m = n")
    if model.kind is ModelKind.FLAT_TORUS:
        raise ValueError("zero finding supports the projective line and the product only")
    rule = rule or pairing_rule(model)
    onb = orthonormal_basis(seq.bundle_at(p))
    context = SamplingContext(seq=seq, p=p, m=m, seed=seed, onb=onb, forms=list(forms))
    for phi in forms:
        context.limit_integrals[phi.identifier] = limit_pairing(seq.limit_form, m, phi, rule)
        context.gamma_integrals[phi.identifier] = gamma_pairing([onb] * m, phi, rule)
        context.norms[phi.identifier] = phi.c2_norm
    return context


def sample_zeros(context: SamplingContext, index: int) -> ZeroSet:
    """Zeros of the sample ``index``; pairs on the product come from one stream."""
    stream = section_stream(context.seed, context.p, index)
    if context.seq.model.kind is ModelKind.PROJECTIVE_LINE:
        return zeros_cp1(sample_section(context.onb, stream))
    first = sample_section(context.onb, stream)
    second = sample_section(context.onb, stream)
    return common_zeros_p1xp1(first, second)


def evaluate_sample(context: SamplingContext, index: int) -> SampleOutcome:
    try:
        zeros = sample_zeros(context, index)
    except DegeneratePair as e:
        logger.debug(f"Sample {index} at p={context.p} is degenerate: {e}")
        return SampleOutcome(
            index=index, zeros=None, records=(), deviation=math.nan, degenerate=True
        )

    A_p, m = context.A_p, context.m
    records = []
    deviation = 0.0
    for phi in context.forms:
        key = phi.identifier
        mass = zero_mass(zeros, phi)
        records.append(
            DiscrepancyRecord(
                p=context.p,
                A_p=A_p,
                m=m,
                form_id=key,
                seed=context.seed,
                sample=index,
                value=mass / A_p**m - context.limit_integrals[key],
            )
        )
        deviation = max(deviation, abs(mass - context.gamma_integrals[key]) / context.norms[key])
    return SampleOutcome(index=index, zeros=zeros, records=tuple(records), deviation=deviation)


def evaluate_samples(
    context: SamplingContext, count: int, workers: int | None = None
) -> list[SampleOutcome]:
    """Samples 0..count-1 in index order, whatever the worker count."""
    return run_ordered(lambda index: evaluate_sample(context, index), range(count), workers)


@dataclass(frozen=True)
class ExceptionalSetEstimate:
    """Monte Carlo estimate of the measure of E_{p,m}(epsilon)."""
    p: int
    epsilon: float
    samples: int
    exceptional: int
    fraction: float
    interval: tuple[float, float]


def wilson_interval(
    successes: int, trials: int, confidence: float = WILSON_CONFIDENCE
) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials == 0:
        return 0.0, 1.0
    z = norm.ppf(0.5 + 0.5 * confidence)
    fraction = successes / trials
    denominator = 1.0 + z**2 / trials
    centre = (fraction + z**2 / (2 * trials)) / denominator
    half = z * math.sqrt(fraction * (1 - fraction) / trials + z**2 / (4 * trials**2)) / denominator
    return max(0.0, min(centre - half, fraction)), min(1.0, max(centre + half, fraction))


def exceptional_from_outcomes(
    outcomes: Sequence[SampleOutcome], p: int, A_p: float, m: int, epsilon: float
) -> ExceptionalSetEstimate:
    """Fraction of nondegenerate samples whose deviation reaches A_p^m epsilon."""
    valid = [o for o in outcomes if not o.degenerate]
    threshold = A_p**m * epsilon
    exceptional = sum(1 for o in valid if o.deviation >= threshold)
    fraction = exceptional / len(valid) if valid else 0.0
    return ExceptionalSetEstimate(
        p=p,
        epsilon=epsilon,
        samples=len(valid),
        exceptional=exceptional,
        fraction=fraction,
        interval=wilson_interval(exceptional, len(valid)),
    )


def exceptional_fraction(
    seq: BundleSequence,
    p: int,
    m: int,
    epsilon: float,
    samples: int,
    seed: int,
    forms: Sequence[TestForm] | None = None,
    workers: int | None = None,
) -> ExceptionalSetEstimate:
    """Estimate sigma_{p,m}(E_{p,m}(epsilon)) with the sup restricted to the form catalog."""
    if samples < MIN_EXCEPTIONAL_SAMPLES:
        raise ValueError(f"need at least {MIN_EXCEPTIONAL_SAMPLES} samples, got {samples}")
    if forms is None:
        from bergman_lab.catalog import get_catalog

        forms = get_catalog().test_forms(seq.model)
    context = make_sampling_context(seq, p, m, seed, forms)
    outcomes = evaluate_samples(context, samples, workers)
    estimate = exceptional_from_outcomes(outcomes, p, context.A_p, m, epsilon)
    logger.info(
        f"Exceptional fraction at p={p}, epsilon={epsilon:.4g}: "
        f"{estimate.exceptional}/{estimate.samples} = {estimate.fraction:.3f}"
    )
    return estimate


def exceptional_threshold(A_p: float, beta: float, zeta: float, alpha: float) -> float:
    """epsilon_p = (beta + zeta) log A_p / (alpha A_p), the schedule of the exceptional sets."""
    if A_p <= 1:
        raise ValueError(f"threshold schedule needs A_p > 1, got {A_p}")
    return (beta + zeta) * math.log(A_p) / (alpha * A_p)


@dataclass(frozen=True)
class SummabilityReport:
    """Partial sums of A_p^-beta and whether the full series converges."""
    beta: float
    partial_sums: tuple[float, ...]
    growth_exponent: float
    converges: bool


def summability(
    p_values: Sequence[int], A_values: Sequence[float], beta: float
) -> SummabilityReport:
    """Fit A_p ~ p^g on the given range; sum A_p^-beta converges iff beta * g > 1."""
    if len(p_values) != len(A_values) or len(p_values) < 2:
        raise ValueError("need at least two matching (p, A_p) pairs")
    A = np.asarray(A_values, dtype=float)
    growth = linregress(np.log(np.asarray(p_values, dtype=float)), np.log(A)).slope
    return SummabilityReport(
        beta=beta,
        partial_sums=tuple(float(v) for v in np.cumsum(A ** (-beta))),
        growth_exponent=float(growth),
        converges=bool(beta * growth > 1.0),
    )
