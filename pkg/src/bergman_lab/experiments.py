"""The six experiments: build the sequence from a config, measure, summarize, check."""

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from bergman_lab import __version__
from bergman_lab.asymptotics import (
    DegenerateData,
    expansion_order,
    fit_expansion,
    fit_rate,
    loglog_slope,
    predicted_coefficients,
)
from bergman_lab.bergman import (
    bergman_function,
    bergman_kernel2,
    dimension,
    kernel_bounds,
    log_kernel_l1,
    orthonormal_basis,
)
from bergman_lab.bundles import (
    BundleSequence,
    SequenceKind,
    make_bundle,
    mass,
    multi_ray,
    perturbed_power,
    power_ray,
    spectral_gap_bound,
)
from bergman_lab.catalog import CatalogManager, TestForm, get_catalog
from bergman_lab.config import ConfigInvalid, validate
from bergman_lab.geometry import (
    ChartPoint,
    KahlerModel,
    ModelKind,
    make_model,
    pairing_rule,
    sample_grid,
)
from bergman_lab.model_kernel import (
    annihilation_residual,
    make_frame,
    model_kernel,
    rescaled_comparison,
    reproducing_defect,
    window_grid,
)
from bergman_lab.models import Experiment, ExperimentConfig, ModelSpec, experiment_config_to_dict
from bergman_lab.random_sections import (
    combinatorics,
    evaluate_samples,
    exceptional_from_outcomes,
    fs_current_pairing,
    make_sampling_context,
)
from bergman_lab.report import Report

logger = logging.getLogger(__name__)

DEFAULT_TOLERANCES: dict[str, float] = {
    "kernel_exact": 1e-8,
    "b0": 0.01,
    "b1": 0.05,
    "rate_exponent": 0.15,
    "rate_exponent_below": 0.05,
    "rate_exponent_above": 0.1,
    "annihilation": 1e-12,
    "reproducing": 1e-6,
    "diagonal": 1e-12,
    "decay_exponent_min": 0.4,
    "decay_exponent_max": 0.6,
    "rate_r2": 0.95,
    "fs_exact": 1e-8,
    "degree_integer": 1e-6,
    "ratio_bracket": 4.0 * math.e,
}
# Chart displacement of the fixed off-diagonal partner of x0.
OFFDIAG_SHIFT = {
    ModelKind.PROJECTIVE_LINE: 1.0,
    ModelKind.PROJECTIVE_PRODUCT: 1.0,
    ModelKind.FLAT_TORUS: 0.25,
}
REPRODUCING_RADIUS = 6.0
PERCENTILE = 90.0
MIN_RATIO_P = 8


@dataclass
class ExperimentResult:
    rows: list[dict]
    summary: dict
    checks: dict[str, bool] = field(default_factory=dict)


# --- building blocks from the config -------------------------------------


def build_model(spec: ModelSpec) -> KahlerModel:
    params = {"tau": spec.tau} if spec.tau is not None else None
    return make_model(spec.kind, params)


def build_sequence(
    config: ExperimentConfig, model: KahlerModel, catalog: CatalogManager
) -> BundleSequence:
    """The bundle sequence a config describes."""
    sequence = config.sequence
    if sequence.kind is SequenceKind.POWER_RAY:
        return power_ray(make_bundle(model, sequence.degree))
    if sequence.kind is SequenceKind.PERTURBED_POWER:
        weight = catalog.weight(model, sequence.psi_id)
        return perturbed_power(make_bundle(model, sequence.degree), weight, sequence.a)
    factors = sequence.factors or [sequence.degree] * len(sequence.rays)
    bundles = [make_bundle(model, f) for f in factors]
    return multi_ray(bundles, sequence.rays, sequence.depth)


def base_point(config: ExperimentConfig, seq: BundleSequence) -> ChartPoint:
    """Configured x0, else the chart origin (z = -1 for perturbed sequences)."""
    if config.point is not None:
        return config.point
    n = seq.model.complex_dim
    if seq.kind is SequenceKind.PERTURBED_POWER:
        return ChartPoint(chart_id=0, coords=(-1.0 + 0j,) * n)
    return ChartPoint(chart_id=0, coords=(0j,) * n)


def tolerance(config: ExperimentConfig, name: str) -> float:
    return config.tolerances.get(name, DEFAULT_TOLERANCES[name])


def rate_exponent_ok(config: ExperimentConfig, measured: float, expected: float) -> bool:
    """Perturbed sequences (a < 1) get the one-sided bracket [a - below, a + above]."""
    if expected < 1.0:
        low = expected - tolerance(config, "rate_exponent_below")
        return low <= measured <= expected + tolerance(config, "rate_exponent_above")
    return abs(measured - expected) <= tolerance(config, "rate_exponent")


def decay_exponent_ok(config: ExperimentConfig, measured: float) -> bool:
    low = tolerance(config, "decay_exponent_min")
    return low <= measured <= tolerance(config, "decay_exponent_max")


def _forms(config: ExperimentConfig, model: KahlerModel, catalog: CatalogManager) -> list[TestForm]:
    return catalog.test_forms(model, config.forms or None)


def _nonincreasing(values: list[float]) -> bool:
    return all(b <= a for a, b in zip(values, values[1:]))


def _decreasing(values: list[float]) -> bool:
    return all(b < a for a, b in zip(values, values[1:]))


# --- bergman-scan ---------------------------------------------------------


def bergman_scan(
    config: ExperimentConfig, seq: BundleSequence, catalog: CatalogManager
) -> ExperimentResult:
    """P_p on a grid, kernel brackets and off-diagonal decay along the sequence."""
    model = seq.model
    n = model.complex_dim
    x0 = base_point(config, seq)
    y0 = ChartPoint(x0.chart_id, tuple(c + OFFDIAG_SHIFT[model.kind] for c in x0.coords))
    grid = sample_grid(model, config.grid_points)
    rule = pairing_rule(model)
    tol = tolerance(config, "kernel_exact")

    rows, per_p = [], []
    exact = True
    offdiag_pair = []
    for p in config.p_values:
        A = seq.A(p)
        bundle = seq.bundle_at(p)
        onb = orthonormal_basis(bundle)
        values = bergman_function(onb, grid)
        at_base = bergman_function(onb, x0)
        offdiag = bergman_kernel2(onb, x0, y0)
        rows.append(
            {
                "p": p,
                "A_p": A,
                "chart": x0.chart_id,
                "coords": list(x0.coords),
                "P_p": at_base,
                "P_over_An": at_base / A**n if A > 0 else None,
                "offdiag": offdiag,
            }
        )
        d_p = dimension(bundle)
        entry = {
            "p": p,
            "A_p": A,
            "dimension": d_p,
            "grid_min": float(values.min()),
            "grid_max": float(values.max()),
            "relative_spread": float((values.max() - values.min()) / values.mean()),
            "kernel_bracket": kernel_bounds(onb, grid, A) if p > 0 else None,
            "log_kernel_l1": log_kernel_l1(onb, rule, A) if p > 0 else None,
            "spectral_gap_bound": (
                spectral_gap_bound(bundle, grid, config.gap_constant) if p > 0 else None
            ),
        }
        if not bundle.is_perturbed:
            error = float(np.abs(values - d_p).max())
            entry["dimension_error"] = error
            exact = exact and error <= tol
        per_p.append(entry)
        offdiag_pair.append(offdiag)
        logger.info(
            f"bergman-scan p={p}: P_p on grid in "
            f"[{entry['grid_min']:.10g}, {entry['grid_max']:.10g}]"
        )

    summary: dict = {"sequence": seq.describe(), "per_p": per_p, "offdiag_pair": offdiag_pair}
    checks: dict[str, bool] = {}
    if not any(b.is_perturbed for b in seq.base) and seq.kind is not SequenceKind.PERTURBED_POWER:
        checks["kernel_exact"] = exact
    if len(config.p_values) >= 2 and all(v > 0 for v in offdiag_pair):
        slope = loglog_slope(config.p_values, offdiag_pair, log_x=False)
        summary["offdiag_slope"] = slope.slope
        checks["offdiag_decay"] = slope.slope < 0
    return ExperimentResult(rows, summary, checks)


# --- expansion-fit --------------------------------------------------------


def expansion_fit(
    config: ExperimentConfig, seq: BundleSequence, catalog: CatalogManager
) -> ExperimentResult:
    """Fit P_p(x0) / A_p^n in powers of 1/A_p and compare with the predicted b0, b1."""
    model = seq.model
    n = model.complex_dim
    x0 = base_point(config, seq)
    predicted = predicted_coefficients(model, seq.limit_form, x0)

    rows, samples = [], []
    for p in config.p_values:
        A = seq.A(p)
        value = bergman_function(orthonormal_basis(seq.bundle_at(p)), x0)
        rows.append({"p": p, "A_p": A, "P_p": value, "P_over_An": value / A**n})
        samples.append((p, A, value))
        logger.info(f"expansion-fit p={p}: P_p/A^n = {value / A**n:.12g}")

    order = min(expansion_order(seq.exponent), len(samples) - 2)
    fit = fit_expansion(samples, order, n=n, point=x0, predicted=predicted)
    b0, b1 = predicted
    summary: dict = {
        "sequence": seq.describe(),
        "exponent": seq.exponent,
        "order": order,
        "coefficients": list(fit.coefficients),
        "residual": fit.residual,
        "predicted": [b0, b1],
    }
    checks: dict[str, bool] = {}
    if order >= 1:
        checks["b0"] = abs(fit.coefficients[0] - b0) <= tolerance(config, "b0") * abs(b0)
        checks["b1"] = abs(fit.coefficients[1] - b1) <= tolerance(config, "b1") * max(1.0, abs(b1))
        _, last_A, last_P = samples[-1]
        summary["first_order_consistency"] = (last_P / last_A**n - fit.coefficients[0]) * last_A

    residuals = [abs(P / A**n - b0) for _, A, P in samples]
    summary["leading_residuals"] = residuals
    if len(samples) >= 2 and min(residuals) > 1e-12:
        slope = loglog_slope([A for _, A, _ in samples], residuals)
        expected = min(seq.exponent, 1.0)
        summary["rate_exponent"] = -slope.slope
        summary["expected_rate_exponent"] = expected
        checks["rate_exponent"] = rate_exponent_ok(config, -slope.slope, expected)
    return ExperimentResult(rows, summary, checks)


# --- model-kernel ---------------------------------------------------------


def model_kernel_experiment(
    config: ExperimentConfig, seq: BundleSequence, catalog: CatalogManager
) -> ExperimentResult:
    """Model kernel identities at x0 and the rescaled comparison along the sequence."""
    model = seq.model
    n = model.complex_dim
    x0 = base_point(config, seq)
    frame = make_frame(model, seq.limit_form, x0)
    b0, _ = predicted_coefficients(model, seq.limit_form, x0)
    origin = np.zeros(n, dtype=complex)

    Z = window_grid(n, config.window_radius)
    left = np.repeat(Z, len(Z), axis=0)
    right = np.tile(Z, (len(Z), 1))
    annihilation = float(np.max(annihilation_residual(frame, left, right)))
    reproducing = reproducing_defect(frame, REPRODUCING_RADIUS)
    centre = model_kernel(frame, origin, origin).real
    logger.info(
        f"model kernel at {x0}: a={frame.a}, annihilation {annihilation:.3g}, "
        f"reproducing {reproducing:.3g}"
    )

    rows, defects = [], []
    for p in config.p_values:
        A = seq.A(p)
        onb = orthonormal_basis(seq.bundle_at(p))
        defect = rescaled_comparison(onb, frame, A, config.window_radius)
        diagonal = abs(bergman_function(onb, x0) / A**n - centre)
        rows.append(
            {
                "p": p,
                "A_p": A,
                "window": config.window_radius,
                "rescaled_defect": defect,
                "diagonal_defect": diagonal,
            }
        )
        defects.append(defect)
        logger.info(f"model-kernel p={p}: rescaled defect {defect:.4g}")

    summary: dict = {
        "sequence": seq.describe(),
        "eigenvalues": list(frame.a),
        "annihilation_residual": annihilation,
        "reproducing_defect": reproducing,
        "reproducing_radius": REPRODUCING_RADIUS,
        "kernel_at_origin": centre,
        "volume_ratio": b0,
    }
    checks = {
        "annihilation": annihilation <= tolerance(config, "annihilation"),
        "reproducing": reproducing <= tolerance(config, "reproducing"),
        "diagonal": abs(centre - b0) <= tolerance(config, "diagonal") * max(1.0, abs(b0)),
    }
    if len(defects) >= 2:
        checks["rescaled_decreasing"] = _decreasing(defects)
        if min(defects) > 0:
            slope = loglog_slope([seq.A(p) for p in config.p_values], defects)
            summary["decay_exponent"] = -slope.slope
            checks["rescaled_decay"] = decay_exponent_ok(config, -slope.slope)
    return ExperimentResult(rows, summary, checks)


# --- zeros-equidist -------------------------------------------------------


def zeros_equidist(
    config: ExperimentConfig, seq: BundleSequence, catalog: CatalogManager
) -> ExperimentResult:
    """Monte Carlo over random sections: discrepancies, percentiles and exceptional fractions."""
    model = seq.model
    m = config.m
    forms = _forms(config, model, catalog)
    workers = config.threads

    rows, per_p = [], []
    percentiles, fractions = [], []
    counts_ok = True
    for p in config.p_values:
        context = make_sampling_context(seq, p, m, config.seed, forms)
        A = context.A_p
        outcomes = evaluate_samples(context, config.samples, workers)
        valid = [o for o in outcomes if not o.degenerate]
        normalized = []
        for outcome in valid:
            counts_ok = counts_ok and outcome.zeros.total == outcome.zeros.expected_total
            for record in outcome.records:
                rows.append(
                    {
                        "p": record.p,
                        "A_p": record.A_p,
                        "m": record.m,
                        "seed": record.seed,
                        "sample": record.sample,
                        "form_id": record.form_id,
                        "value": record.value,
                    }
                )
                normalized.append(abs(record.value) / context.norms[record.form_id])
        percentile = float(np.percentile(normalized, PERCENTILE)) if normalized else math.nan
        epsilon = config.epsilon_scale * math.log(A) / A
        estimate = exceptional_from_outcomes(outcomes, p, A, m, epsilon)
        percentiles.append(percentile)
        fractions.append(estimate.fraction)
        per_p.append(
            {
                "p": p,
                "A_p": A,
                "samples": len(outcomes),
                "degenerate": len(outcomes) - len(valid),
                "percentile": percentile,
                "epsilon": epsilon,
                "exceptional": estimate.exceptional,
                "exceptional_fraction": estimate.fraction,
                "interval": list(estimate.interval),
            }
        )
        logger.info(
            f"zeros-equidist p={p}: {PERCENTILE:g}th percentile {percentile:.4g}, "
            f"exceptional {estimate.exceptional}/{estimate.samples}"
        )

    summary: dict = {
        "sequence": seq.describe(),
        "forms": [f.identifier for f in forms],
        "per_p": per_p,
    }
    checks = {"zero_counts": counts_ok}
    if len(per_p) >= 2:
        checks["percentile_decreasing"] = _decreasing(percentiles)
        checks["exceptional_nonincreasing"] = _nonincreasing(fractions)
    try:
        fit = fit_rate([(seq.A(p), v) for p, v in zip(config.p_values, percentiles)], terms="log")
    except DegenerateData as e:
        logger.info(f"No rate fit for zeros-equidist: {e}")
    else:
        summary["rate_fit"] = {"c_log": fit.c_log, "r_squared": fit.r_squared, "exact": fit.exact}
        checks["rate_r2"] = fit.exact or fit.r_squared >= tolerance(config, "rate_r2")
    return ExperimentResult(rows, summary, checks)


# --- fs-speed -------------------------------------------------------------


def fs_speed(
    config: ExperimentConfig, seq: BundleSequence, catalog: CatalogManager
) -> ExperimentResult:
    """Pairings of gamma_p^m / A_p^m - omega^m with the test forms."""
    model = seq.model
    m = config.m
    forms = _forms(config, model, catalog)
    rule = pairing_rule(model)
    omega = seq.limit_form

    rows, worst = [], []
    for p in config.p_values:
        A = seq.A(p)
        onb = orthonormal_basis(seq.bundle_at(p))
        largest = 0.0
        for phi in forms:
            value = fs_current_pairing(onb, m, phi, A, omega, rule)
            rows.append(
                {
                    "p": p,
                    "A_p": A,
                    "m": m,
                    "form_id": phi.identifier,
                    "value": value,
                    "abs_value": abs(value),
                }
            )
            largest = max(largest, abs(value) / phi.c2_norm)
        worst.append(largest)
        logger.info(f"fs-speed p={p}: largest normalized pairing {largest:.4g}")

    summary: dict = {
        "sequence": seq.describe(),
        "forms": [f.identifier for f in forms],
        "worst": worst,
    }
    checks: dict[str, bool] = {}
    if seq.kind is SequenceKind.POWER_RAY and not seq.base[0].is_perturbed:
        checks["exact"] = max(worst) <= tolerance(config, "fs_exact")
        return ExperimentResult(rows, summary, checks)
    try:
        fit = fit_rate([(seq.A(p), v) for p, v in zip(config.p_values, worst)])
    except DegenerateData as e:
        logger.info(f"No rate fit for fs-speed: {e}")
    else:
        summary["rate_fit"] = {
            "c_log": fit.c_log,
            "c_power": fit.c_power,
            "a_hat": fit.a_hat,
            "r_squared": fit.r_squared,
            "exact": fit.exact,
            "profile": [list(pair) for pair in fit.profile] if fit.profile else None,
        }
        checks["rate_r2"] = fit.exact or fit.r_squared >= tolerance(config, "rate_r2")
    return ExperimentResult(rows, summary, checks)


# --- degrees --------------------------------------------------------------


def degrees(
    config: ExperimentConfig, seq: BundleSequence, catalog: CatalogManager
) -> ExperimentResult:
    """Dimensions, normalizing constants and intermediate degrees along the sequence."""
    model = seq.model
    m = config.m
    rule = pairing_rule(model)
    M1 = tolerance(config, "ratio_bracket")
    integer_tol = tolerance(config, "degree_integer")

    rows = []
    constants_ok, integers_ok, bracket_ok = True, True, True
    for p in config.p_values:
        A = seq.A(p)
        record = combinatorics(p, m, model, seq, rule)
        ratio = record.delta1 / record.delta2
        rows.append(
            {
                "p": p,
                "A_p": A,
                "m": m,
                "d_p": record.d_p,
                "d_pm": record.d_pm,
                "c_pm": record.c_pm,
                "delta1": record.delta1,
                "delta2": record.delta2,
                "ratio": ratio,
                "mass": mass(seq.bundle_at(p), rule),
            }
        )
        constants_ok = constants_ok and 1.0 / (2.0 * math.e * m) < record.c_pm < 2.0 * math.e / m
        integers_ok = integers_ok and abs(record.delta1 - round(record.delta1)) <= integer_tol
        if p >= MIN_RATIO_P:
            bracket_ok = bracket_ok and A / M1 <= ratio <= M1 * A
        logger.info(
            f"degrees p={p}: d_p={record.d_p}, c_pm={record.c_pm:.6g}, "
            f"delta1={record.delta1:.8g}"
        )

    summary = {"sequence": seq.describe(), "m": m, "ratio_bracket": M1}
    checks = {
        "c_pm_bounds": constants_ok,
        "delta1_integer": integers_ok,
        "ratio_bracket": bracket_ok,
    }
    return ExperimentResult(rows, summary, checks)


EXPERIMENTS = {
    Experiment.BERGMAN_SCAN: bergman_scan,
    Experiment.EXPANSION_FIT: expansion_fit,
    Experiment.MODEL_KERNEL: model_kernel_experiment,
    Experiment.ZEROS_EQUIDIST: zeros_equidist,
    Experiment.FS_SPEED: fs_speed,
    Experiment.DEGREES: degrees,
}


def run_experiment(config: ExperimentConfig, catalog: CatalogManager | None = None) -> Report:
    """Validate, execute and summarize one experiment."""
    errors = validate(config)
    if errors:
        raise ConfigInvalid(errors)
    catalog = catalog or get_catalog()
    started = time.perf_counter()
    model = build_model(config.model)
    seq = build_sequence(config, model, catalog)
    logger.info(f"Running {config.experiment.value} on {model.describe()}: {seq.describe()}")
    result = EXPERIMENTS[config.experiment](config, seq, catalog)
    report = Report(
        experiment=config.experiment.value,
        config=experiment_config_to_dict(config),
        rows=result.rows,
        summary=result.summary,
        tool_version=__version__,
        wall_time=time.perf_counter() - started,
        checks=result.checks,
    )
    logger.info(f"{config.experiment.value} {'PASS' if report.passed else 'FAIL'}: {report.checks}")
    return report
