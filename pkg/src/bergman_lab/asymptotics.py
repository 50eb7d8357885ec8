"""Fits of expansion coefficients and convergence rates."""

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg
from scipy.optimize import least_squares, nnls
from scipy.stats import linregress

from bergman_lab.geometry import (
    ChartPoint,
    KahlerModel,
    PointSet,
    TwoForm,
    reference_matrix,
    scalar_curvature,
)

logger = logging.getLogger(__name__)

MAX_NORMAL_CONDITION = 1e14
EXACT_THRESHOLD = 1e-12
EXPONENT_BOUNDS = (0.05, 3.0)
EXPONENT_STARTS = (0.25, 0.5, 1.0, 2.0)
PROFILE_POINTS = 60
IDENTIFIABILITY_RATIO = 3.0
RATE_TERMS = ("full", "log", "power")


class FitError(Exception):
    """Base class for fitting failures."""


class RankDeficient(FitError):
    """The expansion design matrix does not determine the coefficients."""


class DegenerateData(FitError, ValueError):
    """Rate data cannot support the requested fit."""


# --- expansion ------------------------------------------------------------


@dataclass(frozen=True)
class ExpansionFit:
    """Least-squares coefficients of P_p / A_p^n in powers of 1/A_p."""
    p_values: tuple[int, ...]
    A_values: tuple[float, ...]
    P_values: tuple[float, ...]
    coefficients: tuple[float, ...]
    residual: float
    order: int
    point: ChartPoint | None = None
    predicted: tuple[float, float] | None = None

    def coefficient(self, r: int) -> float:
        return self.coefficients[r]


def fit_expansion(
    samples: Sequence[tuple[int, float, float]],
    order: int,
    n: int = 1,
    point: ChartPoint | None = None,
    predicted: tuple[float, float] | None = None,
) -> ExpansionFit:
    """Fit P_p / A_p^n = b_0 + b_1 / A_p + ... + b_k / A_p^k.

    ``samples`` holds (p, A_p, P_p) triples.  Columns are scaled to unit
    norm before the normal equations are solved.
    """
    samples = sorted(samples)
    p_values = tuple(int(s[0]) for s in samples)
    A = np.array([s[1] for s in samples], dtype=float)
    P = np.array([s[2] for s in samples], dtype=float)
    distinct = len(set(A.tolist()))
    if distinct < order + 2:
        raise RankDeficient(f"order {order} needs {order + 2} distinct A_p, got {distinct}")

    y = P / A**n
    design = A[:, None] ** (-np.arange(order + 1)[None, :])
    norms = np.linalg.norm(design, axis=0)
    scaled = design / norms
    normal = scaled.T @ scaled
    condition = np.linalg.cond(normal)
    if not condition < MAX_NORMAL_CONDITION:
        raise RankDeficient(f"normal equations have condition {condition:.3g}")
    try:
        solution = scipy.linalg.solve(normal, scaled.T @ y, assume_a="pos")
    except np.linalg.LinAlgError as exc:
        raise RankDeficient(f"normal equations are singular: {exc}") from exc
    coefficients = solution / norms
    residual = float(np.linalg.norm(design @ coefficients - y))
    logger.debug(f"Expansion fit order {order}: {coefficients}, residual {residual:.3g}")
    return ExpansionFit(
        p_values=p_values,
        A_values=tuple(A.tolist()),
        P_values=tuple(P.tolist()),
        coefficients=tuple(float(c) for c in coefficients),
        residual=residual,
        order=order,
        point=point,
        predicted=predicted,
    )


def expansion_order(a: float) -> int:
    """Reliable correction terms for exponent a: ceil(a) - 1, or 2 when a is infinite."""
    if math.isinf(a):
        return 2
    return max(0, math.ceil(a) - 1)


def predicted_coefficients(
    model: KahlerModel, omega: TwoForm, x0: ChartPoint
) -> tuple[float, float]:
    """b_0 = omega^n / theta^n and b_1 = b_0 r_omega / 8pi at x0."""
    point = PointSet.from_points([x0])
    ratio = np.linalg.det(omega.matrix(point)) / np.linalg.det(reference_matrix(model, point))
    b0 = float(np.real(ratio)[0])
    r = scalar_curvature(model, x0, form=omega)
    return b0, b0 * r / (8.0 * math.pi)


# --- rates ----------------------------------------------------------------


@dataclass(frozen=True)
class RateFit:
    """|value| ~ c_log log A / A + c_power A^-a_hat, fitted in log space."""
    A_values: tuple[float, ...]
    values: tuple[float, ...]
    terms: str
    c_log: float = 0.0
    c_power: float = 0.0
    a_hat: float | None = None
    r_squared: float = 1.0
    exact: bool = False
    profile: tuple[tuple[float, float], ...] | None = None

    def predict(self, A) -> np.ndarray:
        A = np.asarray(A, dtype=float)
        out = self.c_log * np.log(A) / A
        if self.a_hat is not None:
            out = out + self.c_power * A ** (-self.a_hat)
        return out


def _model_values(params: np.ndarray, A: np.ndarray) -> np.ndarray:
    c_log, c_power, a = params
    return c_log * np.log(A) / A + c_power * A ** (-a)


def _log_residuals(params: np.ndarray, A: np.ndarray, log_values: np.ndarray) -> np.ndarray:
    return np.log(np.maximum(_model_values(params, A), 1e-300)) - log_values


def _nonnegative_start(A: np.ndarray, values: np.ndarray, a: float) -> tuple[float, float]:
    """Relative-error NNLS for (c_log, c_power) at fixed a, with a small floor."""
    rows = np.stack([np.log(A) / A, A ** (-a)], axis=1) / values[:, None]
    coefficients, _ = nnls(rows, np.ones(len(A)))
    floor = 1e-6 * max(float(coefficients.max()), float(np.median(values)))
    return max(coefficients[0], floor), max(coefficients[1], floor)


def _r_squared(log_values: np.ndarray, residuals: np.ndarray) -> float:
    total = float(np.sum((log_values - log_values.mean()) ** 2))
    unexplained = float(np.sum(residuals**2))
    if total == 0.0:
        return 1.0 if unexplained < 1e-20 else 0.0
    return 1.0 - unexplained / total


def _profile(
    A: np.ndarray, values: np.ndarray, log_values: np.ndarray
) -> tuple[tuple[float, float], ...]:
    """Best loss over (c_log, c_power) on a grid of fixed exponents."""
    out = []
    for a in np.linspace(*EXPONENT_BOUNDS, PROFILE_POINTS):
        start = _nonnegative_start(A, values, a)
        result = least_squares(
            lambda c, a=a: _log_residuals(np.array([c[0], c[1], a]), A, log_values),
            start,
            bounds=([0.0, 0.0], [np.inf, np.inf]),
        )
        out.append((float(a), float(result.cost)))
    return tuple(out)


def fit_rate(records: Sequence[tuple[float, float]], terms: str = "full") -> RateFit:
    """Fit |value| against log A / A and A^-a.

    ``terms`` selects both terms ("full"), only log A / A ("log") or only a
    power law ("power").  Records are sorted first so their order never
    matters.  Data below 1e-12 everywhere returns a fit flagged ``exact``.
    """
    if terms not in RATE_TERMS:
        raise ValueError(f"terms must be one of {RATE_TERMS}, got {terms!r}")
    ordered = sorted((float(A), abs(float(v))) for A, v in records)
    A = np.array([r[0] for r in ordered])
    values = np.array([r[1] for r in ordered])
    if len(values) and np.all(values < EXACT_THRESHOLD):
        return RateFit(
            A_values=tuple(A.tolist()), values=tuple(values.tolist()), terms=terms, exact=True
        )
    if len(set(A.tolist())) < 4:
        raise DegenerateData(f"need at least 4 distinct A_p, got {len(set(A.tolist()))}")
    if not np.all(np.isfinite(values)) or np.any(values <= 0) or np.any(A <= 1):
        raise DegenerateData("rate data must be finite and positive with A_p > 1")
    log_values = np.log(values)

    if terms == "log":
        c_log = float(np.exp(np.mean(log_values - np.log(np.log(A) / A))))
        residuals = np.log(c_log * np.log(A) / A) - log_values
        return RateFit(
            A_values=tuple(A.tolist()),
            values=tuple(values.tolist()),
            terms=terms,
            c_log=c_log,
            r_squared=_r_squared(log_values, residuals),
        )
    if terms == "power":
        line = linregress(np.log(A), log_values)
        residuals = line.intercept + line.slope * np.log(A) - log_values
        return RateFit(
            A_values=tuple(A.tolist()),
            values=tuple(values.tolist()),
            terms=terms,
            c_power=float(np.exp(line.intercept)),
            a_hat=float(-line.slope),
            r_squared=_r_squared(log_values, residuals),
        )

    best = None
    for a0 in EXPONENT_STARTS:
        c_log, c_power = _nonnegative_start(A, values, a0)
        result = least_squares(
            _log_residuals,
            np.array([c_log, c_power, a0]),
            bounds=([0.0, 0.0, EXPONENT_BOUNDS[0]], [np.inf, np.inf, EXPONENT_BOUNDS[1]]),
            args=(A, log_values),
        )
        logger.debug(f"Rate fit from a={a0}: params {result.x}, cost {result.cost:.3g}")
        if best is None or result.cost < best.cost:
            best = result
    c_log, c_power, a_hat = (float(v) for v in best.x)

    profile = None
    middle = float(np.median(A))
    log_term = c_log * math.log(middle) / middle
    power_term = c_power * middle ** (-a_hat)
    if min(log_term, power_term) > 0 and max(log_term, power_term) <= IDENTIFIABILITY_RATIO * min(
        log_term, power_term
    ):
        profile = _profile(A, values, log_values)
    return RateFit(
        A_values=tuple(A.tolist()),
        values=tuple(values.tolist()),
        terms=terms,
        c_log=c_log,
        c_power=c_power,
        a_hat=a_hat,
        r_squared=_r_squared(log_values, best.fun),
        profile=profile,
    )


@dataclass(frozen=True)
class SlopeFit:
    """Straight-line fit in (log) coordinates."""
    slope: float
    intercept: float
    r_squared: float


def loglog_slope(x: Sequence[float], y: Sequence[float], log_x: bool = True) -> SlopeFit:
    """Regress log |y| on log x (or on x itself when ``log_x`` is false)."""
    x = np.asarray(x, dtype=float)
    y = np.abs(np.asarray(y, dtype=float))
    if len(x) < 2 or np.any(y <= 0) or (log_x and np.any(x <= 0)):
        raise DegenerateData("slope fit needs at least two points with positive values")
    line = linregress(np.log(x) if log_x else x, np.log(y))
    return SlopeFit(
        slope=float(line.slope),
        intercept=float(line.intercept),
        r_squared=float(line.rvalue**2),
    )
