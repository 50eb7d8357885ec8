"""Theta functions with characteristics for polarizations of the flat torus.

For the degree-d polarization the sections are

    u_j(z) = sum_k exp(pi i d tau n^2 + 2 pi i d n z),   n = k + j/d,

with pointwise norm |u|^2 exp(-2 pi d y^2 / Im tau).  Each term is evaluated
already multiplied by exp(-pi d y^2 / Im tau), whose real exponent is
-pi d (n sqrt(Im tau) + y / sqrt(Im tau))^2 <= 0, so nothing overflows.
"""

import math

import numpy as np

from bergman_lab.geometry import KahlerModel, reduce_to_fundamental_domain

TAIL_TOLERANCE = 1e-16


def truncation_order(degree: int, tau: complex) -> int:
    """K such that terms with |k| > K are below 1e-16 of the leading one (margin 2)."""
    spread = math.log(2.0 / TAIL_TOLERANCE) / (math.pi * degree * tau.imag)
    return math.ceil(math.sqrt(spread)) + 2


def theta_values(
    model: KahlerModel,
    degree: int,
    z: np.ndarray,
    derivatives: bool = False,
) -> tuple[np.ndarray, np.ndarray | None]:
    """Norm-scaled theta values, shape (N, d), and optionally their z-derivatives."""
    tau = model.tau
    z = reduce_to_fundamental_domain(model, np.asarray(z, dtype=complex))
    x, y = z.real, z.imag
    order = truncation_order(degree, tau)
    k = np.arange(-order, order + 1)
    n = k[:, None] + np.arange(degree)[None, :] / degree

    phase = math.pi * degree * ((tau.real * n**2)[None] + 2.0 * n[None] * x[:, None, None])
    decay = -math.pi * degree * (
        tau.imag * n[None] ** 2
        + 2.0 * n[None] * y[:, None, None]
        + (y**2 / tau.imag)[:, None, None]
    )
    terms = np.exp(decay + 1j * phase)
    values = terms.sum(axis=1)
    if not derivatives:
        return values, None
    slopes = (2j * math.pi * degree * n)[None]
    return values, (terms * slopes).sum(axis=1)
