"""Scalar special functions: log-scale Bessel K of real order and the standard normal."""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate, special

from .errors import DomainError

MAX_ORDER = 60.0
MAX_ARGUMENT = 700.0

_SQRT_2PI = math.sqrt(2.0 * math.pi)


def bessel_k_log(order: float, argument: float) -> float:
    """Natural log of the modified Bessel function of the second kind, K_order(argument).

    Parameters
    ----------
    order : float
        Real order, ``|order| <= 60``. The result depends on ``|order|`` only.
    argument : float
        Positive real argument, at most 700.

    Returns
    -------
    float
        ``ln K_order(argument)``.

    Notes
    -----
    The exponentially scaled Amos routine is used wherever it neither
    overflows nor underflows. When it does (large order combined with a tiny
    argument) the integral ``K_v(z) = int_0^inf exp(-z cosh t) cosh(v t) dt``
    is evaluated in log scale around the peak of its integrand.
    """
    order = float(order)
    argument = float(argument)
    if not math.isfinite(order) or abs(order) > MAX_ORDER:
        raise DomainError(f"Bessel order {order!r} outside [-{MAX_ORDER}, {MAX_ORDER}]")
    if not math.isfinite(argument) or argument <= 0.0 or argument > MAX_ARGUMENT:
        raise DomainError(f"Bessel argument {argument!r} outside (0, {MAX_ARGUMENT}]")

    nu = abs(order)
    scaled = float(special.kve(nu, argument))
    if 1e-290 < scaled < math.inf:
        return math.log(scaled) - argument
    return _bessel_k_log_integral(nu, argument)


def _bessel_k_log_integral(nu: float, z: float) -> float:
    def log_integrand(t: float) -> float:
        # log cosh(nu t) without overflow
        a = nu * t
        return -z * math.cosh(t) + a + math.log1p(math.exp(-2.0 * a)) - math.log(2.0)

    # peak solves z sinh t = nu tanh(nu t); nu tanh(nu t) ~ nu away from t = 0
    t_peak = math.asinh(nu / z) if nu > 0 else 0.0
    if nu > 0:
        lo, hi = 0.0, t_peak + 1.0
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if z * math.sinh(mid) - nu * math.tanh(nu * mid) < 0.0:
                lo = mid
            else:
                hi = mid
        t_peak = 0.5 * (lo + hi)
    g_peak = log_integrand(t_peak)

    upper = t_peak + 1.0
    while log_integrand(upper) > g_peak - 80.0:
        upper += max(1.0, upper - t_peak)
    lower = max(0.0, t_peak - 1.0)
    while lower > 0.0 and log_integrand(lower) > g_peak - 80.0:
        lower = max(0.0, lower - max(1.0, t_peak - lower))

    width = 1.0 / math.sqrt(max(z * math.cosh(t_peak), 1e-300))
    pts = sorted(
        {p for p in (t_peak - 4 * width, t_peak - width, t_peak, t_peak + width, t_peak + 4 * width)
         if lower < p < upper}
    )
    val, _ = integrate.quad(
        lambda t: math.exp(log_integrand(t) - g_peak),
        lower,
        upper,
        points=pts or None,
        epsabs=0.0,
        epsrel=5e-14,
        limit=400,
    )
    return g_peak + math.log(val)


def bessel_k(order: float, argument: float) -> float:
    """K_order(argument) on the linear scale (may overflow to inf)."""
    return math.exp(bessel_k_log(order, argument))


def norm_pdf(x):
    x = np.asarray(x, dtype=float)
    return np.exp(-0.5 * x * x) / _SQRT_2PI


def norm_cdf(x):
    return special.ndtr(np.asarray(x, dtype=float))


def norm_sf(x):
    return special.ndtr(-np.asarray(x, dtype=float))


def norm_ppf(p):
    p = np.asarray(p, dtype=float)
    if np.any((p <= 0.0) | (p >= 1.0) | ~np.isfinite(p)):
        raise DomainError("normal quantile requires probabilities strictly inside (0, 1)")
    return special.ndtri(p)


def std_normal(kind: str, x: float) -> float:
    """Standard normal ``pdf``, ``cdf`` or ``quantile`` at a scalar point."""
    if kind == "pdf":
        return float(norm_pdf(x))
    if kind == "cdf":
        return float(norm_cdf(x))
    if kind == "quantile":
        return float(norm_ppf(x))
    raise ValueError(f"unknown kind {kind!r}; expected 'pdf', 'cdf' or 'quantile'")
