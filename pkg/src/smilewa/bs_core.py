"""Black-Scholes kernel in total-volatility units.

Everything here works with the total volatility ``v = sigma * sqrt(T)`` and the
log-forward moneyness ``k = log(K / F0)``. Maturity only shows up in
:class:`MarketSpec` and at the API edges.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

from .errors import ConvergenceError, DomainError, PriceOutOfBounds

__all__ = [
    "MarketSpec",
    "norm_pdf",
    "norm_cdf",
    "norm_ppf",
    "d12",
    "bs_call",
    "implied_total_vol",
    "delta_of",
    "k_from_delta_vol",
]

_SQRT2 = math.sqrt(2.0)
_SQRT2PI = math.sqrt(2.0 * math.pi)


def _ret(x):
    """Return a float for 0-d results, the array otherwise."""
    x = np.asarray(x)
    return float(x) if x.ndim == 0 else x


@dataclass(frozen=True)
class MarketSpec:
    forward: float = 1.0
    discount: float = 1.0
    maturity: float = 1.0

    def __post_init__(self):
        if not (self.forward > 0 and math.isfinite(self.forward)):
            raise DomainError(f"forward must be positive, got {self.forward}")
        if not (0 < self.discount <= 1):
            raise DomainError(f"discount must lie in (0, 1], got {self.discount}")
        if not (self.maturity > 0 and math.isfinite(self.maturity)):
            raise DomainError(f"maturity must be positive, got {self.maturity}")

    def total_vol(self, sigma):
        return np.asarray(sigma, dtype=float) * math.sqrt(self.maturity)


# ---------------------------------------------------------------------------
# Gaussian helpers
# ---------------------------------------------------------------------------

def norm_pdf(x):
    x = np.asarray(x, dtype=float)
    return _ret(np.exp(-0.5 * x * x) / _SQRT2PI)


def norm_cdf(x):
    """Standard normal CDF through erfc, accurate in both tails."""
    x = np.asarray(x, dtype=float)
    return _ret(0.5 * erfc(-x / _SQRT2))


# Rational approximation for the initial guess (relative error ~1e-9).
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425


def _ppf_lower(p: np.ndarray) -> np.ndarray:
    """Quantile for p in (0, 1/2]."""
    x = np.empty_like(p)
    tail = p < _P_LOW
    if tail.any():
        q = np.sqrt(-2.0 * np.log(p[tail]))
        num = ((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]
        den = (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0
        x[tail] = num / den
    mid = ~tail
    if mid.any():
        q = p[mid] - 0.5
        r = q * q
        num = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q
        den = ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0
        x[mid] = num / den
    # two Halley steps against the erfc-based CDF
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(2):
            e = 0.5 * erfc(-x / _SQRT2) - p
            u = e * _SQRT2PI * np.exp(0.5 * x * x)
            step = u / (1.0 + 0.5 * x * u)
            x = np.where(np.isfinite(step), x - step, x)
    return x


def norm_ppf(p):
    """Inverse standard normal CDF.

    Odd about 1/2 by construction: the upper half is computed as the negated
    lower quantile of ``1 - p``, which is exact in floating point there.
    """
    p = np.asarray(p, dtype=float)
    if np.any(~(p > 0.0)) or np.any(~(p < 1.0)):
        raise DomainError("norm_ppf requires 0 < p < 1")
    flat = np.atleast_1d(p).astype(float)
    out = np.empty_like(flat)
    upper = flat > 0.5
    out[~upper] = _ppf_lower(flat[~upper])
    out[upper] = -_ppf_lower(1.0 - flat[upper])
    return _ret(out.reshape(p.shape))


# ---------------------------------------------------------------------------
# Black-Scholes
# ---------------------------------------------------------------------------

def _check_vol(total_vol) -> np.ndarray:
    v = np.asarray(total_vol, dtype=float)
    if np.any(~(v > 0)) or np.any(~np.isfinite(v)):
        raise DomainError("total volatility must be positive and finite")
    return v


def d12(k, total_vol):
    """Return ``(d1, d2)`` for log-moneyness ``k`` and total volatility."""
    v = _check_vol(total_vol)
    k = np.asarray(k, dtype=float)
    d1 = -k / v + 0.5 * v
    return _ret(d1), _ret(d1 - v)


def bs_call(market: MarketSpec, k, total_vol):
    d1, d2 = d12(k, total_vol)
    k = np.asarray(k, dtype=float)
    scale = market.discount * market.forward
    return _ret(scale * (norm_cdf(d1) - np.exp(k) * norm_cdf(d2)))


def _normalized_call(k: float, v: float) -> float:
    d1 = -k / v + 0.5 * v
    return float(0.5 * erfc(-d1 / _SQRT2) - math.exp(k) * 0.5 * erfc(-(d1 - v) / _SQRT2))


def implied_total_vol(market: MarketSpec, k: float, price: float, *, maxiter: int = 200) -> float:
    """Invert :func:`bs_call` in the total volatility.

    Bisection shrinks the bracket to width 1e-4, then safeguarded Newton
    steps (using vega ``n(d1)``) finish the job. Steps leaving the bracket
    fall back to bisection.
    """
    k = float(k)
    scale = market.discount * market.forward
    c = float(price) / scale
    intrinsic = max(1.0 - math.exp(k), 0.0)
    if not (intrinsic < c < 1.0):
        raise PriceOutOfBounds(
            f"price {price} outside ({scale * intrinsic}, {scale}) for k={k}"
        )

    lo, hi = 0.0, 1.0
    it = 0
    while _normalized_call(k, hi) < c:
        lo, hi = hi, 2.0 * hi
        it += 1
        if it > maxiter or hi > 1e3:
            raise ConvergenceError("could not bracket implied volatility")

    v = 0.5 * (lo + hi)
    while hi - lo > 1e-4:
        it += 1
        if it > maxiter:
            raise ConvergenceError("implied vol bisection did not converge")
        v = 0.5 * (lo + hi)
        if _normalized_call(k, v) < c:
            lo = v
        else:
            hi = v

    v = 0.5 * (lo + hi)
    for _ in range(maxiter - it):
        f = _normalized_call(k, v) - c
        if f == 0.0 or abs(f) <= 1e-15 * c:
            return v
        if f < 0:
            lo = v
        else:
            hi = v
        d1 = -k / v + 0.5 * v
        vega = math.exp(-0.5 * d1 * d1) / _SQRT2PI
        v_new = v - f / vega if vega > 0 else 0.5 * (lo + hi)
        if not (lo < v_new < hi):
            v_new = 0.5 * (lo + hi)
        if abs(v_new - v) <= 4e-16 * v:
            return v_new
        v = v_new
    raise ConvergenceError(f"implied vol did not converge within {maxiter} iterations")


def delta_of(k, total_vol):
    """Call delta ``N(d1)``."""
    d1, _ = d12(k, total_vol)
    return norm_cdf(d1)


def k_from_delta_vol(delta, total_vol):
    """Log-moneyness with delta ``delta`` at total volatility ``total_vol``."""
    v = _check_vol(total_vol)
    u = np.asarray(norm_ppf(delta))
    return _ret((-u + 0.5 * v) * v)
