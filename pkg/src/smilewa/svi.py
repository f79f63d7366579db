"""SVI and SSVI total-variance smiles and their switch points.

The switch point ``k~`` solves ``w(k) = -2k``; there ``d1 = sigma sqrt(T)``
and therefore ``N^{-1}(delta~) = sqrt(-2 k~)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator

from .bs_core import _ret, norm_cdf, norm_ppf
from .delta_map import DEFAULT_EPS, DeltaSmile, GridSpec, KGrid, MembershipReport, StrikeSmile, to_delta
from .errors import DomainError, MembershipError

__all__ = [
    "SviParams",
    "SsviParams",
    "svi_total_variance",
    "ssvi_total_variance",
    "svi_tilde_k",
    "svi_switch_roots",
    "svi_rejection_bound",
    "ssvi_tilde",
    "ssvi_as_svi",
    "svi_strike_smile",
    "svi_to_delta",
    "wing_slopes",
]


@dataclass(frozen=True)
class SviParams:
    a: float
    b: float
    rho: float
    m: float
    sigma_bar: float

    def __post_init__(self):
        if not self.b >= 0:
            raise DomainError(f"SVI b must be non-negative, got {self.b}")
        if not -1 < self.rho < 1:
            raise DomainError(f"SVI rho must lie in (-1, 1), got {self.rho}")
        if not self.sigma_bar > 0:
            raise DomainError(f"SVI sigma_bar must be positive, got {self.sigma_bar}")
        if not self.a + self.b * self.sigma_bar * math.sqrt(1 - self.rho ** 2) > 0:
            raise DomainError("SVI minimum total variance must be positive")

    def lee_ok(self) -> bool:
        return self.b * (1 + self.rho) < 2 and self.b * (1 - self.rho) < 2


@dataclass(frozen=True)
class SsviParams:
    theta: float
    phi: float
    rho: float

    def __post_init__(self):
        if not self.theta > 0:
            raise DomainError(f"SSVI theta must be positive, got {self.theta}")
        if not self.phi > 0:
            raise DomainError(f"SSVI phi must be positive, got {self.phi}")
        if not -1 < self.rho < 1:
            raise DomainError(f"SSVI rho must lie in (-1, 1), got {self.rho}")
        if not 0.5 * self.theta * self.phi * (1 + abs(self.rho)) < 2:
            raise DomainError("SSVI violates the Lee bound theta*phi*(1+|rho|)/2 < 2")

    def lee_ok(self) -> bool:
        return 0.5 * self.theta * self.phi * (1 + abs(self.rho)) < 2


def svi_total_variance(p: SviParams, k):
    x = np.asarray(k, dtype=float) - p.m
    return _ret(p.a + p.b * (p.rho * x + np.sqrt(x * x + p.sigma_bar ** 2)))


def ssvi_total_variance(p: SsviParams, k):
    y = p.phi * np.asarray(k, dtype=float)
    return _ret(0.5 * p.theta * (1 + p.rho * y + np.sqrt((y + p.rho) ** 2 + 1 - p.rho ** 2)))


def _require_lee(p: SviParams):
    if not p.lee_ok():
        raise DomainError(
            f"SVI wing slopes b(1-rho)={p.b * (1 - p.rho):.4g}, b(1+rho)={p.b * (1 + p.rho):.4g} must be < 2"
        )


def svi_switch_roots(p: SviParams) -> tuple[float, float]:
    """Both roots ``(k-, k+)`` of the squared switch equation."""
    _require_lee(p)
    a, b, r, m, s = p.a, p.b, p.rho, p.m, p.sigma_bar
    g_plus = 2 + b * (1 + r)
    g_minus = 2 - b * (1 - r)
    num = b * m * (2 * r - b * (1 - r * r)) - a * (2 + b * r)
    root = b * math.sqrt((a + 2 * m) ** 2 + s * s * g_plus * g_minus)
    den = g_plus * g_minus
    return (num - root) / den, (num + root) / den


def svi_tilde_k(p: SviParams) -> float:
    """Closed-form switch point, the unique root of ``w(k) + 2k = 0``."""
    return svi_switch_roots(p)[0]


def svi_rejection_bound(p: SviParams) -> float:
    """``E = (b rho m - a)/(2 + b rho)``; a root above E cannot solve the
    unsquared equation."""
    return (p.b * p.rho * p.m - p.a) / (2 + p.b * p.rho)


def ssvi_as_svi(p: SsviParams) -> SviParams:
    """The raw SVI parameters describing the same total-variance curve."""
    r = p.rho
    return SviParams(
        a=0.5 * p.theta * (1 - r * r),
        b=0.5 * p.theta * p.phi,
        rho=r,
        m=-r / p.phi,
        sigma_bar=math.sqrt(1 - r * r) / p.phi,
    )


def ssvi_tilde(p: SsviParams) -> tuple[float, float]:
    """``(k~, delta~)`` for SSVI: ``k~ = -2 theta / R`` and
    ``delta~ = N(sqrt(-2 k~)) = N(2 sqrt(theta / R))``."""
    th, ph, r = p.theta, p.phi, p.rho
    R = (2 + 0.5 * th * ph * (1 + r)) * (2 - 0.5 * th * ph * (1 - r))
    if not R > 0:
        raise DomainError("SSVI switch denominator not positive")
    k = -2 * th / R
    return k, float(norm_cdf(2 * math.sqrt(th / R)))


def wing_slopes(p: SviParams | SsviParams) -> dict:
    """Asymptotic total-variance slopes ``{"left": .., "right": ..}``."""
    if isinstance(p, SsviParams):
        p = ssvi_as_svi(p)
    return {"left": p.b * (1 - p.rho), "right": p.b * (1 + p.rho)}


def _variance_fn(p):
    if isinstance(p, SsviParams):
        return lambda k: ssvi_total_variance(p, k)
    return lambda k: svi_total_variance(p, k)


def svi_strike_smile(p: SviParams | SsviParams) -> StrikeSmile:
    w = _variance_fn(p)
    return StrikeSmile(func=lambda k: np.sqrt(np.asarray(w(k))), name=type(p).__name__)


def screen(p: SviParams | SsviParams, kgrid: KGrid | None = None) -> MembershipReport:
    """Numerical screening: d1, d2 strictly decreasing on a k-grid plus the
    Lee slope bounds."""
    kgrid = kgrid or KGrid()
    k = kgrid.points()
    s = np.sqrt(np.asarray(_variance_fn(p)(k)))
    d1 = -k / s + 0.5 * s
    d2 = d1 - s
    failures = []
    checks: dict = {}
    first = None
    for name, d in (("d1", d1), ("d2", d2)):
        bad = np.flatnonzero(~(np.diff(d) < 0))
        checks[f"{name}_decreasing"] = bad.size == 0
        if bad.size:
            kb = float(k[bad[0] + 1])
            failures.append(f"{name} not strictly decreasing at k={kb:.6g}")
            checks[f"{name}_first_violation_k"] = kb
            first = kb if first is None else first
    checks["lee_slopes"] = wing_slopes(p)
    if not p.lee_ok():
        failures.append("Lee slope bound violated")
    rep = MembershipReport(passed=not failures, failures=failures, checks=checks)
    if first is not None:
        rep.checks["first_violation_k"] = first
    return rep


def svi_to_delta(
    p: SviParams | SsviParams,
    grid: GridSpec | None = None,
    *,
    n_nodes: int = 2001,
    domain_eps: float = DEFAULT_EPS,
) -> DeltaSmile:
    """Delta-space smile of an SVI or SSVI slice.

    Nodes are spaced uniformly in ``u = N^{-1}(delta)``; each node's strike
    is found by exact root-finding of ``N(d1(k)) = delta`` and the total
    volatility is interpolated in ``u`` by a monotone cubic.
    """
    rep = screen(p)
    if not rep.passed:
        raise MembershipError("SVI slice fails weak-arbitrage screening: " + "; ".join(rep.failures), rep)
    exact = to_delta(svi_strike_smile(p), grid, domain_eps=domain_eps)
    lo, hi = exact.probit_domain
    u = np.linspace(lo, hi, n_nodes)
    s = np.asarray(exact.at_probit(u))
    spline = PchipInterpolator(u, s, extrapolate=False)

    def probit_func(x):
        return spline(np.clip(x, lo, hi))

    out = DeltaSmile(probit_func=probit_func, domain_eps=domain_eps, name=f"{type(p).__name__}:delta")
    object.__setattr__(out, "exact", exact)
    return out
