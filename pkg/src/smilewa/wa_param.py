"""Constructive parametrization of weak-arbitrage-free delta smiles.

A smile is generated by a switch point ``tilde_delta`` in (1/2, 1) and three
positive functions::

    lambda on (0, 1/2],  mu on [1/2, tilde_delta),  alpha on (tilde_delta, 1) with values in (0, 1)

With ``Lam(d) = int_d^{1/2} lambda``, ``M(d) = int_d^{tilde_delta} mu`` and
``A(d) = int_{tilde_delta}^d (u/n(u)) alpha`` (``u = N^{-1}``), the total
volatility is::

    d <= 1/2                : u + sqrt(u^2 + 2 (Lam(d) + M(1/2)))
    1/2 < d <= tilde_delta  : u + sqrt(2 M(d))
    d > tilde_delta         : u - sqrt(2 A(d))

All integrals are computed in the probit coordinate, where ``int f(x) dx``
becomes ``int f(N(u)) n(u) du``. The integrands there are called *probit
integrands*: ``lambda(N(u)) n(u)``, ``mu(N(u)) n(u)`` and ``u alpha(N(u))``.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from ._numerics import CumulativeIntegral, gauss_legendre
from .bs_core import _ret, norm_cdf, norm_pdf, norm_ppf
from .delta_map import DeltaSmile, GridSpec, check_sigma_wa
from .errors import DomainError, MembershipError, ValidationError

__all__ = [
    "QuadratureSpec",
    "WAParams",
    "ValidationReport",
    "wa_sigma",
    "wa_l",
    "validate",
    "recover_params",
    "family_flat",
    "family_bounded_skew",
    "family_w_shape",
    "family_spline",
    "from_dict",
    "FAMILIES",
]


@dataclass(frozen=True)
class QuadratureSpec:
    """Quadrature and divergence-proxy settings.

    ``tail_growth`` is the minimum increase of a diverging integral over the
    last unit of the probit coordinate; ``threshold`` optionally adds an
    absolute bound on its magnitude at the clipped endpoint.
    """

    abs_tol: float = 1e-10
    rel_tol: float = 1e-12
    max_panels: int = 20000
    endpoint_eps: float = 1e-9
    tail_growth: float = 1e-3
    threshold: float | None = None

    def __post_init__(self):
        if not self.abs_tol > 0:
            raise DomainError("abs_tol must be positive")
        if not (0 < self.endpoint_eps < 0.5):
            raise DomainError("endpoint_eps must lie in (0, 1/2)")


@dataclass(frozen=True)
class _Closed:
    """Closed-form antiderivatives in the probit coordinate."""

    lam: Callable   # u -> int_{N(u)}^{1/2} lambda,          u <= 0
    mu: Callable    # u -> int_{N(u)}^{tilde} mu,            0 <= u <= tilde_u
    alpha: Callable  # u -> int_{tilde}^{N(u)} kernel*alpha,  u >= tilde_u


@dataclass(frozen=True)
class WAParams:
    tilde_delta: float
    lam: Callable | None = None
    mu: Callable | None = None
    alpha: Callable | None = None
    quadrature: QuadratureSpec = field(default_factory=QuadratureSpec)
    probit_integrands: tuple[Callable, Callable, Callable] | None = None
    closed: _Closed | None = None
    breakpoints: tuple[float, ...] = ()   # kinks, in the probit coordinate
    family: str = "custom"
    hyper: dict = field(default_factory=dict)

    def __post_init__(self):
        td = float(self.tilde_delta)
        if not (0.5 < td < 1.0):
            raise ValidationError(f"tilde_delta must lie in (1/2, 1), got {td}")
        object.__setattr__(self, "tilde_delta", td)
        if self.probit_integrands is None:
            if self.lam is None or self.mu is None or self.alpha is None:
                raise ValueError("need lam, mu, alpha or probit_integrands")
            lam, mu, alpha = self.lam, self.mu, self.alpha
            g = (
                lambda u: lam(norm_cdf(u)) * norm_pdf(u),
                lambda u: mu(norm_cdf(u)) * norm_pdf(u),
                lambda u: u * alpha(norm_cdf(u)),
            )
            object.__setattr__(self, "probit_integrands", g)

    # -- geometry -----------------------------------------------------------
    @property
    def tilde_u(self) -> float:
        return float(norm_ppf(self.tilde_delta))

    @property
    def probit_domain(self) -> tuple[float, float]:
        u0 = float(norm_ppf(self.quadrature.endpoint_eps))
        return u0, -u0

    def numeric(self) -> "WAParams":
        """Same parameters, integrals forced through adaptive quadrature."""
        return dataclasses.replace(self, closed=None)

    # -- integrals ----------------------------------------------------------
    @cached_property
    def _tables(self) -> tuple[CumulativeIntegral, CumulativeIntegral, CumulativeIntegral]:
        q = self.quadrature
        ulo, uhi = self.probit_domain
        ut = self.tilde_u
        g_lam, g_mu, g_alpha = self.probit_integrands
        kw = dict(breakpoints=self.breakpoints, abs_tol=q.abs_tol, rel_tol=q.rel_tol,
                  max_panels=q.max_panels)
        t_lam = CumulativeIntegral(g_lam, ulo, 0.0, anchor="right", **kw)
        t_mu = CumulativeIntegral(g_mu, 0.0, ut, anchor="right", **kw)
        t_alpha = CumulativeIntegral(g_alpha, ut, max(uhi, ut), anchor="left", **kw)
        return t_lam, t_mu, t_alpha

    def lam_integral(self, u):
        """``int_{N(u)}^{1/2} lambda`` for ``u <= 0``."""
        u = np.asarray(u, dtype=float)
        if self.closed is not None:
            return np.asarray(self.closed.lam(u), dtype=float)
        return self._tables[0](u)

    def mu_integral(self, u):
        """``int_{N(u)}^{tilde_delta} mu`` for ``0 <= u <= tilde_u``."""
        u = np.asarray(u, dtype=float)
        if self.closed is not None:
            return np.asarray(self.closed.mu(u), dtype=float)
        return self._tables[1](u)

    def alpha_integral(self, u):
        """``int_{tilde_delta}^{N(u)} (N^{-1}/n(N^{-1})) alpha`` for ``u >= tilde_u``."""
        u = np.asarray(u, dtype=float)
        if self.closed is not None:
            return np.asarray(self.closed.alpha(u), dtype=float)
        return self._tables[2](u)

    @cached_property
    def mu_half(self) -> float:
        return float(self.mu_integral(np.array([0.0]))[0])

    # -- smile in the probit coordinate -----------------------------------
    def _branches(self, u: np.ndarray):
        ut = self.tilde_u
        left = u <= 0.0
        mid = (u > 0.0) & (u <= ut)
        right = u > ut
        return left, mid, right

    def m_probit(self, u):
        """``m = u - s`` from the radicands, free of cancellation."""
        u = np.asarray(u, dtype=float)
        lo, hi = self.probit_domain
        flat = np.clip(u.ravel(), lo, hi)
        out = np.empty_like(flat)
        left, mid, right = self._branches(flat)
        if left.any():
            ul = flat[left]
            out[left] = -np.sqrt(ul * ul + 2.0 * (self.lam_integral(ul) + self.mu_half))
        if mid.any():
            out[mid] = -np.sqrt(2.0 * np.maximum(self.mu_integral(flat[mid]), 0.0))
        if right.any():
            out[right] = np.sqrt(2.0 * np.maximum(self.alpha_integral(flat[right]), 0.0))
        return _ret(out.reshape(u.shape))

    def sigma_probit(self, u):
        u = np.asarray(u, dtype=float)
        lo, hi = self.probit_domain
        uc = np.clip(u, lo, hi)
        m = np.asarray(self.m_probit(uc))
        s = uc - m
        left = uc <= 0.0
        if np.any(left):
            # u + r with u <= 0 rewritten as 2L / (r - u)
            ul, r = uc[left], -m[left]
            big_l = 0.5 * (r * r - ul * ul)
            s = np.asarray(s, dtype=float).copy()
            s[left] = np.where(r - ul > 0, 2.0 * big_l / (r - ul), r + ul)
        return _ret(s)

    def l_probit(self, u):
        u = np.asarray(u, dtype=float)
        lo, hi = self.probit_domain
        flat = np.clip(u.ravel(), lo, hi)
        out = np.empty_like(flat)
        left, mid, right = self._branches(flat)
        if left.any():
            out[left] = -self.lam_integral(flat[left]) - self.mu_half
        if mid.any():
            um = flat[mid]
            out[mid] = 0.5 * um * um - self.mu_integral(um)
        if right.any():
            ur = flat[right]
            out[right] = 0.5 * ur * ur - self.alpha_integral(ur)
        return _ret(out.reshape(u.shape))

    # -- delta-space access -------------------------------------------------
    def sigma(self, delta):
        return self.sigma_probit(norm_ppf(_check_delta(delta)))

    def l(self, delta):
        return self.l_probit(norm_ppf(_check_delta(delta)))

    def m(self, delta):
        return self.m_probit(norm_ppf(_check_delta(delta)))

    def smile(self) -> DeltaSmile:
        return DeltaSmile(probit_func=self.sigma_probit, domain_eps=self.quadrature.endpoint_eps,
                          name=self.family)

    def to_dict(self) -> dict:
        if self.family not in FAMILIES:
            raise ValueError(f"family {self.family!r} has no serial form")
        return {"family": self.family, "tilde_delta": self.tilde_delta, "params": dict(self.hyper)}


def _check_delta(delta):
    d = np.asarray(delta, dtype=float)
    if np.any(~(d > 0)) or np.any(~(d < 1)):
        raise DomainError("delta must lie in (0, 1)")
    return d


def wa_sigma(params: WAParams, delta):
    """Total volatility of the smile generated by ``params``."""
    return params.sigma(delta)


def wa_l(params: WAParams, delta):
    """``l(delta) = -k(delta)`` of the smile generated by ``params``."""
    return params.l(delta)


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

@dataclass
class ValidationReport:
    passed: bool
    failures: list[str] = field(default_factory=list)
    first_violation: float | None = None
    checks: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "failures": list(self.failures),
            "first_violation": self.first_violation,
            "checks": {k: (float(v) if isinstance(v, (np.floating, float)) else v)
                       for k, v in self.checks.items()},
        }


def validate(
    params: WAParams,
    grid: GridSpec | None = None,
    *,
    strict: bool = False,
    strict_margin: float = 1e-6,
) -> ValidationReport:
    """Sample the parameter conditions and the three divergence proxies.

    Positivity of lambda and mu and ``0 < alpha < 1`` are sampled on a probit
    grid. Divergence of ``Lam``, ``A`` and ``u^2/2 - A`` is judged by their
    growth over the last probit unit (``QuadratureSpec.tail_growth``).
    With ``strict`` the limit of alpha at 1 must stay below one; the limit is
    estimated by extrapolating ``alpha = a_inf - b/u`` through the last two
    probit units.
    """
    grid = grid or GridSpec(n=2001)
    q = params.quadrature
    failures: list[str] = []
    first = None
    checks: dict = {}
    td = params.tilde_delta
    checks["tilde_delta"] = td
    if not (0.5 < td < 1.0):
        failures.append("tilde_delta outside (1/2, 1)")

    ulo, uhi = params.probit_domain
    ut = params.tilde_u
    u = grid.probit_points((ulo, uhi))
    g_lam, g_mu, g_alpha = params.probit_integrands

    def note(msg, where):
        nonlocal first
        failures.append(msg)
        if first is None and where is not None:
            first = float(norm_cdf(where))

    ul = u[u <= 0.0]
    vals = np.asarray(g_lam(ul), dtype=float)
    bad = np.flatnonzero(~(vals > 0))
    checks["lambda_positive"] = bad.size == 0
    if bad.size:
        note("lambda not positive", ul[bad[0]])

    um = np.concatenate([[0.0], u[(u > 0.0) & (u < ut)]])
    vals = np.asarray(g_mu(um), dtype=float)
    bad = np.flatnonzero(~(vals > 0))
    checks["mu_positive"] = bad.size == 0
    if bad.size:
        note("mu not positive", um[bad[0]])

    ur = u[u > ut]
    if ur.size:
        a = np.asarray(g_alpha(ur), dtype=float) / ur
        bad = np.flatnonzero(~((a > 0) & (a < 1)))
        checks["alpha_in_unit_interval"] = bad.size == 0
        if bad.size:
            note("alpha outside (0, 1)", ur[bad[0]])

    try:
        lam_end = float(params.lam_integral(np.array([ulo]))[0])
        lam_in = float(params.lam_integral(np.array([min(ulo + 1.0, 0.0)]))[0])
        u_in = max(uhi - 1.0, ut)
        a_end = float(params.alpha_integral(np.array([uhi]))[0])
        a_in = float(params.alpha_integral(np.array([u_in]))[0])
    except Exception as exc:  # quadrature failures become report entries
        failures.append(f"integral evaluation failed: {exc}")
        return ValidationReport(False, failures, first, checks)

    res_end = 0.5 * uhi * uhi - a_end
    res_in = 0.5 * u_in * u_in - a_in
    proxies = {
        "lambda_integral": (lam_end, lam_end - lam_in),
        "alpha_integral": (a_end, a_end - a_in),
        "alpha_residual": (res_end, res_end - res_in),
    }
    for name, (value, growth) in proxies.items():
        checks[f"{name}_end"] = value
        checks[f"{name}_growth"] = growth
        ok = growth >= q.tail_growth
        if q.threshold is not None:
            ok = ok and value >= q.threshold
        checks[f"{name}_diverges"] = ok
        if not ok:
            failures.append(f"{name} does not diverge")

    if strict:
        u1, u2 = uhi - 1.0, uhi
        a1 = float(g_alpha(np.array([u1]))[0]) / u1
        a2 = float(g_alpha(np.array([u2]))[0]) / u2
        a_inf = (u2 * a2 - u1 * a1) / (u2 - u1)
        checks["alpha_limit_estimate"] = a_inf
        if not a_inf <= 1.0 - strict_margin:
            failures.append("alpha limit not bounded away from 1")

    return ValidationReport(not failures, failures, first, checks)


def _validated(params: WAParams, check: bool = True) -> WAParams:
    if not check:
        return params
    rep = validate(params, GridSpec(n=401))
    if not rep.passed:
        raise ValidationError(f"{params.family} parameters invalid: " + "; ".join(rep.failures), rep)
    return params


# ---------------------------------------------------------------------------
# Recovery from a smile
# ---------------------------------------------------------------------------

def _probit_derivative(fn, u: np.ndarray, lo: float, hi: float, h: float) -> np.ndarray:
    """Second-order differences, one-sided within ``h`` of the domain ends."""
    u = np.asarray(u, dtype=float)
    d = (fn(u + h) - fn(u - h)) / (2 * h)
    near_lo = u - h < lo
    near_hi = u + h > hi
    if near_lo.any():
        x = u[near_lo]
        d[near_lo] = (-3 * fn(x) + 4 * fn(x + h) - fn(x + 2 * h)) / (2 * h)
    if near_hi.any():
        x = u[near_hi]
        d[near_hi] = (3 * fn(x) - 4 * fn(x - h) + fn(x - 2 * h)) / (2 * h)
    return d


def recover_params(
    smile: DeltaSmile,
    grid: GridSpec | None = None,
    *,
    h: float = 1e-5,
    quadrature: QuadratureSpec | None = None,
) -> WAParams:
    """Read ``(tilde_delta, lambda, mu, alpha)`` back off a smile.

    In the probit coordinate the integrands are ``dl/du``, ``-m dm/du`` and
    ``m dm/du``. Since ``m^2 = u^2 - 2 l`` the last two equal ``dl/du - u``
    and ``u - dl/du``, so only the smooth ``l`` is differentiated (``m`` has
    a square-root kink at the switch point whenever mu does not vanish there).
    Derivatives are central differences of step ``h``.
    """
    rep = check_sigma_wa(smile, grid)
    if not rep.passed:
        raise MembershipError("recover_params needs a weak-arbitrage-free smile: "
                              + "; ".join(rep.failures), rep)
    lo, hi = smile.probit_domain
    if quadrature is None:
        eps = float(norm_cdf(lo))
        quadrature = QuadratureSpec(abs_tol=1e-9, rel_tol=1e-10, endpoint_eps=eps)

    def l(u):
        s = np.asarray(smile.at_probit(u))
        return (u - 0.5 * s) * s

    def g_lam(u):
        return _probit_derivative(l, u, lo, hi, h)

    def g_mu(u):
        u = np.asarray(u, dtype=float)
        return _probit_derivative(l, u, lo, hi, h) - u

    def g_alpha(u):
        u = np.asarray(u, dtype=float)
        return u - _probit_derivative(l, u, lo, hi, h)

    def lam(d):
        u = np.asarray(norm_ppf(d))
        return _ret(g_lam(u) / norm_pdf(u))

    def mu(d):
        u = np.asarray(norm_ppf(d))
        return _ret(g_mu(u) / norm_pdf(u))

    def alpha(d):
        u = np.asarray(norm_ppf(d))
        return _ret(g_alpha(u) / u)

    return WAParams(
        tilde_delta=rep.tilde_delta,
        lam=lam,
        mu=mu,
        alpha=alpha,
        quadrature=quadrature,
        probit_integrands=(g_lam, g_mu, g_alpha),
        family="recovered",
    )


# ---------------------------------------------------------------------------
# Families
# ---------------------------------------------------------------------------

def family_flat(c: float, quadrature: QuadratureSpec | None = None, *, check: bool = True) -> WAParams:
    """Constant total volatility ``c``; switch point ``N(c)``."""
    c = float(c)
    if not c > 0:
        raise ValidationError(f"flat level must be positive, got {c}")
    q = quadrature or QuadratureSpec()

    def lam(d):
        u = np.asarray(norm_ppf(d))
        return _ret(c / norm_pdf(u))

    def mu(d):
        u = np.asarray(norm_ppf(d))
        return _ret((c - u) / norm_pdf(u))

    def alpha(d):
        u = np.asarray(norm_ppf(d))
        return _ret(1.0 - c / u)

    g = (
        lambda u: np.full_like(np.asarray(u, dtype=float), c),
        lambda u: c - np.asarray(u, dtype=float),
        lambda u: np.asarray(u, dtype=float) - c,
    )
    closed = _Closed(
        lam=lambda u: -c * u,
        mu=lambda u: 0.5 * (c - u) ** 2,
        alpha=lambda u: 0.5 * (u - c) ** 2,
    )
    return _validated(WAParams(
        tilde_delta=float(norm_cdf(c)), lam=lam, mu=mu, alpha=alpha, quadrature=q,
        probit_integrands=g, closed=closed, family="flat", hyper={"c": c},
    ), check)


def family_bounded_skew(c_lambda: float, tilde_delta: float,
                        quadrature: QuadratureSpec | None = None, *, check: bool = True) -> WAParams:
    """Skew smile with a bounded left wing tending to ``c_lambda``.

    ``mu`` is linear in delta, vanishing at ``tilde_delta``; ``alpha`` mirrors
    it about ``tilde_delta`` up to ``hat = 2 tilde_delta - 1/2`` and is
    constant beyond. ``hat < 1`` needs ``tilde_delta < 3/4``.
    """
    cl, td = float(c_lambda), float(tilde_delta)
    if not cl > 0:
        raise ValidationError(f"c_lambda must be positive, got {cl}")
    if not (0.5 < td < 0.75):
        raise ValidationError(f"bounded skew needs tilde_delta in (1/2, 3/4), got {td}")
    q = quadrature or QuadratureSpec()
    K = cl / float(norm_pdf(0.0))
    w = td - 0.5
    hat = 2.0 * td - 0.5
    u_hat = float(norm_ppf(hat))
    alpha_c = float(norm_pdf(u_hat)) / u_hat * K
    a_hat = K * (hat - td) ** 2 / (2 * w)

    def mu_d(d):
        return K * (td - np.asarray(d, dtype=float)) / w

    def lam(d):
        return _ret(cl / norm_pdf(norm_ppf(d)))

    def mu(d):
        return _ret(mu_d(d))

    def alpha(d):
        d = np.asarray(d, dtype=float)
        u = np.asarray(norm_ppf(d))
        return _ret(np.where(d < hat, norm_pdf(u) / u * mu_d(2 * td - d), alpha_c))

    def g_mu(u):
        return mu_d(norm_cdf(u)) * norm_pdf(u)

    def g_alpha(u):
        u = np.asarray(u, dtype=float)
        # mu(2 td - N(u)) = K (N(u) - td) / w
        inner = norm_pdf(u) * K * (norm_cdf(u) - td) / w
        return np.where(u < u_hat, inner, u * alpha_c)

    def a_closed(u):
        u = np.asarray(u, dtype=float)
        inner = K * (norm_cdf(u) - td) ** 2 / (2 * w)
        return np.where(u <= u_hat, inner, a_hat + 0.5 * alpha_c * (u * u - u_hat * u_hat))

    g = (lambda u: np.full_like(np.asarray(u, dtype=float), cl), g_mu, g_alpha)
    closed = _Closed(
        lam=lambda u: -cl * np.asarray(u, dtype=float),
        mu=lambda u: K * (td - norm_cdf(u)) ** 2 / (2 * w),
        alpha=a_closed,
    )
    return _validated(WAParams(
        tilde_delta=td, lam=lam, mu=mu, alpha=alpha, quadrature=q, probit_integrands=g,
        closed=closed, breakpoints=(u_hat,), family="bounded_skew",
        hyper={"c_lambda": cl, "tilde_delta": td},
    ), check)


def family_w_shape(tilde_delta: float, hat_delta: float, hat_hat_delta: float,
                   quadrature: QuadratureSpec | None = None, *, check: bool = True) -> WAParams:
    """W-shaped smile, divergent on both wings.

    With ``c = N^{-1}(td) / n(N^{-1}(td))``: ``lambda = hat^2 c / delta^2``
    below ``hat_delta`` and ``c`` above; ``mu = c - u/n(u)``;
    ``alpha = 1 - c n(u)/u`` up to ``hat_hat_delta`` and frozen beyond.
    """
    td, hd, hhd = float(tilde_delta), float(hat_delta), float(hat_hat_delta)
    if not (0.0 < hd < 0.5 < td < hhd < 1.0):
        raise ValidationError(
            f"w_shape needs 0 < hat < 1/2 < tilde < hat_hat < 1, got {hd}, {td}, {hhd}"
        )
    q = quadrature or QuadratureSpec()
    ut = float(norm_ppf(td))
    c = ut / float(norm_pdf(ut))
    u_hd = float(norm_ppf(hd))
    u_hhd = float(norm_ppf(hhd))
    alpha_c = 1.0 - c * float(norm_pdf(u_hhd)) / u_hhd

    def lam_d(d):
        d = np.asarray(d, dtype=float)
        return np.where(d < hd, hd * hd * c / (d * d), c)

    def lam(d):
        return _ret(lam_d(d))

    def mu(d):
        u = np.asarray(norm_ppf(d))
        return _ret(c - u / norm_pdf(u))

    def alpha(d):
        d = np.asarray(d, dtype=float)
        u = np.asarray(norm_ppf(d))
        return _ret(np.where(d < hhd, 1.0 - c * norm_pdf(u) / u, alpha_c))

    def g_lam(u):
        return lam_d(norm_cdf(u)) * norm_pdf(u)

    def g_mu(u):
        u = np.asarray(u, dtype=float)
        return c * norm_pdf(u) - u

    def g_alpha(u):
        u = np.asarray(u, dtype=float)
        return np.where(u < u_hhd, u - c * norm_pdf(u), alpha_c * u)

    def lam_closed(u):
        d = np.asarray(norm_cdf(u))
        upper = c * (0.5 - d)
        with np.errstate(divide="ignore"):
            lower = c * (0.5 - hd) + hd * hd * c * (1.0 / d - 1.0 / hd)
        return np.where(d >= hd, upper, lower)

    # Both integrands vanish at tilde_u, so the antiderivative differences
    # cancel there; a direct 16-point rule is used inside a small window.
    near = 0.5

    def mu_closed(u):
        u = np.asarray(u, dtype=float)
        out = c * (td - norm_cdf(u)) - 0.5 * (ut * ut - u * u)
        w = ut - u < near
        if np.any(w):
            out = np.array(out, dtype=float)
            out[w] = gauss_legendre(g_mu, u[w], np.full(int(w.sum()), ut))
        return out

    a_hhd = 0.5 * (u_hhd ** 2 - ut ** 2) - c * (hhd - td)
    near_a = min(near, u_hhd - ut)

    def alpha_closed(u):
        u = np.asarray(u, dtype=float)
        inner = 0.5 * (u * u - ut * ut) - c * (norm_cdf(u) - td)
        out = np.where(u <= u_hhd, inner, a_hhd + 0.5 * alpha_c * (u * u - u_hhd ** 2))
        w = u - ut < near_a
        if np.any(w):
            out[w] = gauss_legendre(g_alpha, np.full(int(w.sum()), ut), u[w])
        return out

    return _validated(WAParams(
        tilde_delta=td, lam=lam, mu=mu, alpha=alpha, quadrature=q,
        probit_integrands=(g_lam, g_mu, g_alpha),
        closed=_Closed(lam_closed, mu_closed, alpha_closed),
        breakpoints=(u_hd, u_hhd), family="w_shape",
        hyper={"tilde_delta": td, "hat_delta": hd, "hat_hat_delta": hhd},
    ), check)


SPLINE_LAM_KNOTS = (-3.0, -2.0, -1.0, 0.0)
SPLINE_MU_FRACTIONS = (0.0, 0.5, 1.0)
SPLINE_ALPHA_OFFSETS = (0.0, 1.0, 2.0)


def family_spline(tilde_delta: float, lam_log, mu_log, alpha_logit,
                  quadrature: QuadratureSpec | None = None, *, check: bool = True) -> WAParams:
    """Flexible family defined directly by its probit integrands.

    ``lambda(N(u)) n(u)`` and ``mu(N(u)) n(u)`` are exponentials of
    piecewise-linear functions of ``u``; ``alpha`` is a logistic of one.
    Knots sit at ``u`` in {-3, -2, -1, 0} for lambda, at 0, tilde_u/2 and
    tilde_u for mu, and at tilde_u + {0, 1, 2} for alpha. Values are held
    constant beyond the outer knots, so every divergence condition holds and
    alpha stays bounded away from 1. Integrals go through quadrature.
    """
    td = float(tilde_delta)
    if not (0.5 < td < 1.0):
        raise ValidationError(f"tilde_delta must lie in (1/2, 1), got {td}")
    lam_log = np.asarray(lam_log, dtype=float)
    mu_log = np.asarray(mu_log, dtype=float)
    alpha_logit = np.asarray(alpha_logit, dtype=float)
    if lam_log.shape != (4,) or mu_log.shape != (3,) or alpha_logit.shape != (3,):
        raise ValidationError("spline family takes 4 lambda, 3 mu and 3 alpha values")
    q = quadrature or QuadratureSpec()
    ut = float(norm_ppf(td))
    k_lam = np.asarray(SPLINE_LAM_KNOTS)
    k_mu = ut * np.asarray(SPLINE_MU_FRACTIONS)
    k_alpha = ut + np.asarray(SPLINE_ALPHA_OFFSETS)

    def g_lam(u):
        return np.exp(np.interp(u, k_lam, lam_log))

    def g_mu(u):
        return np.exp(np.interp(u, k_mu, mu_log))

    def alpha_u(u):
        return 1.0 / (1.0 + np.exp(-np.interp(u, k_alpha, alpha_logit)))

    def g_alpha(u):
        u = np.asarray(u, dtype=float)
        return u * alpha_u(u)

    def lam(d):
        u = np.asarray(norm_ppf(d))
        return _ret(g_lam(u) / norm_pdf(u))

    def mu(d):
        u = np.asarray(norm_ppf(d))
        return _ret(g_mu(u) / norm_pdf(u))

    def alpha(d):
        return _ret(alpha_u(np.asarray(norm_ppf(d))))

    bps = tuple(float(x) for x in np.concatenate([k_lam, k_mu, k_alpha]))
    return _validated(WAParams(
        tilde_delta=td, lam=lam, mu=mu, alpha=alpha, quadrature=q,
        probit_integrands=(g_lam, g_mu, g_alpha), breakpoints=bps, family="spline_params",
        hyper={"tilde_delta": td, "lam_log": lam_log.tolist(), "mu_log": mu_log.tolist(),
               "alpha_logit": alpha_logit.tolist()},
    ), check)


FAMILIES = {
    "flat": family_flat,
    "bounded_skew": family_bounded_skew,
    "w_shape": family_w_shape,
    "spline_params": family_spline,
}


def from_dict(spec: dict, quadrature: QuadratureSpec | None = None) -> WAParams:
    """Build parameters from ``{"family": ..., "tilde_delta": ..., "params": {...}}``.

    ``"custom"`` is accepted as an alias of the spline family.
    """
    fam = spec.get("family")
    params = dict(spec.get("params", {}))
    if fam == "custom":
        fam = "spline_params"
    if fam not in FAMILIES:
        raise ValidationError(f"unknown family {fam!r}")
    if "tilde_delta" in spec and fam in ("bounded_skew", "w_shape", "spline_params"):
        params.setdefault("tilde_delta", spec["tilde_delta"])
    try:
        if fam == "flat":
            p = family_flat(params["c"], quadrature)
        elif fam == "bounded_skew":
            p = family_bounded_skew(params["c_lambda"], params["tilde_delta"], quadrature)
        elif fam == "w_shape":
            p = family_w_shape(params["tilde_delta"], params["hat_delta"],
                               params["hat_hat_delta"], quadrature)
        else:
            p = family_spline(params["tilde_delta"], params["lam_log"], params["mu_log"],
                              params["alpha_logit"], quadrature)
    except KeyError as exc:
        raise ValidationError(f"missing parameter {exc.args[0]!r} for family {fam}") from None
    if "tilde_delta" in spec and fam == "flat":
        if not math.isclose(spec["tilde_delta"], p.tilde_delta, rel_tol=0, abs_tol=1e-8):
            raise ValidationError("flat family tilde_delta must equal N(c)")
    return p
