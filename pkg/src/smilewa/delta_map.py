"""Delta-space smiles, the l/m transforms, membership tests and conversions.

A delta smile maps the call delta ``N(d1)`` to total volatility. Internally
most work happens in the probit coordinate ``u = N^{-1}(delta)`` which keeps
the tails near 0 and 1 resolvable in floating point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ._numerics import count_sign_changes, solve_monotone
from .bs_core import _ret, norm_cdf, norm_pdf, norm_ppf
from .errors import DomainError, MembershipError, NonPositiveVol, NoSolution

__all__ = [
    "DeltaSmile",
    "StrikeSmile",
    "GridSpec",
    "KGrid",
    "MembershipReport",
    "l_eval",
    "m_eval",
    "check_sigma_delta_to_k",
    "check_sigma_wa",
    "to_strike",
    "to_delta",
    "sigma_from_l",
    "symmetric_smile",
]

DEFAULT_EPS = 1e-9
# probit reach of strike-space inversion (N(-37.5) ~ 5e-308)
EXTENDED_PROBIT = 37.5


# ---------------------------------------------------------------------------
# Smile containers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DeltaSmile:
    """Total volatility as a function of delta.

    ``func`` takes deltas, ``probit_func`` (optional) takes ``u = N^{-1}(delta)``
    directly and is preferred by every algorithm in the package because it
    stays accurate for deltas within 1e-9 of 1. At least one of the two must
    be given. Evaluation is clipped to the probit interval ``probit_domain``,
    by default ``[N^{-1}(eps), N^{-1}(1 - eps)]``.
    """

    func: Callable | None = None
    probit_func: Callable | None = None
    deriv: Callable | None = None
    domain_eps: float = DEFAULT_EPS
    probit_domain: tuple[float, float] | None = None
    name: str = "delta_smile"

    def __post_init__(self):
        if self.func is None and self.probit_func is None:
            raise ValueError("DeltaSmile needs func or probit_func")
        if not (0 < self.domain_eps < 0.5):
            raise DomainError("domain_eps must lie in (0, 1/2)")
        if self.probit_domain is None:
            u0 = float(norm_ppf(self.domain_eps))
            object.__setattr__(self, "probit_domain", (u0, -u0))

    # -- evaluation ---------------------------------------------------------
    @property
    def delta_domain(self) -> tuple[float, float]:
        lo, hi = self.probit_domain
        return float(norm_cdf(lo)), float(norm_cdf(hi))

    def at_probit(self, u):
        u = np.asarray(u, dtype=float)
        lo, hi = self.probit_domain
        uc = np.clip(u, lo, hi)
        if self.probit_func is not None:
            out = self.probit_func(uc)
        else:
            out = self.func(norm_cdf(uc))
        return _ret(np.asarray(out, dtype=float).reshape(u.shape))

    def __call__(self, delta):
        d = np.asarray(delta, dtype=float)
        if np.any(~(d > 0)) or np.any(~(d < 1)):
            raise DomainError("delta must lie in (0, 1)")
        if self.probit_func is None:
            dlo, dhi = self.delta_domain
            return _ret(np.asarray(self.func(np.clip(d, dlo, dhi)), dtype=float))
        return self.at_probit(norm_ppf(d))

    def derivative(self, delta, h: float = 1e-6):
        """d sigma / d delta. Central difference unless ``deriv`` is given."""
        if self.deriv is not None:
            return self.deriv(delta)
        d = np.asarray(delta, dtype=float)
        dlo, dhi = self.delta_domain
        lo = np.maximum(d - h, dlo)
        hi = np.minimum(d + h, dhi)
        return _ret((np.asarray(self(hi)) - np.asarray(self(lo))) / (hi - lo))


@dataclass(frozen=True)
class StrikeSmile:
    """Total volatility as a function of log-forward moneyness."""

    func: Callable
    deriv: Callable | None = None
    k_domain: tuple[float, float] = (-math.inf, math.inf)
    name: str = "strike_smile"

    def __call__(self, k):
        k = np.asarray(k, dtype=float)
        lo, hi = self.k_domain
        slack = 1e-10 * max(1.0, abs(lo) if math.isfinite(lo) else 1.0, abs(hi) if math.isfinite(hi) else 1.0)
        if np.any(k < lo - slack) or np.any(k > hi + slack):
            raise DomainError(f"k outside smile domain [{lo:.6g}, {hi:.6g}]")
        return _ret(np.asarray(self.func(np.clip(k, lo, hi)), dtype=float))

    def derivative(self, k, h: float = 1e-6):
        if self.deriv is not None:
            return self.deriv(k)
        k = np.asarray(k, dtype=float)
        return _ret((np.asarray(self(k + h)) - np.asarray(self(k - h))) / (2 * h))


@dataclass(frozen=True)
class GridSpec:
    """Sampling grid for delta-space checks.

    ``spacing="probit"`` samples uniformly in ``u``; ``"uniform"`` samples
    uniformly in delta. Bounds default to the smile's own domain.
    """

    n: int = 2001
    spacing: str = "probit"
    lo: float | None = None
    hi: float | None = None

    def __post_init__(self):
        if self.n < 3:
            raise DomainError("grid needs at least 3 points")
        if self.spacing not in ("probit", "uniform"):
            raise DomainError(f"unknown spacing {self.spacing!r}")

    def probit_points(self, domain: tuple[float, float]) -> np.ndarray:
        ulo, uhi = domain
        if self.lo is not None:
            ulo = max(ulo, float(norm_ppf(self.lo)))
        if self.hi is not None:
            uhi = min(uhi, float(norm_ppf(self.hi)))
        if self.spacing == "probit":
            return np.linspace(ulo, uhi, self.n)
        d = np.linspace(float(norm_cdf(ulo)), float(norm_cdf(uhi)), self.n)
        u = np.asarray(norm_ppf(np.clip(d, 1e-300, 1 - 1e-16)))
        u[0], u[-1] = ulo, uhi
        return u


@dataclass(frozen=True)
class KGrid:
    """Log-moneyness grid, uniform on ``[k_min, k_max]``."""

    n: int = 2001
    k_min: float = -5.0
    k_max: float = 5.0

    def points(self, k_domain: tuple[float, float] = (-math.inf, math.inf)) -> np.ndarray:
        lo = max(self.k_min, k_domain[0])
        hi = min(self.k_max, k_domain[1])
        return np.linspace(lo, hi, self.n)


@dataclass
class MembershipReport:
    passed: bool
    failures: list[str] = field(default_factory=list)
    checks: dict = field(default_factory=dict)
    violating_delta: float | None = None
    tilde_delta: float | None = None

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "failures": list(self.failures),
            "checks": _jsonable(self.checks),
            "violating_delta": self.violating_delta,
            "tilde_delta": self.tilde_delta,
        }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    return obj


# ---------------------------------------------------------------------------
# l and m
# ---------------------------------------------------------------------------

def _l_probit(smile: DeltaSmile, u) -> np.ndarray:
    s = np.asarray(smile.at_probit(u))
    return (np.asarray(u) - 0.5 * s) * s


def _m_probit(smile: DeltaSmile, u) -> np.ndarray:
    return np.asarray(u) - np.asarray(smile.at_probit(u))


def l_eval(smile: DeltaSmile, delta):
    """``l(delta) = (N^{-1}(delta) - s/2) s``, which equals ``-k(delta)``."""
    u = norm_ppf(delta)
    return _ret(_l_probit(smile, u))


def m_eval(smile: DeltaSmile, delta):
    """``m(delta) = N^{-1}(delta) - s``, the negated d2 along the smile."""
    u = norm_ppf(delta)
    return _ret(_m_probit(smile, u))


# ---------------------------------------------------------------------------
# Membership
# ---------------------------------------------------------------------------

PLATEAU_TOL = 1e-13


def _increasing_failure(u: np.ndarray, y: np.ndarray) -> float | None:
    """First delta where ``y`` decreases by more than the plateau tolerance."""
    dy = np.diff(y)
    tol = PLATEAU_TOL * np.maximum(1.0, np.abs(y[1:]))
    bad = np.flatnonzero(dy < -tol)
    if bad.size:
        return float(norm_cdf(u[bad[0] + 1]))
    return None


def _divergence(fn, ulo: float, uhi: float, tail_growth: float, threshold: float | None) -> dict:
    """Probit tail proxies: sign at the clipped ends, growth over the last unit."""
    lo_val = float(fn(np.array([ulo]))[0])
    hi_val = float(fn(np.array([uhi]))[0])
    lo_growth = float(fn(np.array([ulo + 1.0]))[0]) - lo_val
    hi_growth = hi_val - float(fn(np.array([uhi - 1.0]))[0])
    lower_ok = lo_val < 0 and lo_growth >= tail_growth
    upper_ok = hi_val > 0 and hi_growth >= tail_growth
    if threshold is not None:
        lower_ok = lower_ok and -lo_val >= threshold
        upper_ok = upper_ok and hi_val >= threshold
    return {
        "lower_value": lo_val,
        "upper_value": hi_val,
        "lower_growth": lo_growth,
        "upper_growth": hi_growth,
        "lower_ok": lower_ok,
        "upper_ok": upper_ok,
    }


def check_sigma_delta_to_k(
    smile: DeltaSmile,
    grid: GridSpec | None = None,
    *,
    tail_growth: float = 1e-3,
    threshold: float | None = None,
) -> MembershipReport:
    """Grid test for membership in the delta-to-strike convertible set.

    ``l`` must be strictly increasing and must look unbounded at both ends.
    Unboundedness is judged by sign plus growth of at least ``tail_growth``
    over the last unit of the probit coordinate (both tails of a convertible
    smile grow at least linearly in ``u``). An absolute ``threshold`` on
    ``|l|`` can be added on top.
    """
    grid = grid or GridSpec()
    u = grid.probit_points(smile.probit_domain)
    s = np.asarray(smile.at_probit(u), dtype=float)
    failures: list[str] = []
    violating = None
    checks: dict = {"n": int(u.size)}

    bad_s = np.flatnonzero(~np.isfinite(s) | (s <= 0))
    checks["positive"] = bad_s.size == 0
    if bad_s.size:
        failures.append("total volatility not positive and finite")
        violating = float(norm_cdf(u[bad_s[0]]))

    l = (u - 0.5 * s) * s
    v = _increasing_failure(u, l) if not bad_s.size else None
    checks["l_increasing"] = v is None and not bad_s.size
    if v is not None:
        failures.append("l not strictly increasing")
        violating = violating if violating is not None else v

    ulo, uhi = smile.probit_domain
    try:
        div = _divergence(lambda x: _l_probit(smile, x), ulo, uhi, tail_growth, threshold)
    except (FloatingPointError, ValueError) as exc:  # pragma: no cover - defensive
        div = {"lower_ok": False, "upper_ok": False, "error": str(exc)}
    checks["l_divergence"] = div
    if not div["lower_ok"]:
        failures.append("l does not diverge to -inf at delta -> 0")
    if not div["upper_ok"]:
        failures.append("l does not diverge to +inf at delta -> 1")

    return MembershipReport(passed=not failures, failures=failures, checks=checks,
                            violating_delta=violating)


def _locate_zero(fn, u: np.ndarray, y: np.ndarray) -> tuple[float | None, int]:
    n, idx = count_sign_changes(y)
    exact = np.flatnonzero(y == 0)
    if n == 0:
        if exact.size:
            return float(u[exact[0]]), 1
        return None, 0
    i = idx[0]
    j = i + 1
    while y[j] == 0:
        j += 1
    root = solve_monotone(fn, 0.0, u[i], u[j], increasing=y[j] > y[i])
    return float(root), n


def check_sigma_wa(
    smile: DeltaSmile,
    grid: GridSpec | None = None,
    *,
    tail_growth: float = 1e-3,
    threshold: float | None = None,
) -> MembershipReport:
    """Membership test for weak-arbitrage-free smiles.

    Adds to :func:`check_sigma_delta_to_k` the strict increase and two-sided
    divergence of ``m``, and locates the unique zero of ``m``.
    """
    grid = grid or GridSpec()
    rep = check_sigma_delta_to_k(smile, grid, tail_growth=tail_growth, threshold=threshold)
    u = grid.probit_points(smile.probit_domain)
    s = np.asarray(smile.at_probit(u), dtype=float)
    m = u - s

    v = _increasing_failure(u, m)
    rep.checks["m_increasing"] = v is None
    if v is not None:
        rep.failures.append("m not strictly increasing")
        if rep.violating_delta is None:
            rep.violating_delta = v

    ulo, uhi = smile.probit_domain
    div = _divergence(lambda x: _m_probit(smile, x), ulo, uhi, tail_growth, threshold)
    rep.checks["m_divergence"] = div
    if not div["lower_ok"]:
        rep.failures.append("m does not diverge to -inf at delta -> 0")
    if not div["upper_ok"]:
        rep.failures.append("m does not diverge to +inf at delta -> 1")

    if np.all(np.isfinite(m)):
        root, n = _locate_zero(lambda x: _m_probit(smile, x), u, m)
    else:
        root, n = None, 0
    rep.checks["m_sign_changes"] = n
    if root is None:
        rep.failures.append("NoZeroFound: m has no sign change on grid")
    else:
        rep.tilde_delta = float(norm_cdf(root))
        rep.checks["tilde_u"] = root
        if n > 1:
            rep.failures.append("m changes sign more than once")
    rep.passed = not rep.failures
    return rep


# ---------------------------------------------------------------------------
# Conversions
# ---------------------------------------------------------------------------

def to_strike(smile: DeltaSmile, grid: GridSpec | None = None, *, check: bool = True) -> StrikeSmile:
    """Strike-space smile ``k -> s(delta(k))`` where ``l(delta(k)) = -k``."""
    if check:
        rep = check_sigma_delta_to_k(smile, grid)
        if not rep.passed:
            raise MembershipError("smile not convertible to strike space: " + "; ".join(rep.failures), rep)
    # Beyond the clipped domain the smile is held flat at its end values,
    # which keeps l strictly increasing and extends k far into the wings.
    ulo = min(smile.probit_domain[0], -EXTENDED_PROBIT)
    uhi = max(smile.probit_domain[1], EXTENDED_PROBIT)
    lfun = lambda x: _l_probit(smile, x)  # noqa: E731
    l_lo = float(lfun(np.array([ulo]))[0])
    l_hi = float(lfun(np.array([uhi]))[0])
    k_domain = (-l_hi, -l_lo)
    clip = 1e-12 * max(1.0, abs(l_lo), abs(l_hi))
    u_tab = np.unique(np.concatenate([
        np.linspace(ulo, uhi, 801), np.linspace(*smile.probit_domain, 2001)]))
    l_tab = lfun(u_tab)
    if np.any(np.diff(l_tab) <= 0):
        # flat stretches of the tabulated l would give ambiguous brackets
        u_tab, l_tab = None, None

    def probit_of_k(k):
        k = np.asarray(k, dtype=float)
        tab = None if u_tab is None else (u_tab, l_tab)
        u = solve_monotone(lfun, -k.ravel(), ulo, uhi, clip_tol=clip, table=tab)
        return u.reshape(k.shape)

    def func(k):
        u = probit_of_k(k)
        return np.asarray(smile.at_probit(u)).reshape(np.shape(k))

    out = StrikeSmile(func=func, k_domain=k_domain, name=f"{smile.name}:strike")
    object.__setattr__(out, "probit_of_k", probit_of_k)
    return out


def _d1_of(smile: StrikeSmile, k: np.ndarray) -> np.ndarray:
    s = np.asarray(smile(k), dtype=float)
    return -k / s + 0.5 * s


def _find_k_bracket(smile: StrikeSmile, ulo: float, uhi: float, max_power: int = 25):
    """Smallest symmetric-ish bracket whose d1 values cover ``[ulo, uhi]``."""
    dlo, dhi = smile.k_domain

    def probe(direction: int):
        edge = dlo if direction < 0 else dhi
        target = uhi if direction < 0 else ulo
        ks = [direction * 2.0 ** (p - 2) for p in range(max_power + 1)]
        if math.isfinite(edge):
            # a finite domain is searched up to its edge, however far out
            ks = [k for k in ks if abs(k) < abs(edge)] + [edge]
        for k in ks:
            d1 = float(_d1_of(smile, np.array([k]))[0])
            ok = d1 >= target if direction < 0 else d1 <= target
            if ok:
                return k, d1
        return None, d1

    k_lo, d_lo = probe(-1)
    k_hi, d_hi = probe(+1)
    return k_lo, d_lo, k_hi, d_hi


def to_delta(
    smile: StrikeSmile,
    grid: GridSpec | None = None,
    *,
    domain_eps: float = DEFAULT_EPS,
    n_check: int = 2001,
) -> DeltaSmile:
    """Delta-space smile ``delta -> s(k(delta))`` with ``N(d1(k)) = delta``.

    d1 must cover ``[N^{-1}(eps), N^{-1}(1 - eps)]`` inside the smile's
    k-domain (or within ``|k| = 2^23`` when that is unbounded) and be strictly decreasing on an asinh-spaced check
    grid over that bracket.
    """
    grid = grid or GridSpec()
    u_eps = float(norm_ppf(domain_eps))
    ulo, uhi = u_eps, -u_eps
    clip = 1e-9
    k_lo, d_lo, k_hi, d_hi = _find_k_bracket(smile, ulo + clip, uhi - clip)
    if k_lo is None or k_hi is None:
        rep = MembershipReport(False, ["d1 not surjective onto the delta domain"],
                               {"d1_left": d_lo, "d1_right": d_hi})
        raise MembershipError(
            f"d1 does not cover [{ulo:.4g}, {uhi:.4g}] (reached {d_lo:.4g} and {d_hi:.4g})", rep
        )
    kk = np.sinh(np.linspace(np.arcsinh(k_lo), np.arcsinh(k_hi), n_check))
    d1 = _d1_of(smile, kk)
    dd = np.diff(d1)
    bad = np.flatnonzero(~(dd < 0))
    if bad.size:
        k_bad = float(kk[bad[0] + 1])
        rep = MembershipReport(False, ["d1 not strictly decreasing"], {"k_violation": k_bad})
        raise MembershipError(f"d1 not strictly decreasing near k={k_bad:.6g}", rep)

    d1fun = lambda k: _d1_of(smile, k)  # noqa: E731

    def k_of_probit(u):
        u = np.asarray(u, dtype=float)
        k = solve_monotone(d1fun, u.ravel(), k_lo, k_hi, increasing=False, clip_tol=clip,
                           table=(kk, d1))
        return k.reshape(u.shape)

    def probit_func(u):
        return np.asarray(smile(k_of_probit(u)))

    out = DeltaSmile(probit_func=probit_func, domain_eps=domain_eps, name=f"{smile.name}:delta")
    object.__setattr__(out, "k_of_probit", k_of_probit)
    return out


def sigma_from_l(l, delta, tilde_delta: float, *, discriminant=None, tol: float = 1e-14):
    """Total volatility from ``l`` by the quadratic ``s^2/2 - u s + l = 0``.

    Takes the ``+`` root up to ``tilde_delta`` and the ``-`` root beyond.
    ``l`` may be a callable of delta or an array of values at ``delta``.
    ``discriminant`` optionally supplies ``u^2 - 2 l`` directly, which avoids
    cancellation near the switch point.
    """
    d = np.asarray(delta, dtype=float)
    u = np.asarray(norm_ppf(d))
    lv = np.asarray(l(d) if callable(l) else l, dtype=float)
    if discriminant is None:
        disc = u * u - 2.0 * lv
    else:
        disc = np.asarray(discriminant(d) if callable(discriminant) else discriminant, dtype=float)
    scale = np.maximum(1.0, u * u)
    if np.any(disc < -tol * scale):
        i = int(np.flatnonzero((disc < -tol * scale).ravel())[0])
        raise NoSolution(f"negative discriminant {disc.ravel()[i]:.3e} at delta={d.ravel()[i]:.6g}")
    s = select_root(u, lv, disc, d <= tilde_delta)
    if np.any(~(s > 0)):
        i = int(np.flatnonzero(~(s > 0).ravel())[0])
        raise NonPositiveVol(f"selected root {s.ravel()[i]:.3e} not positive at delta={d.ravel()[i]:.6g}")
    return _ret(s)


def select_root(u, l, disc, plus):
    """Root of ``s^2/2 - u s + l = 0``: ``u + r`` where ``plus``, ``u - r``
    elsewhere, with ``r = sqrt(disc)``. Rationalized forms avoid cancellation."""
    u = np.asarray(u, dtype=float)
    l = np.asarray(l, dtype=float)
    r = np.sqrt(np.maximum(disc, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        sp = np.where(u <= 0, -2.0 * l / (r - u), u + r)
        sm = np.where(u >= 0, 2.0 * l / (u + r), u - r)
    sp = np.where(r - u == 0, u + r, sp)
    sm = np.where(u + r == 0, u - r, sm)
    return np.where(plus, sp, sm)


def symmetric_smile(smile: DeltaSmile, grid: GridSpec | None = None) -> DeltaSmile:
    """Mirror smile ``sbar(delta) = s(m^{-1}(-N^{-1}(delta)))``.

    In strike space this is ``k -> s_hat(-k)``. The returned smile's domain is
    shrunk where needed so ``-u`` stays inside the range of ``m``.
    """
    rep = check_sigma_wa(smile, grid)
    if not rep.passed:
        raise MembershipError("symmetric transform needs a weak-arbitrage-free smile: "
                              + "; ".join(rep.failures), rep)
    ulo, uhi = smile.probit_domain
    mfun = lambda x: _m_probit(smile, x)  # noqa: E731
    m_lo = float(mfun(np.array([ulo]))[0])
    m_hi = float(mfun(np.array([uhi]))[0])
    dom = (max(ulo, -m_hi), min(uhi, -m_lo))

    def probit_func(u):
        u = np.asarray(u, dtype=float)
        w = solve_monotone(mfun, -u.ravel(), ulo, uhi, clip_tol=1e-12 * max(1.0, abs(m_lo), abs(m_hi)))
        return np.asarray(smile.at_probit(w)).reshape(u.shape)

    return DeltaSmile(probit_func=probit_func, domain_eps=smile.domain_eps,
                      probit_domain=dom, name=f"{smile.name}:symmetric")
