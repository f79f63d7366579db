"""Arbitrage and asymptotics diagnostics on strike- and delta-space smiles.

All limit statements are checked at finite probes; every report records the
probe it used.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ._numerics import richardson_d1, richardson_d2, solve_monotone
from .bs_core import norm_cdf, norm_pdf, norm_ppf
from .delta_map import DeltaSmile, KGrid, MembershipReport, StrikeSmile, _jsonable
from .errors import DomainError, SingularExpansion

__all__ = [
    "WingReport",
    "DurrlemanReport",
    "ExpansionCoeffs",
    "fukasawa_check",
    "durrleman_check",
    "durrleman_values",
    "wing_report",
    "atm_expansion",
]


# ---------------------------------------------------------------------------
# Weak conditions
# ---------------------------------------------------------------------------

def fukasawa_check(smile: StrikeSmile, grid: KGrid | None = None, *, k_probe: float = 1.0) -> MembershipReport:
    """d1 and d2 strictly decreasing on a k-grid, plus Lee wing flags.

    The right-wing flag requires ``s < sqrt(2k)`` for ``k >= k_probe`` and the
    left-wing flag ``s < sqrt(-2k)`` for ``k <= -k_probe``, i.e. ``d1 < 0`` and
    ``d2 > 0`` on the respective grid tails.
    """
    grid = grid or KGrid()
    k = grid.points(smile.k_domain)
    s = np.asarray(smile(k), dtype=float)
    d1 = -k / s + 0.5 * s
    d2 = d1 - s
    failures: list[str] = []
    checks: dict = {"k_min": float(k[0]), "k_max": float(k[-1]), "k_probe": k_probe}

    for name, d in (("d1", d1), ("d2", d2)):
        bad = np.flatnonzero(~(np.diff(d) < 0))
        checks[f"{name}_decreasing"] = bad.size == 0
        if bad.size:
            kb = float(k[bad[0] + 1])
            checks[f"{name}_first_violation_k"] = kb
            failures.append(f"{name} not strictly decreasing (k={kb:.6g})")

    right = k >= k_probe
    bad = np.flatnonzero(right & ~(s < np.sqrt(2 * np.maximum(k, 0))))
    checks["lee_right"] = bad.size == 0
    if bad.size:
        checks["lee_right_first_violation_k"] = float(k[bad[0]])
        failures.append(f"Lee right wing violated (k={k[bad[0]]:.6g})")
    left = k <= -k_probe
    bad = np.flatnonzero(left & ~(s < np.sqrt(2 * np.maximum(-k, 0))))
    checks["lee_left"] = bad.size == 0
    if bad.size:
        checks["lee_left_first_violation_k"] = float(k[bad[-1]])
        failures.append(f"Lee left wing violated (k={k[bad[-1]]:.6g})")
    return MembershipReport(passed=not failures, failures=failures, checks=checks)


# ---------------------------------------------------------------------------
# Durrleman
# ---------------------------------------------------------------------------

@dataclass
class DurrlemanReport:
    passed: bool
    min_value: float
    argmin_k: float
    first_negative_k: float | None
    n_negative: int
    n_nonfinite: int
    k_min: float
    k_max: float
    h: float

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))


def durrleman_values(smile: StrikeSmile, k, h: float = 1e-4) -> np.ndarray:
    """``s'' + d1' d2' s`` in total-volatility units.

    Derivatives are central differences with one Richardson step. The sign
    matches that of the usual butterfly density condition.
    """
    k = np.asarray(k, dtype=float)
    s = np.asarray(smile(k), dtype=float)
    s1 = richardson_d1(smile, k, h)
    s2 = richardson_d2(smile, k, h)
    base = -1.0 / s + k * s1 / (s * s)
    d1p = base + 0.5 * s1
    d2p = base - 0.5 * s1
    return s2 + d1p * d2p * s


def durrleman_check(smile: StrikeSmile, grid: KGrid | None = None, *, h: float = 1e-4) -> DurrlemanReport:
    grid = grid or KGrid()
    lo, hi = smile.k_domain
    k = grid.points((lo + 2 * h, hi - 2 * h))
    with np.errstate(all="ignore"):
        v = durrleman_values(smile, k, h)
    finite = np.isfinite(v)
    neg = finite & (v < 0)
    if finite.any():
        i = int(np.nanargmin(np.where(finite, v, np.nan)))
        vmin, kmin = float(v[i]), float(k[i])
    else:
        vmin, kmin = math.nan, math.nan
    first = float(k[np.flatnonzero(neg)[0]]) if neg.any() else None
    return DurrlemanReport(
        passed=bool(finite.all() and not neg.any()),
        min_value=vmin,
        argmin_k=kmin,
        first_negative_k=first,
        n_negative=int(neg.sum()),
        n_nonfinite=int((~finite).sum()),
        k_min=float(k[0]),
        k_max=float(k[-1]),
        h=h,
    )


# ---------------------------------------------------------------------------
# Wings
# ---------------------------------------------------------------------------

@dataclass
class WingReport:
    """Finite-probe wing ratios.

    ``side`` refers to the strike wing: ``"right"`` is ``k -> +inf``
    (delta -> 0), ``"left"`` is ``k -> -inf`` (delta -> 1). ``k_space_ratio``
    is ``s^2 / k`` with signed ``k``; the mapped ratio ``-2a/(2-a)`` is its
    delta-space image.
    """

    side: str
    probe_eps: float
    probe_u: float
    k: float
    total_vol: float
    k_space_ratio: float
    delta_space_ratio: float
    mapped_ratio: float
    quantile_ratio: float
    consistent: bool
    quantile_consistent: bool
    lee_ok: bool
    tolerance: float

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))


def _rel_close(x: float, y: float, tol: float) -> bool:
    return abs(x - y) <= tol * max(abs(x), abs(y), 1e-300)


def wing_report(smile: DeltaSmile, probe_eps: float = 1e-6, *, tol: float = 0.10) -> tuple[WingReport, WingReport]:
    """Right and left wing reports at ``delta = probe_eps`` and ``1 - probe_eps``.

    The quantile ratio replaces ``N^{-1}(delta)`` by its tail approximation
    ``-/+ sqrt(-2 log eps)``.
    """
    if not 0 < probe_eps < 0.5:
        raise DomainError("probe_eps must lie in (0, 1/2)")
    u_tail = float(norm_ppf(probe_eps))
    q = math.sqrt(-2.0 * math.log(probe_eps))
    out = []
    for side, u, qa in (("right", u_tail, -q), ("left", -u_tail, q)):
        s = float(smile.at_probit(u))
        k = -(u - 0.5 * s) * s
        r = s / u
        a = s * s / k
        mapped = -2 * a / (2 - a)
        qr = s / qa
        lee = (r < 1.0) if side == "left" else (a < 2.0)
        out.append(WingReport(
            side=side, probe_eps=probe_eps, probe_u=u, k=k, total_vol=s,
            k_space_ratio=a, delta_space_ratio=r, mapped_ratio=mapped, quantile_ratio=qr,
            consistent=_rel_close(mapped, r, tol), quantile_consistent=_rel_close(qr, r, tol),
            lee_ok=bool(lee), tolerance=tol,
        ))
    return out[0], out[1]


# ---------------------------------------------------------------------------
# ATM expansion
# ---------------------------------------------------------------------------

@dataclass
class ExpansionCoeffs:
    a0: float
    a1: float
    a2: float
    b0: float
    b1: float
    b2: float
    delta_atm: float
    fd_b1: float | None = None
    fd_b2: float | None = None
    verified: bool | None = None
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))


def expansion_from_k(a0: float, a1: float, a2: float) -> tuple[float, float, float, float]:
    """Delta-space Taylor coefficients at the ATM delta from k-space ones.

    With ``s(k) = a0 + a1 k + a2 k^2 + ...`` and ``D = 2 - a0 a1``::

        b1 = -2 a0 a1 / (n(a0/2) D)
        b2 = a0 (8 a0 a2 + 8 a1^2 - a0 a1 D^2 / 2) / (n(a0/2)^2 D^3)

    Returns ``(b0, b1, b2, delta_atm)``.
    """
    D = 2.0 - a0 * a1
    if abs(D) < 1e-6:
        raise SingularExpansion(f"2 - a0*a1 = {D:.3e} too close to zero")
    n0 = float(norm_pdf(0.5 * a0))
    b1 = -2.0 * a0 * a1 / (n0 * D)
    b2 = a0 * (8 * a0 * a2 + 8 * a1 * a1 - 0.5 * a0 * a1 * D * D) / (n0 * n0 * D ** 3)
    return a0, b1, b2, float(norm_cdf(0.5 * a0))


def _local_delta_smile(smile: StrikeSmile, half_width: float = 0.5):
    """Delta-space view near k = 0 by local inversion of d1."""
    lo = max(-half_width, smile.k_domain[0])
    hi = min(half_width, smile.k_domain[1])

    def d1(k):
        s = np.asarray(smile(k), dtype=float)
        return -k / s + 0.5 * s

    kk = np.linspace(lo, hi, 201)
    dd = d1(kk)
    if np.any(np.diff(dd) >= 0):
        raise DomainError("d1 not decreasing near the money")

    def sigma(delta):
        u = np.asarray(norm_ppf(delta), dtype=float)
        k = solve_monotone(d1, u.ravel(), lo, hi, increasing=False, table=(kk, dd))
        return np.asarray(smile(k)).reshape(u.shape)

    return sigma


def atm_expansion(
    smile: StrikeSmile,
    *,
    h: float = 1e-3,
    verify: bool = True,
    h_delta: float = 1e-3,
    rel_tol: float = 1e-3,
) -> ExpansionCoeffs:
    """Second-order expansion of the delta smile at the ATM delta ``N(a0/2)``.

    ``a0, a1, a2`` come from Richardson-refined central differences of the
    strike smile at ``k = 0``. With ``verify`` the delta-space coefficients
    are compared against differences of the locally inverted delta smile.
    """
    a0 = float(smile(0.0))
    a1 = float(richardson_d1(smile, 0.0, h))
    a2 = 0.5 * float(richardson_d2(smile, 0.0, h))
    b0, b1, b2, d_atm = expansion_from_k(a0, a1, a2)
    out = ExpansionCoeffs(a0=a0, a1=a1, a2=a2, b0=b0, b1=b1, b2=b2, delta_atm=d_atm)
    if not verify:
        return out
    try:
        sig = _local_delta_smile(smile)
    except DomainError as exc:
        out.notes.append(f"verification skipped: {exc}")
        return out
    fd1 = float(richardson_d1(sig, d_atm, h_delta))
    fd2 = 0.5 * float(richardson_d2(sig, d_atm, h_delta))
    out.fd_b1, out.fd_b2 = fd1, fd2
    floor = 1e-6 * max(1.0, a0)
    ok1 = abs(fd1 - b1) <= rel_tol * max(abs(b1), floor)
    ok2 = abs(fd2 - b2) <= rel_tol * max(abs(b2), floor)
    out.verified = bool(ok1 and ok2)
    if not ok1:
        out.notes.append("b1 disagrees with finite differences")
    if not ok2:
        out.notes.append("b2 disagrees with finite differences")
    return out
