"""Smile calibration from pillar quotes.

Two routes:

* ``calibrate_l_interp`` interpolates ``l = -k`` through the pillars under the
  monotonicity and switch-point constraints and rebuilds the smile from l.
* ``calibrate_wa_fit`` fits a parametric family by least squares.
"""

from __future__ import annotations

import csv
import dataclasses
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import least_squares, minimize

from ._numerics import count_sign_changes, solve_monotone
from .bs_core import delta_of, norm_cdf, norm_ppf
from .delta_map import (
    DEFAULT_EPS,
    DeltaSmile,
    GridSpec,
    MembershipReport,
    check_sigma_delta_to_k,
    check_sigma_wa,
    select_root,
)
from .errors import (
    ConstraintViolation,
    DataError,
    InputFormatError,
    OptimizationFailure,
    SmileError,
    ValidationError,
)
from .wa_param import (
    QuadratureSpec,
    ValidationReport,
    WAParams,
    family_bounded_skew,
    family_flat,
    family_spline,
    family_w_shape,
    validate,
)

log = logging.getLogger(__name__)

__all__ = [
    "PillarSet",
    "CalibrationResult",
    "LInterpConfig",
    "FitConfig",
    "pillars_to_delta",
    "calibrate_l_interp",
    "calibrate_wa_fit",
    "FIT_FAMILIES",
]


# ---------------------------------------------------------------------------
# Pillars
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PillarSet:
    """Market quotes ``(x_i, sigma_i)`` at one maturity.

    ``x`` is log-moneyness for ``kind="strike"`` and delta for ``"delta"``;
    ``sigma`` is annualized implied volatility.
    """

    maturity: float
    x: tuple[float, ...]
    sigma: tuple[float, ...]
    kind: str = "strike"

    def __post_init__(self):
        if self.kind not in ("strike", "delta"):
            raise DataError(f"unknown pillar kind {self.kind!r}")
        if not (self.maturity > 0 and math.isfinite(self.maturity)):
            raise DataError(f"maturity must be positive, got {self.maturity}")
        x = tuple(float(v) for v in self.x)
        s = tuple(float(v) for v in self.sigma)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "sigma", s)
        if len(x) != len(s):
            raise DataError("abscissae and vols differ in length")
        if len(x) < 3:
            raise DataError(f"need at least 3 pillars, got {len(x)}")
        if not all(math.isfinite(v) for v in x + s):
            raise DataError("pillars must be finite")
        for i in range(len(x) - 1):
            if not x[i] < x[i + 1]:
                raise DataError(f"pillars not strictly increasing at positions {i}, {i + 1}")
        if any(v <= 0 for v in s):
            raise DataError("pillar vols must be positive")
        if self.kind == "delta" and not all(0 < v < 1 for v in x):
            raise DataError("delta pillars must lie in (0, 1)")

    @property
    def total_vols(self) -> np.ndarray:
        return np.asarray(self.sigma) * math.sqrt(self.maturity)

    def __len__(self) -> int:
        return len(self.x)

    @classmethod
    def from_total_vols(cls, maturity: float, x: Sequence[float], total_vols: Sequence[float],
                        kind: str = "strike") -> "PillarSet":
        s = np.asarray(total_vols, dtype=float) / math.sqrt(maturity)
        return cls(maturity, tuple(x), tuple(s), kind)

    @classmethod
    def from_csv(cls, path: str | Path, maturity: float) -> "PillarSet":
        """Read ``k,sigma`` or ``delta,sigma`` rows (header required)."""
        path = Path(path)
        with path.open(newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise InputFormatError("empty file", line=1) from None
            header = [h.strip().lower() for h in header]
            if header == ["k", "sigma"]:
                kind = "strike"
            elif header == ["delta", "sigma"]:
                kind = "delta"
            else:
                raise InputFormatError(f"expected header 'k,sigma' or 'delta,sigma', got {','.join(header)!r}",
                                       line=1)
            xs, ss = [], []
            for row in reader:
                line = reader.line_num
                if not row or all(not c.strip() for c in row):
                    continue
                if len(row) != 2:
                    raise InputFormatError(f"expected 2 fields, got {len(row)}", line=line)
                try:
                    xs.append(float(row[0]))
                    ss.append(float(row[1]))
                except ValueError:
                    raise InputFormatError(f"non-numeric field in {row!r}", line=line) from None
        order = np.argsort(xs, kind="stable")
        xs = [xs[i] for i in order]
        ss = [ss[i] for i in order]
        return cls(maturity, tuple(xs), tuple(ss), kind)


def pillars_to_delta(p: PillarSet) -> PillarSet:
    """Map strike pillars to delta pillars, sorted by increasing delta.

    Adjacent pillars whose d1 values fail to decrease in k are reported as a
    :class:`DataError`.
    """
    if p.kind == "delta":
        return p
    k = np.asarray(p.x)
    v = p.total_vols
    d1 = -k / v + 0.5 * v
    bad = np.flatnonzero(~(np.diff(d1) < 0))
    if bad.size:
        i = int(bad[0])
        raise DataError(
            f"d1 not decreasing between pillars k={k[i]:.6g} (sigma={p.sigma[i]:.6g}) "
            f"and k={k[i + 1]:.6g} (sigma={p.sigma[i + 1]:.6g})"
        )
    delta = np.asarray(delta_of(k, v))
    if np.any(np.diff(delta[::-1]) <= 0):
        raise DataError("deltas collapse in floating point; pillars too far in the wings")
    return PillarSet(p.maturity, tuple(delta[::-1]), tuple(np.asarray(p.sigma)[::-1]), "delta")


# ---------------------------------------------------------------------------
# Results
# ---------------------------------------------------------------------------

@dataclass
class CalibrationResult:
    smile: DeltaSmile
    residuals: np.ndarray
    method: str
    report: MembershipReport
    params: WAParams | None = None
    objective: float | None = None
    tilde_delta: float | None = None
    pillars: PillarSet | None = None
    details: dict = field(default_factory=dict)

    @property
    def rms(self) -> float:
        return float(np.sqrt(np.mean(np.square(self.residuals))))

    def to_dict(self) -> dict:
        out = {
            "method": self.method,
            "residuals": [float(r) for r in self.residuals],
            "rms": self.rms,
            "objective": self.objective,
            "tilde_delta": self.tilde_delta,
            "report": self.report.to_dict(),
            "details": self.details,
        }
        if self.params is not None:
            try:
                out["params"] = self.params.to_dict()
            except ValueError:
                out["params"] = None
        return out


# ---------------------------------------------------------------------------
# Methodology 1: interpolation of l
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LInterpConfig:
    """Settings for :func:`calibrate_l_interp`.

    ``wa_strict`` also enforces the monotone-m inequalities that make the
    result weak-arbitrage-free; ``grid_n`` is the size of the constraint grid.
    """

    wa_strict: bool = False
    grid_n: int = 2001
    domain_eps: float = DEFAULT_EPS


def calibrate_l_interp(p: PillarSet, cfg: LInterpConfig | None = None) -> CalibrationResult:
    """Monotone interpolation of ``l`` through the pillars.

    ``l`` itself only touches ``u^2/2`` at the switch point (``l - u^2/2 =
    -m^2/2``), so the interpolant is carried by ``m = u - s`` instead:
    a monotone cubic through ``(u_i, m_i)`` with ``l = (u^2 - m^2)/2``. This
    reproduces every ``l_i`` exactly and makes the switch point a simple
    sign change of ``m``. Beyond the outer pillars the total volatility is
    held flat, which in ``l`` is a lambda-type tail ``c/n(N^{-1})`` on the
    left and an ``alpha = 1 - c/N^{-1}`` tail on the right; both diverge.
    """
    cfg = cfg or LInterpConfig()
    dp = pillars_to_delta(p)
    delta = np.asarray(dp.x)
    s = dp.total_vols
    u = np.asarray(norm_ppf(delta))
    l_i = (u - 0.5 * s) * s
    bad = np.flatnonzero(~(np.diff(l_i) > 0))
    if bad.size:
        i = int(bad[0])
        raise ConstraintViolation("l strictly increasing",
                                  f"pillars at delta={delta[i]:.6g} and {delta[i + 1]:.6g}")
    m_i = u - s
    spline = PchipInterpolator(u, m_i, extrapolate=False)
    s_lo, s_hi = float(s[0]), float(s[-1])
    u_lo_p, u_hi_p = float(u[0]), float(u[-1])

    def m_fun(x):
        x = np.asarray(x, dtype=float)
        out = np.where(x < u_lo_p, x - s_lo, np.where(x > u_hi_p, x - s_hi, 0.0))
        inside = (x >= u_lo_p) & (x <= u_hi_p)
        if np.any(inside):
            out = np.array(out, dtype=float)
            out[inside] = spline(x[inside])
        return out

    u0 = float(norm_ppf(cfg.domain_eps))
    grid_u = np.linspace(u0, -u0, cfg.grid_n)
    mg = m_fun(grid_u)
    lg = 0.5 * (grid_u - mg) * (grid_u + mg)

    # l(1/2) < 0 is m(0)^2 > 0 with m(0) < 0, i.e. the switch lies above 1/2
    m_half = float(m_fun(np.array([0.0]))[0])
    if not m_half < 0:
        raise ConstraintViolation("l(1/2)<0", f"m(1/2) = {m_half:.6g} places the switch point at or below 1/2")

    v = np.flatnonzero(np.diff(lg) < -1e-13 * np.maximum(1.0, np.abs(lg[1:])))
    if v.size:
        raise ConstraintViolation("l strictly increasing",
                                  f"interpolant decreases near delta={float(norm_cdf(grid_u[v[0] + 1])):.6g}")

    n_changes, idx = count_sign_changes(mg)
    if n_changes != 1:
        raise ConstraintViolation("unique tilde_delta", f"{n_changes} sign changes of l - u^2/2 structure")
    i = int(idx[0])
    tu = float(solve_monotone(m_fun, 0.0, grid_u[i], grid_u[i + 1]))
    td = float(norm_cdf(tu))

    if cfg.wa_strict:
        # finite-difference form of l' > u/n(u) on (1/2, td) and < beyond
        h = 1e-6
        for side, mask in (("below", (grid_u > 0) & (grid_u < tu - 2 * h)),
                           ("above", grid_u > tu + 2 * h)):
            x = grid_u[mask]
            lp = (0.5 * ((x + h) ** 2 - m_fun(x + h) ** 2) - 0.5 * ((x - h) ** 2 - m_fun(x - h) ** 2)) / (2 * h)
            ok = lp > x if side == "below" else lp < x
            if not np.all(ok):
                j = int(np.flatnonzero(~ok)[0])
                raise ConstraintViolation(
                    "l'(delta) > N^-1(delta)/n(N^-1(delta)) on (1/2, tilde_delta)" if side == "below"
                    else "l'(delta) < N^-1(delta)/n(N^-1(delta)) on (tilde_delta, 1)",
                    f"fails near delta={float(norm_cdf(x[j])):.6g}",
                )

    def probit_func(x):
        x = np.asarray(x, dtype=float)
        mx = m_fun(x)
        lx = 0.5 * (x - mx) * (x + mx)
        # root chosen by probit position; delta itself rounds to 1 in the far right
        return select_root(x, lx, mx * mx, x <= tu)

    smile = DeltaSmile(probit_func=probit_func, domain_eps=cfg.domain_eps, name="l_interp")
    fit = np.asarray(smile.at_probit(u))
    residuals = fit - s
    grid = GridSpec(n=cfg.grid_n)
    rep = check_sigma_wa(smile, grid) if cfg.wa_strict else check_sigma_delta_to_k(smile, grid)
    if rep.tilde_delta is None:
        rep.tilde_delta = td
    return CalibrationResult(smile=smile, residuals=residuals, method="l_interp", report=rep,
                             tilde_delta=td, pillars=dp,
                             details={"extrapolation": "flat total vol beyond outer pillars"})


# ---------------------------------------------------------------------------
# Methodology 2: parametric fit
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FitConfig:
    """Settings for :func:`calibrate_wa_fit`.

    ``n_starts`` deterministic starts are drawn from ``default_rng(seed)``;
    start 0 is the data-driven default. Each start runs Nelder-Mead (at most
    ``maxiter`` iterations per parameter), then an optional trust-region
    least-squares polish.
    """

    seed: int = 0
    n_starts: int = 8
    maxiter: int = 60
    polish: bool = True
    start_scale: float = 1.0
    quadrature: QuadratureSpec = field(default_factory=QuadratureSpec)


def _sigmoid(x):
    return 1.0 / (1.0 + math.exp(-x)) if x >= 0 else math.exp(x) / (1.0 + math.exp(x))


def _logit(p):
    return math.log(p / (1.0 - p))


class _Family:
    name: str

    def build(self, x, q) -> WAParams:  # pragma: no cover - interface
        raise NotImplementedError

    def default(self, delta, s) -> np.ndarray:  # pragma: no cover - interface
        raise NotImplementedError


class _Flat(_Family):
    name = "flat"

    def build(self, x, q):
        return family_flat(math.exp(x[0]), q, check=False)

    def default(self, delta, s):
        return np.array([math.log(float(np.median(s)))])


class _BoundedSkew(_Family):
    name = "bounded_skew"

    def build(self, x, q):
        return family_bounded_skew(math.exp(x[0]), 0.5 + 0.25 * _sigmoid(x[1]), q, check=False)

    def default(self, delta, s):
        td = _switch_guess(delta, s, 0.5 + 1e-3, 0.75 - 1e-3)
        return np.array([math.log(float(s[0])), _logit((td - 0.5) / 0.25)])


class _WShape(_Family):
    name = "w_shape"

    def build(self, x, q):
        td = 0.5 + 0.5 * _sigmoid(x[0])
        hd = 0.5 * _sigmoid(x[1])
        hhd = td + (1.0 - td) * _sigmoid(x[2])
        return family_w_shape(td, hd, hhd, q, check=False)

    def default(self, delta, s):
        td = _switch_guess(delta, s, 0.5 + 1e-3, 1 - 1e-3)
        i_lo = int(np.argmin(np.where(delta < 0.5, s, np.inf)))
        hd = min(max(float(delta[i_lo]) * 4.0, 1e-3), 0.45)
        i_hi = int(np.argmin(np.where(delta > td, s, np.inf))) if np.any(delta > td) else len(s) - 1
        hhd = min(max(float(delta[i_hi]), td + 1e-3), 1 - 1e-4)
        return np.array([_logit((td - 0.5) / 0.5), _logit(hd / 0.5), _logit((hhd - td) / (1 - td))])


class _Spline(_Family):
    name = "spline_params"

    def build(self, x, q):
        td = 0.5 + 0.5 * _sigmoid(x[0])
        return family_spline(td, x[1:5], x[5:8], x[8:11], q, check=False)

    def default(self, delta, s):
        td = _switch_guess(delta, s, 0.5 + 1e-3, 1 - 1e-3)
        lev = math.log(float(np.median(s)))
        ut = float(norm_ppf(td))
        mu0 = math.log(max(ut, 1e-3) / 2)
        return np.concatenate([[_logit((td - 0.5) / 0.5)], np.full(4, lev), np.full(3, mu0), np.zeros(3)])


FIT_FAMILIES = {f.name: f for f in (_Flat(), _BoundedSkew(), _WShape(), _Spline())}


def _switch_guess(delta, s, lo, hi) -> float:
    """Switch point where ``u - s`` changes sign, linear in between pillars."""
    u = np.asarray(norm_ppf(delta))
    m = u - s
    n, idx = count_sign_changes(m)
    if n >= 1:
        i = int(idx[0])
        t = m[i] / (m[i] - m[i + 1])
        td = float(norm_cdf(u[i] + t * (u[i + 1] - u[i])))
    else:
        td = float(norm_cdf(float(np.median(s))))
    return min(max(td, lo), hi)


_PENALTY = 1e3


def calibrate_wa_fit(p: PillarSet, family: str, cfg: FitConfig | None = None) -> CalibrationResult:
    """Least-squares fit of a parametric family to the pillar vols.

    Parameters are mapped through transforms that keep them admissible
    (positivity by exponentials, switch point and kink locations by
    logistics). Starts are evaluated in order; the best objective wins and
    ties go to the earlier start, so the result is monotone in ``n_starts``.
    """
    cfg = cfg or FitConfig()
    if family not in FIT_FAMILIES:
        raise ValidationError(f"unknown family {family!r}; choose from {sorted(FIT_FAMILIES)}")
    fam = FIT_FAMILIES[family]
    dp = pillars_to_delta(p)
    delta = np.asarray(dp.x)
    s = dp.total_vols
    u = np.asarray(norm_ppf(delta))

    def residuals(x):
        try:
            params = fam.build(x, cfg.quadrature)
            r = np.asarray(params.sigma_probit(u)) - s
        except (SmileError, FloatingPointError, OverflowError, ValueError):
            return None
        if not np.all(np.isfinite(r)):
            return None
        return r

    def objective(x):
        r = residuals(x)
        return _PENALTY if r is None else float(r @ r)

    def resid_vec(x):
        r = residuals(x)
        return np.full(len(s), math.sqrt(_PENALTY / len(s))) if r is None else r

    x0 = fam.default(delta, s)
    rng = np.random.default_rng(cfg.seed)
    starts = [x0] + [x0 + cfg.start_scale * rng.standard_normal(x0.size) for _ in range(cfg.n_starts - 1)]

    best_x, best_f, best_i = None, math.inf, -1
    trace = []
    for i, xs in enumerate(starts):
        budget = cfg.maxiter * xs.size
        res = minimize(objective, xs, method="Nelder-Mead",
                       options={"maxiter": budget, "maxfev": 2 * budget,
                                "xatol": 1e-10, "fatol": 1e-18, "adaptive": xs.size > 3})
        x, f = res.x, float(res.fun)
        if cfg.polish and f < _PENALTY:
            try:
                pol = least_squares(resid_vec, x, method="trf", xtol=1e-15, ftol=1e-15, gtol=1e-15,
                                    max_nfev=200 * x.size)
                fp = objective(pol.x)
                if fp < f:
                    x, f = pol.x, fp
            except (ValueError, np.linalg.LinAlgError):  # pragma: no cover
                pass
        trace.append(f)
        log.debug("start %d objective %.3e", i, f)
        if f < best_f:
            best_x, best_f, best_i = x, f, i

    if best_x is None or best_f >= _PENALTY:
        raise OptimizationFailure(f"no feasible {family} parameters after {cfg.n_starts} starts")
    params = fam.build(best_x, cfg.quadrature)
    vrep: ValidationReport = validate(params)
    if not vrep.passed:
        raise OptimizationFailure(f"best {family} fit fails validation: " + "; ".join(vrep.failures))
    smile = params.smile()
    r = np.asarray(params.sigma_probit(u)) - s
    rep = check_sigma_wa(smile, GridSpec(n=401))
    return CalibrationResult(
        smile=smile, residuals=r, method="wa_fit", report=rep, params=params,
        objective=float(r @ r), tilde_delta=params.tilde_delta, pillars=dp,
        details={"family": family, "best_start": best_i, "start_objectives": trace,
                 "seed": cfg.seed, "validation": vrep.to_dict()},
    )
