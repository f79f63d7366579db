"""Shared numerical building blocks: a vectorized monotone root finder,
adaptive Gauss-Legendre cumulative integrals and finite differences."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import ConvergenceError, DomainError, QuadratureError

ArrayFn = Callable[[np.ndarray], np.ndarray]


# ---------------------------------------------------------------------------
# Root finding
# ---------------------------------------------------------------------------

def solve_monotone(
    f: ArrayFn,
    target,
    lo,
    hi,
    *,
    increasing: bool = True,
    xtol: float = 1e-15,
    ftol: float = 0.0,
    clip_tol: float = 0.0,
    maxiter: int = 200,
    table: tuple[np.ndarray, np.ndarray] | None = None,
) -> np.ndarray:
    """Solve ``f(x) = target`` elementwise for monotone ``f`` on ``[lo, hi]``.

    Illinois regula falsi; whenever three steps fail to halve the bracket a
    bisection step is forced, so the width is guaranteed to shrink. An
    element is done when its bracket is narrower than ``xtol`` (relative
    above 1) or when an interpolation step moves it by less than that. ``f``
    must accept and return 1-d arrays. Targets outside ``[f(lo), f(hi)]`` by
    more than ``clip_tol`` raise :class:`DomainError`; closer ones snap to
    the endpoint.

    ``table=(xs, fs)`` holds exact samples ``fs = f(xs)`` on a sorted grid
    spanning ``[lo, hi]``; it is used to start each solve from the tightest
    enclosing grid cell.
    """
    target = np.asarray(target, dtype=float)
    shape = np.broadcast(target, np.asarray(lo), np.asarray(hi)).shape
    t = np.broadcast_to(target, shape).astype(float).ravel()
    a = np.broadcast_to(np.asarray(lo, dtype=float), shape).astype(float).ravel()
    b = np.broadcast_to(np.asarray(hi, dtype=float), shape).astype(float).ravel()
    sgn = 1.0 if increasing else -1.0

    if table is not None:
        xs, fs = (np.asarray(v, dtype=float) for v in table)
        a = np.full_like(t, xs[0])
        b = np.full_like(t, xs[-1])
        fa = sgn * (fs[0] - t)
        fb = sgn * (fs[-1] - t)
        ok = (fa <= 0) & (fb >= 0)
        key = sgn * fs
        j = np.clip(np.searchsorted(key, sgn * t[ok], side="left"), 1, xs.size - 1)
        a[ok], b[ok] = xs[j - 1], xs[j]
        fa[ok] = sgn * (fs[j - 1] - t[ok])
        fb[ok] = sgn * (fs[j] - t[ok])
    else:
        fa = sgn * (np.asarray(f(a), dtype=float) - t)
        fb = sgn * (np.asarray(f(b), dtype=float) - t)
    if np.any(~np.isfinite(fa)) or np.any(~np.isfinite(fb)):
        raise DomainError("non-finite function value at bracket end")

    x = np.empty_like(a)
    done = np.zeros(a.shape, dtype=bool)
    below = fa > 0   # target below f(lo)
    above = fb < 0   # target above f(hi)
    if np.any(below & (fa > clip_tol)) or np.any(above & (-fb > clip_tol)):
        bad = np.flatnonzero((below & (fa > clip_tol)) | (above & (-fb > clip_tol)))[0]
        raise DomainError(
            f"target {t[bad]:.6g} outside attainable range on [{a[bad]:.6g}, {b[bad]:.6g}]"
        )
    x[below] = a[below]
    x[above] = b[above]
    done |= below | above
    hit_a = ~done & (fa == 0)
    hit_b = ~done & (fb == 0)
    x[hit_a] = a[hit_a]
    x[hit_b] = b[hit_b]
    done |= hit_a | hit_b

    side = np.zeros(a.shape, dtype=int)  # last retained endpoint: -1 a, +1 b
    x_prev = np.full(a.shape, np.nan)
    hist = np.repeat((b - a)[None, :], 3, axis=0)  # widths of the last 3 steps
    for it in range(maxiter):
        act = np.flatnonzero(~done)
        if act.size == 0:
            break
        aa, bb, fa_, fb_ = a[act], b[act], fa[act], fb[act]
        with np.errstate(divide="ignore", invalid="ignore"):
            xs = aa - fa_ * (bb - aa) / (fb_ - fa_)
        mid = 0.5 * (aa + bb)
        # keep interpolation points at least half a tolerance inside the
        # bracket; a root within rounding of an endpoint then closes it in
        # one step instead of a long run of bisections
        inset = 0.5 * xtol * np.maximum(1.0, np.maximum(np.abs(aa), np.abs(bb)))
        xs = np.clip(xs, aa + inset, bb - inset)
        slow = (bb - aa) > 0.5 * hist[it % 3, act]
        use_mid = (slow & (it >= 3)) | ~np.isfinite(xs) | (bb - aa <= 2 * inset)
        hist[it % 3, act] = bb - aa
        xn = np.where(use_mid, mid, xs)
        fx = sgn * (np.asarray(f(xn), dtype=float) - t[act])
        if np.any(~np.isfinite(fx)):
            raise DomainError("non-finite function value inside bracket")

        left = fx < 0  # root lies in [xn, b]
        # Illinois: halve the stale endpoint value when kept twice
        s = side[act]
        new_a = np.where(left, xn, aa)
        new_b = np.where(left, bb, xn)
        new_fa = np.where(left, fx, np.where(s == -1, 0.5 * fa_, fa_))
        new_fb = np.where(left, np.where(s == 1, 0.5 * fb_, fb_), fx)
        side[act] = np.where(left, 1, -1)
        a[act], b[act], fa[act], fb[act] = new_a, new_b, new_fa, new_fb
        x[act] = xn

        width = new_b - new_a
        tol = xtol * np.maximum(1.0, np.abs(xn))
        small_step = ~use_mid & (np.abs(xn - x_prev[act]) <= tol)
        x_prev[act] = xn
        conv = (fx == 0) | (np.abs(fx) <= ftol) | (width <= tol) | small_step
        done[act[conv]] = True
    else:
        if not done.all():
            raise ConvergenceError(f"root finder did not converge in {maxiter} iterations")
    return x.reshape(shape)


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------

_GL_N = 16
_GL_X, _GL_W = np.polynomial.legendre.leggauss(_GL_N)


def gauss_legendre(g: ArrayFn, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Fixed-order Gauss-Legendre on each interval ``[a_i, b_i]``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    nodes = mid[..., None] + half[..., None] * _GL_X
    vals = np.asarray(g(nodes.ravel()), dtype=float).reshape(nodes.shape)
    return half * (vals @ _GL_W)


class CumulativeIntegral:
    """Cumulative integral of ``g`` on ``[lo, hi]`` measured from an anchor.

    With ``anchor="left"`` the value at ``x`` is the integral over ``[lo, x]``;
    with ``anchor="right"`` it is the integral over ``[x, hi]``. Panels are
    refined adaptively (16-point rule against its two halves) and cumulative
    sums are stored from the anchor side, so values near the anchor do not
    suffer cancellation.
    """

    def __init__(
        self,
        g: ArrayFn,
        lo: float,
        hi: float,
        *,
        anchor: str = "left",
        breakpoints=(),
        abs_tol: float = 1e-10,
        rel_tol: float = 1e-12,
        max_panels: int = 20000,
        max_width: float = 0.25,
        min_width: float = 1e-9,
    ):
        if anchor not in ("left", "right"):
            raise ValueError("anchor must be 'left' or 'right'")
        self.g = g
        self.lo, self.hi = float(lo), float(hi)
        self.anchor = anchor
        if self.hi <= self.lo:
            self.edges = np.array([self.lo, self.lo])
            self.cum = np.zeros(2)
            return

        n0 = max(1, int(np.ceil((self.hi - self.lo) / max_width)))
        edges = np.linspace(self.lo, self.hi, n0 + 1)
        bp = np.asarray([x for x in breakpoints if self.lo < x < self.hi], dtype=float)
        edges = np.unique(np.concatenate([edges, bp]))

        pending_a, pending_b = edges[:-1], edges[1:]
        done_a, done_b, done_v = [], [], []
        span = self.hi - self.lo
        n_total = pending_a.size
        while pending_a.size:
            m = 0.5 * (pending_a + pending_b)
            whole = gauss_legendre(g, pending_a, pending_b)
            left = gauss_legendre(g, pending_a, m)
            right = gauss_legendre(g, m, pending_b)
            halves = left + right
            if np.any(~np.isfinite(halves)):
                raise QuadratureError("integrand not finite on quadrature panel")
            err = np.abs(whole - halves)
            tol = np.maximum(abs_tol * (pending_b - pending_a) / span, rel_tol * np.abs(halves))
            ok = (err <= tol) | ((pending_b - pending_a) <= min_width)
            # accepted panels are stored as their two halves
            done_a += [pending_a[ok], m[ok]]
            done_b += [m[ok], pending_b[ok]]
            done_v += [left[ok], right[ok]]
            pending_a = np.concatenate([pending_a[~ok], m[~ok]])
            pending_b = np.concatenate([m[~ok], pending_b[~ok]])
            n_total += int((~ok).sum())
            if n_total > max_panels:
                raise QuadratureError(
                    f"quadrature on [{self.lo:.4g}, {self.hi:.4g}] exceeded {max_panels} panels"
                )
        pa = np.concatenate(done_a)
        order = np.argsort(pa)
        pa = pa[order]
        pv = np.concatenate(done_v)[order]
        self.edges = np.append(pa, self.hi)
        if anchor == "left":
            self.cum = np.concatenate([[0.0], np.cumsum(pv)])
        else:
            self.cum = np.concatenate([np.cumsum(pv[::-1])[::-1], [0.0]])

    @property
    def total(self) -> float:
        return float(self.cum[-1] if self.anchor == "left" else self.cum[0])

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        flat = x.ravel()
        slack = 1e-12 * max(1.0, abs(self.lo), abs(self.hi))
        if np.any(flat < self.lo - slack) or np.any(flat > self.hi + slack):
            raise DomainError(
                f"integral evaluated outside its table [{self.lo:.6g}, {self.hi:.6g}]"
            )
        flat = np.clip(flat, self.lo, self.hi)
        if self.edges.size < 3 and self.edges[0] == self.edges[-1]:
            return np.zeros_like(x)
        i = np.clip(np.searchsorted(self.edges, flat, side="right") - 1, 0, self.edges.size - 2)
        if self.anchor == "left":
            out = self.cum[i] + gauss_legendre(self.g, self.edges[i], flat)
        else:
            out = self.cum[i + 1] + gauss_legendre(self.g, flat, self.edges[i + 1])
        return out.reshape(x.shape)


# ---------------------------------------------------------------------------
# Finite differences
# ---------------------------------------------------------------------------

def central_diff(f: ArrayFn, x, h: float) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return (np.asarray(f(x + h)) - np.asarray(f(x - h))) / (2.0 * h)


def richardson_d1(f: ArrayFn, x, h: float) -> np.ndarray:
    """First derivative, central differences with one Richardson step."""
    d_h = central_diff(f, x, h)
    d_h2 = central_diff(f, x, 0.5 * h)
    return (4.0 * d_h2 - d_h) / 3.0


def richardson_d2(f: ArrayFn, x, h: float) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    f0 = np.asarray(f(x))

    def sd(step):
        return (np.asarray(f(x + step)) - 2.0 * f0 + np.asarray(f(x - step))) / (step * step)

    return (4.0 * sd(0.5 * h) - sd(h)) / 3.0


def count_sign_changes(y: np.ndarray) -> tuple[int, np.ndarray]:
    """Sign changes of a sampled function, ignoring exact zeros."""
    s = np.sign(y)
    nz = np.flatnonzero(s != 0)
    if nz.size < 2:
        return 0, np.array([], dtype=int)
    flips = np.flatnonzero(s[nz][1:] != s[nz][:-1])
    return int(flips.size), nz[flips]
