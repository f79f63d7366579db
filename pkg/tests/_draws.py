"""Random parameter draws shared by several test modules."""

from __future__ import annotations

import math

import numpy as np

from smilewa.svi import SviParams


def random_svi(rng: np.random.Generator, n: int) -> list[SviParams]:
    """Valid SVI draws with wing slopes below 1.6, so that w(-10) < 20 and
    the switch equation has a sign change on [-10, 0]."""
    out = []
    while len(out) < n:
        rho = rng.uniform(-0.95, 0.95)
        b = rng.uniform(0.01, 1.6 / (1 + abs(rho)))
        m = rng.uniform(-0.5, 0.5)
        sb = rng.uniform(0.01, 1.0)
        floor = -b * sb * math.sqrt(1 - rho * rho)
        a = rng.uniform(floor + 0.005, 0.2)
        out.append(SviParams(a, b, rho, m, sb))
    return out


def bisect(f, lo: float, hi: float, tol: float = 1e-13) -> float:
    flo = f(lo)
    assert flo * f(hi) < 0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0:
            return mid
        if (fm < 0) == (flo < 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)
