from __future__ import annotations

import math

import numpy as np
import pytest

from smilewa import (
    MarketSpec,
    bs_call,
    d12,
    delta_of,
    implied_total_vol,
    k_from_delta_vol,
    norm_cdf,
    norm_pdf,
    norm_ppf,
)
from smilewa.errors import ConvergenceError, DomainError, PriceOutOfBounds

# Reference values computed once with mpmath at 50 digits.
N_01 = 0.5398278372770290
UPPER_TAIL_8 = 6.220960574271784e-16
PPF_1E12 = -7.034483825301132
PPF_09 = 1.2815515655446004
ATM_CALL_02 = 0.07965567455405797


def test_norm_cdf_reference():
    assert norm_cdf(0.1) == pytest.approx(N_01, abs=1e-16)
    assert 1 - norm_cdf(8.0) == pytest.approx(UPPER_TAIL_8, rel=0.2)
    assert norm_cdf(-8.0) == pytest.approx(UPPER_TAIL_8, rel=1e-13)


def test_norm_pdf_at_zero():
    assert norm_pdf(0.0) == pytest.approx(1 / math.sqrt(2 * math.pi), rel=1e-15)


def test_ppf_reference_values():
    assert norm_ppf(1e-12) == pytest.approx(PPF_1E12, abs=1e-12)
    assert norm_ppf(0.9) == pytest.approx(PPF_09, abs=1e-14)
    assert norm_ppf(0.5) == 0.0


def test_ppf_of_cdf_identity():
    x = np.linspace(-8, 5.5, 1351)
    assert np.max(np.abs(norm_ppf(norm_cdf(x)) - x)) < 1e-9


def test_ppf_of_cdf_upper_tail_limited_by_rounding():
    # N(8) rounds to within one ulp of 1, so only ulp-level agreement is possible
    x = np.linspace(5.5, 8, 51)
    err = np.abs(norm_cdf(norm_ppf(norm_cdf(x))) - norm_cdf(x))
    assert np.max(err) <= np.spacing(1.0)


def test_ppf_inverts_cdf(rng):
    p = rng.uniform(1e-12, 1 - 1e-12, size=2000)
    assert np.max(np.abs(norm_cdf(norm_ppf(p)) - p)) < 1e-14


def test_ppf_odd_symmetry():
    # dyadic p so that 1 - p is exact
    p = 2.0 ** -np.arange(2, 34, 3)
    np.testing.assert_allclose(norm_ppf(1 - p), -norm_ppf(p), rtol=1e-9)


@pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1.5, float("nan")])
def test_ppf_rejects_outside_unit_interval(p):
    with pytest.raises(DomainError):
        norm_ppf(p)


def test_d12_reference():
    d1, d2 = d12(-0.1, 0.3)
    assert d1 == pytest.approx(0.48333333333333334, abs=1e-15)
    assert d2 == pytest.approx(0.18333333333333335, abs=1e-15)


def test_bs_call_atm_and_scaling():
    assert bs_call(MarketSpec(), 0.0, 0.2) == pytest.approx(ATM_CALL_02, abs=1e-15)
    m = MarketSpec(forward=100.0, discount=0.99, maturity=1.0)
    assert bs_call(m, 0.0, 0.2) == pytest.approx(0.99 * 100 * ATM_CALL_02, rel=1e-14)


@pytest.mark.parametrize("s", [0.0, -0.1, float("inf")])
def test_bs_call_rejects_bad_vol(s):
    with pytest.raises(DomainError):
        bs_call(MarketSpec(), 0.0, s)


def test_bs_call_within_no_arbitrage_bounds():
    k = np.linspace(-2, 2, 41)
    c = bs_call(MarketSpec(), k, 0.3)
    assert np.all(c > np.maximum(1 - np.exp(k), 0)) and np.all(c < 1)
    # convex in strike K = e^k
    K = np.exp(k)
    slopes = np.diff(c) / np.diff(K)
    assert np.all(np.diff(slopes) > 0)


@pytest.mark.parametrize("k, s", [(0.0, 0.2), (0.3, 0.45), (-0.3, 0.2), (0.2, 0.01),
                                  (-1.5, 1.0), (1.0, 0.5), (0.0, 3.0), (2.0, 1.2)])
def test_implied_vol_roundtrip(k, s):
    m = MarketSpec(forward=1.3, discount=0.97, maturity=2.0)
    price = bs_call(m, k, s)
    v = implied_total_vol(m, k, price)
    assert v == pytest.approx(s, abs=1e-10)
    assert bs_call(m, k, v) == pytest.approx(price, rel=1e-12)


def test_implied_vol_from_rounded_price():
    assert implied_total_vol(MarketSpec(), 0.0, 0.0796557) == pytest.approx(0.2, abs=1e-6)


def test_implied_vol_reprices_ill_conditioned_quotes():
    # deep in the money with little time value: vol is poorly determined but
    # the price must still be reproduced
    m = MarketSpec()
    price = bs_call(m, -1.5, 0.2)
    v = implied_total_vol(m, -1.5, price)
    assert bs_call(m, -1.5, v) == pytest.approx(price, rel=1e-12)


def test_implied_vol_bounds():
    m = MarketSpec()
    with pytest.raises(PriceOutOfBounds):
        implied_total_vol(m, 0.0, 1.0)
    with pytest.raises(PriceOutOfBounds):
        implied_total_vol(m, -0.1, 1 - math.exp(-0.1))


def test_implied_vol_iteration_cap():
    m = MarketSpec()
    with pytest.raises(ConvergenceError):
        implied_total_vol(m, 0.0, bs_call(m, 0.0, 0.3), maxiter=1)


def test_delta_and_strike_inverse():
    assert delta_of(-0.1, 0.3) == pytest.approx(0.6855704621388224, abs=1e-15)
    assert k_from_delta_vol(0.9, 0.2) == pytest.approx(-0.2363103131089201, abs=1e-14)
    d = np.linspace(0.01, 0.99, 51)
    np.testing.assert_allclose(delta_of(k_from_delta_vol(d, 0.35), 0.35), d, atol=1e-14)


def test_market_spec_validation():
    with pytest.raises(DomainError):
        MarketSpec(forward=-1.0)
    with pytest.raises(DomainError):
        MarketSpec(maturity=0.0)
    assert MarketSpec(maturity=4.0).total_vol(0.1) == pytest.approx(0.2)
