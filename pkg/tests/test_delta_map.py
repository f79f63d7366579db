from __future__ import annotations

import math

import numpy as np
import pytest
from scipy.optimize import brentq

from smilewa import (
    DeltaSmile,
    GridSpec,
    StrikeSmile,
    check_sigma_delta_to_k,
    check_sigma_wa,
    d12,
    l_eval,
    m_eval,
    norm_cdf,
    norm_ppf,
    sigma_from_l,
    symmetric_smile,
    to_delta,
    to_strike,
)
from smilewa.errors import DomainError, MembershipError, NoSolution, NonPositiveVol
from smilewa.svi import SviParams, svi_strike_smile

# mpmath references
N_02 = 0.5792597094391030
N_05 = 0.6914624612740131
L_09_025 = 0.2891378913861501
M_09_025 = 1.0315515655446005
L_FLAT_025 = -0.15489795003921636

GRID401 = np.linspace(1e-4, 1 - 1e-4, 401)


def flat_smile(c):
    return DeltaSmile(func=lambda d: np.full_like(np.asarray(d, float), c),
                      probit_func=lambda u: np.full_like(np.asarray(u, float), c))


def const_at(d0, s0, c=0.3):
    """Smile equal to ``s0`` near ``d0`` and ``c`` elsewhere."""
    return DeltaSmile(func=lambda d: np.where(np.abs(np.asarray(d) - d0) < 1e-12, s0, c))


def test_l_and_m_reference_values():
    assert l_eval(flat_smile(0.2), 0.5) == pytest.approx(-0.02, abs=1e-16)
    assert m_eval(flat_smile(0.2), 0.5) == pytest.approx(-0.2, abs=1e-16)
    s = const_at(0.9, 0.25)
    assert l_eval(s, 0.9) == pytest.approx(L_09_025, abs=1e-14)
    assert m_eval(s, 0.9) == pytest.approx(M_09_025, abs=1e-14)


def test_l_flat_formula():
    d = np.linspace(0.01, 0.99, 99)
    np.testing.assert_allclose(l_eval(flat_smile(0.2), d), (norm_ppf(d) - 0.1) * 0.2, atol=1e-15)
    assert l_eval(flat_smile(0.2), 0.25) == pytest.approx(L_FLAT_025, abs=1e-15)


def test_l_eval_rejects_outside_unit_interval():
    with pytest.raises(DomainError):
        l_eval(flat_smile(0.2), 1.0)


def test_membership_flat_passes():
    rep = check_sigma_delta_to_k(flat_smile(0.2))
    assert rep.passed, rep.failures
    assert rep.violating_delta is None


def test_membership_detects_nonmonotone_l():
    s = DeltaSmile(func=lambda d: 1.0 / (np.asarray(d) * (1 - np.asarray(d))))
    rep = check_sigma_delta_to_k(s)
    assert not rep.passed
    assert rep.violating_delta is not None and rep.violating_delta > 0.5
    # and therefore not weak-arbitrage free either
    assert not check_sigma_wa(s).passed


def test_constant_in_strike_transformed_passes():
    ds = to_delta(StrikeSmile(lambda k: np.full_like(np.asarray(k, float), 0.3)))
    assert check_sigma_delta_to_k(ds).passed


@pytest.mark.parametrize("c, expected", [(0.2, N_02), (0.5, N_05)])
def test_wa_switch_point_flat(c, expected):
    rep = check_sigma_wa(flat_smile(c))
    assert rep.passed
    assert rep.tilde_delta == pytest.approx(expected, abs=1e-12)


def test_wa_reports_missing_zero():
    # m = u - 0.01 exp(-u) ... stays negative on the grid when the vol is huge
    s = flat_smile(7.0)
    rep = check_sigma_wa(s, GridSpec(n=201, lo=1e-4, hi=1 - 1e-4))
    assert not rep.passed
    assert any("NoZeroFound" in f for f in rep.failures)


def test_to_strike_flat_is_fixed_point():
    ks = to_strike(flat_smile(0.2))
    k = np.linspace(-3, 3, 61)
    np.testing.assert_allclose(ks(k), 0.2, atol=1e-12)


def test_to_strike_definition(bounded):
    s = bounded.smile()
    ks = to_strike(s)
    k = -float(l_eval(s, 0.3))
    assert ks(k) == pytest.approx(float(s(0.3)), abs=1e-10)


def test_to_strike_matches_bisection_oracle(wshape):
    s = wshape.smile()
    ks = to_strike(s)
    for k in np.linspace(-1.5, 1.5, 13):
        d = brentq(lambda x: float(l_eval(s, x)) + k, 1e-9, 1 - 1e-9, xtol=1e-15, rtol=1e-15)
        assert ks(k) == pytest.approx(float(s(d)), abs=1e-8)


def test_to_strike_rejects_nonmember():
    s = DeltaSmile(func=lambda d: 1.0 / (np.asarray(d) * (1 - np.asarray(d))))
    with pytest.raises(MembershipError):
        to_strike(s)


def test_l_of_delta_of_k_is_minus_k(wshape):
    s = wshape.smile()
    ks = to_strike(s)
    k = np.linspace(-3, 3, 121)
    u = ks.probit_of_k(k)
    d = norm_cdf(u)
    np.testing.assert_allclose(l_eval(s, d), -k, atol=1e-10)


def test_to_delta_flat():
    ds = to_delta(StrikeSmile(lambda k: np.full_like(np.asarray(k, float), 0.2)))
    np.testing.assert_allclose(ds(GRID401), 0.2, atol=1e-12)


def test_svi_roundtrip_in_strike():
    p = SviParams(a=0.02, b=0.3, rho=-0.4, m=0.05, sigma_bar=0.2)
    ks = svi_strike_smile(p)
    # k = 2 sits at delta ~ 1e-20, so the delta domain must reach that far
    back = to_strike(to_delta(ks, domain_eps=1e-30))
    k = np.linspace(-2, 2, 201)
    assert np.max(np.abs(back(k) - ks(k))) <= 1e-8


def test_to_delta_rejects_d1_nonmonotone():
    ks = StrikeSmile(lambda k: np.sqrt(0.04 + 0.1 * np.asarray(k) ** 2))
    with pytest.raises(MembershipError):
        to_delta(ks)


def test_sigma_from_l_examples():
    c = 0.2
    l_flat = lambda d: (norm_ppf(d) - c / 2) * c  # noqa: E731
    assert sigma_from_l(l_flat, 0.3, N_02) == pytest.approx(0.2, abs=1e-14)
    assert sigma_from_l(l_flat, 0.8, N_02) == pytest.approx(0.2, abs=1e-14)
    assert sigma_from_l(-0.02, 0.5, 0.6) == pytest.approx(0.2, abs=1e-15)
    ut = float(norm_ppf(0.7))
    assert sigma_from_l(ut * ut / 2, 0.7, 0.7) == pytest.approx(ut, abs=1e-12)


def test_sigma_from_l_errors():
    with pytest.raises(NoSolution):
        sigma_from_l(1.0, 0.5, 0.6)
    # minus root at delta below 1/2 with l > 0 gives a negative vol
    with pytest.raises(NonPositiveVol):
        sigma_from_l(0.01, 0.4, 0.3)


def test_sigma_from_l_reproduces_members(bounded, wshape):
    for p in (bounded, wshape):
        s = p.smile()
        d = np.linspace(0.001, 0.999, 301)
        rec = sigma_from_l(lambda x: l_eval(s, x), d, p.tilde_delta)
        np.testing.assert_allclose(rec, s(d), atol=1e-10)


def test_symmetric_flat_is_fixed_point():
    sb = symmetric_smile(flat_smile(0.2))
    np.testing.assert_allclose(sb(GRID401), 0.2, atol=1e-12)


def test_symmetric_involution_w_shape(wshape):
    s = wshape.smile()
    twice = symmetric_smile(symmetric_smile(s))
    d = np.linspace(0.001, 0.999, 401)
    np.testing.assert_allclose(twice(d), s(d), atol=1e-8)


def test_symmetric_mirrors_strike(wshape):
    s = wshape.smile()
    a = to_strike(s)
    b = to_strike(symmetric_smile(s))
    k = np.linspace(-2, 2, 81)
    np.testing.assert_allclose(b(k), a(-k), atol=1e-8)


def test_symmetric_requires_membership():
    s = DeltaSmile(func=lambda d: 1.0 / (np.asarray(d) * (1 - np.asarray(d))))
    with pytest.raises(MembershipError):
        symmetric_smile(s)


def test_m_increasing_iff_d2_decreasing(wshape):
    s = wshape.smile()
    ks = to_strike(s)
    k = np.linspace(-2, 2, 401)
    _, d2 = d12(k, ks(k))
    d = norm_cdf(ks.probit_of_k(k))
    m = m_eval(s, d)
    # k increases while delta decreases: m rising in delta means d2 falling in k
    assert np.all(np.diff(d) < 0)
    assert np.all(np.diff(m) < 0) == np.all(np.diff(d2) < 0)
    np.testing.assert_allclose(m, d2, atol=1e-9)


def test_extrema_correspond(wshape):
    s = wshape.smile()
    ks = to_strike(s)
    d = np.linspace(0.005, 0.995, 199)
    k = -np.asarray(l_eval(s, d))
    prod = s.derivative(d) * ks.derivative(k)
    assert np.all(prod <= 1e-9)
    i = int(np.argmin(s(d)))
    kk = np.linspace(k.min(), k.max(), 20001)
    j = int(np.argmin(ks(kk)))
    # the delta-space minimiser maps to the strike-space minimiser
    assert abs(kk[j] - k[i]) < 2 * np.max(np.abs(np.diff(k)))


def test_grid_spec_probit_points():
    g = GridSpec(n=11, spacing="uniform", lo=0.1, hi=0.9)
    u = g.probit_points((-10.0, 10.0))
    np.testing.assert_allclose(norm_cdf(u), np.linspace(0.1, 0.9, 11), atol=1e-15)


def test_delta_smile_rejects_bad_delta():
    with pytest.raises(DomainError):
        flat_smile(0.2)(np.array([0.5, 1.0]))


def test_strike_smile_domain():
    ks = to_strike(flat_smile(0.2))
    lo, hi = ks.k_domain
    # probit coordinate capped at 37.5: k = -(u - 0.1) * 0.2
    assert lo == pytest.approx(-7.48) and hi == pytest.approx(7.52)
    with pytest.raises(DomainError):
        ks(hi + 1.0)


def test_results_are_deterministic(bounded):
    a = to_strike(bounded.smile())(np.linspace(-1, 1, 21))
    b = to_strike(bounded.smile())(np.linspace(-1, 1, 21))
    assert np.array_equal(a, b)
    assert math.isfinite(float(a[0]))
