"""Implied-volatility smiles in delta space.

Conversion between delta and strike coordinates, the constructive
parametrization of weak-arbitrage-free delta smiles, arbitrage diagnostics
and calibration from pillar quotes.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .bs_core import (
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
from .calibration import (
    CalibrationResult,
    FitConfig,
    LInterpConfig,
    PillarSet,
    calibrate_l_interp,
    calibrate_wa_fit,
    pillars_to_delta,
)
from .delta_map import (
    DeltaSmile,
    GridSpec,
    KGrid,
    MembershipReport,
    StrikeSmile,
    check_sigma_delta_to_k,
    check_sigma_wa,
    l_eval,
    m_eval,
    sigma_from_l,
    symmetric_smile,
    to_delta,
    to_strike,
)
from .diagnostics import (
    ExpansionCoeffs,
    WingReport,
    atm_expansion,
    durrleman_check,
    fukasawa_check,
    wing_report,
)
from .errors import *  # noqa: F401,F403
from .svi import (
    SsviParams,
    SviParams,
    ssvi_tilde,
    ssvi_total_variance,
    svi_tilde_k,
    svi_to_delta,
    svi_total_variance,
)
from .wa_param import (
    QuadratureSpec,
    ValidationReport,
    WAParams,
    family_bounded_skew,
    family_flat,
    family_spline,
    family_w_shape,
    recover_params,
    validate,
    wa_l,
    wa_sigma,
)
