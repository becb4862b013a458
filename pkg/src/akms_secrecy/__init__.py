"""Secrecy metrics for wiretap channels with alpha-kappa-mu shadowed fading."""

from __future__ import annotations

from .channel import (
    EXACT,
    AsymptoticConstants,
    ChannelParams,
    DerivedConstants,
    SeriesControl,
    SeriesResult,
    asymptotic_constants,
    cdf_asymptotic,
    cdf_general,
    cdf_general_detail,
    cdf_series,
    cdf_series_detail,
    derive_constants,
    log_pdf,
    pdf,
    pdf_series,
    sample_inverse_cdf,
    sf_general,
)
from .errors import AkmsError, ConvergenceError, DomainError, NumericError, PreconditionError
from .montecarlo import EstimateWithError, SimConfig, estimate_all, estimate_asc, estimate_sop, estimate_spsc, simulate_snr_pairs
from .secrecy import (
    AscBreakdown,
    MetricResult,
    SecrecyScenario,
    asc,
    diversity_gain,
    sop_asymptotic,
    sop_lower_exact,
    sop_lower_numeric,
    spsc,
    threshold_phi,
)

__version__ = "0.1.0"
