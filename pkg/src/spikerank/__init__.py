"""Estimating the number of spiked eigenvalues of a covariance matrix."""

from .criteria import (
    CriterionResult,
    PenaltySchedule,
    aic,
    bcf,
    bic,
    default_gamma,
    evaluate,
    gic_fixed,
    gic_large,
    loglik,
    loglik_tilde,
    penalty_dim,
)
from .errors import ConvergenceError, DomainError
from .specmath import (
    GapMargin,
    MpParams,
    gap_margin,
    limit_variance,
    m1,
    m2,
    mp_cdf,
    mp_density,
    psi,
    psi_inv,
    varphi,
)
from .spectra import (
    SampleSpectrum,
    SpikedPopulation,
    build_population,
    dbar,
    eigvals_sym,
    sample_covariance,
    sample_population,
    snr_fixed_p,
)

__version__ = "0.1.0"

__all__ = [
    "ConvergenceError",
    "CriterionResult",
    "DomainError",
    "GapMargin",
    "MpParams",
    "PenaltySchedule",
    "SampleSpectrum",
    "SpikedPopulation",
    "aic",
    "bcf",
    "bic",
    "build_population",
    "dbar",
    "default_gamma",
    "eigvals_sym",
    "evaluate",
    "gap_margin",
    "gic_fixed",
    "gic_large",
    "limit_variance",
    "loglik",
    "loglik_tilde",
    "m1",
    "m2",
    "mp_cdf",
    "mp_density",
    "penalty_dim",
    "psi",
    "psi_inv",
    "sample_covariance",
    "sample_population",
    "snr_fixed_p",
    "varphi",
]
