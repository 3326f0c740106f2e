"""Likelihoods and fitting routines."""

from .results import REFERENCE_FAN_PRIOR, REFERENCE_NONFAN_PRIOR, FitResult, LognormalPrior
from .likelihood import (
    StoryData,
    constant_rate_loglik,
    fan_profile_loglik,
    fit_global_params,
    fit_rho,
    fit_site_params,
    fit_story_interest,
    loglik_inhomogeneous,
    nonfan_profile_loglik,
    story_loglik,
    story_state,
)

__all__ = [
    "FitResult", "LognormalPrior", "REFERENCE_FAN_PRIOR", "REFERENCE_NONFAN_PRIOR", "StoryData",
    "constant_rate_loglik", "fan_profile_loglik", "fit_global_params", "fit_rho", "fit_site_params",
    "fit_story_interest", "loglik_inhomogeneous", "nonfan_profile_loglik", "story_loglik", "story_state",
]
