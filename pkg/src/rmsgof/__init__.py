"""Confidence levels for the root-mean-square goodness-of-fit test.

The model is a one-parameter family of distributions over bins; the
parameter is estimated by maximum likelihood from the same draws.
"""

__version__ = "0.1.0"

from .cdf import QuadratureReport, cdf_eval, cdf_report
from .errors import GofError
from .models import (
    BinCounts,
    InfiniteModel,
    ModelSpec,
    contingency2x2,
    dlog_probabilities,
    get_model,
    mle_estimate,
    poisson,
    probabilities,
    truncate_support,
    zipf,
)
from .montecarlo import SimulationConfig, SimulationReport, run_simulations
from .spectrum import VarianceSpectrum, model_spectrum
from .statistic import GofResult, chi2_statistic, confidence_level, rms_statistic

__all__ = [
    "BinCounts",
    "GofError",
    "GofResult",
    "InfiniteModel",
    "ModelSpec",
    "QuadratureReport",
    "SimulationConfig",
    "SimulationReport",
    "VarianceSpectrum",
    "cdf_eval",
    "cdf_report",
    "chi2_statistic",
    "confidence_level",
    "contingency2x2",
    "dlog_probabilities",
    "get_model",
    "mle_estimate",
    "model_spectrum",
    "poisson",
    "probabilities",
    "rms_statistic",
    "run_simulations",
    "truncate_support",
    "zipf",
]
