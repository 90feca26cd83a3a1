"""Goodness-of-fit statistics and their asymptotic confidence levels."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .cdf import DEFAULT_ABS_TOL, QuadratureReport, cdf_report
from .errors import DegenerateProbability, OverflowMassTooLarge
from .models import (
    AnyModel,
    BinCounts,
    InfiniteModel,
    ModelSpec,
    mle_estimate,
    probabilities,
    truncate_support,
)
from .spectrum import VarianceSpectrum, model_spectrum

OVERFLOW_FACTOR = 10.0


@dataclass(frozen=True)
class GofResult:
    x_stat: float
    theta_hat: float
    chi2_stat: float
    confidence_level: float
    p_value: float
    spectrum: VarianceSpectrum
    quadrature: QuadratureReport
    n_bins: int
    m: int
    derivative: str = "analytic"
    overflow_count: int = 0

    @property
    def rms(self) -> float:
        return math.sqrt(self.x_stat)

    def to_dict(self) -> dict:
        return {
            "x_stat": self.x_stat,
            "rms": self.rms,
            "theta_hat": self.theta_hat,
            "chi2_stat": self.chi2_stat,
            "confidence_level": self.confidence_level,
            "p_value": self.p_value,
            "n_bins": self.n_bins,
            "m": self.m,
            "derivative": self.derivative,
            "overflow_count": self.overflow_count,
            "spectrum": self.spectrum.to_dict(),
            "quadrature": self.quadrature.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GofResult":
        return cls(
            x_stat=float(d["x_stat"]),
            theta_hat=float(d["theta_hat"]),
            chi2_stat=float(d["chi2_stat"]),
            confidence_level=float(d["confidence_level"]),
            p_value=float(d["p_value"]),
            spectrum=VarianceSpectrum.from_dict(d["spectrum"]),
            quadrature=QuadratureReport.from_dict(d["quadrature"]),
            n_bins=int(d["n_bins"]),
            m=int(d["m"]),
            derivative=str(d.get("derivative", "analytic")),
            overflow_count=int(d.get("overflow_count", 0)),
        )


@dataclass(frozen=True)
class _Fit:
    model: ModelSpec
    theta_hat: float
    fractions: np.ndarray  # Y_k over the model's bins, divided by the full m
    p: np.ndarray
    m: int
    overflow: int


def _fit(model: AnyModel, counts: BinCounts, epsilon: Optional[float] = None) -> _Fit:
    theta_hat = mle_estimate(model, counts)
    m = counts.m
    if isinstance(model, InfiniteModel):
        eps = model.epsilon if epsilon is None else float(epsilon)
        finite = truncate_support(model, theta_hat, eps)
        n = finite.n_bins
        overflow = int(counts.counts[n:].sum())
        if overflow > OVERFLOW_FACTOR * eps * m:
            raise OverflowMassTooLarge(
                f"{overflow} of {m} draws fall past the {n} retained bins "
                f"(fraction {overflow / m:.3g} > {OVERFLOW_FACTOR:g}*epsilon); "
                "the draws are very unlikely to come from the model",
                overflow_fraction=overflow / m,
                epsilon=eps,
            )
        c = counts.counts[:n]
        if c.size < n:
            c = np.concatenate([c, np.zeros(n - c.size, np.int64)])
    else:
        finite = model
        c = counts.padded(model.n_bins).counts
        overflow = 0
    p = probabilities(finite, theta_hat)
    return _Fit(finite, theta_hat, c / m, p, m, overflow)


def _deviations(fit: _Fit) -> np.ndarray:
    return math.sqrt(fit.m) * (fit.fractions - fit.p)


def rms_statistic(model: AnyModel, counts: BinCounts, epsilon: Optional[float] = None):
    """Return ``(X, theta_hat)`` with ``X = sum_k m (Y_k - p_k(theta_hat))^2``."""
    fit = _fit(model, counts, epsilon)
    dev = _deviations(fit)
    return float(np.dot(dev, dev)), fit.theta_hat


def chi2_statistic(model: AnyModel, counts: BinCounts, epsilon: Optional[float] = None) -> float:
    """Pearson's statistic with the same estimated parameter."""
    fit = _fit(model, counts, epsilon)
    if np.any(fit.p <= 0):
        raise DegenerateProbability("chi-square statistic needs all p_k > 0")
    dev = _deviations(fit)
    return float(np.sum(dev * dev / fit.p))


def confidence_level(
    model: AnyModel,
    counts: BinCounts,
    epsilon: Optional[float] = None,
    abs_tol: float = DEFAULT_ABS_TOL,
) -> GofResult:
    """Asymptotic confidence that the counts do not come from the model.

    The statistic's limiting distribution is that of a weighted sum of
    ``n - 2`` squared Gaussians whose weights come from the model at the
    estimated parameter; the level is its CDF at the observed statistic.
    """
    return evaluate(model, counts, epsilon, abs_tol)[0]


def evaluate(model: AnyModel, counts: BinCounts, epsilon=None, abs_tol=DEFAULT_ABS_TOL):
    """Like :func:`confidence_level`, also returning seconds spent in quadrature."""
    fit = _fit(model, counts, epsilon)
    dev = _deviations(fit)
    x_stat = float(np.dot(dev, dev))
    chi2 = float(np.sum(dev * dev / fit.p))
    spectrum = model_spectrum(fit.model, fit.theta_hat)
    start = time.perf_counter()
    quad = cdf_report(x_stat, spectrum.variances, abs_tol)
    quad_seconds = time.perf_counter() - start
    level = quad.value
    result = GofResult(
        x_stat=x_stat,
        theta_hat=fit.theta_hat,
        chi2_stat=chi2,
        confidence_level=level,
        p_value=1.0 - level,
        spectrum=spectrum,
        quadrature=quad,
        n_bins=fit.model.n_bins,
        m=fit.m,
        derivative="analytic" if fit.model.analytic_derivative else "finite-difference",
        overflow_count=fit.overflow,
    )
    return result, quad_seconds
