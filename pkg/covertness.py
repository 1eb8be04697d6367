# covertness.py
"""Eavesdropper detection model.

The warden sees one real zero-mean Gaussian sample per slot, with variance
sigma0^2 = N_d when every AUV is silent and sigma1^2 = N_d * (1 + gamma_d)
when the team transmits. The likelihood ratio test reduces to an energy
detector, and covertness is enforced through D(H0 || H1) <= 2 eps^2.
"""

import logging
import math
from typing import Sequence

import numpy as np
from scipy import optimize, stats

from data_model import (CovertnessMargin, DegenerateHypothesesError, DetectionError,
                        DomainError, HypothesisStats)

logger = logging.getLogger(__name__)


def eavesdropper_variance(selected: Sequence[float], powers: Sequence[float],
                          losses: Sequence[float], noise_d: float) -> float:
    if not noise_d > 0:
        raise DomainError(f"eavesdropper noise power must be > 0 W, got {noise_d}")
    selected = np.asarray(selected, dtype=float)
    signal = np.sum(selected * np.asarray(powers, dtype=float) / np.asarray(losses, dtype=float))
    return float(signal + noise_d)


def detector_threshold(sigma0_sq: float, sigma1_sq: float, theta: float) -> float:
    if not sigma0_sq > 0:
        raise DomainError(f"sigma0_sq must be > 0, got {sigma0_sq}")
    if not sigma1_sq > sigma0_sq:
        raise DegenerateHypothesesError(
            f"sigma1_sq ({sigma1_sq}) must exceed sigma0_sq ({sigma0_sq}) for the energy-detector reduction")
    if not theta > 0:
        raise DomainError(f"LRT threshold must be > 0, got {theta}")
    coefficient = (sigma1_sq - sigma0_sq) / (sigma0_sq * sigma1_sq)
    return (2.0 * math.log(theta) - math.log(sigma0_sq / sigma1_sq)) / coefficient


def log_likelihood_ratio(y: np.ndarray, hypotheses: HypothesisStats) -> np.ndarray:
    s0, s1 = hypotheses.sigma0_sq, hypotheses.sigma1_sq
    y = np.asarray(y, dtype=float)
    return 0.5 * math.log(s0 / s1) + 0.5 * y * y * (1.0 / s0 - 1.0 / s1)


def kl_gaussian(gamma_d: float) -> float:
    if gamma_d < 0:
        raise DomainError(f"eavesdropper SNR must be >= 0, got {gamma_d}")
    return 0.5 * (math.log1p(gamma_d) - gamma_d / (1.0 + gamma_d))


def covertness_margin(gamma_d: float, epsilon: float) -> CovertnessMargin:
    if not 0.0 < epsilon <= 1.0:
        raise DomainError(f"epsilon must lie in (0, 1], got {epsilon}")
    kl = kl_gaussian(gamma_d)
    limit = 2.0 * epsilon * epsilon
    return CovertnessMargin(kl=kl, limit=limit, satisfied=kl <= limit)


def max_covert_snr(epsilon: float) -> float:
    limit = 2.0 * epsilon * epsilon
    upper = 1.0
    while kl_gaussian(upper) < limit:
        upper *= 2.0
    return float(optimize.brentq(lambda g: kl_gaussian(g) - limit, 0.0, upper, xtol=1e-14, rtol=1e-14))


def monte_carlo_detection_error(hypotheses: HypothesisStats, threshold: float, samples: int,
                                rng: np.random.Generator) -> DetectionError:
    if samples < 1:
        raise DomainError(f"samples must be >= 1, got {samples}")
    y0 = rng.normal(0.0, math.sqrt(hypotheses.sigma0_sq), size=samples)
    y1 = rng.normal(0.0, math.sqrt(hypotheses.sigma1_sq), size=samples)
    p_fa = float(np.mean(y0 * y0 > threshold))
    p_md = float(np.mean(y1 * y1 <= threshold))
    return DetectionError(p_fa=p_fa, p_md=p_md)


def analytic_detection_error(hypotheses: HypothesisStats, threshold: float) -> DetectionError:
    p_fa = float(stats.chi2.sf(threshold / hypotheses.sigma0_sq, df=1))
    p_md = float(stats.chi2.cdf(threshold / hypotheses.sigma1_sq, df=1))
    return DetectionError(p_fa=p_fa, p_md=p_md)


def minimum_detection_error(hypotheses: HypothesisStats) -> DetectionError:
    """Error of the equal-prior optimal detector (LRT threshold 1)."""
    return analytic_detection_error(hypotheses, detector_threshold(hypotheses.sigma0_sq, hypotheses.sigma1_sq, 1.0))
