import math

import numpy as np
import pytest
from scipy import integrate

from covertness import (analytic_detection_error, covertness_margin, detector_threshold, eavesdropper_variance,
                        kl_gaussian, log_likelihood_ratio, max_covert_snr, minimum_detection_error,
                        monte_carlo_detection_error)
from data_model import DegenerateHypothesesError, DomainError, HypothesisStats


def gaussian_pdf(y, var):
    return np.exp(-y * y / (2.0 * var)) / np.sqrt(2.0 * np.pi * var)


@pytest.mark.parametrize("gamma", [0.01, 0.1, 1.0, 10.0])
def test_kl_matches_numerical_integral(gamma):
    y = np.linspace(-14.0, 14.0, 40001)
    p0 = gaussian_pdf(y, 1.0)
    p1 = gaussian_pdf(y, 1.0 + gamma)
    numeric = integrate.simpson(p0 * np.log(p0 / p1), x=y)
    assert kl_gaussian(gamma) == pytest.approx(numeric, abs=1e-6)


def test_kl_reference_values():
    assert kl_gaussian(0.0) == 0.0
    assert kl_gaussian(1.0) == pytest.approx(0.5 * (math.log(2.0) - 0.5))
    with pytest.raises(DomainError):
        kl_gaussian(-0.1)


def test_eavesdropper_variance():
    assert eavesdropper_variance([0, 0], [1.0, 2.0], [1.0, 1.0], 0.2) == pytest.approx(0.2)
    sigma1 = eavesdropper_variance([1], [0.2], [1.0], 0.2)
    assert sigma1 == pytest.approx(0.4)
    assert HypothesisStats(0.2, sigma1).snr == pytest.approx(1.0)
    with pytest.raises(DomainError):
        eavesdropper_variance([1], [1.0], [1.0], 0.0)


def test_detector_threshold_reference():
    assert detector_threshold(1.0, 2.0, 1.0) == pytest.approx(2.0 * math.log(2.0))
    assert detector_threshold(1.0, 2.0, 3.0) > detector_threshold(1.0, 2.0, 2.0)


def test_detector_threshold_rejects_degenerate_hypotheses():
    with pytest.raises(DegenerateHypothesesError):
        detector_threshold(1.0, 1.0, 1.0)
    with pytest.raises(DomainError):
        detector_threshold(1.0, 2.0, 0.0)


@pytest.mark.parametrize("sigma0, sigma1, theta", [(1.0, 2.0, 1.0), (0.2, 0.4, 2.0), (1.0, 1.01, 1.0)])
def test_likelihood_ratio_test_is_an_energy_detector(sigma0, sigma1, theta):
    rng = np.random.default_rng(7)
    hypotheses = HypothesisStats(sigma0, sigma1)
    threshold = detector_threshold(sigma0, sigma1, theta)
    for var in (sigma0, sigma1):
        y = rng.normal(0.0, math.sqrt(var), size=100_000)
        lrt = log_likelihood_ratio(y, hypotheses) > math.log(theta)
        energy = y * y > threshold
        assert np.array_equal(lrt, energy)


def test_covertness_margin():
    assert covertness_margin(0.0, 0.05).satisfied
    margin = covertness_margin(1.0, 0.05)
    assert margin.limit == pytest.approx(0.005)
    assert margin.kl == pytest.approx(0.09657, abs=1e-5)
    assert not margin.satisfied
    with pytest.raises(DomainError):
        covertness_margin(0.1, 0.0)


def test_max_covert_snr_hits_the_limit():
    for epsilon in (1.0, 0.1, 0.05, 0.01):
        gamma = max_covert_snr(epsilon)
        assert kl_gaussian(gamma) == pytest.approx(2.0 * epsilon ** 2, rel=1e-9)
        assert covertness_margin(gamma * 0.999, epsilon).satisfied
        assert not covertness_margin(gamma * 1.001, epsilon).satisfied


def test_monte_carlo_converges_to_analytic_error():
    hypotheses = HypothesisStats(1.0, 2.0)
    threshold = 2.0 * math.log(2.0)
    empirical = monte_carlo_detection_error(hypotheses, threshold, 200_000, np.random.default_rng(11))
    exact = analytic_detection_error(hypotheses, threshold)
    assert empirical.p_fa == pytest.approx(exact.p_fa, abs=0.005)
    assert empirical.p_md == pytest.approx(exact.p_md, abs=0.005)
    assert minimum_detection_error(hypotheses).total == pytest.approx(exact.total)


def test_detection_error_extreme_thresholds():
    hypotheses = HypothesisStats(1.0, 2.0)
    rng = np.random.default_rng(3)
    always = monte_carlo_detection_error(hypotheses, 0.0, 10_000, rng)
    assert always.p_fa == pytest.approx(1.0)
    assert always.p_md == pytest.approx(0.0)
    never = monte_carlo_detection_error(hypotheses, 1e9, 10_000, rng)
    assert never.p_fa == 0.0
    assert never.p_md == 1.0


def test_pinsker_bound_at_the_covert_limit():
    epsilon = 0.05
    gamma = max_covert_snr(epsilon)
    hypotheses = HypothesisStats(1.0, 1.0 + gamma, epsilon)
    rng = np.random.default_rng(2024)
    samples = 1_000_000
    y0 = rng.normal(0.0, 1.0, size=samples) ** 2
    y1 = rng.normal(0.0, math.sqrt(1.0 + gamma), size=samples) ** 2
    best = math.inf
    for threshold in np.linspace(0.05, 6.0, 25):
        p_fa = float(np.mean(y0 > threshold))
        p_md = float(np.mean(y1 <= threshold))
        best = min(best, p_fa + p_md)
    standard_error = math.sqrt(0.5 / samples)
    assert best >= 1.0 - epsilon - 3.0 * standard_error
    assert minimum_detection_error(hypotheses).total >= 1.0 - epsilon


def test_hypothesis_stats_validation():
    with pytest.raises(DomainError):
        HypothesisStats(0.0, 1.0)
    with pytest.raises(DomainError):
        HypothesisStats(1.0, 0.5)
    with pytest.raises(DomainError):
        HypothesisStats(1.0, 2.0, epsilon=1.5)
