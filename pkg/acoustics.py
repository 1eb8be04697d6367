# acoustics.py
"""Underwater acoustic channel: Thorp absorption, spreading path loss,
four-component ambient noise, eavesdropper SNR and inter-AUV link rate.

All functions are pure. Path loss is evaluated in dB and converted at the end,
so large distances never overflow a(f)**d.
"""

import logging
from typing import Optional, Sequence

import numpy as np

from data_model import ChannelParams, DomainError, LinkBudget, NoiseSpectrum, ThorpVariant

logger = logging.getLogger(__name__)


def absorption_db_per_km(f: float, variant: ThorpVariant = ThorpVariant.STANDARD_F2) -> float:
    if not f > 0:
        raise DomainError(f"carrier frequency must be > 0 kHz, got {f}")
    f2 = f * f
    if ThorpVariant(variant) is ThorpVariant.CUBIC_F3:
        second = 44.0 * f2 * f / (4100.0 + f2)
    else:
        second = 44.0 * f2 / (4100.0 + f2)
    return 0.11 * f2 / (1.0 + f2) + second + 2.75e-4 * f2 + 0.003


def path_loss_db(params: ChannelParams, distances: np.ndarray) -> np.ndarray:
    distances = np.asarray(distances, dtype=float)
    if np.any(distances <= 0):
        raise DomainError(f"distances must be > 0 m, got min {float(np.min(distances))}")
    d = np.maximum(distances, params.min_distance)
    alpha = absorption_db_per_km(params.carrier_f, params.thorp_variant)
    return params.spreading_chi * 10.0 * np.log10(d) + (d / 1000.0) * alpha


def path_loss(params: ChannelParams, d: float) -> LinkBudget:
    loss_db = float(path_loss_db(params, np.array([d]))[0])
    return LinkBudget(
        distance=float(d),
        loss_db=loss_db,
        gain_linear=10.0 ** (-loss_db / 10.0),
        noise_power=ambient_noise(params).band_power_w,
    )


def channel_gains(params: ChannelParams, distances: np.ndarray) -> np.ndarray:
    return 10.0 ** (-path_loss_db(params, distances) / 10.0)


def ambient_noise(params: ChannelParams) -> NoiseSpectrum:
    f = params.carrier_f
    if not f > 0:
        raise DomainError(f"carrier frequency must be > 0 kHz, got {f}")
    lg_f = np.log10(f)
    turbulence_db = 17.0 - 30.0 * lg_f
    shipping_db = 30.0 + 20.0 * params.shipping_s + 26.0 * lg_f - 60.0 * np.log10(f + 0.03)
    waves_db = 50.0 + 7.5 * np.sqrt(params.wind_w) + 20.0 * lg_f - 40.0 * np.log10(f + 0.4)
    thermal_db = -15.0 + 20.0 * lg_f

    total_psd = sum(10.0 ** (c / 10.0) for c in (turbulence_db, shipping_db, waves_db, thermal_db))
    if params.noise_override is not None:
        band_power = float(params.noise_override)
    else:
        band_power = float(total_psd * params.bandwidth)

    return NoiseSpectrum(
        turbulence_db=float(turbulence_db),
        shipping_db=float(shipping_db),
        waves_db=float(waves_db),
        thermal_db=float(thermal_db),
        total_psd_db=float(10.0 * np.log10(total_psd)),
        band_power_w=band_power,
    )


def eavesdropper_snr(selected: Sequence[float], powers: Sequence[float], distances_to_d: Sequence[float],
                     params: ChannelParams, noise_power: Optional[float] = None) -> float:
    selected = np.asarray(selected, dtype=float)
    powers = np.asarray(powers, dtype=float)
    if np.any(powers < 0):
        raise DomainError("transmit powers must be >= 0 W")
    if noise_power is None:
        noise_power = ambient_noise(params).band_power_w
    losses = 10.0 ** (path_loss_db(params, np.asarray(distances_to_d, dtype=float)) / 10.0)
    return float(np.sum(selected ** 2 * powers / (losses * noise_power)))


def link_rate(selected: Sequence[float], powers: Sequence[float], gains: Sequence[float],
              noise_power: float, bandwidth: float) -> float:
    if not noise_power > 0:
        raise DomainError(f"receiver noise power must be > 0 W, got {noise_power}")
    selected = np.asarray(selected, dtype=float)
    received = float(np.sum(selected ** 2 * np.asarray(powers, dtype=float) * np.asarray(gains, dtype=float)))
    return float(bandwidth * np.log2(1.0 + received / noise_power))
