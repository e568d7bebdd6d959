"""Packet-loss model for the sensor-to-estimator link.

Transmitting at integer power ``omega`` delivers the packet with probability
1 - (1 - success_factor)^omega, so each extra power unit retries the link
independently.  The success factor itself comes from the link budget as
1 - exp(-snr_gain / (noise_density * bandwidth)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def success_factor_from_params(snr_gain: float, noise_density: float, bandwidth: float) -> float:
    """Per-unit-power delivery probability from the link budget."""
    if snr_gain <= 0.0 or noise_density <= 0.0 or bandwidth <= 0.0:
        raise ValueError(
            "snr_gain, noise_density, and bandwidth must all be positive, got "
            f"({snr_gain!r}, {noise_density!r}, {bandwidth!r})"
        )
    return -math.expm1(-snr_gain / (noise_density * bandwidth))


@dataclass(frozen=True)
class ChannelModel:
    """Lossy link parameterized by its per-unit-power success factor."""

    success_factor: float
    snr_gain: float | None = None
    noise_density: float | None = None
    bandwidth: float | None = None

    def __post_init__(self):
        if not 0.0 < self.success_factor < 1.0:
            raise ValueError(
                f"success_factor must lie strictly in (0, 1), got {self.success_factor!r}"
            )

    @classmethod
    def from_params(cls, snr_gain: float, noise_density: float, bandwidth: float) -> "ChannelModel":
        return cls(
            success_factor=success_factor_from_params(snr_gain, noise_density, bandwidth),
            snr_gain=snr_gain,
            noise_density=noise_density,
            bandwidth=bandwidth,
        )


def drop_probability(channel: ChannelModel, power: int) -> float:
    """Probability the packet is lost at the given integer power.

    Zero power means nothing is sent, so the loss probability is exactly 1.
    """
    if power < 0 or power != int(power):
        raise ValueError(f"power must be a nonnegative integer, got {power!r}")
    return (1.0 - channel.success_factor) ** int(power)


def sample_arrival(channel: ChannelModel, power: int, rng: np.random.Generator) -> int:
    """Draw one arrival indicator; one uniform is consumed per call.

    Uses the fixed inversion ``u >= drop`` so that, holding the stream
    fixed, a larger success factor can only turn drops into arrivals.
    """
    return int(rng.random() >= drop_probability(channel, power))
