"""Rayleigh fading, timing-offset phase ramps, and multi-device superposition.

The uplink is modeled directly in the frequency domain: each (symbol,
subcarrier) bin is one scalar complex observation.  A timing offset inside
the cyclic prefix shows up as a linear phase ramp across subcarriers and
leaves magnitudes untouched, which is why energy detection shrugs it off.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FADING_MODES = ("per_bin", "per_frame", "none")


@dataclass
class ChannelConfig:
    noise_var: float = 1.0        # total complex noise variance per bin
    sync_error_max: float = 0.0   # timing offset bound, fraction of a symbol
    fft_size: int = 64            # converts timing offset to phase slope
    fading: str = "per_bin"

    def __post_init__(self):
        if self.noise_var < 0:
            raise ValueError("noise_var must be >= 0")
        if not 0.0 <= self.sync_error_max < 1.0:
            raise ValueError("sync_error_max must lie in [0, 1)")
        if self.fft_size < 1:
            raise ValueError("fft_size must be positive")
        if self.fading not in FADING_MODES:
            raise ValueError(f"fading must be one of {FADING_MODES}")


@dataclass
class ChannelRealization:
    """Per-device complex gains (devices x symbols x subcarriers) plus
    per-device timing offsets."""

    coefficients: np.ndarray
    timing_offsets: np.ndarray


def sample_channel(
    num_devices: int,
    num_symbols: int,
    num_subcarriers: int,
    config: ChannelConfig,
    seed,
) -> ChannelRealization:
    """Draw i.i.d. circularly-symmetric complex Gaussian gains with unit
    mean-square magnitude, plus uniform timing offsets in [0, sync_error_max].

    per_frame fading reuses one gain per device across the whole frame;
    "none" pins every gain to 1 for ideal-channel runs.
    """
    if num_devices < 0 or num_symbols < 1 or num_subcarriers < 1:
        raise ValueError("dimensions must be positive")
    rng = np.random.default_rng(seed)
    shape = (num_devices, num_symbols, num_subcarriers)
    if config.fading == "per_bin":
        coeff = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
    elif config.fading == "per_frame":
        gains = (
            rng.standard_normal(num_devices) + 1j * rng.standard_normal(num_devices)
        ) / np.sqrt(2.0)
        coeff = np.broadcast_to(gains[:, None, None], shape).copy()
    else:
        coeff = np.ones(shape, dtype=np.complex128)
    offsets = rng.uniform(0.0, config.sync_error_max, size=num_devices)
    return ChannelRealization(coeff, offsets)


def apply_sync_error(realization: ChannelRealization, config: ChannelConfig) -> ChannelRealization:
    """Rotate each device's gains by exp(-j*2*pi*l*offset/fft_size) along the
    subcarrier axis l; magnitudes are unchanged."""
    num_subcarriers = realization.coefficients.shape[2]
    l = np.arange(num_subcarriers)
    phase = -2.0 * np.pi * np.outer(realization.timing_offsets, l) / config.fft_size
    ramp = np.exp(1j * phase)[:, None, :]
    return ChannelRealization(realization.coefficients * ramp, realization.timing_offsets)


def superpose(frames, powers, realization: ChannelRealization, config: ChannelConfig, seed) -> np.ndarray:
    """Received frame: sum over devices of sqrt(power) * gain * transmitted
    bin, plus complex Gaussian noise of total variance noise_var."""
    frames = np.asarray(frames, dtype=np.complex128)
    if frames.ndim != 3:
        raise ValueError("frames must be stacked as (devices, symbols, subcarriers)")
    powers = np.asarray(powers, dtype=np.float64)
    if frames.shape != realization.coefficients.shape:
        raise ValueError(
            f"frames shape {frames.shape} does not match channel shape "
            f"{realization.coefficients.shape}"
        )
    if powers.shape != (frames.shape[0],):
        raise ValueError(f"{powers.size} powers for {frames.shape[0]} devices")
    received = np.sum(
        np.sqrt(powers)[:, None, None] * realization.coefficients * frames, axis=0
    )
    if config.noise_var > 0:
        rng = np.random.default_rng(seed)
        scale = np.sqrt(config.noise_var / 2.0)
        received = received + scale * (
            rng.standard_normal(received.shape) + 1j * rng.standard_normal(received.shape)
        )
    return received
