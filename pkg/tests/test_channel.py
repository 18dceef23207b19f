import numpy as np
import pytest

from airvote.channel import (
    ChannelConfig,
    ChannelRealization,
    apply_sync_error,
    sample_channel,
    superpose,
)


def test_sample_channel_unit_energy():
    cfg = ChannelConfig()
    real = sample_channel(4, 25, 1000, cfg, seed=0)  # 1e5 gains
    assert np.mean(np.abs(real.coefficients) ** 2) == pytest.approx(1.0, abs=0.01)


def test_sample_channel_zero_mean():
    cfg = ChannelConfig()
    real = sample_channel(4, 25, 1000, cfg, seed=1)
    assert abs(np.mean(real.coefficients.real)) < 0.01
    assert abs(np.mean(real.coefficients.imag)) < 0.01


def test_sample_channel_offsets():
    cfg = ChannelConfig(sync_error_max=0.0)
    real = sample_channel(5, 2, 4, cfg, seed=2)
    np.testing.assert_array_equal(real.timing_offsets, np.zeros(5))
    cfg = ChannelConfig(sync_error_max=0.25)
    real = sample_channel(200, 1, 2, cfg, seed=3)
    assert np.all(real.timing_offsets >= 0)
    assert np.all(real.timing_offsets <= 0.25)


def test_sample_channel_per_frame_constant_within_frame():
    cfg = ChannelConfig(fading="per_frame")
    real = sample_channel(3, 4, 8, cfg, seed=4)
    for m in range(3):
        assert np.unique(real.coefficients[m]).size == 1


def test_sample_channel_none_is_identity_gain():
    cfg = ChannelConfig(fading="none")
    real = sample_channel(2, 3, 4, cfg, seed=5)
    np.testing.assert_array_equal(real.coefficients, np.ones((2, 3, 4)))


def test_sample_channel_deterministic():
    cfg = ChannelConfig(sync_error_max=0.1)
    a = sample_channel(3, 2, 6, cfg, seed=6)
    b = sample_channel(3, 2, 6, cfg, seed=6)
    np.testing.assert_array_equal(a.coefficients, b.coefficients)
    np.testing.assert_array_equal(a.timing_offsets, b.timing_offsets)


def test_config_validation():
    with pytest.raises(ValueError):
        ChannelConfig(noise_var=-1.0)
    with pytest.raises(ValueError):
        ChannelConfig(sync_error_max=1.0)
    with pytest.raises(ValueError):
        ChannelConfig(fading="rician")


# ---------------------------------------------------------------------------
# Sync error
# ---------------------------------------------------------------------------

def test_sync_error_zero_offset_is_identity():
    cfg = ChannelConfig(sync_error_max=0.0)
    real = sample_channel(3, 2, 8, cfg, seed=7)
    rotated = apply_sync_error(real, cfg)
    np.testing.assert_array_equal(rotated.coefficients, real.coefficients)


def test_sync_error_preserves_magnitudes_and_dc():
    cfg = ChannelConfig(sync_error_max=0.4, fft_size=16)
    real = sample_channel(4, 3, 8, cfg, seed=8)
    rotated = apply_sync_error(real, cfg)
    np.testing.assert_allclose(
        np.abs(rotated.coefficients), np.abs(real.coefficients), atol=1e-12
    )
    # subcarrier 0 has zero phase slope
    np.testing.assert_allclose(
        rotated.coefficients[:, :, 0], real.coefficients[:, :, 0], atol=1e-12
    )


# ---------------------------------------------------------------------------
# Superposition
# ---------------------------------------------------------------------------

def test_superpose_identity_channel():
    cfg = ChannelConfig(noise_var=0.0, fading="none")
    frame = np.arange(6, dtype=np.complex128).reshape(2, 3) * (1 + 2j)
    real = sample_channel(1, 2, 3, cfg, seed=0)
    out = superpose(frame[None], np.array([1.0]), real, cfg, seed=0)
    np.testing.assert_allclose(out, frame)


def test_superpose_noise_only_energy():
    cfg = ChannelConfig(noise_var=1.0, fading="none")
    frames = np.zeros((1, 100, 1000), dtype=np.complex128)
    real = sample_channel(1, 100, 1000, cfg, seed=1)
    out = superpose(frames, np.array([1.0]), real, cfg, seed=2)
    assert np.mean(np.abs(out) ** 2) == pytest.approx(1.0, rel=0.02)


def test_superpose_destructive_interference():
    cfg = ChannelConfig(noise_var=0.0, fading="none")
    frames = np.ones((2, 1, 1), dtype=np.complex128)
    real = ChannelRealization(
        np.array([[[1.0 + 0j]], [[-1.0 + 0j]]]), np.zeros(2)
    )
    out = superpose(frames, np.array([1.0, 1.0]), real, cfg, seed=0)
    np.testing.assert_allclose(out, np.zeros((1, 1)))


def test_superpose_linear_in_frames():
    cfg = ChannelConfig(noise_var=0.0)
    rng = np.random.default_rng(9)
    real = sample_channel(3, 2, 4, cfg, seed=10)
    powers = np.array([1.0, 2.0, 0.5])
    f1 = rng.normal(size=(3, 2, 4)) + 1j * rng.normal(size=(3, 2, 4))
    f2 = rng.normal(size=(3, 2, 4)) + 1j * rng.normal(size=(3, 2, 4))
    lhs = superpose(f1 + f2, powers, real, cfg, seed=0)
    rhs = superpose(f1, powers, real, cfg, seed=0) + superpose(f2, powers, real, cfg, seed=0)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_superpose_applies_power_scaling():
    cfg = ChannelConfig(noise_var=0.0, fading="none")
    frames = np.ones((1, 1, 2), dtype=np.complex128)
    real = sample_channel(1, 1, 2, cfg, seed=0)
    out = superpose(frames, np.array([4.0]), real, cfg, seed=0)
    np.testing.assert_allclose(out, 2.0 * np.ones((1, 2)))


def test_superpose_shape_checks():
    cfg = ChannelConfig()
    real = sample_channel(2, 2, 4, cfg, seed=0)
    with pytest.raises(ValueError):
        superpose(np.zeros((3, 2, 4), dtype=complex), np.ones(3), real, cfg, seed=0)
    with pytest.raises(ValueError):
        superpose(np.zeros((2, 2, 4), dtype=complex), np.ones(3), real, cfg, seed=0)


def test_superpose_deterministic():
    cfg = ChannelConfig(noise_var=0.5)
    real = sample_channel(2, 2, 4, cfg, seed=3)
    frames = np.ones((2, 2, 4), dtype=np.complex128)
    a = superpose(frames, np.ones(2), real, cfg, seed=4)
    b = superpose(frames, np.ones(2), real, cfg, seed=4)
    np.testing.assert_array_equal(a, b)
