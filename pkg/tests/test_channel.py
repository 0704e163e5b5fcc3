import math

import numpy as np
import pytest

from phy868.channel import ChannelConfig, ChannelStream, apply_channel, awgn, delay
from phy868.errors import InvalidChannel, ZeroSignal
from phy868.waveform import IqBuffer


def unit_tone(n=100_000, fs=1e6):
    return IqBuffer(np.exp(2j * np.pi * 1e3 * np.arange(n) / fs), fs)


def test_ideal_channel_is_identity(rng):
    x = IqBuffer(rng.standard_normal(1000) + 1j * rng.standard_normal(1000), 1e6)
    out = apply_channel(x, ChannelConfig())
    np.testing.assert_array_equal(out.samples, x.samples)


def test_half_amplitude_quarters_power(rng):
    x = IqBuffer(rng.standard_normal(10_000) + 1j * rng.standard_normal(10_000), 1e6)
    out = apply_channel(x, ChannelConfig(amplitude=16384))
    assert out.power() == pytest.approx(x.power() * (16384 / 32767) ** 2, rel=1e-6)


def test_realized_snr_matches_request():
    x = unit_tone()
    out = apply_channel(x, ChannelConfig(snr_db=10.0, seed=7))
    noise = out.samples - x.samples
    realized = 10 * math.log10(x.power() / np.mean(np.abs(noise) ** 2))
    assert realized == pytest.approx(10.0, abs=0.1)


def test_snr_is_referenced_after_gain():
    x = unit_tone()
    out = apply_channel(x, ChannelConfig(snr_db=10.0, amplitude=8000, seed=3))
    clean = x.samples * 8000 / 32767
    realized = 10 * math.log10(np.mean(np.abs(clean) ** 2) / np.mean(np.abs(out.samples - clean) ** 2))
    assert realized == pytest.approx(10.0, abs=0.1)


def test_awgn_infinite_snr_is_identity():
    x = unit_tone(100)
    assert awgn(x, math.inf, seed=1) is x


def test_awgn_noise_power_and_statistics():
    x = unit_tone()
    noise = awgn(x, 0.0, seed=11).samples - x.samples
    n = noise.size
    assert np.mean(np.abs(noise) ** 2) == pytest.approx(1.0, rel=0.02)
    se = math.sqrt(0.5 / n)
    assert abs(noise.real.mean()) < 4 * se
    assert abs(noise.imag.mean()) < 4 * se
    correlation = np.corrcoef(noise.real, noise.imag)[0, 1]
    assert abs(correlation) < 4 / math.sqrt(n)


def test_awgn_is_deterministic():
    x = unit_tone(1000)
    np.testing.assert_array_equal(awgn(x, 3.0, seed=5).samples, awgn(x, 3.0, seed=5).samples)
    config = ChannelConfig(snr_db=3.0, cfo_hz=100.0, phase_rad=0.4, delay_samples=1.5, seed=9)
    np.testing.assert_array_equal(apply_channel(x, config).samples, apply_channel(x, config).samples)


def test_awgn_rejects_zero_signal():
    with pytest.raises(ZeroSignal):
        awgn(IqBuffer(np.zeros(100), 1.0), 10.0, seed=1)


def test_awgn_signal_power_override():
    x = IqBuffer(np.concatenate((np.zeros(50_000), np.ones(50_000))), 1.0)
    noise = awgn(x, 0.0, seed=2, signal_power=1.0).samples - x.samples
    assert np.mean(np.abs(noise) ** 2) == pytest.approx(1.0, rel=0.03)


def test_integer_and_fractional_delay():
    x = IqBuffer(np.array([1.0, 2.0, 3.0]), 1.0)
    np.testing.assert_allclose(delay(x, 2).samples, [0, 0, 1, 2, 3])
    np.testing.assert_allclose(delay(x, 0.5).samples, [0.5, 1.5, 2.5, 1.5])


def test_static_phase_rotates():
    x = IqBuffer(np.ones(4), 1.0)
    out = apply_channel(x, ChannelConfig(phase_rad=np.pi / 2))
    np.testing.assert_allclose(out.samples, 1j, atol=1e-12)


def test_channel_stream_matches_single_block(rng):
    x = rng.standard_normal(3000) + 1j * rng.standard_normal(3000)
    config = ChannelConfig(cfo_hz=1234.0, phase_rad=0.7, delay_samples=2.25, amplitude=20000)
    whole = apply_channel(IqBuffer(x, 1e5), config).samples
    stream = ChannelStream(config)
    pieces = [stream.process(IqBuffer(x[k:k + 400], 1e5)).samples for k in range(0, x.size, 400)]
    np.testing.assert_allclose(np.concatenate(pieces), whole[:x.size], atol=1e-12)


@pytest.mark.parametrize(
    "kwargs",
    [{"amplitude": 32768}, {"amplitude": -1}, {"delay_samples": -0.5}, {"snr_db": float("nan")}],
)
def test_invalid_channel(kwargs):
    with pytest.raises(InvalidChannel):
        ChannelConfig(**kwargs)
