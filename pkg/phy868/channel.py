"""
Simulated RF path: amplifier gain, fractional delay, carrier offset and AWGN.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .errors import InvalidChannel, ZeroSignal
from .waveform import IqBuffer, mix

logger = logging.getLogger(__name__)

FULL_SCALE = 32767

Seed = Union[int, np.random.Generator, None]


@dataclass(frozen=True)
class ChannelConfig:
    snr_db: float = math.inf
    amplitude: int = FULL_SCALE
    cfo_hz: float = 0.0
    phase_rad: float = 0.0
    delay_samples: float = 0.0
    seed: Optional[int] = None

    def __post_init__(self):
        if not 0 <= self.amplitude <= FULL_SCALE or int(self.amplitude) != self.amplitude:
            raise InvalidChannel(f"amplitude must be an integer in 0..{FULL_SCALE}, got {self.amplitude}")
        if math.isnan(self.snr_db) or self.snr_db == -math.inf:
            raise InvalidChannel(f"snr_db must be finite or +inf, got {self.snr_db}")
        if self.delay_samples < 0 or not math.isfinite(self.delay_samples):
            raise InvalidChannel(f"delay_samples must be non-negative, got {self.delay_samples}")

    @property
    def gain(self) -> float:
        return self.amplitude / FULL_SCALE

    @property
    def noise_free(self) -> bool:
        return self.snr_db == math.inf


def _rng(seed: Seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def scale(samples: IqBuffer, gain: float) -> IqBuffer:
    return samples if gain == 1.0 else samples.with_samples(samples.samples * gain)


def delay(samples: IqBuffer, delay_samples: float) -> IqBuffer:
    """
    Delay by integer plus fractional samples, linear interpolation.

    Output grows by ceil(delay_samples) samples.
    """
    if delay_samples == 0:
        return samples
    whole = int(np.floor(delay_samples))
    frac = delay_samples - whole
    x = np.concatenate((np.zeros(whole, dtype=np.complex128), samples.samples))
    if frac > 0:
        x = np.concatenate((x, [0j]))
        x = (1 - frac) * x + frac * np.concatenate(([0j], x[:-1]))
    return samples.with_samples(x)


def awgn(
    samples: IqBuffer,
    snr_db: float,
    seed: Seed = None,
    signal_power: Optional[float] = None,
) -> IqBuffer:
    """
    Add circular complex Gaussian noise of power P / 10^(snr_db / 10).

    P is the buffer's mean power unless ``signal_power`` is given.
    """
    if snr_db == math.inf:
        return samples
    power = samples.power() if signal_power is None else signal_power
    if power <= 0:
        raise ZeroSignal(f"cannot reference {snr_db} dB SNR to a zero-power signal")
    sigma = math.sqrt(power / 10 ** (snr_db / 10) / 2)
    rng = _rng(seed)
    n = len(samples)
    noise = sigma * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    return samples.with_samples(samples.samples + noise)


def apply_channel(
    samples: IqBuffer,
    config: ChannelConfig,
    *,
    rng: Optional[np.random.Generator] = None,
    signal_power: Optional[float] = None,
    start_index: int = 0,
) -> IqBuffer:
    """
    awgn(mix(delay(scale(x)))) with a static phase.

    ``signal_power`` refers to the unscaled input and defaults to its mean
    power; ``start_index`` keeps the CFO rotation continuous across chunks.
    """
    reference = samples.power() if signal_power is None else signal_power
    x = scale(samples, config.gain)
    x = delay(x, config.delay_samples)
    x = mix(x, config.cfo_hz, start_index=start_index)
    if config.phase_rad:
        x = x.with_samples(x.samples * np.exp(1j * config.phase_rad))
    if config.noise_free:
        return x
    return awgn(x, config.snr_db, rng if rng is not None else config.seed,
                signal_power=reference * config.gain ** 2)


class ChannelStream:
    """
    ``apply_channel`` over consecutive chunks of one stream.

    Output length equals input length: the delay tail of each chunk is
    carried into the next one, and CFO rotation continues across chunks.
    """

    def __init__(self, config: ChannelConfig, rng: Optional[np.random.Generator] = None):
        self.config = config
        self.rng = rng if rng is not None else _rng(config.seed)
        self.index = 0
        self._carry = np.zeros(0, dtype=np.complex128)

    def process(self, samples: IqBuffer, signal_power: Optional[float] = None) -> IqBuffer:
        reference = samples.power() if signal_power is None else signal_power
        n = len(samples)
        delayed = delay(scale(samples, self.config.gain), self.config.delay_samples).samples.copy()
        carried = min(self._carry.size, delayed.size)
        delayed[:carried] += self._carry[:carried]
        self._carry = delayed[n:].copy()
        x = mix(samples.with_samples(delayed[:n]), self.config.cfo_hz, start_index=self.index)
        self.index += n
        if self.config.phase_rad:
            x = x.with_samples(x.samples * np.exp(1j * self.config.phase_rad))
        if self.config.noise_free:
            return x
        return awgn(x, self.config.snr_db, self.rng, signal_power=reference * self.config.gain ** 2)
