"""
BPSK chip mapping, root-raised-cosine shaping and IF mixing.

``sps`` is samples per chip everywhere in this module.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Iterable

import numpy as np
from scipy import signal

from .errors import AliasRisk, InvalidSpec

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class IqBuffer:
    """Complex baseband (or IF) samples with their sample rate."""

    samples: np.ndarray
    sample_rate: float

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.complex128)
        object.__setattr__(self, "samples", samples)
        if self.sample_rate <= 0:
            raise InvalidSpec(f"sample_rate must be positive, got {self.sample_rate}")
        if not np.all(np.isfinite(samples)):
            raise InvalidSpec("sample buffer contains non-finite values")

    def __len__(self) -> int:
        return self.samples.size

    def power(self) -> float:
        if self.samples.size == 0:
            return 0.0
        return float(np.mean(np.abs(self.samples) ** 2))

    def with_samples(self, samples: np.ndarray) -> "IqBuffer":
        return replace(self, samples=samples)


@dataclass(frozen=True)
class RrcSpec:
    rolloff: float = 0.35
    span: int = 11
    sps: int = 8

    def __post_init__(self):
        if not 0 < self.rolloff <= 1:
            raise InvalidSpec(f"rolloff must be in (0, 1], got {self.rolloff}")
        if self.span < 1:
            raise InvalidSpec(f"span must be at least one chip, got {self.span}")
        if self.sps < 1:
            raise InvalidSpec(f"sps must be a positive integer, got {self.sps}")

    @property
    def num_taps(self) -> int:
        return self.span * self.sps + 1

    @property
    def group_delay(self) -> float:
        """Delay of one filter in samples."""
        return self.span * self.sps / 2


def chips_to_symbols(chips: Iterable[int], chip_rate: float = 1.0) -> IqBuffer:
    """chip 1 -> +1, chip 0 -> -1, one sample per chip."""
    c = np.asarray(chips, dtype=np.float64)
    return IqBuffer(2.0 * c - 1.0 + 0j, chip_rate)


def rrc_taps(spec: RrcSpec) -> np.ndarray:
    """
    Unit-energy root-raised-cosine impulse response.

    Taps are sampled on t = k/sps symmetric about zero; the removable
    singularities at t = 0 and |t| = 1/(4*rolloff) use their limits.
    """
    beta, sps = spec.rolloff, spec.sps
    delay = spec.span * sps / 2
    t = np.arange(-delay, delay + 1) / sps

    taps = np.zeros(t.size)
    at_zero = np.isclose(t, 0.0)
    at_pole = np.abs(np.abs(4 * beta * t) - 1) < np.sqrt(np.finfo(float).eps)
    regular = ~(at_zero | at_pole)

    taps[at_zero] = 1 - beta + 4 * beta / np.pi
    taps[at_pole] = beta / np.sqrt(2) * (
        (1 + 2 / np.pi) * np.sin(np.pi / (4 * beta))
        + (1 - 2 / np.pi) * np.cos(np.pi / (4 * beta))
    )
    tr = t[regular]
    taps[regular] = (
        np.sin(np.pi * tr * (1 - beta)) + 4 * beta * tr * np.cos(np.pi * tr * (1 + beta))
    ) / (np.pi * tr * (1 - (4 * beta * tr) ** 2))

    return taps / np.sqrt(np.sum(taps ** 2))


def pulse_shape(symbols: IqBuffer, spec: RrcSpec) -> IqBuffer:
    """
    Zero-stuff by ``sps`` and filter with the RRC taps.

    The taps are scaled by sqrt(sps) so unit-power symbols give a
    unit-power waveform. Output length is (n - 1) * sps + num_taps.
    """
    rate = symbols.sample_rate * spec.sps
    if len(symbols) == 0:
        return IqBuffer(np.zeros(0, dtype=np.complex128), rate)
    taps = rrc_taps(spec) * np.sqrt(spec.sps)
    shaped = signal.upfirdn(taps, symbols.samples, up=spec.sps)
    return IqBuffer(shaped, rate)


def matched_filter(samples: IqBuffer, spec: RrcSpec) -> IqBuffer:
    """Full convolution with the RRC taps scaled by 1/sqrt(sps)."""
    if len(samples) == 0:
        return samples
    taps = rrc_taps(spec) / np.sqrt(spec.sps)
    return samples.with_samples(signal.fftconvolve(samples.samples, taps))


@dataclass
class FirState:
    """Delay line of a streaming matched filter."""

    spec: RrcSpec
    taps: np.ndarray = field(init=False)
    zi: np.ndarray = field(init=False)

    def __post_init__(self):
        self.taps = rrc_taps(self.spec) / np.sqrt(self.spec.sps)
        self.zi = np.zeros(self.taps.size - 1, dtype=np.complex128)


def matched_filter_stream(samples: np.ndarray, state: FirState) -> np.ndarray:
    """Same response as ``matched_filter`` for consecutive chunks; one output per input."""
    x = np.asarray(samples, dtype=np.complex128)
    if x.size == 0:
        return x
    y, state.zi = signal.lfilter(state.taps, 1.0, x, zi=state.zi)
    return y


@dataclass
class ShaperState:
    """Filter tail a streaming pulse shaper carries into the next chunk."""

    spec: RrcSpec
    taps: np.ndarray = field(init=False)
    tail: np.ndarray = field(init=False)

    def __post_init__(self):
        self.taps = rrc_taps(self.spec) * np.sqrt(self.spec.sps)
        self.tail = np.zeros(self.taps.size - self.spec.sps, dtype=np.complex128)


def pulse_shape_stream(symbols: np.ndarray, state: ShaperState) -> np.ndarray:
    """
    Pulse shaping for consecutive chunks of one symbol stream: exactly
    ``sps`` samples per symbol, with the overlap of each pulse carried in
    ``state``. Concatenated outputs equal the head of ``pulse_shape`` over
    the whole stream.
    """
    x = np.asarray(symbols, dtype=np.complex128)
    sps = state.spec.sps
    if x.size == 0:
        return np.zeros(0, dtype=np.complex128)
    shaped = signal.upfirdn(state.taps, x, up=sps).astype(np.complex128)
    shaped[: state.tail.size] += state.tail
    n = x.size * sps
    state.tail = shaped[n:].copy()
    return shaped[:n]


def mix(samples: IqBuffer, frequency: float, start_index: int = 0) -> IqBuffer:
    """Multiply sample n by exp(i 2 pi f (n + start_index) / fs)."""
    fs = samples.sample_rate
    if abs(frequency) >= fs / 2:
        raise AliasRisk(f"mixing by {frequency:.1f} Hz aliases at fs = {fs:.1f} Hz")
    if frequency == 0 or len(samples) == 0:
        return samples
    n = np.arange(start_index, start_index + len(samples), dtype=np.float64)
    return samples.with_samples(samples.samples * np.exp(2j * np.pi * frequency * n / fs))


def slice_chips(soft: np.ndarray) -> np.ndarray:
    """Hard decision on the real part: positive -> chip 1."""
    return (np.real(soft) > 0).astype(np.uint8)
