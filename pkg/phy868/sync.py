"""
Receiver front end: power squelch, AGC, Costas carrier recovery and
Mueller-Muller symbol timing recovery.

Every stage keeps its state in one ``LoopState`` owned by the stream, so
consecutive chunks through the same state give the same output as one
long buffer. The per-sample loops are numba kernels.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from numba import njit

from .errors import InvalidSyncConfig
from .waveform import FirState, IqBuffer, RrcSpec, matched_filter_stream

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SyncConfig:
    squelch_threshold: float = -40.0  # dB relative to unit power
    squelch_alpha: float = 1e-3
    agc_reference: float = 1.0
    agc_rate: float = 1e-3
    agc_max_gain: float = 1e6
    costas_bandwidth: float = 0.005
    costas_damping: float = 0.707
    timing_omega: float = 8.0
    timing_gain_mu: float = 0.05
    timing_gain_omega: float = 2.5e-4
    timing_omega_limit: float = 0.1

    def __post_init__(self):
        positive = {
            "squelch_alpha": self.squelch_alpha,
            "agc_reference": self.agc_reference,
            "agc_rate": self.agc_rate,
            "agc_max_gain": self.agc_max_gain,
            "costas_bandwidth": self.costas_bandwidth,
            "costas_damping": self.costas_damping,
            "timing_gain_mu": self.timing_gain_mu,
            "timing_gain_omega": self.timing_gain_omega,
            "timing_omega_limit": self.timing_omega_limit,
        }
        for name, value in positive.items():
            if not value > 0:
                raise InvalidSyncConfig(f"{name} must be positive, got {value}")
        if self.costas_bandwidth >= 0.25:
            raise InvalidSyncConfig(f"costas_bandwidth {self.costas_bandwidth} is not << 1")
        if self.timing_omega < 2:
            raise InvalidSyncConfig(f"timing_omega must be >= 2, got {self.timing_omega}")
        if self.squelch_alpha >= 1 or self.timing_omega_limit >= 1:
            raise InvalidSyncConfig("squelch_alpha and timing_omega_limit must be below 1")
        if self.timing_omega * (1 - self.timing_omega_limit) - self.timing_gain_mu < 1:
            raise InvalidSyncConfig("timing_gain_mu too large: every chip must advance at least one sample")


@dataclass
class LoopState:
    phase: float = 0.0
    frequency: float = 0.0
    mu: float = 0.0
    omega: float = 8.0
    agc_gain: float = 1.0
    squelch_power: float = 0.0
    last_sample: float = 0.0
    last_decision: float = 1.0
    pending: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.complex128))

    @classmethod
    def for_config(cls, config: SyncConfig) -> "LoopState":
        return cls(omega=config.timing_omega)


def costas_gains(bandwidth: float, damping: float = 0.707) -> Tuple[float, float]:
    """Proportional and integral gains of a second-order loop of normalized bandwidth."""
    theta = bandwidth / (damping + 1 / (4 * damping))
    denom = 1 + 2 * damping * theta + theta ** 2
    return 4 * damping * theta / denom, 4 * theta ** 2 / denom


# Kernels

@njit(cache=True)
def _squelch_kernel(x, out, power, alpha, threshold):
    for n in range(x.size):
        power = (1.0 - alpha) * power + alpha * (x[n].real ** 2 + x[n].imag ** 2)
        out[n] = x[n] if power >= threshold else 0j
    return power


@njit(cache=True)
def _agc_kernel(x, out, gain, reference, rate, min_gain, max_gain):
    for n in range(x.size):
        if x[n] == 0j:
            out[n] = 0j
            continue
        y = x[n] * gain
        out[n] = y
        gain *= np.exp(rate * (reference - abs(y)) / reference)
        if gain < min_gain:
            gain = min_gain
        elif gain > max_gain:
            gain = max_gain
    return gain


@njit(cache=True)
def _costas_kernel(x, out, phase, freq, k1, k2, max_freq):
    for n in range(x.size):
        y = x[n] * np.exp(-1j * phase)
        out[n] = y
        err = y.real * y.imag
        if err > 1.0:
            err = 1.0
        elif err < -1.0:
            err = -1.0
        freq += k2 * err
        if freq > max_freq:
            freq = max_freq
        elif freq < -max_freq:
            freq = -max_freq
        phase += freq + k1 * err
        while phase > np.pi:
            phase -= 2 * np.pi
        while phase <= -np.pi:
            phase += 2 * np.pi
    return phase, freq


@njit(cache=True)
def _mm_kernel(x, out, mu, omega, omega_mid, omega_lim, gain_mu, gain_omega, last_y, last_d):
    n_out = 0
    ii = 0
    while ii + 1 < x.size and n_out < out.size:
        y = x[ii] + mu * (x[ii + 1] - x[ii])
        d = 1.0 if y.real > 0 else -1.0
        err = last_d * y.real - d * last_y
        if err > 1.0:
            err = 1.0
        elif err < -1.0:
            err = -1.0
        last_y = y.real
        last_d = d
        out[n_out] = y
        n_out += 1
        omega += gain_omega * err
        if omega > omega_mid + omega_lim:
            omega = omega_mid + omega_lim
        elif omega < omega_mid - omega_lim:
            omega = omega_mid - omega_lim
        mu += omega + gain_mu * err
        step = int(np.floor(mu))
        ii += step
        mu -= step
    return n_out, ii, mu, omega, last_y, last_d


# Stages

def power_squelch(samples: IqBuffer, threshold: float, state: LoopState, alpha: float = 1e-3) -> IqBuffer:
    """Zero the stream while the smoothed power is below ``threshold`` dB."""
    out = np.empty_like(samples.samples)
    state.squelch_power = float(
        _squelch_kernel(samples.samples, out, state.squelch_power, alpha, 10 ** (threshold / 10))
    )
    return samples.with_samples(out)


def agc(samples: IqBuffer, config: SyncConfig, state: LoopState) -> IqBuffer:
    """
    Drive the mean output magnitude to ``agc_reference``.

    The gain adapts in the log domain so the settling time does not depend
    on the input level; it is held while the input is exactly zero.
    """
    out = np.empty_like(samples.samples)
    state.agc_gain = float(_agc_kernel(
        samples.samples, out, state.agc_gain, config.agc_reference, config.agc_rate,
        1e-6, config.agc_max_gain,
    ))
    return samples.with_samples(out)


def costas_loop(samples: IqBuffer, config: SyncConfig, state: LoopState) -> IqBuffer:
    """Second-order BPSK Costas loop; output is derotated by the tracked phase."""
    k1, k2 = costas_gains(config.costas_bandwidth, config.costas_damping)
    out = np.empty_like(samples.samples)
    phase, freq = _costas_kernel(samples.samples, out, state.phase, state.frequency, k1, k2, 0.5)
    state.phase, state.frequency = float(phase), float(freq)
    return samples.with_samples(out)


def clock_recovery_mm(samples: IqBuffer, config: SyncConfig, state: LoopState) -> IqBuffer:
    """
    Mueller-Muller timing recovery with linear interpolation, one output per chip.

    Samples not yet consumed are carried over in ``state.pending``.
    """
    x = np.concatenate((state.pending, samples.samples))
    min_step = config.timing_omega * (1 - config.timing_omega_limit) - config.timing_gain_mu
    out = np.empty(int(x.size / max(min_step, 1.0)) + 2, dtype=np.complex128)
    n_out, ii, mu, omega, last_y, last_d = _mm_kernel(
        x, out, state.mu, state.omega, config.timing_omega,
        config.timing_omega * config.timing_omega_limit,
        config.timing_gain_mu, config.timing_gain_omega,
        state.last_sample, state.last_decision,
    )
    state.pending = x[ii:].copy()
    state.mu, state.omega = float(mu), float(omega)
    state.last_sample, state.last_decision = float(last_y), float(last_d)
    chip_rate = samples.sample_rate / config.timing_omega
    return IqBuffer(out[:n_out], chip_rate)


def interpolate(x: np.ndarray, positions: np.ndarray) -> np.ndarray:
    """Linear interpolation of ``x`` at fractional indices."""
    positions = np.asarray(positions, dtype=np.float64)
    base = np.clip(np.floor(positions).astype(np.int64), 0, max(x.size - 2, 0))
    frac = positions - base
    nxt = np.minimum(base + 1, x.size - 1)
    return x[base] + frac * (x[nxt] - x[base])


def genie_sync(
    filtered: IqBuffer,
    spec: RrcSpec,
    *,
    delay: float = 0.0,
    phase: float = 0.0,
    cfo_hz: float = 0.0,
    n_chips: Optional[int] = None,
    start_index: int = 0,
) -> IqBuffer:
    """
    Sample the matched-filter output with known channel timing and phase.

    ``filtered`` is the full convolution from ``matched_filter`` so chip k
    sits at span * sps + delay + k * sps.
    """
    sps = spec.sps
    first = spec.span * sps + delay
    available = int(np.floor((len(filtered) - 1 - first) / sps)) + 1
    count = available if n_chips is None else min(n_chips, available)
    if count <= 0:
        return IqBuffer(np.zeros(0, dtype=np.complex128), filtered.sample_rate / sps)
    positions = first + sps * np.arange(count)
    points = interpolate(filtered.samples, positions)
    # rotation applied by the channel, referred to the receive filter output
    n = positions - spec.group_delay + start_index
    points = points * np.exp(-1j * (phase + 2 * np.pi * cfo_hz * n / filtered.sample_rate))
    return IqBuffer(points, filtered.sample_rate / sps)


class Synchronizer:
    """squelch -> agc -> matched filter -> costas -> timing recovery, for one stream."""

    def __init__(self, spec: RrcSpec, config: Optional[SyncConfig] = None):
        self.spec = spec
        self.config = config or SyncConfig(timing_omega=float(spec.sps))
        self.state = LoopState.for_config(self.config)
        self.fir = FirState(spec)

    def process(self, samples: IqBuffer) -> IqBuffer:
        x = power_squelch(samples, self.config.squelch_threshold, self.state, self.config.squelch_alpha)
        x = agc(x, self.config, self.state)
        x = x.with_samples(matched_filter_stream(x.samples, self.fir))
        x = costas_loop(x, self.config, self.state)
        chips = clock_recovery_mm(x, self.config, self.state)
        logger.debug(
            f"sync: {len(samples)} samples -> {len(chips)} chips, "
            f"freq={self.state.frequency:.2e} rad/sample, omega={self.state.omega:.4f}, "
            f"gain={self.state.agc_gain:.3g}"
        )
        return chips
