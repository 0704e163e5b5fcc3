"""
Error-rate metrics, theory curves, SNR estimation and spectra.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Sequence, Tuple, Union

import numpy as np
from scipy import signal, special, stats

from ..errors import InvalidFftSize, LengthMismatch, TooFewSamples
from ..framing import FrameEvent, PhyFrame
from ..waveform import IqBuffer

logger = logging.getLogger(__name__)

SNR_FLOOR_DB = -10.0
SNR_CEILING_DB = 30.0


def ber(sent: np.ndarray, received: np.ndarray) -> float:
    sent = np.asarray(sent, dtype=np.uint8)
    received = np.asarray(received, dtype=np.uint8)
    if sent.shape != received.shape:
        raise LengthMismatch(f"compared {sent.size} sent bits with {received.size} received bits")
    if sent.size == 0:
        return 0.0
    return float(np.count_nonzero(sent != received)) / sent.size


def sequence_number(frame: Union[PhyFrame, FrameEvent, bytes]) -> int:
    """Little-endian sequence number in the first two payload octets."""
    payload = frame if isinstance(frame, (bytes, bytearray)) else frame.payload
    return int.from_bytes(bytes(payload[:2]), "little")


def per(sent_frames: Sequence[Union[PhyFrame, int]], received_events: Iterable[FrameEvent]) -> float:
    """Fraction of sent frames with no CRC-valid event carrying their sequence number."""
    sent = [s if isinstance(s, int) else sequence_number(s) for s in sent_frames]
    if not sent:
        return 0.0
    ok = {sequence_number(e) for e in received_events if e.crc_ok and len(e.payload) >= 2}
    missing = sum(1 for s in sent if s not in ok)
    return missing / len(sent)


# Theory

def dbpsk_mfb(ebn0_db: float) -> float:
    """0.5 exp(-Eb/N0), the noncoherent D-BPSK bound."""
    return 0.5 * math.exp(-(10 ** (ebn0_db / 10)))


def coherent_bpsk_ber(ebn0_db):
    """Q(sqrt(2 Eb/N0))."""
    ebn0 = 10 ** (np.asarray(ebn0_db, dtype=np.float64) / 10)
    return 0.5 * special.erfc(np.sqrt(ebn0))


def binomial_tail(p: float, n: int = 15, k_min: int = 8) -> float:
    """P[at least k_min of n independent chips flip]."""
    return float(stats.binom.sf(k_min - 1, n, p))


def binomial_standard_error(p: float, n: int) -> float:
    """Standard error of a rate measured over n trials, p kept inside [1/n, 1 - 1/n]."""
    if n <= 0:
        return 1.0
    p = min(max(p, 1 / n), 1 - 1 / n)
    return math.sqrt(p * (1 - p) / n)


def ebn0_from_snr_db(snr_db: float, sample_rate: float, bit_rate: float) -> float:
    return snr_db + 10 * math.log10(sample_rate / bit_rate)


def snr_from_ebn0_db(ebn0_db: float, sample_rate: float, bit_rate: float) -> float:
    return ebn0_db - 10 * math.log10(sample_rate / bit_rate)


# Measurement

def estimate_snr(samples: IqBuffer) -> float:
    """Blind M2M4 estimate for constant-modulus signals, in dB, clamped to [-10, 30]."""
    if len(samples) < 10_000:
        raise TooFewSamples(f"SNR estimation needs at least 1e4 samples, got {len(samples)}")
    magnitude2 = np.abs(samples.samples) ** 2
    m2 = np.mean(magnitude2)
    m4 = np.mean(magnitude2 ** 2)
    signal_power = math.sqrt(max(2 * m2 ** 2 - m4, 0.0))
    noise_power = m2 - signal_power
    if signal_power <= 0:
        return SNR_FLOOR_DB
    if noise_power <= 0:
        return SNR_CEILING_DB
    snr = 10 * math.log10(signal_power / noise_power)
    return min(max(snr, SNR_FLOOR_DB), SNR_CEILING_DB)


@dataclass(frozen=True)
class PsdTable:
    frequency: np.ndarray  # Hz, ascending
    power_db: np.ndarray

    def peak(self) -> float:
        return float(self.frequency[np.argmax(self.power_db)])

    @property
    def bin_width(self) -> float:
        return float(self.frequency[1] - self.frequency[0])


def psd(samples: IqBuffer, fft_size: int) -> PsdTable:
    """Two-sided Welch periodogram in dB with a Hann window."""
    if fft_size < 2 or fft_size & (fft_size - 1):
        raise InvalidFftSize(f"fft size must be a power of two, got {fft_size}")
    if fft_size > len(samples):
        raise InvalidFftSize(f"fft size {fft_size} exceeds the {len(samples)} available samples")
    freq, pxx = signal.welch(
        samples.samples, fs=samples.sample_rate, nperseg=fft_size, return_onesided=False,
    )
    freq, pxx = np.fft.fftshift(freq), np.fft.fftshift(pxx)
    return PsdTable(freq, 10 * np.log10(np.maximum(pxx, 1e-30)))


@dataclass(frozen=True)
class OccupiedBand:
    low: float
    high: float

    @property
    def center(self) -> float:
        return (self.low + self.high) / 2

    @property
    def width(self) -> float:
        return self.high - self.low


def occupied_band(table: PsdTable, drop_db: float = 20.0) -> OccupiedBand:
    """Outermost bins within ``drop_db`` of the spectral peak."""
    above = np.flatnonzero(table.power_db >= table.power_db.max() - drop_db)
    return OccupiedBand(float(table.frequency[above[0]]), float(table.frequency[above[-1]]))


def bit_errors(sent: np.ndarray, received: np.ndarray) -> Tuple[int, int]:
    """(errors, compared) without raising on unequal length; compares the common prefix."""
    n = min(len(sent), len(received))
    sent = np.asarray(sent[:n], dtype=np.uint8)
    received = np.asarray(received[:n], dtype=np.uint8)
    return int(np.count_nonzero(sent != received)), n
