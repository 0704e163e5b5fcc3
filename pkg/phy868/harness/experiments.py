"""
Monte-Carlo loopback experiments: BER, PER, chip BER, despreading gain,
and receiver constellations.

Every SNR point draws from its own generator spawned from the master seed,
so results do not depend on evaluation order or worker count.
"""

from __future__ import annotations

import csv
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields, replace
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import signal

from ..channel import FULL_SCALE, ChannelConfig, ChannelStream, apply_channel
from ..errors import InvalidExperiment
from ..framing import MAX_PAYLOAD, octets_to_bits
from ..modem import ModemConfig, Receiver, Transmitter, decode_soft_chips, genie_receive
from ..rateplan import Band
from ..spreading import CHIPS_PER_BIT, despread_chips, spread
from ..sync import genie_sync
from ..waveform import IqBuffer, chips_to_symbols, matched_filter, pulse_shape, slice_chips
from .metrics import bit_errors, ebn0_from_snr_db, sequence_number

logger = logging.getLogger(__name__)

CSV_HEADER = ("snr_db", "ebn0_db", "ber", "per", "frames_sent", "frames_ok", "bits_compared")

# bits sent past the compared range so the last window is fully received
TAIL_BITS = 8
# lag search reach for the first alignment window and for the ones after it
ACQUIRE_CHIPS = 64 * CHIPS_PER_BIT
TRACK_CHIPS = 2 * CHIPS_PER_BIT


@dataclass(frozen=True)
class ExperimentConfig:
    band: Band = Band.BAND_868
    sps: int = 8
    payload_size: int = 122
    frames_per_point: int = 100
    snr_points: Tuple[float, ...] = (20.0,)
    amplitudes: Tuple[int, ...] = ()
    reference_snr_db: float = 30.0
    genie_sync: bool = False
    seed: int = 0
    bits_per_point: int = 100_000
    segment_bits: int = 1_000
    warmup_bits: int = 32
    idle_samples: int = 2_000
    cfo_hz: float = 0.0
    delay_samples: float = 0.0
    random_phase: bool = True
    if_hz: float = 0.0
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "snr_points", tuple(float(s) for s in self.snr_points))
        object.__setattr__(self, "amplitudes", tuple(int(a) for a in self.amplitudes))
        if self.frames_per_point < 1:
            raise InvalidExperiment(f"frames_per_point must be at least 1, got {self.frames_per_point}")
        if not self.snr_points and not self.amplitudes:
            raise InvalidExperiment("no SNR points or amplitudes to evaluate")
        if not 2 <= self.payload_size <= MAX_PAYLOAD:
            raise InvalidExperiment(f"payload_size must be in 2..{MAX_PAYLOAD}, got {self.payload_size}")
        if self.bits_per_point < 1 or self.segment_bits <= self.warmup_bits + 2:
            raise InvalidExperiment("segments must be longer than the warm-up")
        if self.workers < 1:
            raise InvalidExperiment(f"workers must be at least 1, got {self.workers}")

    @property
    def modem(self) -> ModemConfig:
        return ModemConfig(band=self.band, sps=self.sps, if_hz=self.if_hz)

    def channels(self) -> List[ChannelConfig]:
        base = ChannelConfig(cfo_hz=self.cfo_hz, delay_samples=self.delay_samples)
        if self.amplitudes:
            return [amplitude_channel(a, self.reference_snr_db, base) for a in self.amplitudes]
        return [replace(base, snr_db=s) for s in self.snr_points]


@dataclass(frozen=True)
class MetricRow:
    snr_db: float
    ebn0_db: float
    ber: float
    per: float
    frames_sent: int
    frames_ok: int
    bits_compared: int

    def __post_init__(self):
        if not (0 <= self.ber <= 1 and 0 <= self.per <= 1):
            raise InvalidExperiment(f"rates out of range: ber={self.ber}, per={self.per}")
        if not 0 <= self.frames_ok <= self.frames_sent:
            raise InvalidExperiment(f"frames_ok {self.frames_ok} exceeds frames_sent {self.frames_sent}")


def amplitude_channel(amplitude: int, reference_snr_db: float, base: ChannelConfig = ChannelConfig()) -> ChannelConfig:
    """Channel at a given amplifier amplitude over a fixed noise floor."""
    if amplitude <= 0:
        raise InvalidExperiment("amplitude experiments need a positive amplitude")
    snr = reference_snr_db + 20 * math.log10(amplitude / FULL_SCALE)
    return replace(base, amplitude=amplitude, snr_db=snr)


def amplitude_sweep(
    start: int = 1000,
    stop: int = 12000,
    step: int = 100,
    reference_snr_db: float = 30.0,
    base: ChannelConfig = ChannelConfig(),
) -> List[ChannelConfig]:
    return [amplitude_channel(a, reference_snr_db, base) for a in range(start, stop + 1, step)]


def _point_rng(seed) -> Tuple[np.random.Generator, float]:
    rng = np.random.default_rng(seed)
    return rng, float(rng.uniform(0, 2 * np.pi))


def _with_phase(channel: ChannelConfig, config: ExperimentConfig, phase: float) -> ChannelConfig:
    return replace(channel, phase_rad=phase) if config.random_phase else channel


def _run_points(config: ExperimentConfig, point: Callable, csv_path=None) -> List[MetricRow]:
    channels = config.channels()
    seeds = np.random.SeedSequence(config.seed).spawn(len(channels))
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            rows = list(pool.map(point, [config] * len(channels), channels, seeds))
    else:
        rows = [point(config, channel, seed) for channel, seed in zip(channels, seeds)]
    rows.sort(key=lambda r: r.snr_db)
    if csv_path is not None:
        write_csv(rows, csv_path)
    return rows


# BER

def align_chips(reference: np.ndarray, received: np.ndarray) -> Optional[int]:
    """
    Lag s with received[s + k] ~ reference[k] or its complement, by FFT
    correlation. None when no peak stands out of the noise.
    """
    if reference.size == 0 or received.size == 0:
        return None
    ref = 2.0 * reference - 1.0
    rx = 2.0 * received - 1.0
    corr = signal.correlate(rx, ref, mode="full", method="fft")
    j = int(np.argmax(np.abs(corr)))
    if abs(corr[j]) < 5 * math.sqrt(ref.size):
        return None
    return j - (ref.size - 1)


def _genie_errors(config: ExperimentConfig, modem: ModemConfig, channel: ChannelConfig, rng) -> Tuple[int, int]:
    errors = compared = 0
    while compared < config.bits_per_point:
        bits = rng.integers(0, 2, config.segment_bits, dtype=np.uint8)
        wave = Transmitter(modem).modulate(bits)
        rx = apply_channel(wave, channel, rng=rng)
        soft = genie_receive(
            rx, modem, delay=channel.delay_samples, phase=channel.phase_rad,
            cfo_hz=channel.cfo_hz, n_chips=bits.size * CHIPS_PER_BIT,
        )
        e, n = bit_errors(bits, decode_soft_chips(soft.samples))
        errors += e
        compared += n
    return errors, compared


def _continuous_run(config: ExperimentConfig, modem: ModemConfig, channel: ChannelConfig, rng):
    """
    One transmitter, channel and receiver for the whole point. Returns the
    bits, the transmitted chips and the receiver's hard chips.
    """
    tx = Transmitter(modem)
    stream = ChannelStream(channel, rng)
    receiver = Receiver(modem)
    bits = rng.integers(0, 2, config.warmup_bits + config.bits_per_point + TAIL_BITS, dtype=np.uint8)
    sent, hard = [], []
    for start in range(0, bits.size, config.segment_bits):
        chips, wave = tx.stream(bits[start:start + config.segment_bits])
        # the shaped stream has unit power by construction
        rx = stream.process(wave, signal_power=1.0)
        sent.append(chips)
        hard.append(slice_chips(receiver.soft_chips(rx).samples))
    return bits, np.concatenate(sent), np.concatenate(hard)


def _full_sync_errors(config: ExperimentConfig, modem: ModemConfig, channel: ChannelConfig, rng) -> Tuple[int, int]:
    """
    Compare the continuous run window by window. The first window is found
    with a wide search, later ones near the previous lag so timing slips are
    followed. Only the first ``warmup_bits`` are skipped.
    """
    bits, chips, hard = _continuous_run(config, modem, channel, rng)
    errors = compared = 0
    lag = None
    end = config.warmup_bits + config.bits_per_point
    for b0 in range(config.warmup_bits, end, config.segment_bits):
        b1 = min(b0 + config.segment_bits, end)
        reference = chips[b0 * CHIPS_PER_BIT:b1 * CHIPS_PER_BIT]
        guess, reach = (0, ACQUIRE_CHIPS) if lag is None else (lag, TRACK_CHIPS)
        lo = max(b0 * CHIPS_PER_BIT + guess - reach, 0)
        hi = min(b1 * CHIPS_PER_BIT + guess + reach, hard.size)
        s = align_chips(reference, hard[lo:hi])
        start = None if s is None else lo + s
        if start is None or start < CHIPS_PER_BIT or start + reference.size > hard.size:
            logger.warning(f"snr {channel.snr_db:.2f} dB: bits {b0}..{b1} could not be aligned, counted as random")
            errors += (b1 - b0) // 2
            compared += b1 - b0
            continue
        lag = start - b0 * CHIPS_PER_BIT
        # one extra symbol in front seeds the differential decoder
        symbols, _ = despread_chips(hard[start - CHIPS_PER_BIT:start + reference.size])
        e, n = bit_errors(bits[b0:b1], symbols[1:] ^ symbols[:-1])
        errors += e
        compared += n
    return errors, compared


def _ber_point(config: ExperimentConfig, channel: ChannelConfig, seed) -> MetricRow:
    modem = config.modem
    rng, phase = _point_rng(seed)
    channel = _with_phase(channel, config, phase)
    if config.genie_sync:
        errors, compared = _genie_errors(config, modem, channel, rng)
    else:
        errors, compared = _full_sync_errors(config, modem, channel, rng)
    row = MetricRow(
        snr_db=channel.snr_db,
        ebn0_db=ebn0_from_snr_db(channel.snr_db, modem.sample_rate, modem.bit_rate),
        ber=errors / compared,
        per=0.0,
        frames_sent=0,
        frames_ok=0,
        bits_compared=compared,
    )
    logger.info(f"ber: snr {row.snr_db:.2f} dB (Eb/N0 {row.ebn0_db:.2f} dB): {errors}/{compared} = {row.ber:.3e}")
    return row


def run_ber_experiment(config: ExperimentConfig, csv_path=None) -> List[MetricRow]:
    """Unframed random bits through channel and receiver, per SNR point."""
    logger.info(f"ber experiment: {len(config.channels())} points, {'genie' if config.genie_sync else 'full'} sync")
    return _run_points(config, _ber_point, csv_path)


# PER

def _per_point(config: ExperimentConfig, channel: ChannelConfig, seed) -> MetricRow:
    modem = config.modem
    rng, phase = _point_rng(seed)
    stream = ChannelStream(_with_phase(channel, config, phase), rng)
    tx = Transmitter(modem)
    receiver = Receiver(modem)
    gap = np.zeros(-(-config.idle_samples // modem.sps) * modem.sps, dtype=np.complex128)

    sent = {}
    events = []
    power = 1.0
    for seq in range(config.frames_per_point):
        payload = (seq & 0xFFFF).to_bytes(2, "little") + rng.bytes(config.payload_size - 2)
        frame = tx.frame(payload)
        sent[seq & 0xFFFF] = frame.psdu
        wave = tx.modulate(frame.bits())
        power = wave.power()
        pad = np.zeros(-len(wave) % modem.sps, dtype=np.complex128)
        burst = IqBuffer(np.concatenate((gap, wave.samples, pad)), modem.sample_rate)
        events += receiver.process(stream.process(burst, signal_power=power))
    flush = IqBuffer(np.concatenate((gap, np.zeros(4 * modem.span * modem.sps))), modem.sample_rate)
    events += receiver.process(stream.process(flush, signal_power=power))

    ok = set()
    errors = compared = 0
    for event in events:
        if len(event.payload) < 2:
            continue
        seq = sequence_number(event)
        if seq not in sent:
            continue
        if event.crc_ok:
            ok.add(seq)
        if len(event.psdu) == len(sent[seq]):
            e, n = bit_errors(octets_to_bits(sent[seq]), octets_to_bits(event.psdu))
            errors += e
            compared += n
    frames_ok = len(ok)
    row = MetricRow(
        snr_db=channel.snr_db,
        ebn0_db=ebn0_from_snr_db(channel.snr_db, modem.sample_rate, modem.bit_rate),
        ber=errors / compared if compared else 0.5,
        per=1 - frames_ok / config.frames_per_point,
        frames_sent=config.frames_per_point,
        frames_ok=frames_ok,
        bits_compared=compared,
    )
    logger.info(f"per: snr {row.snr_db:.2f} dB: {frames_ok}/{row.frames_sent} frames ok, per {row.per:.3f}")
    return row


def run_per_experiment(config: ExperimentConfig, csv_path=None) -> List[MetricRow]:
    """Sequence-numbered frames separated by idle gaps through the full chain."""
    logger.info(f"per experiment: {len(config.channels())} points, {config.frames_per_point} frames each")
    return _run_points(config, _per_point, csv_path)


# Chip level and despreading

def _chip_point(config: ExperimentConfig, channel: ChannelConfig, seed, chips_per_point: int, block_chips: int) -> MetricRow:
    modem = config.modem
    spec = modem.rrc
    rng, phase = _point_rng(seed)
    channel = _with_phase(channel, config, phase)
    errors = compared = 0
    while compared < chips_per_point:
        n = min(block_chips, chips_per_point - compared)
        chips = rng.integers(0, 2, n, dtype=np.uint8)
        wave = pulse_shape(chips_to_symbols(chips, modem.chip_rate), spec)
        rx = apply_channel(wave, channel, rng=rng)
        soft = genie_sync(
            matched_filter(rx, spec), spec, delay=channel.delay_samples,
            phase=channel.phase_rad, cfo_hz=channel.cfo_hz, n_chips=n,
        )
        e, c = bit_errors(chips, slice_chips(soft.samples))
        errors += e
        compared += c
    return MetricRow(
        snr_db=channel.snr_db,
        ebn0_db=channel.snr_db + 10 * math.log10(modem.sps),
        ber=errors / compared,
        per=0.0,
        frames_sent=0,
        frames_ok=0,
        bits_compared=compared,
    )


def run_chip_ber_experiment(
    config: ExperimentConfig, chips_per_point: int = 1_000_000, block_chips: int = 1 << 18,
) -> List[MetricRow]:
    """
    Genie-synchronized, unspread BPSK chip error rate. ``ebn0_db`` in the
    rows is the chip Ec/N0, SNR * sps.
    """
    channels = config.channels()
    seeds = np.random.SeedSequence(config.seed).spawn(len(channels))
    rows = [_chip_point(config, ch, s, chips_per_point, block_chips) for ch, s in zip(channels, seeds)]
    for row in rows:
        logger.info(f"chip ber: Ec/N0 {row.ebn0_db:.2f} dB: {row.ber:.3e} over {row.bits_compared} chips")
    return sorted(rows, key=lambda r: r.snr_db)


@dataclass(frozen=True)
class DespreadResult:
    flip_probability: float
    bit_errors: int
    bits_compared: int

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits_compared if self.bits_compared else 0.0


def run_despread_experiment(p: float, n_bits: int = 10_000_000, seed: int = 0, block_bits: int = 1 << 18) -> DespreadResult:
    """Flip hard chips with probability p and count post-despread bit errors."""
    if not 0 <= p <= 1:
        raise InvalidExperiment(f"flip probability must be in [0, 1], got {p}")
    rng = np.random.default_rng(seed)
    errors = compared = 0
    while compared < n_bits:
        n = min(block_bits, n_bits - compared)
        bits = rng.integers(0, 2, n, dtype=np.uint8)
        chips = spread(bits) ^ (rng.random(n * CHIPS_PER_BIT) < p).astype(np.uint8)
        decoded, _ = despread_chips(chips)
        errors += int(np.count_nonzero(decoded != bits))
        compared += n
    logger.info(f"despread: p={p}: {errors}/{compared} bit errors")
    return DespreadResult(p, errors, compared)


def capture_constellation(config: ExperimentConfig, snr_db: float, n_bits: int = 2_000) -> np.ndarray:
    """Soft chips after carrier and timing recovery, warm-up dropped."""
    modem = config.modem
    rng, phase = _point_rng(np.random.SeedSequence(config.seed))
    channel = _with_phase(
        ChannelConfig(snr_db=snr_db, cfo_hz=config.cfo_hz, delay_samples=config.delay_samples), config, phase,
    )
    bits = rng.integers(0, 2, n_bits, dtype=np.uint8)
    rx = apply_channel(Transmitter(modem).modulate(bits), channel, rng=rng)
    soft = Receiver(modem).soft_chips(rx).samples
    return soft[config.warmup_bits * CHIPS_PER_BIT:]


# CSV

def _format(value) -> str:
    return str(value) if isinstance(value, int) else f"{value:.10g}"


def write_csv(rows: Sequence[MetricRow], path: Union[str, os.PathLike]) -> None:
    with open(path, "w", newline="") as fp:
        writer = csv.writer(fp, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for row in rows:
            writer.writerow(_format(v) for v in asdict(row).values())
    logger.info(f"wrote {len(rows)} rows to {path}")


def read_csv(path: Union[str, os.PathLike]) -> List[MetricRow]:
    types = {f.name: f.type for f in fields(MetricRow)}
    with open(path, newline="") as fp:
        return [
            MetricRow(**{k: (int(v) if types[k] in (int, "int") else float(v)) for k, v in record.items()})
            for record in csv.DictReader(fp)
        ]
