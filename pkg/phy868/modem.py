"""
Transmitter and receiver chains built from the PHY blocks.

TX: frame -> differential encode -> spread -> BPSK -> RRC -> IF
RX: IF -> squelch -> AGC -> matched filter -> Costas -> M&M -> slice -> packet sink
"""

from __future__ import annotations

import logging
import queue
import threading
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

import numpy as np

from .errors import AliasRisk, InvalidSpec
from .framing import FrameEvent, PacketSink, PhyFrame, SinkConfig, build_frame
from .rateplan import Band
from .spreading import DiffState, despread_chips, diff_decode, diff_encode, spread
from .sync import SyncConfig, Synchronizer, genie_sync
from .waveform import (
    IqBuffer,
    RrcSpec,
    ShaperState,
    chips_to_symbols,
    matched_filter,
    mix,
    pulse_shape,
    pulse_shape_stream,
    slice_chips,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ModemConfig:
    band: Band = Band.BAND_868
    sps: int = 8
    rolloff: float = 0.35
    span: int = 11
    if_hz: float = 0.0
    byte_modulus: int = 1

    def __post_init__(self):
        if self.sps < 2:
            raise InvalidSpec(f"the receiver needs at least 2 samples per chip, got {self.sps}")
        if abs(self.if_hz) >= self.sample_rate / 2:
            raise AliasRisk(f"IF {self.if_hz:.0f} Hz at fs = {self.sample_rate:.0f} Hz")

    @property
    def rrc(self) -> RrcSpec:
        return RrcSpec(rolloff=self.rolloff, span=self.span, sps=self.sps)

    @property
    def bit_rate(self) -> int:
        return self.band.bit_rate

    @property
    def chip_rate(self) -> int:
        return self.band.chip_rate

    @property
    def sample_rate(self) -> float:
        return float(self.chip_rate * self.sps)


class Transmitter:
    """
    Keeps the differential encoder state across calls. ``modulate`` shapes
    each call as a complete burst; ``stream`` treats consecutive calls as
    one continuous transmission.
    """

    def __init__(self, config: ModemConfig):
        self.config = config
        self.diff = DiffState()
        self._shaper = ShaperState(config.rrc)
        self._index = 0

    def chips(self, bits: np.ndarray) -> np.ndarray:
        return spread(diff_encode(bits, self.diff))

    def modulate_chips(self, chips: np.ndarray) -> IqBuffer:
        symbols = chips_to_symbols(chips, self.config.chip_rate)
        shaped = pulse_shape(symbols, self.config.rrc)
        return mix(shaped, self.config.if_hz)

    def modulate(self, bits: np.ndarray) -> IqBuffer:
        return self.modulate_chips(self.chips(bits))

    def stream(self, bits: np.ndarray) -> Tuple[np.ndarray, IqBuffer]:
        """Chips and exactly sps samples per chip, continuing the previous call."""
        chips = self.chips(bits)
        symbols = chips_to_symbols(chips, self.config.chip_rate)
        shaped = IqBuffer(pulse_shape_stream(symbols.samples, self._shaper), self.config.sample_rate)
        wave = mix(shaped, self.config.if_hz, start_index=self._index)
        self._index += len(wave)
        return chips, wave

    def frame(self, payload: bytes) -> PhyFrame:
        return build_frame(payload, self.config.byte_modulus)

    def transmit(self, payload: bytes) -> IqBuffer:
        frame = self.frame(payload)
        logger.debug(f"tx: {len(payload)} octet payload, {len(frame)} octet frame")
        return self.modulate(frame.bits())


def decode_soft_chips(soft: np.ndarray, state: Optional[DiffState] = None) -> np.ndarray:
    """Slice, despread and differentially decode whole chip words."""
    chips = slice_chips(soft)
    chips = chips[: chips.size - chips.size % 15]
    bits, _ = despread_chips(chips)
    return diff_decode(bits, state)


class Receiver:
    """
    Streaming receiver. Feed it consecutive chunks of one stream; decoded
    frame events are returned. When ``frames`` is given, every event is
    also put on that queue for a ``FrameListener``; the receiver keeps no
    queue of its own.
    """

    def __init__(
        self,
        config: ModemConfig,
        sync: Optional[SyncConfig] = None,
        sink: SinkConfig = SinkConfig(),
        frames: "Optional[queue.Queue[FrameEvent]]" = None,
    ):
        self.config = config
        self.synchronizer = Synchronizer(config.rrc, sync)
        self.sink = PacketSink(sink)
        self.frames = frames
        self._index = 0

    def soft_chips(self, samples: IqBuffer) -> IqBuffer:
        baseband = mix(samples, -self.config.if_hz, start_index=self._index)
        self._index += len(samples)
        return self.synchronizer.process(baseband)

    def process(self, samples: IqBuffer) -> List[FrameEvent]:
        soft = self.soft_chips(samples)
        events = self.sink.feed(slice_chips(soft.samples))
        if self.frames is not None:
            for event in events:
                self.frames.put(event)
        return events


def genie_receive(
    samples: IqBuffer,
    config: ModemConfig,
    *,
    delay: float = 0.0,
    phase: float = 0.0,
    cfo_hz: float = 0.0,
    n_chips: Optional[int] = None,
) -> IqBuffer:
    """Soft chips of one burst using the channel's known timing and phase."""
    baseband = mix(samples, -config.if_hz)
    filtered = matched_filter(baseband, config.rrc)
    return genie_sync(filtered, config.rrc, delay=delay, phase=phase, cfo_hz=cfo_hz, n_chips=n_chips)


class FrameListener(threading.Thread):
    """Drains a receiver's frame queue on its own thread and hands events to ``callback``."""

    def __init__(self, frames: "queue.Queue[FrameEvent]", callback: Callable[[FrameEvent], None]):
        super().__init__(daemon=True, name="FrameListener")
        self.frames = frames
        self.callback = callback
        self._stop_event = threading.Event()

    def run(self):
        while not self._stop_event.is_set() or not self.frames.empty():
            try:
                event = self.frames.get(timeout=0.05)
            except queue.Empty:
                continue
            try:
                self.callback(event)
            except Exception:
                logger.exception("frame callback failed")
            finally:
                self.frames.task_done()

    def stop(self, timeout: Optional[float] = None):
        self._stop_event.set()
        self.join(timeout)


def loopback(payload: bytes, config: ModemConfig) -> Tuple[IqBuffer, List[FrameEvent]]:
    """Noise-free TX -> RX of one frame, with idle lead-in and tail."""
    tx = Transmitter(config).transmit(payload)
    idle = np.zeros(200 * config.sps, dtype=np.complex128)
    stream = tx.with_samples(np.concatenate((idle, tx.samples, idle)))
    return stream, Receiver(config).process(stream)
