"""
PHY framing: frame construction, FCS, parsing and the packet sink.

Serialized frame, least-significant bit of every octet first::

    preamble (4 x 0x00) | SFD (0xA7) | length | payload | FCS (2, LSB octet first) | 0x00 padding

The packet sink turns a stream of sliced chips back into frames. It is a
small state machine run by a numba kernel over an int64 register file so
that whole receive chunks can be processed without leaving compiled code.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Iterable, List, Optional, Tuple

import numpy as np
from numba import njit

from .errors import BadLength, BadSfd, CrcMismatch, NoPreamble, PayloadTooLong
from .spreading import CHIP_MASK, CHIPS_PER_BIT, POPCOUNT, ZERO_CODE, ChipWord, despread_word

logger = logging.getLogger(__name__)

PREAMBLE = bytes(4)
SFD = 0xA7
FCS_LEN = 2
MAX_PSDU = 127
MAX_PAYLOAD = MAX_PSDU - FCS_LEN
HEADER_LEN = len(PREAMBLE) + 2
PAD_OCTET = 0x00

CRC_POLY_REFLECTED = 0x8408  # x^16 + x^12 + x^5 + 1, bit-reversed


def _make_crc_table() -> np.ndarray:
    table = np.zeros(256, dtype=np.int64)
    for i in range(256):
        crc = i
        for _ in range(8):
            crc = (crc >> 1) ^ CRC_POLY_REFLECTED if crc & 1 else crc >> 1
        table[i] = crc
    return table


CRC_TABLE = _make_crc_table()


@njit(cache=True)
def _crc16_kernel(data):
    crc = 0
    for i in range(data.size):
        crc = (crc >> 8) ^ CRC_TABLE[(crc ^ np.int64(data[i])) & 0xFF]
    return crc


@dataclass(frozen=True)
class Fcs:
    """16-bit frame check sequence."""

    value: int

    def to_bytes(self) -> bytes:
        return self.value.to_bytes(FCS_LEN, "little")


def crc16(data: Iterable[int]) -> Fcs:
    """CRC-16/CCITT as used for the IEEE 802.15.4 FCS: init 0, LSB first, no final xor."""
    octets = np.frombuffer(bytes(data), dtype=np.uint8)
    return Fcs(int(_crc16_kernel(octets)))


def octets_to_bits(octets: bytes) -> np.ndarray:
    return np.unpackbits(np.frombuffer(bytes(octets), dtype=np.uint8), bitorder="little")


def bits_to_octets(bits: np.ndarray) -> bytes:
    return np.packbits(np.asarray(bits, dtype=np.uint8), bitorder="little").tobytes()


@dataclass(frozen=True)
class PhyFrame:
    """A PHY packet. ``psdu`` is payload followed by the two FCS octets."""

    psdu: bytes
    sfd: int = SFD
    pad: int = 0
    preamble: bytes = PREAMBLE

    def __post_init__(self):
        if self.preamble != PREAMBLE:
            raise NoPreamble(f"preamble must be four 0x00 octets, got {self.preamble.hex()}")
        if not FCS_LEN <= len(self.psdu) <= MAX_PSDU:
            raise BadLength(f"PSDU of {len(self.psdu)} octets outside {FCS_LEN}..{MAX_PSDU}")
        if self.pad < 0:
            raise ValueError("negative padding")

    @property
    def length(self) -> int:
        return len(self.psdu)

    @property
    def payload(self) -> bytes:
        return self.psdu[:-FCS_LEN]

    @property
    def fcs(self) -> Fcs:
        return Fcs(int.from_bytes(self.psdu[-FCS_LEN:], "little"))

    @property
    def crc_ok(self) -> bool:
        return crc16(self.payload) == self.fcs

    def __bytes__(self) -> bytes:
        return self.preamble + bytes((self.sfd, self.length)) + self.psdu + bytes(self.pad)

    def __len__(self) -> int:
        return HEADER_LEN + self.length + self.pad

    def bits(self) -> np.ndarray:
        return octets_to_bits(bytes(self))


def build_frame(payload: bytes, byte_modulus: int = 1) -> PhyFrame:
    """Frame ``payload`` and pad with NUL octets to a multiple of ``byte_modulus``."""
    payload = bytes(payload)
    if len(payload) > MAX_PAYLOAD:
        raise PayloadTooLong(f"payload of {len(payload)} octets exceeds {MAX_PAYLOAD}")
    if byte_modulus < 1:
        raise ValueError(f"byte_modulus must be positive, got {byte_modulus}")
    psdu = payload + crc16(payload).to_bytes()
    unpadded = HEADER_LEN + len(psdu)
    pad = -unpadded % byte_modulus
    return PhyFrame(psdu=psdu, pad=pad)


def parse_frame(bits: np.ndarray) -> PhyFrame:
    """Decode a bit stream starting at a preamble; no error correction is attempted."""
    b = np.asarray(bits, dtype=np.uint8) & 1
    preamble_bits = 8 * len(PREAMBLE)
    if b.size < preamble_bits or b[:preamble_bits].any():
        raise NoPreamble("preamble of four 0x00 octets not found")
    if b.size < preamble_bits + 8:
        raise BadSfd("stream ends before the SFD")
    sfd = bits_to_octets(b[preamble_bits:preamble_bits + 8])[0]
    if sfd != SFD:
        raise BadSfd(f"SFD 0x{sfd:02x} != 0x{SFD:02x}")
    body = preamble_bits + 16
    if b.size < body:
        raise BadLength("stream ends before the length field")
    length = bits_to_octets(b[body - 8:body])[0]
    if not FCS_LEN <= length <= MAX_PSDU:
        raise BadLength(f"length field {length} outside {FCS_LEN}..{MAX_PSDU}")
    end = body + 8 * length
    if b.size < end:
        raise BadLength(f"length field {length} exceeds the {(b.size - body) // 8} octets available")
    frame = PhyFrame(psdu=bits_to_octets(b[body:end]), pad=(b.size - end) // 8)
    if not frame.crc_ok:
        raise CrcMismatch(f"FCS 0x{frame.fcs.value:04x} != computed 0x{crc16(frame.payload).value:04x}")
    return frame


# Packet sink

class SinkMode(IntEnum):
    SEARCH_PREAMBLE = 0
    SYNC_SFD = 1
    DECODE_LENGTH = 2
    DECODE_PAYLOAD = 3
    CHECK_CRC = 4


# register file layout
R_MODE = 0
R_SHIFT = 1
R_ALIGNED = 2
R_CHIP_COUNT = 3
R_PREV = 4
R_ZEROS = 5
R_SFD = 6
R_SFD_WAIT = 7
R_BITS = 8
R_OCTET = 9
R_LENGTH = 10
R_DONE = 11
R_BUDGET = 12
R_PREAMBLE_ZEROS = 13
R_MISSES = 14
N_REGISTERS = 15

SFD_WINDOW = 40


@dataclass(frozen=True)
class SinkConfig:
    """
    Packet sink tuning.

    ``chip_error_budget`` is the chip mismatch allowed on preamble symbols.
    One over-budget preamble zero is tolerated; two in a row drop the lock.

    ``preamble_zeros`` is the number of consecutive zero bits that arm the
    SFD search. The default of 8 deliberately deviates from the 32 bits of a
    full four-octet preamble: AGC, Costas and timing loops are still
    settling during the first preamble symbols of a burst, and requiring
    all 32 would lose any frame whose first symbol is not clean. Set 32
    for the strict reading.
    """

    chip_error_budget: int = 2
    preamble_zeros: int = 8

    def __post_init__(self):
        if not 0 <= self.chip_error_budget < 7:
            raise ValueError(f"chip_error_budget must be in 0..6, got {self.chip_error_budget}")
        if not 1 <= self.preamble_zeros <= 8 * len(PREAMBLE):
            raise ValueError(f"preamble_zeros must be in 1..32, got {self.preamble_zeros}")


@dataclass(frozen=True)
class FrameEvent:
    psdu: bytes
    crc_ok: bool

    @property
    def payload(self) -> bytes:
        return self.psdu[:-FCS_LEN]

    @property
    def sequence(self) -> Optional[int]:
        if len(self.psdu) < FCS_LEN + 2:
            return None
        return int.from_bytes(self.psdu[:2], "little")


@dataclass
class SinkState:
    registers: np.ndarray
    psdu: np.ndarray = field(default_factory=lambda: np.zeros(MAX_PSDU, dtype=np.uint8))

    @classmethod
    def initial(cls, config: SinkConfig = SinkConfig()) -> "SinkState":
        registers = np.zeros(N_REGISTERS, dtype=np.int64)
        registers[R_BUDGET] = config.chip_error_budget
        registers[R_PREAMBLE_ZEROS] = config.preamble_zeros
        return cls(registers)

    @property
    def mode(self) -> SinkMode:
        return SinkMode(int(self.registers[R_MODE]))

    @property
    def shift_register(self) -> ChipWord:
        return ChipWord(int(self.registers[R_SHIFT]))

    @property
    def chip_error_budget(self) -> int:
        return int(self.registers[R_BUDGET])

    def copy(self) -> "SinkState":
        return SinkState(self.registers.copy(), self.psdu.copy())


@njit(cache=True)
def _reset(regs):
    regs[R_MODE] = 0
    regs[R_ALIGNED] = 0
    regs[R_CHIP_COUNT] = 0
    regs[R_ZEROS] = 0
    regs[R_SFD] = 0
    regs[R_SFD_WAIT] = 0
    regs[R_BITS] = 0
    regs[R_OCTET] = 0
    regs[R_DONE] = 0
    regs[R_MISSES] = 0


@njit(cache=True)
def _arm_sfd(regs):
    regs[R_MODE] = 1
    regs[R_SFD] = 0
    regs[R_SFD_WAIT] = 0


@njit(cache=True)
def _sink_advance(regs, psdu, chip):
    """One chip through the sink. Returns (decoded bit or -1, crc flag or -1)."""
    shift = ((regs[R_SHIFT] << 1) | (chip & 1)) & CHIP_MASK
    regs[R_SHIFT] = shift
    budget = regs[R_BUDGET]

    if regs[R_ALIGNED] == 0:
        distance = np.int64(POPCOUNT[shift ^ ZERO_CODE])
        if distance <= budget:
            polarity = 0
        elif CHIPS_PER_BIT - distance <= budget:
            polarity = 1
        else:
            return -1, -1
        regs[R_ALIGNED] = 1
        regs[R_CHIP_COUNT] = 0
        regs[R_PREV] = polarity
        regs[R_ZEROS] = 1
        regs[R_MISSES] = 0
        if regs[R_ZEROS] >= regs[R_PREAMBLE_ZEROS]:
            _arm_sfd(regs)
        return 0, -1

    regs[R_CHIP_COUNT] += 1
    if regs[R_CHIP_COUNT] < CHIPS_PER_BIT:
        return -1, -1
    regs[R_CHIP_COUNT] = 0
    symbol, distance = despread_word(shift)
    bit = symbol ^ regs[R_PREV]
    regs[R_PREV] = symbol
    mode = regs[R_MODE]

    if mode == 0:
        # an isolated noisy zero is kept; a misaligned window is never within budget
        if distance > budget:
            regs[R_MISSES] += 1
        else:
            regs[R_MISSES] = 0
        if bit != 0 or regs[R_MISSES] > 1:
            _reset(regs)
            return bit, -1
        regs[R_ZEROS] += 1
        if regs[R_ZEROS] >= regs[R_PREAMBLE_ZEROS]:
            _arm_sfd(regs)
        return bit, -1

    if mode == 1:
        regs[R_SFD] = (regs[R_SFD] >> 1) | (bit << 7)
        regs[R_SFD_WAIT] += 1
        if regs[R_SFD] == 0 and distance <= budget:
            # still inside a run of clean preamble zeros
            regs[R_SFD_WAIT] = 0
        elif regs[R_SFD_WAIT] >= 8 and regs[R_SFD] == SFD:
            regs[R_MODE] = 2
            regs[R_BITS] = 0
            regs[R_OCTET] = 0
        elif regs[R_SFD_WAIT] > SFD_WINDOW:
            _reset(regs)
        return bit, -1

    regs[R_OCTET] |= bit << regs[R_BITS]
    regs[R_BITS] += 1
    if regs[R_BITS] < 8:
        return bit, -1
    octet = regs[R_OCTET]
    regs[R_OCTET] = 0
    regs[R_BITS] = 0

    if mode == 2:
        if octet > MAX_PSDU or octet < FCS_LEN:
            _reset(regs)
            return bit, -1
        regs[R_LENGTH] = octet
        regs[R_DONE] = 0
        regs[R_MODE] = 3
        return bit, -1

    psdu[regs[R_DONE]] = octet
    regs[R_DONE] += 1
    if regs[R_DONE] < regs[R_LENGTH]:
        return bit, -1

    regs[R_MODE] = 4
    length = regs[R_LENGTH]
    computed = _crc16_kernel(psdu[:length - FCS_LEN])
    received = np.int64(psdu[length - 2]) | (np.int64(psdu[length - 1]) << 8)
    flag = 1 if computed == received else 0
    _reset(regs)
    return bit, flag


@njit(cache=True)
def _sink_run(chips, regs, psdu, out_psdu, out_len, out_ok):
    n = 0
    for i in range(chips.size):
        _, flag = _sink_advance(regs, psdu, np.int64(chips[i]))
        if flag >= 0 and n < out_len.size:
            length = regs[R_LENGTH]
            out_psdu[n, :length] = psdu[:length]
            out_len[n] = length
            out_ok[n] = flag
            n += 1
    return n


def sink_step(state: SinkState, chip: int) -> Tuple[SinkState, Optional[int], Optional[FrameEvent]]:
    """Advance a copy of ``state`` by one sliced chip."""
    new = state.copy()
    bit, flag = _sink_advance(new.registers, new.psdu, int(chip) & 1)
    event = None
    if flag >= 0:
        length = int(new.registers[R_LENGTH])
        event = FrameEvent(psdu=new.psdu[:length].tobytes(), crc_ok=bool(flag))
    return new, (int(bit) if bit >= 0 else None), event


class PacketSink:
    """Streaming packet sink owning one ``SinkState``."""

    def __init__(self, config: SinkConfig = SinkConfig()):
        self.config = config
        self.state = SinkState.initial(config)

    def feed(self, chips: np.ndarray) -> List[FrameEvent]:
        chips = np.ascontiguousarray(chips, dtype=np.uint8)
        capacity = chips.size // (CHIPS_PER_BIT * (self.config.preamble_zeros + 32)) + 2
        out_psdu = np.zeros((capacity, MAX_PSDU), dtype=np.uint8)
        out_len = np.zeros(capacity, dtype=np.int64)
        out_ok = np.zeros(capacity, dtype=np.int64)
        n = _sink_run(chips, self.state.registers, self.state.psdu, out_psdu, out_len, out_ok)
        events = [
            FrameEvent(psdu=out_psdu[k, :out_len[k]].tobytes(), crc_ok=bool(out_ok[k]))
            for k in range(n)
        ]
        for event in events:
            logger.debug(f"sink: frame of {len(event.psdu)} octets, crc_ok={event.crc_ok}")
        return events
