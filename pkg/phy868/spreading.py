"""
Differential coding and DSSS spreading for the 868/915 MHz BPSK PHY.

Each (differentially encoded) bit is spread into one of two 15-chip
pseudo-noise codewords, the second being the bitwise complement of the
first. Chip words are carried in a 16-bit integer with c0 in bit 14 and
the top bit always clear.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Sequence, Tuple

import numpy as np
from numba import njit

logger = logging.getLogger(__name__)

CHIPS_PER_BIT = 15
CHIP_MASK = 0x7FFF

# Symbol-to-chip mapping, c0 first
ZERO_CHIPS = (1, 1, 1, 1, 0, 1, 0, 1, 1, 0, 0, 1, 0, 0, 0)
ONE_CHIPS = tuple(1 - c for c in ZERO_CHIPS)

_WEIGHTS = 1 << np.arange(CHIPS_PER_BIT - 1, -1, -1, dtype=np.int64)
CODE_CHIPS = np.array([ZERO_CHIPS, ONE_CHIPS], dtype=np.uint8)
ZERO_CODE = int(CODE_CHIPS[0].astype(np.int64) @ _WEIGHTS)
ONE_CODE = int(CODE_CHIPS[1].astype(np.int64) @ _WEIGHTS)

# popcount of every 15-bit word
POPCOUNT = np.array([bin(i).count("1") for i in range(1 << CHIPS_PER_BIT)], dtype=np.int8)


@dataclass(frozen=True)
class ChipWord:
    """Fifteen chips packed into a 16-bit carrier, c0 most significant."""

    packed: int

    def __post_init__(self):
        if not 0 <= self.packed <= CHIP_MASK:
            raise ValueError(f"chip word 0x{self.packed:04x} does not fit in 15 bits")

    @classmethod
    def from_chips(cls, chips: Sequence[int]) -> "ChipWord":
        if len(chips) != CHIPS_PER_BIT:
            raise ValueError(f"expected {CHIPS_PER_BIT} chips, got {len(chips)}")
        return cls(int(np.asarray(chips, dtype=np.int64) @ _WEIGHTS))

    @property
    def chips(self) -> Tuple[int, ...]:
        return tuple((self.packed >> (CHIPS_PER_BIT - 1 - k)) & 1 for k in range(CHIPS_PER_BIT))

    def complement(self) -> "ChipWord":
        return ChipWord(self.packed ^ CHIP_MASK)

    def __str__(self):
        return "".join(str(c) for c in self.chips)


@dataclass
class DiffState:
    """Last differentially encoded bit of a stream."""

    last: int = 0


def diff_encode(bits: Iterable[int], state: DiffState | None = None) -> np.ndarray:
    """e[n] = b[n] xor e[n-1], seeded from ``state.last``; updates ``state``."""
    state = state if state is not None else DiffState()
    b = np.asarray(bits, dtype=np.uint8) & 1
    if b.size == 0:
        return b
    encoded = ((np.cumsum(b, dtype=np.int64) + state.last) & 1).astype(np.uint8)
    state.last = int(encoded[-1])
    return encoded


def diff_decode(bits: Iterable[int], state: DiffState | None = None) -> np.ndarray:
    """b[n] = e[n] xor e[n-1], seeded from ``state.last``; updates ``state``."""
    state = state if state is not None else DiffState()
    e = np.asarray(bits, dtype=np.uint8) & 1
    if e.size == 0:
        return e
    previous = np.concatenate(([state.last], e[:-1])).astype(np.uint8)
    state.last = int(e[-1])
    return e ^ previous


def spread_bit(bit: int) -> ChipWord:
    return ChipWord(ONE_CODE if bit & 1 else ZERO_CODE)


def spread(bits: Iterable[int]) -> np.ndarray:
    """Chip stream for a bit stream, 15 chips per bit, c0 first."""
    b = np.asarray(bits, dtype=np.uint8) & 1
    return CODE_CHIPS[b].reshape(-1)


@njit(cache=True)
def despread_word(packed):
    """Nearest codeword to a packed chip word: (bit, hamming distance)."""
    distance = np.int64(POPCOUNT[(packed ^ ZERO_CODE) & CHIP_MASK])
    if distance <= 7:
        return 0, distance
    return 1, CHIPS_PER_BIT - distance


def despread(word: ChipWord) -> Tuple[int, int]:
    bit, distance = despread_word(word.packed)
    return int(bit), int(distance)


def pack_chips(chips: np.ndarray) -> np.ndarray:
    """Pack a chip stream (length a multiple of 15) into chip words."""
    c = np.asarray(chips, dtype=np.int64)
    if c.size % CHIPS_PER_BIT:
        raise ValueError(f"chip stream length {c.size} is not a multiple of {CHIPS_PER_BIT}")
    return c.reshape(-1, CHIPS_PER_BIT) @ _WEIGHTS


def despread_chips(chips: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorized hard-decision despreading: (bits, distances)."""
    words = pack_chips(chips)
    distance = POPCOUNT[words ^ ZERO_CODE].astype(np.int64)
    bits = (distance > 7).astype(np.uint8)
    distance = np.where(bits == 1, CHIPS_PER_BIT - distance, distance)
    return bits, distance
