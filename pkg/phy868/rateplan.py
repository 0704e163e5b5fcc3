"""
Rate planning for the converter chain: Byte_Modulus, interpolation and
decimation factors, and the sub-GHz channel plan.

Factors use the bit-referenced samples-per-symbol convention
(r = bit rate); the simulator's own waveform is chip-referenced and its
sample rate is reported alongside as ``sample_rate``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

from .errors import IllegalDecimation, IllegalFactors, IllegalInterpolation

logger = logging.getLogger(__name__)

DAC_RATE = 128_000_000
ADC_RATE = 64_000_000
USB_RATIO = 128 // 8  # 128 MSPS / 8 MSPS
CHIPS_PER_BIT = 15

LEGAL_INTERPOLATION = range(16, 513, 4)
LEGAL_DECIMATION = range(8, 257, 2)


class Band(Enum):
    BAND_868 = 868
    BAND_915 = 915

    @property
    def bit_rate(self) -> int:
        return 20_000 if self is Band.BAND_868 else 40_000

    @property
    def chip_rate(self) -> int:
        return CHIPS_PER_BIT * self.bit_rate

    @classmethod
    def parse(cls, value) -> "Band":
        return cls(int(value))


@dataclass(frozen=True)
class ByteModulus:
    value: Fraction

    @property
    def integral(self) -> bool:
        return self.value.denominator == 1

    def __str__(self):
        return str(self.value)


def byte_modulus(sps: int, bps: int) -> ByteModulus:
    """LCM(128 MSPS / 8 MSPS, sps) * bps / sps, kept exact."""
    if sps < 1 or bps < 1:
        raise ValueError(f"sps and bps must be positive, got {sps}, {bps}")
    result = ByteModulus(math.lcm(USB_RATIO, sps) * Fraction(bps, sps))
    if not result.integral:
        logger.warning(f"Byte_Modulus for sps={sps}, bps={bps} is not an integer: {result}")
    return result


def validate_factors(interpolation, decimation) -> None:
    """Raise unless I is in 16..512 step 4 and D is in 8..256 step 2."""
    bad_i = not (Fraction(interpolation).denominator == 1 and int(interpolation) in LEGAL_INTERPOLATION)
    bad_d = not (Fraction(decimation).denominator == 1 and int(decimation) in LEGAL_DECIMATION)
    if bad_i and bad_d:
        raise IllegalFactors(f"interpolation {interpolation} and decimation {decimation} are both illegal")
    if bad_i:
        raise IllegalInterpolation(f"interpolation {interpolation} not in 16..512 step 4")
    if bad_d:
        raise IllegalDecimation(f"decimation {decimation} not in 8..256 step 2")


@dataclass(frozen=True)
class RateConfig:
    band: Band
    sps_bit: int
    sps_chip: int
    interpolation: int
    decimation: int
    dac_rate: int = DAC_RATE
    adc_rate: int = ADC_RATE

    @property
    def bit_rate(self) -> int:
        return self.band.bit_rate

    @property
    def chip_rate(self) -> int:
        return self.band.chip_rate

    @property
    def sample_rate(self) -> int:
        """Simulator sample rate, chip_rate * sps_chip."""
        return self.chip_rate * self.sps_chip

    def rows(self):
        return [
            ("band", f"{self.band.value} MHz"),
            ("bit_rate", self.bit_rate),
            ("chip_rate", self.chip_rate),
            ("sps_bit", self.sps_bit),
            ("sps_chip", self.sps_chip),
            ("interpolation", self.interpolation),
            ("decimation", self.decimation),
            ("dac_rate", self.dac_rate),
            ("adc_rate", self.adc_rate),
            ("sample_rate", self.sample_rate),
            ("byte_modulus", str(byte_modulus(self.sps_bit, 1))),
        ]


def plan(band: Band, sps: int, sps_chip: int = 8) -> RateConfig:
    """I = dac_rate / (r * sps), D = adc_rate / (r * sps) with r the bit rate."""
    if sps < 1:
        raise ValueError(f"sps must be positive, got {sps}")
    interpolation = Fraction(DAC_RATE, band.bit_rate * sps)
    decimation = Fraction(ADC_RATE, band.bit_rate * sps)
    validate_factors(interpolation, decimation)
    return RateConfig(band, sps, sps_chip, int(interpolation), int(decimation))


def channel_center_hz(band: Band, channel: int) -> float:
    """Channel 0 is 868.3 MHz; channels 1..10 are 906 + 2 (k - 1) MHz."""
    if band is Band.BAND_868:
        if channel != 0:
            raise ValueError(f"the 868 MHz band has only channel 0, got {channel}")
        return 868.3e6
    if not 1 <= channel <= 10:
        raise ValueError(f"915 MHz band channels are 1..10, got {channel}")
    return 906e6 + 2e6 * (channel - 1)
