"""
Common utilities and constants for the modem animations.
Synthwave/Cyberpunk color palette, chip-row mobjects and data loaders
that pull real waveforms and measurements out of the phy868 package.
"""

from manim import *
import numpy as np
import os
import sys

# Repository root, so scenes rendered from anywhere can import phy868
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from phy868.harness.experiments import ExperimentConfig, capture_constellation, read_csv
from phy868.harness.metrics import occupied_band, psd
from phy868.modem import ModemConfig, Transmitter
from phy868.rateplan import Band
from phy868.spreading import CODE_CHIPS

# Synthwave Color Palette
SYNTH_BG = "#000221"
SYNTH_GREEN = "#20E516"
SYNTH_CYAN = "#00A0D0"
SYNTH_ORANGE = "#FF6C11"
SYNTH_PURPLE = "#261447"
SYNTH_PEACH = "#FF8664"
SYNTH_GOLD = "#FFD700"

CHIP_ON = SYNTH_CYAN
CHIP_OFF = SYNTH_PURPLE


def code_string(bit: int) -> str:
    """The 15-chip code for a bit as '0'/'1' characters, c0 first."""
    return "".join(str(c) for c in CODE_CHIPS[bit & 1])


def chip_row(chips, size=0.35, buff=0.04):
    """A row of squares, filled for 1 chips."""
    row = VGroup()
    for chip in chips:
        on = str(chip) == "1"
        square = Square(side_length=size, color=CHIP_ON if on else SYNTH_PEACH, stroke_width=2)
        square.set_fill(CHIP_ON if on else CHIP_OFF, opacity=0.8 if on else 0.3)
        row.add(square)
    row.arrange(RIGHT, buff=buff)
    return row


def ber_curve(path):
    """(ebn0_db, ber) arrays from a loopback CSV, rows with BER 0 dropped."""
    rows = [r for r in read_csv(path) if r.ber > 0 and np.isfinite(r.ebn0_db)]
    return np.array([r.ebn0_db for r in rows]), np.array([r.ber for r in rows])


def spectrum_points(band=Band.BAND_868, sps=35, if_hz=1.5e6, n_bits=2000, fft_size=4096, seed=0):
    """
    PSD of a random-bit transmission, normalized to a 0 dB peak.
    Returns (frequency_hz, power_db, occupied band).
    """
    config = ModemConfig(band=band, sps=sps, if_hz=if_hz)
    bits = np.random.default_rng(seed).integers(0, 2, n_bits, dtype=np.uint8)
    table = psd(Transmitter(config).modulate(bits), fft_size)
    return table.frequency, table.power_db - table.power_db.max(), occupied_band(table)


def constellation_points(snr_db, count=400, seed=0):
    """Soft chips after carrier and timing recovery, scaled to unit mean amplitude."""
    points = capture_constellation(ExperimentConfig(seed=seed), snr_db, n_bits=max(count // 15 + 64, 200))
    points = points[-count:]
    return points / np.mean(np.abs(points.real))
