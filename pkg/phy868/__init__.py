"""
Software modem for the IEEE 802.15.4 868/915 MHz BPSK PHY.
"""

from .channel import ChannelConfig, apply_channel, awgn
from .errors import PhyError
from .framing import PacketSink, PhyFrame, SinkConfig, build_frame, crc16, parse_frame
from .modem import FrameListener, ModemConfig, Receiver, Transmitter
from .rateplan import Band, byte_modulus, plan
from .spreading import ChipWord, despread, spread, spread_bit
from .sync import SyncConfig
from .waveform import IqBuffer, RrcSpec

__all__ = [
    "Band",
    "ChannelConfig",
    "ChipWord",
    "FrameListener",
    "IqBuffer",
    "ModemConfig",
    "PacketSink",
    "PhyError",
    "PhyFrame",
    "Receiver",
    "RrcSpec",
    "SinkConfig",
    "SyncConfig",
    "Transmitter",
    "apply_channel",
    "awgn",
    "build_frame",
    "byte_modulus",
    "crc16",
    "despread",
    "parse_frame",
    "plan",
    "spread",
    "spread_bit",
]
