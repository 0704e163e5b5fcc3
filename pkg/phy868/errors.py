"""
Exception hierarchy for the 868/915 MHz PHY modem.

Every error names the stage of the chain that raised it so the command
line can print a one-line diagnostic such as ``framing: CRC mismatch``.
"""


class PhyError(Exception):
    """Base class for all modem errors."""

    stage = "phy"


# Framing

class FramingError(PhyError):
    stage = "framing"


class PayloadTooLong(FramingError):
    pass


class NoPreamble(FramingError):
    pass


class BadSfd(FramingError):
    pass


class BadLength(FramingError):
    pass


class CrcMismatch(FramingError):
    pass


# Waveform

class WaveformError(PhyError):
    stage = "waveform"


class InvalidSpec(WaveformError):
    pass


class AliasRisk(WaveformError):
    pass


# Synchronizer

class SyncError(PhyError):
    stage = "sync"


class InvalidSyncConfig(SyncError):
    pass


# Channel

class ChannelError(PhyError):
    stage = "channel"


class ZeroSignal(ChannelError):
    pass


class InvalidChannel(ChannelError):
    pass


# Rate plan

class RatePlanError(PhyError):
    stage = "rateplan"


class IllegalInterpolation(RatePlanError):
    pass


class IllegalDecimation(RatePlanError):
    pass


class IllegalFactors(IllegalInterpolation, IllegalDecimation):
    """Both converter factors are outside their legal sets."""


# Harness

class HarnessError(PhyError):
    stage = "harness"


class LengthMismatch(HarnessError):
    pass


class TooFewSamples(HarnessError):
    pass


class InvalidFftSize(HarnessError):
    pass


class InvalidExperiment(HarnessError):
    pass


class IqFileError(PhyError):
    stage = "io"


class OddFloatCount(IqFileError):
    pass
