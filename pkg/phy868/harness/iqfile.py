"""
Raw I/Q files: interleaved little-endian float32 I,Q pairs, no header.
"""

import logging
import os
from typing import Union

import numpy as np

from ..errors import OddFloatCount
from ..waveform import IqBuffer

logger = logging.getLogger(__name__)

IQ_DTYPE = np.dtype("<f4")


def iq_write(samples: Union[IqBuffer, np.ndarray], path: Union[str, os.PathLike]) -> int:
    """Write samples and return the number of bytes written."""
    x = samples.samples if isinstance(samples, IqBuffer) else np.asarray(samples)
    interleaved = np.empty(2 * x.size, dtype=IQ_DTYPE)
    interleaved[0::2] = np.real(x)
    interleaved[1::2] = np.imag(x)
    interleaved.tofile(path)
    logger.debug(f"wrote {x.size} samples to {path}")
    return interleaved.nbytes


def iq_read(path: Union[str, os.PathLike], sample_rate: float) -> IqBuffer:
    size = os.path.getsize(path)
    if size % (2 * IQ_DTYPE.itemsize):
        raise OddFloatCount(f"{path} holds {size} bytes, not whole float32 I/Q pairs")
    raw = np.fromfile(path, dtype=IQ_DTYPE)
    samples = raw[0::2].astype(np.float64) + 1j * raw[1::2].astype(np.float64)
    logger.debug(f"read {samples.size} samples from {path}")
    return IqBuffer(samples, sample_rate)
