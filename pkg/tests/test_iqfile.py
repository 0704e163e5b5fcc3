import struct

import numpy as np
import pytest

from phy868.errors import OddFloatCount
from phy868.harness.iqfile import iq_read, iq_write
from phy868.waveform import IqBuffer


def test_empty_buffer_writes_nothing(tmp_path):
    path = tmp_path / "empty.iq"
    assert iq_write(np.zeros(0, dtype=np.complex128), path) == 0
    assert path.read_bytes() == b""
    assert len(iq_read(path, 1e6)) == 0


def test_layout_is_interleaved_little_endian(tmp_path):
    path = tmp_path / "one.iq"
    assert iq_write(IqBuffer(np.array([1 - 1j]), 1e6), path) == 8
    assert path.read_bytes() == struct.pack("<ff", 1.0, -1.0)


def test_float32_values_survive(tmp_path, rng):
    path = tmp_path / "noise.iq"
    x = (rng.standard_normal(10_000) + 1j * rng.standard_normal(10_000)).astype(np.complex64)
    iq_write(x, path)
    back = iq_read(path, 2.4e6)
    assert back.sample_rate == 2.4e6
    np.testing.assert_array_equal(back.samples, x.astype(np.complex128))


@pytest.mark.parametrize("size", [4, 5, 12])
def test_partial_pair_is_rejected(tmp_path, size):
    path = tmp_path / "odd.iq"
    path.write_bytes(b"\0" * size)
    with pytest.raises(OddFloatCount):
        iq_read(path, 1e6)
