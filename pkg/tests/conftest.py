import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), ".."))

from phy868.modem import ModemConfig  # noqa: E402
from phy868.rateplan import Band  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture
def modem_868():
    return ModemConfig(band=Band.BAND_868, sps=8)


@pytest.fixture
def random_payload(rng):
    return rng.bytes(122)
