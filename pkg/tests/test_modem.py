import math
import queue

import numpy as np
import pytest

from phy868.channel import ChannelConfig, apply_channel
from phy868.errors import AliasRisk, InvalidSpec
from phy868.framing import parse_frame
from phy868.modem import (
    FrameListener,
    ModemConfig,
    Receiver,
    Transmitter,
    decode_soft_chips,
    genie_receive,
    loopback,
)
from phy868.rateplan import Band
from phy868.waveform import IqBuffer


def test_modem_config_rates(modem_868):
    assert modem_868.chip_rate == 300_000
    assert modem_868.sample_rate == 2_400_000
    assert ModemConfig(band=Band.BAND_915, sps=4).sample_rate == 2_400_000


def test_modem_config_validation():
    with pytest.raises(AliasRisk):
        ModemConfig(sps=8, if_hz=1.3e6)
    with pytest.raises(InvalidSpec):
        ModemConfig(sps=1)


def test_transmitter_waveform_length(modem_868, random_payload):
    wave = Transmitter(modem_868).transmit(random_payload)
    chips = 130 * 8 * 15
    assert len(wave) == (chips - 1) * 8 + modem_868.rrc.num_taps
    assert wave.sample_rate == modem_868.sample_rate


def test_genie_receive_recovers_frame(modem_868, random_payload):
    wave = Transmitter(modem_868).transmit(random_payload)
    frame = parse_frame(decode_soft_chips(genie_receive(wave, modem_868).samples))
    assert frame.payload == random_payload


def test_loopback_one_frame(modem_868, random_payload):
    _, events = loopback(random_payload, modem_868)
    assert len(events) == 1
    assert events[0].crc_ok
    assert events[0].payload == random_payload


@pytest.mark.parametrize("band, sps, if_hz", [(Band.BAND_868, 8, 0.0), (Band.BAND_915, 4, 0.0), (Band.BAND_868, 16, 1.5e6)])
def test_loopback_bands_and_if(band, sps, if_hz, random_payload):
    _, events = loopback(random_payload, ModemConfig(band=band, sps=sps, if_hz=if_hz))
    assert [e.payload for e in events] == [random_payload]


def test_phase_ambiguity_leaves_payload_unchanged(modem_868, random_payload):
    stream, events = loopback(random_payload, modem_868)
    flipped = Receiver(modem_868).process(stream.with_samples(-stream.samples))
    assert [e.payload for e in flipped] == [e.payload for e in events] == [random_payload]


def impaired_bursts(config: ModemConfig, rng, frames: int):
    """Frames with independent random phase, CFO up to 0.5% of chip rate and fractional delay."""
    tx = Transmitter(config)
    gap = np.zeros(2000, dtype=np.complex128)
    for seq in range(frames):
        payload = seq.to_bytes(2, "little") + rng.bytes(120)
        wave = tx.transmit(payload)
        channel = ChannelConfig(
            phase_rad=rng.uniform(0, 2 * math.pi),
            cfo_hz=rng.uniform(-1, 1) * 0.005 * config.chip_rate,
            delay_samples=rng.uniform(0, 4 * config.sps),
        )
        burst = IqBuffer(np.concatenate((gap, wave.samples, gap)), wave.sample_rate)
        yield payload, apply_channel(burst, channel)


def run_impaired(config: ModemConfig, rng, frames: int):
    receiver = Receiver(config)
    sent, received = [], []
    for payload, burst in impaired_bursts(config, rng, frames):
        sent.append(payload)
        received += [e.payload for e in receiver.process(burst) if e.crc_ok]
    return sent, received


@pytest.mark.parametrize("band", [Band.BAND_868, Band.BAND_915])
def test_noise_free_impaired_frames(band, rng):
    sent, received = run_impaired(ModemConfig(band=band, sps=8), rng, 20)
    assert received == sent


@pytest.mark.slow
def test_thousand_noise_free_frames(modem_868, rng):
    sent, received = run_impaired(modem_868, rng, 1000)
    assert received == sent


def test_frame_listener_drains_queue(modem_868, rng):
    frames = queue.Queue()
    receiver = Receiver(modem_868, frames=frames)
    seen = []
    listener = FrameListener(frames, seen.append)
    listener.start()
    payloads = []
    for payload, burst in impaired_bursts(modem_868, rng, 3):
        payloads.append(payload)
        receiver.process(burst)
    listener.stop(timeout=5)
    assert not listener.is_alive()
    assert [e.payload for e in seen] == payloads
    assert frames.empty()


def test_receiver_without_queue_only_returns_events(modem_868, random_payload):
    stream, events = loopback(random_payload, modem_868)
    receiver = Receiver(modem_868)
    assert receiver.frames is None
    assert receiver.process(stream) == events


def test_streaming_transmitter_is_continuous(modem_868, rng):
    bits = rng.integers(0, 2, 64, dtype=np.uint8)
    whole = Transmitter(modem_868).modulate(bits).samples
    tx = Transmitter(modem_868)
    chips_a, wave_a = tx.stream(bits[:40])
    chips_b, wave_b = tx.stream(bits[40:])
    n = bits.size * 15 * modem_868.sps
    assert len(wave_a) + len(wave_b) == n
    np.testing.assert_array_equal(np.concatenate((chips_a, chips_b)), Transmitter(modem_868).chips(bits))
    np.testing.assert_allclose(np.concatenate((wave_a.samples, wave_b.samples)), whole[:n], atol=1e-10)


def test_receiver_chunking_is_transparent(modem_868, random_payload):
    stream, events = loopback(random_payload, modem_868)
    receiver = Receiver(modem_868)
    chunked = []
    for k in range(0, len(stream), 4096):
        chunked += receiver.process(stream.with_samples(stream.samples[k:k + 4096]))
    assert chunked == events
