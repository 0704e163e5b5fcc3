import numpy as np
import pytest

from phy868.errors import BadLength, BadSfd, CrcMismatch, FramingError, NoPreamble, PayloadTooLong
from phy868.framing import (
    SFD,
    FrameEvent,
    PacketSink,
    PhyFrame,
    SinkConfig,
    SinkMode,
    SinkState,
    bits_to_octets,
    build_frame,
    crc16,
    octets_to_bits,
    parse_frame,
    sink_step,
)
from phy868.spreading import DiffState, diff_encode, spread


def crc16_bitwise(data: bytes) -> int:
    crc = 0
    for octet in data:
        for k in range(8):
            bit = (octet >> k) & 1
            feedback = (crc ^ bit) & 1
            crc >>= 1
            if feedback:
                crc ^= 0x8408
    return crc


def test_crc_check_value():
    assert crc16(b"123456789").value == 0x2189


def test_crc_of_empty_payload_is_zero():
    assert crc16(b"").value == 0


def test_crc_matches_bit_serial_oracle(rng):
    for size in (1, 2, 17, 125):
        data = rng.bytes(size)
        assert crc16(data).value == crc16_bitwise(data)


def test_crc_over_psdu_including_fcs_is_zero(random_payload):
    frame = build_frame(random_payload)
    assert crc16(frame.psdu).value == 0


def test_build_frame_layout():
    frame = build_frame(b"\x01\x02\x03")
    raw = bytes(frame)
    assert raw[:4] == bytes(4)
    assert raw[4] == SFD
    assert raw[5] == 5
    assert raw[6:9] == b"\x01\x02\x03"
    assert frame.fcs.to_bytes() == raw[9:11]
    assert frame.crc_ok


def test_empty_payload_frame():
    frame = build_frame(b"")
    assert frame.length == 2
    assert len(frame) == 8


def test_byte_modulus_padding():
    frame = build_frame(b"\x01\x02\x03", byte_modulus=16)
    assert len(frame) % 16 == 0
    assert frame.pad == 5
    assert bytes(frame)[-5:] == bytes(5)


def test_payload_too_long():
    build_frame(bytes(125))
    with pytest.raises(PayloadTooLong):
        build_frame(bytes(126))


def test_parse_round_trip(random_payload):
    frame = build_frame(random_payload)
    parsed = parse_frame(frame.bits())
    assert parsed.payload == random_payload
    assert parsed.crc_ok


def test_parse_keeps_padding():
    frame = build_frame(b"abc", byte_modulus=8)
    assert parse_frame(frame.bits()).pad == frame.pad


def test_parse_all_zero_stream():
    with pytest.raises((NoPreamble, BadSfd)):
        parse_frame(np.zeros(400, dtype=np.uint8))


def test_parse_rejects_bad_sfd():
    bits = build_frame(b"abc").bits()
    bits[32] ^= 1
    with pytest.raises(BadSfd):
        parse_frame(bits)


def test_parse_rejects_short_preamble():
    with pytest.raises(NoPreamble):
        parse_frame(np.zeros(20, dtype=np.uint8))


@pytest.mark.parametrize("length", [0, 1, 128, 255])
def test_parse_rejects_bad_length(length):
    raw = bytes(4) + bytes((SFD, length)) + bytes(200)
    with pytest.raises(BadLength):
        parse_frame(octets_to_bits(raw))


def test_parse_rejects_truncated_psdu():
    bits = build_frame(bytes(20)).bits()
    with pytest.raises(BadLength):
        parse_frame(bits[:-16])


def test_every_single_bit_flip_is_detected(rng):
    frame = build_frame(rng.bytes(122))
    bits = frame.bits()
    assert bits.size == 1040
    for k in range(bits.size):
        corrupted = bits.copy()
        corrupted[k] ^= 1
        with pytest.raises(FramingError):
            parse_frame(corrupted)


def test_corrupted_fcs_raises_crc_mismatch():
    bits = build_frame(b"hello").bits()
    bits[-1] ^= 1
    with pytest.raises(CrcMismatch):
        parse_frame(bits)


def test_bits_are_lsb_first():
    np.testing.assert_array_equal(octets_to_bits(b"\xa7"), [1, 1, 1, 0, 0, 1, 0, 1])
    assert bits_to_octets(octets_to_bits(b"\x12\x34")) == b"\x12\x34"


def test_phy_frame_validates_length():
    with pytest.raises(BadLength):
        PhyFrame(psdu=b"\x00")


# Packet sink


def frame_chips(payload: bytes, state: DiffState = None) -> np.ndarray:
    return spread(diff_encode(build_frame(payload).bits(), state))


def test_sink_initial_state():
    state = SinkState.initial()
    assert state.mode is SinkMode.SEARCH_PREAMBLE
    assert state.shift_register.packed == 0
    assert state.chip_error_budget == 2


def test_sink_step_decodes_one_frame(random_payload):
    state = SinkState.initial()
    events = []
    modes = set()
    for chip in frame_chips(random_payload):
        state, _, event = sink_step(state, chip)
        modes.add(state.mode)
        if event is not None:
            events.append(event)
    assert len(events) == 1
    assert events[0].crc_ok
    assert events[0].payload == random_payload
    assert state.mode is SinkMode.SEARCH_PREAMBLE
    assert {SinkMode.SYNC_SFD, SinkMode.DECODE_LENGTH, SinkMode.DECODE_PAYLOAD} <= modes


def test_sink_step_does_not_mutate_input():
    state = SinkState.initial()
    new, _, _ = sink_step(state, 1)
    assert state.shift_register.packed == 0
    assert new.shift_register.packed == 1


def test_sink_locks_on_inverted_chips(random_payload):
    events = PacketSink().feed(1 - frame_chips(random_payload))
    assert [e.payload for e in events] == [random_payload]
    assert events[0].crc_ok


def test_sink_tolerates_two_chip_errors_per_symbol(rng, random_payload):
    chips = frame_chips(random_payload)
    words = chips.reshape(-1, 15)
    for word in words:
        word[rng.choice(15, size=2, replace=False)] ^= 1
    events = PacketSink().feed(words.reshape(-1))
    assert [e.payload for e in events] == [random_payload]


def test_sink_streaming_matches_single_feed(rng):
    payloads = [rng.bytes(n) for n in (3, 60, 122)]
    noise = rng.integers(0, 2, 777, dtype=np.uint8)
    state = DiffState()
    stream = np.concatenate([noise] + [np.concatenate((frame_chips(p, state), noise)) for p in payloads])

    whole = PacketSink().feed(stream)
    sink = PacketSink()
    pieces = []
    for start in range(0, stream.size, 1000):
        pieces += sink.feed(stream[start:start + 1000])
    assert [e.payload for e in whole] == payloads
    assert pieces == whole


def test_sink_reports_bad_crc(random_payload):
    bits = build_frame(random_payload).bits()
    bits[-3] ^= 1
    events = PacketSink().feed(spread(diff_encode(bits)))
    assert len(events) == 1
    assert not events[0].crc_ok


def test_sink_ignores_noise(rng):
    assert PacketSink().feed(rng.integers(0, 2, 200_000, dtype=np.uint8)) == []


@pytest.mark.parametrize("length", [0, 1, 128])
def test_sink_falls_back_on_illegal_length(length, random_payload):
    bad = bytes(4) + bytes((SFD, length)) + bytes(10)
    bits = np.concatenate((octets_to_bits(bad), build_frame(random_payload).bits()))
    events = PacketSink().feed(spread(diff_encode(bits)))
    assert [e.payload for e in events] == [random_payload]


def test_sink_strict_preamble_config(random_payload):
    events = PacketSink(SinkConfig(preamble_zeros=32)).feed(frame_chips(random_payload))
    assert [e.payload for e in events] == [random_payload]


def test_sink_config_validation():
    with pytest.raises(ValueError):
        SinkConfig(chip_error_budget=7)
    with pytest.raises(ValueError):
        SinkConfig(preamble_zeros=0)


def test_frame_event_sequence():
    event = FrameEvent(psdu=b"\x34\x12abc\x00\x00", crc_ok=False)
    assert event.sequence == 0x1234
    assert event.payload == b"\x34\x12abc"


def test_crc_of_zero_octets_is_zero():
    assert crc16(b"\x00\x00").value == 0


@pytest.mark.parametrize("size, modulus, total, pad", [(0, 1, 8, 0), (122, 1, 130, 0), (0, 16, 16, 8)])
def test_frame_sizes(size, modulus, total, pad):
    frame = build_frame(bytes(size), byte_modulus=modulus)
    assert len(bytes(frame)) == total
    assert frame.pad == pad


def test_sink_stays_armed_through_long_zero_run(random_payload):
    bits = np.concatenate((np.zeros(200, dtype=np.uint8), build_frame(random_payload).bits()))
    events = PacketSink().feed(spread(diff_encode(bits)))
    assert [e.payload for e in events] == [random_payload]


def noisy_preamble_chips(payload: bytes, symbols, errors: int = 3) -> np.ndarray:
    words = frame_chips(payload).reshape(-1, 15).copy()
    for k in symbols:
        words[k, :errors] ^= 1
    return words.reshape(-1)


def test_sink_keeps_lock_through_one_noisy_preamble_zero(random_payload):
    sink = PacketSink(SinkConfig(preamble_zeros=32))
    events = sink.feed(noisy_preamble_chips(random_payload, [10]))
    assert [e.payload for e in events] == [random_payload]


def test_sink_drops_lock_after_two_noisy_preamble_zeros(random_payload):
    sink = PacketSink(SinkConfig(preamble_zeros=32))
    assert sink.feed(noisy_preamble_chips(random_payload, [10, 11])) == []
    events = PacketSink().feed(noisy_preamble_chips(random_payload, [10, 11]))
    assert [e.payload for e in events] == [random_payload]
