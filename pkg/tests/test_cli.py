import csv

import pytest

from phy868.harness.cli import build_parser, main
from phy868.harness.experiments import CSV_HEADER


@pytest.fixture
def payload_file(tmp_path, random_payload):
    path = tmp_path / "msg.bin"
    path.write_bytes(random_payload)
    return path


@pytest.mark.parametrize("extra", [[], ["--genie"]])
def test_tx_rx_round_trip(tmp_path, payload_file, random_payload, extra):
    iq, out = tmp_path / "tx.iq", tmp_path / "msg.out"
    assert main(["tx", "--band", "868", "--payload", str(payload_file), "--out", str(iq)]) == 0
    assert iq.stat().st_size % 8 == 0
    assert main(["rx", "--band", "868", "--in", str(iq), "--out", str(out)] + extra) == 0
    assert out.read_bytes() == random_payload


def test_tx_rejects_long_payload(tmp_path, caplog):
    path = tmp_path / "big.bin"
    path.write_bytes(bytes(126))
    assert main(["tx", "--band", "915", "--payload", str(path), "--out", str(tmp_path / "x.iq")]) == 2
    assert "framing:" in caplog.text


def test_rx_missing_file_is_an_error(tmp_path):
    assert main(["rx", "--band", "868", "--in", str(tmp_path / "none.iq"), "--out", str(tmp_path / "o")]) == 2


def test_rateplan_prints_factors(capsys):
    assert main(["rateplan", "--band", "868", "--sps", "16"]) == 0
    out = capsys.readouterr().out
    assert "interpolation  400" in out
    assert "decimation     200" in out
    assert "byte_modulus   1" in out


def test_rateplan_illegal_sps(caplog):
    assert main(["rateplan", "--band", "868", "--sps", "13"]) == 2
    assert "rateplan:" in caplog.text


def test_psd_writes_table(tmp_path, payload_file):
    iq, table = tmp_path / "tx.iq", tmp_path / "psd.csv"
    main(["tx", "--band", "868", "--payload", str(payload_file), "--out", str(iq)])
    assert main(["psd", "--in", str(iq), "--fft", "1024", "--csv", str(table)]) == 0
    with open(table, newline="") as fp:
        rows = list(csv.reader(fp))
    assert rows[0] == ["frequency_hz", "power_db"]
    assert len(rows) == 1025


def test_loopback_ber_csv(tmp_path):
    path = tmp_path / "ber.csv"
    argv = ["loopback-ber", "--band", "915", "--snr", "inf,-10", "--genie", "--bits", "2000", "--csv", str(path)]
    assert main(argv) == 0
    lines = path.read_text().splitlines()
    assert lines[0] == ",".join(CSV_HEADER)
    assert len(lines) == 3
    assert lines[2].startswith("inf,inf,0,")


def test_loopback_per_csv(tmp_path):
    path = tmp_path / "per.csv"
    argv = ["loopback-per", "--band", "868", "--snr", "inf", "--frames", "3", "--payload-size", "20", "--csv", str(path)]
    assert main(argv) == 0
    assert path.read_text().splitlines()[1] == "inf,inf,0,0,3,3,528"


def test_constellation_csv(tmp_path):
    path = tmp_path / "points.csv"
    assert main(["constellation", "--band", "868", "--snr", "10", "--bits", "200", "--csv", str(path)]) == 0
    lines = path.read_text().splitlines()
    assert lines[0] == "i,q"
    assert 2_400 < len(lines) - 1 < 2_700


def test_parser_rejects_bad_snr_list():
    with pytest.raises(SystemExit):
        build_parser().parse_args(["loopback-ber", "--band", "868", "--snr", "a,b", "--csv", "x"])
