"""
Command line for the modem and its experiments.

    python -m phy868 tx --band 868 --payload msg.bin --out tx.iq
    python -m phy868 rx --band 868 --in tx.iq --out msg.out
    python -m phy868 loopback-ber --band 868 --snr -12,-10,-8 --seed 1 --csv ber.csv
    python -m phy868 loopback-per --band 915 --snr -10,-6 --frames 100 --seed 1 --csv per.csv
    python -m phy868 rateplan --band 868 --sps 16
    python -m phy868 psd --in tx.iq --sample-rate 2.4e6 --fft 1024 --csv psd.csv
    python -m phy868 constellation --band 868 --snr 0 --csv points.csv

SNR values are at the channel output over the simulated bandwidth;
Eb/N0 = SNR + 10 log10(sample_rate / bit_rate), both are written to CSV.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from typing import List, Optional

import numpy as np

from ..errors import PhyError
from ..framing import MAX_PAYLOAD, parse_frame
from ..modem import ModemConfig, Receiver, Transmitter, decode_soft_chips, genie_receive
from ..rateplan import Band, channel_center_hz, plan
from .experiments import ExperimentConfig, capture_constellation, run_ber_experiment, run_per_experiment
from .iqfile import iq_read, iq_write
from .metrics import occupied_band, psd

logger = logging.getLogger(__name__)

CHUNK = 1 << 16


def _snr_list(text: str) -> List[float]:
    try:
        return [float(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}")


def _modem(args) -> ModemConfig:
    return ModemConfig(band=Band.parse(args.band), sps=args.sps, if_hz=args.if_hz)


def cmd_tx(args) -> int:
    modem = _modem(args)
    with open(args.payload, "rb") as fp:
        payload = fp.read()
    wave = Transmitter(modem).transmit(payload)
    iq_write(wave, args.out)
    logger.info(f"tx: {len(payload)} octets -> {len(wave)} samples at {modem.sample_rate:.0f} S/s")
    return 0


def cmd_rx(args) -> int:
    modem = _modem(args)
    samples = iq_read(args.input, modem.sample_rate)
    payloads = []
    if args.genie:
        soft = genie_receive(samples, modem)
        frame = parse_frame(decode_soft_chips(soft.samples))
        payloads.append(frame.payload)
    else:
        receiver = Receiver(modem)
        for start in range(0, len(samples), CHUNK):
            for event in receiver.process(samples.with_samples(samples.samples[start:start + CHUNK])):
                if event.crc_ok:
                    payloads.append(event.payload)
                else:
                    logger.warning(f"rx: dropped a {len(event.psdu)} octet frame with bad FCS")
    with open(args.out, "wb") as fp:
        fp.write(b"".join(payloads))
    logger.info(f"rx: {len(payloads)} frames, {sum(map(len, payloads))} octets")
    return 0


def _experiment(args, **extra) -> ExperimentConfig:
    return ExperimentConfig(
        band=Band.parse(args.band),
        sps=args.sps,
        snr_points=tuple(args.snr),
        seed=args.seed,
        workers=args.workers,
        **extra,
    )


def _log_channel(band: Band):
    channel = 0 if band is Band.BAND_868 else 6
    logger.info(f"band {band.value}: channel {channel} at {channel_center_hz(band, channel) / 1e6:.1f} MHz, "
                f"{band.bit_rate} bit/s, {band.chip_rate} chip/s")


def cmd_loopback_ber(args) -> int:
    config = _experiment(args, genie_sync=args.genie, bits_per_point=args.bits)
    _log_channel(config.band)
    run_ber_experiment(config, csv_path=args.csv)
    return 0


def cmd_loopback_per(args) -> int:
    config = _experiment(args, frames_per_point=args.frames, payload_size=args.payload_size)
    _log_channel(config.band)
    run_per_experiment(config, csv_path=args.csv)
    return 0


def cmd_rateplan(args) -> int:
    rates = plan(Band.parse(args.band), args.sps, args.sps_chip)
    width = max(len(name) for name, _ in rates.rows())
    for name, value in rates.rows():
        print(f"{name:<{width}}  {value}")
    return 0


def cmd_psd(args) -> int:
    samples = iq_read(args.input, args.sample_rate)
    table = psd(samples, args.fft)
    with open(args.csv, "w", newline="") as fp:
        writer = csv.writer(fp, lineterminator="\n")
        writer.writerow(("frequency_hz", "power_db"))
        writer.writerows((f"{f:.6f}", f"{p:.4f}") for f, p in zip(table.frequency, table.power_db))
    band = occupied_band(table)
    logger.info(f"psd: -20 dB band {band.low:.0f}..{band.high:.0f} Hz, centre {band.center:.0f} Hz")
    return 0


def cmd_constellation(args) -> int:
    config = ExperimentConfig(band=Band.parse(args.band), sps=args.sps, seed=args.seed)
    points = capture_constellation(config, args.snr, n_bits=args.bits)
    with open(args.csv, "w", newline="") as fp:
        writer = csv.writer(fp, lineterminator="\n")
        writer.writerow(("i", "q"))
        writer.writerows((f"{p.real:.6f}", f"{p.imag:.6f}") for p in np.asarray(points))
    logger.info(f"constellation: {len(points)} points at {args.snr} dB")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="phy868", description="IEEE 802.15.4 868/915 MHz BPSK software modem")
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    sub = parser.add_subparsers(dest="command", required=True)

    def band_args(p, sps=8):
        p.add_argument("--band", choices=["868", "915"], required=True)
        p.add_argument("--sps", type=int, default=sps, help="samples per chip")

    p = sub.add_parser("tx", help="modulate one payload into an I/Q file")
    band_args(p)
    p.add_argument("--payload", required=True, help=f"payload file, at most {MAX_PAYLOAD} octets")
    p.add_argument("--out", required=True)
    p.add_argument("--if-hz", type=float, default=0.0)
    p.set_defaults(func=cmd_tx)

    p = sub.add_parser("rx", help="demodulate an I/Q file, write CRC-valid payloads")
    band_args(p)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--if-hz", type=float, default=0.0)
    p.add_argument("--genie", action="store_true", help="single burst at sample 0, ideal timing")
    p.set_defaults(func=cmd_rx)

    for name, func in (("loopback-ber", cmd_loopback_ber), ("loopback-per", cmd_loopback_per)):
        p = sub.add_parser(name)
        band_args(p)
        p.add_argument("--snr", type=_snr_list, required=True, help="comma-separated SNR points in dB")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--csv", required=True)
        p.add_argument("--workers", type=int, default=1)
        p.set_defaults(func=func)
        if name == "loopback-ber":
            p.add_argument("--genie", action="store_true")
            p.add_argument("--bits", type=int, default=100_000, help="bits per point")
        else:
            p.add_argument("--frames", type=int, default=100)
            p.add_argument("--payload-size", type=int, default=122)

    p = sub.add_parser("rateplan", help="print converter factors and Byte_Modulus")
    p.add_argument("--band", choices=["868", "915"], required=True)
    p.add_argument("--sps", type=int, required=True, help="samples per bit")
    p.add_argument("--sps-chip", type=int, default=8)
    p.set_defaults(func=cmd_rateplan)

    p = sub.add_parser("psd", help="Welch power spectrum of an I/Q file")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--fft", type=int, default=1024)
    p.add_argument("--sample-rate", type=float, default=2.4e6)
    p.add_argument("--csv", required=True)
    p.set_defaults(func=cmd_psd)

    p = sub.add_parser("constellation", help="soft chips after carrier and timing recovery")
    band_args(p)
    p.add_argument("--snr", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--bits", type=int, default=2_000)
    p.add_argument("--csv", required=True)
    p.set_defaults(func=cmd_constellation)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except PhyError as e:
        logger.error(f"{e.stage}: {e}")
        return 2
    except OSError as e:
        logger.error(f"io: {e}")
        return 2


if __name__ == "__main__":
    sys.exit(main())
