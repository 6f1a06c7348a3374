"""``rangesim`` command line: sweep, session, calibrate.

Exit codes: 0 success, 2 invalid spec, 3 calibration failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from typing import Optional, Sequence

from rangesim.channel import SPEED_OF_LIGHT, ChannelModel
from rangesim.clock import ClockModel
from rangesim.correction import DEFAULT_OFFSET_NOISE_PPM
from rangesim.harness import (
    CAMPAIGN_DELAYS_MS,
    CalibrationError,
    CellError,
    SpecError,
    SweepSpec,
    calibrate_jitter,
    jitter_from_meters,
    parse_distances,
    render_csv,
    run_sweep,
    write_csv,
)
from rangesim.protocol import Kind, ProtocolKind, ReplyDelayPolicy
from rangesim.simcore import (
    DEFAULT_PROCESSING_TIME,
    NodeSim,
    SessionAbortedError,
    SessionConfig,
    run_session,
    trial_seed,
)

EXIT_OK, EXIT_SPEC, EXIT_CALIBRATION, EXIT_IO = 0, 2, 3, 4

log = logging.getLogger("rangesim")


def _protocol(text: str) -> ProtocolKind:
    try:
        return ProtocolKind.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _float_list(text: str) -> list[float]:
    try:
        return [float(p) for p in text.split(",") if p.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad number list {text!r}") from exc


def _add_node_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--protocol", type=_protocol, default=ProtocolKind.twr(),
                   help="twr | sds-twr | sds-twr-ma:K (default twr)")
    p.add_argument("--drift-ppm-a", type=float, default=0.0)
    p.add_argument("--drift-ppm-b", type=float, default=0.0)
    p.add_argument("--temp-coeff", type=float, default=0.0,
                   help="responder heating, ppm per second spent listening")
    p.add_argument("--offset-noise-ppm", type=float, default=DEFAULT_OFFSET_NOISE_PPM)
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true")
    parser = argparse.ArgumentParser(prog="rangesim", description="UWB two-way ranging simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    sw = sub.add_parser("sweep", parents=[common], help="distance x delay campaign, written as CSV")
    _add_node_args(sw)
    sw.add_argument("--distances", default="0.5:5.5:0.5", help="start:stop:step or a,b,c (meters)")
    sw.add_argument("--delays-ms", type=_float_list, default=list(CAMPAIGN_DELAYS_MS))
    sw.add_argument("--trials", type=int, default=30)
    noise = sw.add_mutually_exclusive_group()
    noise.add_argument("--jitter-std-m", type=float, default=0.0,
                       help="per-timestamp jitter, as meters of light travel")
    noise.add_argument("--calibrate-std", type=float, metavar="STD_M",
                       help="calibrate jitter so TWR distance std hits this value first")
    sw.add_argument("--correction", choices=("on", "off", "both"), default="both")
    sw.add_argument("--bias-m", type=float, default=0.0)
    sw.add_argument("--spacing-ms", type=float, default=200.0)
    sw.add_argument("--out", help="CSV path (stdout if omitted)")
    sw.add_argument("--locale-decimal-comma", action="store_true",
                    help="comma decimals, ';' separator")

    se = sub.add_parser("session", parents=[common], help="run one session and print its timestamp trace")
    _add_node_args(se)
    se.add_argument("--distance", type=float, default=2.0)
    se.add_argument("--delay-ms", type=float, default=None, help="reply delay on B")
    se.add_argument("--delay-a-ms", type=float, default=None, help="reply delay on A (SDS variants)")
    se.add_argument("--jitter-std-m", type=float, default=0.0)
    se.add_argument("--correction", choices=("on", "off"), default="off")

    ca = sub.add_parser("calibrate", parents=[common], help="find the jitter giving a target distance std")
    ca.add_argument("--target-std-m", type=float, default=0.02)
    ca.add_argument("--protocol", type=_protocol, default=ProtocolKind.twr())
    ca.add_argument("--trials", type=int, default=1000)
    ca.add_argument("--seed", type=int, default=0)
    ca.add_argument("--max-jitter-m", type=float, default=0.3,
                    help="upper search bound, meters of light travel")
    return parser


def _ms(x: Optional[float]) -> Optional[float]:
    return None if x is None else x * 1e-3


def cmd_sweep(args: argparse.Namespace) -> int:
    jitter = jitter_from_meters(args.jitter_std_m)
    if args.calibrate_std is not None:
        jitter = calibrate_jitter(args.calibrate_std, seed=args.seed)
        log.info("calibrated jitter: %.4g s (%.4g m)", jitter, jitter * SPEED_OF_LIGHT)
    spec = SweepSpec(
        distances_m=parse_distances(args.distances),
        delays=[d * 1e-3 for d in args.delays_ms],
        trials_per_cell=args.trials,
        protocol=args.protocol,
        correction=args.correction,
        drift_ppm_a=args.drift_ppm_a,
        drift_ppm_b=args.drift_ppm_b,
        jitter_std=jitter,
        offset_noise_ppm=args.offset_noise_ppm,
        bias_m=args.bias_m,
        seed=args.seed,
        temp_coeff_b=args.temp_coeff,
        spacing=args.spacing_ms * 1e-3,
    )
    t0 = time.perf_counter()
    table = run_sweep(spec)
    log.info("%d cells in %.2f s", len(table), time.perf_counter() - t0)
    if args.out:
        write_csv(table, args.out, decimal_comma=args.locale_decimal_comma)
    else:
        sys.stdout.write(render_csv(table, decimal_comma=args.locale_decimal_comma))
    return EXIT_OK


def cmd_session(args: argparse.Namespace) -> int:
    kind: ProtocolKind = args.protocol
    delay_b = _ms(args.delay_ms)
    delay_a = _ms(args.delay_a_ms)
    if kind.kind is not Kind.TWR and delay_a is None:
        delay_a = delay_b
    cfg = SessionConfig(
        protocol=kind,
        channel=ChannelModel(args.distance, timestamp_jitter_std=jitter_from_meters(args.jitter_std_m),
                             rng_seed=trial_seed(args.seed, 0)),
        delays=ReplyDelayPolicy(delay_b, delay_a),
        offset_noise_ppm=args.offset_noise_ppm,
        processing_time=DEFAULT_PROCESSING_TIME,
    )
    a = NodeSim.initiator(ClockModel(args.drift_ppm_a))
    b = NodeSim.responder(ClockModel(args.drift_ppm_b, args.temp_coeff))
    r = run_session(a, b, cfg, correction=args.correction == "on")
    res = cfg.resolution.seconds_per_tick
    print(f"protocol {kind}  distance {args.distance} m  true ToF {r.true_tof:.6e} s")
    print(f"{'stamp':>9} {'node':>4} {'dir':>3} {'ticks':>14} {'local_s':>16} {'true_s':>18}")
    for i, ev in enumerate(sorted(r.trace, key=lambda e: (e.frame, e.direction != "tx"))):
        name = f"t{i + 1}" if kind.kind is not Kind.SDS_TWR_MA else f"s{i}"
        print(f"{name:>9} {ev.owner:>4} {ev.direction:>3} {ev.stamp.ticks:>14d} "
              f"{ev.stamp.ticks * res:>16.12f} {float(ev.true_time):>18.12f}")
    print(f"ClockOffset {r.offsets_used.ppm:+.6f} ppm")
    print(f"raw ToF {r.raw_tof:.6e} s  -> {r.raw_distance:.4f} m (error {r.raw_distance - args.distance:+.4f} m)")
    if r.corrected_tof is not None:
        print(f"corrected ToF {r.corrected_tof:.6e} s  -> {r.corrected_distance:.4f} m "
              f"(error {r.corrected_distance - args.distance:+.4f} m)")
    return EXIT_OK


def cmd_calibrate(args: argparse.Namespace) -> int:
    sigma = calibrate_jitter(
        args.target_std_m, args.protocol,
        search_bounds=(0.0, jitter_from_meters(args.max_jitter_m)),
        trials=args.trials, seed=args.seed,
    )
    print(f"jitter_std_s {sigma:.6e}")
    print(f"jitter_std_m {sigma * SPEED_OF_LIGHT:.6g}")
    return EXIT_OK


COMMANDS = {"sweep": cmd_sweep, "session": cmd_session, "calibrate": cmd_calibrate}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except CalibrationError as exc:
        print(f"rangesim: calibration failed: {exc}", file=sys.stderr)
        return EXIT_CALIBRATION
    except OSError as exc:
        print(f"rangesim: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (SpecError, CellError, SessionAbortedError, ValueError) as exc:
        print(f"rangesim: invalid spec: {exc}", file=sys.stderr)
        return EXIT_SPEC


if __name__ == "__main__":
    sys.exit(main())
