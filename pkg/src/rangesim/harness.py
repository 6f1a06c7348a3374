"""Measurement campaigns: distance/delay sweeps, statistics, CSV output."""

from __future__ import annotations

import csv
import io
import math
import os
import statistics
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from rangesim.channel import SPEED_OF_LIGHT, ChannelModel
from rangesim.correction import DEFAULT_OFFSET_NOISE_PPM
from rangesim.protocol import Kind, ProtocolKind, ReplyDelayPolicy
from rangesim.simcore import (
    DEFAULT_PROCESSING_TIME,
    DEFAULT_SESSION_SPACING,
    SessionAbortedError,
    SessionConfig,
    default_nodes,
    run_batch,
)

# campaign constants of the delay experiment
CAMPAIGN_DELAYS_MS = (1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 16, 21)
CAMPAIGN_DISTANCES_M = tuple(0.5 * i for i in range(1, 12))
CAMPAIGN_TRIALS = 30

CSV_HEADER = (
    "distance_m", "delay_s", "correction", "protocol", "trials",
    "mean_measured_m", "avg_error_m", "max_error_m", "min_error_m", "std_dev_m", "seed",
)
CORRECTION_MODES = ("off", "on", "both")


class SpecError(ValueError):
    pass


class CalibrationError(RuntimeError):
    pass


class CellError(RuntimeError):
    pass


@dataclass(frozen=True)
class RangingStats:
    actual_distance_m: float
    mean_measured_m: float
    average_error_m: float
    max_error_m: float
    min_error_m: float
    std_dev_m: float


def summarize(samples: Sequence[float], actual: float) -> RangingStats:
    """Signed-error statistics of a batch; std uses the n-1 denominator."""
    if len(samples) == 0:
        raise ValueError("cannot summarize an empty sample")
    errors = [m - actual for m in samples]
    std = statistics.stdev(errors) if len(errors) > 1 else 0.0
    return RangingStats(
        actual_distance_m=actual,
        mean_measured_m=math.fsum(samples) / len(samples),
        average_error_m=math.fsum(errors) / len(errors),
        max_error_m=max(errors),
        min_error_m=min(errors),
        std_dev_m=std,
    )


@dataclass
class SweepSpec:
    distances_m: Sequence[float] = CAMPAIGN_DISTANCES_M
    delays: Sequence[float] = tuple(d * 1e-3 for d in CAMPAIGN_DELAYS_MS)
    trials_per_cell: int = CAMPAIGN_TRIALS
    protocol: ProtocolKind = field(default_factory=ProtocolKind.twr)
    correction: str = "both"
    drift_ppm_a: float = 0.0
    drift_ppm_b: float = 0.0
    jitter_std: float = 0.0
    offset_noise_ppm: float = DEFAULT_OFFSET_NOISE_PPM
    bias_m: float = 0.0
    seed: int = 0
    temp_coeff_b: float = 0.0
    spacing: float = DEFAULT_SESSION_SPACING
    processing_time: float = DEFAULT_PROCESSING_TIME

    def validate(self) -> None:
        if not self.distances_m:
            raise SpecError("need at least one distance")
        if not self.delays:
            raise SpecError("need at least one delay")
        if self.trials_per_cell < 1:
            raise SpecError("trials_per_cell must be >= 1")
        if self.correction not in CORRECTION_MODES:
            raise SpecError(f"correction must be one of {CORRECTION_MODES}")
        if self.correction != "off" and self.protocol.kind is not Kind.TWR:
            raise SpecError(f"correction applies to twr only; use --correction off with {self.protocol}")
        if any(d < 0 for d in self.distances_m):
            raise SpecError("distances must be >= 0")
        if any(t < self.processing_time for t in self.delays):
            raise SpecError(f"every delay must be >= processing time ({self.processing_time} s)")
        if self.jitter_std < 0 or self.offset_noise_ppm < 0:
            raise SpecError("noise levels must be >= 0")

    @property
    def modes(self) -> tuple[str, ...]:
        return ("off", "on") if self.correction == "both" else (self.correction,)


CellKey = tuple[float, float, str]


@dataclass
class SweepTable:
    protocol: str
    trials: int
    seed: int
    cells: dict[CellKey, RangingStats] = field(default_factory=dict)

    def sorted_items(self) -> list[tuple[CellKey, RangingStats]]:
        return sorted(self.cells.items(), key=lambda kv: kv[0])

    def __len__(self) -> int:
        return len(self.cells)


def _session_config(spec: SweepSpec, distance: float, delay: float) -> SessionConfig:
    symmetric = spec.protocol.kind is not Kind.TWR
    return SessionConfig(
        protocol=spec.protocol,
        channel=ChannelModel(distance, timestamp_jitter_std=spec.jitter_std),
        delays=ReplyDelayPolicy(delay_b=delay, delay_a=delay if symmetric else None),
        processing_time=spec.processing_time,
        offset_noise_ppm=spec.offset_noise_ppm,
    )


def run_cell(spec: SweepSpec, di: int, ki: int) -> dict[str, list[float]]:
    """Measured distances (bias applied) for one cell, per correction mode."""
    distance, delay = spec.distances_m[di], spec.delays[ki]
    a, b = default_nodes(spec.drift_ppm_a, spec.drift_ppm_b, temp_coeff_b=spec.temp_coeff_b)
    cfg = _session_config(spec, distance, delay)
    results = run_batch(
        a, b, cfg, spec.trials_per_cell,
        correction="on" in spec.modes, seed=(spec.seed, di, ki), spacing=spec.spacing,
    )
    out = {}
    for mode in spec.modes:
        if mode == "on":
            out[mode] = [r.corrected_distance + spec.bias_m for r in results]
        else:
            out[mode] = [r.raw_distance + spec.bias_m for r in results]
    return out


def run_sweep(spec: SweepSpec) -> SweepTable:
    """One stats row per (distance, delay, correction) cell.

    Trial ``t`` of cell ``(i, j)`` draws from a stream seeded by
    ``(seed, i, j, t)``, so any cell can be recomputed in isolation and
    the result never depends on evaluation order.
    """
    spec.validate()
    table = SweepTable(spec.protocol.label, spec.trials_per_cell, spec.seed)
    for di, distance in enumerate(spec.distances_m):
        for ki, delay in enumerate(spec.delays):
            try:
                measured = run_cell(spec, di, ki)
            except (SessionAbortedError, ValueError) as exc:
                raise CellError(f"cell distance={distance} m, delay={delay} s: {exc}") from exc
            for mode, samples in measured.items():
                table.cells[(distance, delay, mode)] = summarize(samples, distance)
    return table


def simulated_std(
    jitter_std: float,
    protocol: ProtocolKind = ProtocolKind.twr(),
    trials: int = 1000,
    seed: int = 0,
    distance_m: float = 2.0,
) -> float:
    """Sample std of measured distance, zero drift, default turnaround."""
    a, b = default_nodes()
    cfg = SessionConfig(
        protocol=protocol,
        channel=ChannelModel(distance_m, timestamp_jitter_std=jitter_std),
        delays=ReplyDelayPolicy(),
    )
    results = run_batch(a, b, cfg, trials, seed=seed)
    return statistics.stdev(r.raw_distance for r in results)


def calibrate_jitter(
    target_std_m: float,
    protocol: ProtocolKind = ProtocolKind.twr(),
    search_bounds: tuple[float, float] = (0.0, 1e-9),
    trials: int = 1000,
    seed: int = 0,
    rel_tol: float = 0.05,
    max_iter: int = 60,
) -> float:
    """Per-timestamp jitter std (seconds) giving ``target_std_m`` distance std.

    Bisection on a common-random-numbers objective (fixed seed), so the
    simulated std is monotone in the jitter level. Stops once within 0.5%
    of target; fails if the bracket cannot reach ``rel_tol``.
    """
    if target_std_m < 0:
        raise ValueError("target std must be >= 0")
    if target_std_m == 0:
        return 0.0
    if trials < 1000:
        raise ValueError("calibration needs >= 1000 trials")
    lo, hi = search_bounds
    if not 0 <= lo < hi:
        raise ValueError(f"bad search bounds {search_bounds}")

    def f(sigma: float) -> float:
        return simulated_std(sigma, protocol, trials, seed)

    f_lo, f_hi = f(lo), f(hi)
    if f_lo > target_std_m * (1 + rel_tol):
        raise CalibrationError(
            f"target {target_std_m} m is below the noise floor {f_lo:.4g} m at jitter {lo} s"
        )
    if abs(f_lo - target_std_m) <= rel_tol * target_std_m:
        return lo
    if f_hi < target_std_m * (1 - rel_tol):
        raise CalibrationError(f"target {target_std_m} m unreachable: {f_hi:.4g} m at jitter {hi} s")
    best, best_err = hi, abs(f_hi - target_std_m)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        f_mid = f(mid)
        err = abs(f_mid - target_std_m)
        if err < best_err:
            best, best_err = mid, err
        if err <= 0.005 * target_std_m:
            break
        if f_mid < target_std_m:
            lo = mid
        else:
            hi = mid
    if best_err > rel_tol * target_std_m:
        raise CalibrationError(f"bisection did not converge (best {best_err:.3g} m off)")
    return best


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def table_rows(table: SweepTable) -> list[list[str]]:
    rows = []
    for (distance, delay, mode), st in table.sorted_items():
        rows.append([
            _fmt(distance), _fmt(delay), mode, table.protocol, str(table.trials),
            _fmt(st.mean_measured_m), _fmt(st.average_error_m), _fmt(st.max_error_m),
            _fmt(st.min_error_m), _fmt(st.std_dev_m), str(table.seed),
        ])
    return rows


def render_csv(table: SweepTable, decimal_comma: bool = False) -> str:
    """CSV text; ``decimal_comma`` switches to ``;``-separated, comma decimals."""
    buf = io.StringIO()
    writer = csv.writer(buf, delimiter=";" if decimal_comma else ",", lineterminator="\n")
    writer.writerow(CSV_HEADER)
    numeric = {i for i, h in enumerate(CSV_HEADER) if h not in ("correction", "protocol")}
    for row in table_rows(table):
        if decimal_comma:
            row = [v.replace(".", ",") if i in numeric else v for i, v in enumerate(row)]
        writer.writerow(row)
    return buf.getvalue()


def write_csv(table: SweepTable, path: str | os.PathLike, decimal_comma: bool = False) -> None:
    text = render_csv(table, decimal_comma)
    try:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write {os.fspath(path)}: {exc.strerror}") from exc


def parse_csv(text: str) -> SweepTable:
    """Inverse of ``render_csv`` (either decimal convention)."""
    first = text.split("\n", 1)[0]
    decimal_comma = ";" in first
    reader = csv.reader(io.StringIO(text), delimiter=";" if decimal_comma else ",")
    header = next(reader)
    if tuple(header) != CSV_HEADER:
        raise ValueError(f"unexpected header {header}")

    def num(v: str) -> float:
        return float(v.replace(",", ".")) if decimal_comma else float(v)

    table: Optional[SweepTable] = None
    cells = {}
    for row in reader:
        if not row:
            continue
        rec = dict(zip(CSV_HEADER, row))
        if table is None:
            table = SweepTable(rec["protocol"], int(rec["trials"]), int(rec["seed"]))
        d, t = num(rec["distance_m"]), num(rec["delay_s"])
        cells[(d, t, rec["correction"])] = RangingStats(
            actual_distance_m=d,
            mean_measured_m=num(rec["mean_measured_m"]),
            average_error_m=num(rec["avg_error_m"]),
            max_error_m=num(rec["max_error_m"]),
            min_error_m=num(rec["min_error_m"]),
            std_dev_m=num(rec["std_dev_m"]),
        )
    if table is None:
        table = SweepTable("", 0, 0)
    table.cells = cells
    return table


def read_csv(path: str | os.PathLike) -> SweepTable:
    with open(path, newline="") as fh:
        return parse_csv(fh.read())


def parse_distances(text: str) -> list[float]:
    """``start:stop:step`` (stop inclusive) or a comma-separated list."""
    text = text.strip()
    if ":" in text:
        try:
            start, stop, step = (float(p) for p in text.split(":"))
        except ValueError as exc:
            raise SpecError(f"bad range {text!r}, expected start:stop:step") from exc
        if step <= 0 or stop < start:
            raise SpecError(f"bad range {text!r}")
        n = int(round((stop - start) / step)) + 1
        return [round(start + i * step, 12) for i in range(n)]
    try:
        return [float(p) for p in text.split(",") if p.strip()]
    except ValueError as exc:
        raise SpecError(f"bad distance list {text!r}") from exc


def jitter_from_meters(std_m: float) -> float:
    return std_m / SPEED_OF_LIGHT


def slope(xs: Iterable[float], ys: Iterable[float]) -> float:
    """Least-squares slope of ys on xs."""
    return statistics.linear_regression(list(xs), list(ys)).slope
