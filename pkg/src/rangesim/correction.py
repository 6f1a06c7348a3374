"""ClockOffset readout and drift-corrected TWR.

Sign convention: ``ClockOffsetEstimate.ppm`` is the initiator's effective
offset minus the responder's (``ppm_A - ppm_B``). B's reply interval is
counted on B's clock, so rescaling ``t3 - t2`` by ``1 + ppm * 1e-6`` maps
it onto A's time base to first order and removes the drift bias. The
opposite sign would double the bias instead; a regression test pins this.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from rangesim.clock import DEFAULT_RESOLUTION, ClockModel, TickResolution, tick_diff
from rangesim.protocol import STAMP_NAMES, RangingExchange, required_stamps

MAX_OFFSET_PPM = 200.0
DEFAULT_OFFSET_NOISE_PPM = 0.05


@dataclass(frozen=True)
class ClockOffsetEstimate:
    ppm: float = 0.0
    noise_std_ppm: float = 0.0

    def __post_init__(self) -> None:
        if abs(self.ppm) > MAX_OFFSET_PPM:
            raise ValueError(f"|ClockOffset| must be <= {MAX_OFFSET_PPM} ppm, got {self.ppm}")
        if self.noise_std_ppm < 0:
            raise ValueError("noise_std_ppm must be >= 0")

    @property
    def k(self) -> float:
        return 1 + self.ppm * 1e-6


@dataclass(frozen=True)
class CalibrationBias:
    bias_m: float = 0.0

    def __post_init__(self) -> None:
        if not math.isfinite(self.bias_m):
            raise ValueError(f"bias must be finite, got {self.bias_m}")

    def apply(self, measured_m: float) -> float:
        return measured_m + self.bias_m


def true_relative_offset_ppm(clock_a: ClockModel, clock_b: ClockModel) -> float:
    """Ground truth behind the readout: ``ppm_A - ppm_B`` including heating."""
    return float(clock_a.exact_effective_offset_ppm - clock_b.exact_effective_offset_ppm)


def estimate_clock_offset(
    clock_a: ClockModel,
    clock_b: ClockModel,
    noise_std_ppm: float = DEFAULT_OFFSET_NOISE_PPM,
    rng: Optional[np.random.Generator] = None,
) -> ClockOffsetEstimate:
    """Simulated carrier-recovery readout: truth plus Gaussian noise.

    A draw is consumed only when ``noise_std_ppm > 0``.
    """
    if noise_std_ppm < 0:
        raise ValueError(f"noise_std_ppm must be >= 0, got {noise_std_ppm}")
    ppm = true_relative_offset_ppm(clock_a, clock_b)
    if noise_std_ppm > 0:
        if rng is None:
            raise ValueError("a noisy estimate needs an rng")
        ppm += rng.normal(0.0, noise_std_ppm)
    return ClockOffsetEstimate(ppm, noise_std_ppm)


def tof_twr_corrected(
    ex: RangingExchange,
    offset: ClockOffsetEstimate,
    resolution: TickResolution = DEFAULT_RESOLUTION,
) -> float:
    t1, t2, t3, t4 = required_stamps(ex, STAMP_NAMES[:4])
    round_trip = tick_diff(t4, t1)
    reply = tick_diff(t3, t2)
    # written so that ppm == 0 reproduces tof_twr bit for bit
    return (round_trip - reply - offset.ppm * 1e-6 * reply) * resolution.seconds_per_tick / 2


def calibrate_bias(samples: Iterable[tuple[float, float]]) -> CalibrationBias:
    """Constant correction from ``(measured_m, true_m)`` pairs."""
    pairs = list(samples)
    if not pairs:
        raise ValueError("calibration needs at least one (measured, true) sample")
    return CalibrationBias(math.fsum(t - m for m, t in pairs) / len(pairs))
