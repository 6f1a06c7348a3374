"""Node oscillator models and 40-bit local timestamps.

Every clock maps global true time to a local tick count. Arithmetic is
done on exact rationals so that stamps are reproducible bit-for-bit;
floats passed in are converted exactly (``Fraction(float)``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import cached_property
from typing import Union

TIMESTAMP_BITS = 40
TIMESTAMP_MODULUS = 1 << TIMESTAMP_BITS

# DW1000-class counter: 128 x 499.2 MHz
DEFAULT_SECONDS_PER_TICK = 1.0 / (128 * 499.2e6)

MAX_NOMINAL_OFFSET_PPM = 100.0

Real = Union[float, int, Fraction]


def as_fraction(x: Real) -> Fraction:
    if isinstance(x, Fraction):
        return x
    return Fraction(x)


@dataclass(frozen=True)
class TickResolution:
    seconds_per_tick: float = DEFAULT_SECONDS_PER_TICK

    def __post_init__(self) -> None:
        if not self.seconds_per_tick > 0:
            raise ValueError(f"seconds_per_tick must be > 0, got {self.seconds_per_tick}")

    @cached_property
    def exact(self) -> Fraction:
        return Fraction(self.seconds_per_tick)

    @property
    def wrap_seconds(self) -> float:
        """True duration spanned by one full turn of the counter."""
        return TIMESTAMP_MODULUS * self.seconds_per_tick


DEFAULT_RESOLUTION = TickResolution()


@dataclass(frozen=True)
class Timestamp:
    """A local tick count in ``[0, 2**40)``, optionally tagged with its owner."""

    ticks: int
    owner: str = ""

    def __post_init__(self) -> None:
        if not 0 <= self.ticks < TIMESTAMP_MODULUS:
            raise ValueError(f"ticks out of 40-bit range: {self.ticks}")

    def seconds(self, resolution: TickResolution = DEFAULT_RESOLUTION) -> float:
        return self.ticks * resolution.seconds_per_tick


@dataclass(frozen=True)
class ClockModel:
    """Immutable snapshot of a node oscillator.

    ``effective_offset_ppm`` grows linearly with the time the node has
    spent listening, a stand-in for receiver self-heating pulling the
    quartz frequency.
    """

    nominal_frequency_offset_ppm: float = 0.0
    temperature_coeff_ppm_per_second_rx: float = 0.0
    accumulated_rx_time: Real = 0.0
    phase_origin: Real = 0.0
    owner: str = field(default="", compare=False)

    def __post_init__(self) -> None:
        if abs(self.nominal_frequency_offset_ppm) > MAX_NOMINAL_OFFSET_PPM:
            raise ValueError(
                f"|nominal offset| must be <= {MAX_NOMINAL_OFFSET_PPM} ppm, "
                f"got {self.nominal_frequency_offset_ppm}"
            )
        if self.accumulated_rx_time < 0:
            raise ValueError("accumulated_rx_time must be >= 0")

    @property
    def effective_offset_ppm(self) -> float:
        return float(self.exact_effective_offset_ppm)

    @property
    def exact_effective_offset_ppm(self) -> Fraction:
        return as_fraction(self.nominal_frequency_offset_ppm) + as_fraction(
            self.temperature_coeff_ppm_per_second_rx
        ) * as_fraction(self.accumulated_rx_time)

    @property
    def rate(self) -> Fraction:
        """Local seconds elapsed per true second."""
        return 1 + self.exact_effective_offset_ppm / 10**6


def local_timestamp(
    clock: ClockModel, true_time: Real, resolution: TickResolution = DEFAULT_RESOLUTION
) -> Timestamp:
    elapsed = as_fraction(true_time) - as_fraction(clock.phase_origin)
    if elapsed < 0:
        raise ValueError(
            f"true_time {float(true_time)!r} precedes clock phase origin {float(clock.phase_origin)!r}"
        )
    raw = math.floor(elapsed * clock.rate / resolution.exact)
    return Timestamp(raw % TIMESTAMP_MODULUS, clock.owner)


def tick_diff(later: Timestamp, earlier: Timestamp) -> int:
    """Elapsed ticks from ``earlier`` to ``later``, assuming less than one wrap."""
    return (later.ticks - earlier.ticks) % TIMESTAMP_MODULUS


def accumulate_rx(clock: ClockModel, rx_duration: Real, at: Real | None = None) -> ClockModel:
    """Return ``clock`` after ``rx_duration`` more seconds spent listening.

    Without ``at`` only the offset changes, so the post-change rate applies
    retroactively from ``phase_origin``. With ``at`` (a true-time instant)
    the phase origin is shifted so that the local reading at ``at`` is
    unchanged and the new rate applies from there on.
    """
    if rx_duration < 0:
        raise ValueError(f"rx_duration must be >= 0, got {rx_duration}")
    if rx_duration == 0:
        return clock
    updated = replace(
        clock,
        accumulated_rx_time=as_fraction(clock.accumulated_rx_time) + as_fraction(rx_duration),
    )
    if at is None or updated.rate == clock.rate:
        return updated
    at = as_fraction(at)
    local_at = (at - as_fraction(clock.phase_origin)) * clock.rate
    return replace(updated, phase_origin=at - local_at / updated.rate)
