"""Line-of-sight propagation and per-timestamp measurement noise."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Sequence, Union

import numpy as np

from rangesim.clock import Real

SPEED_OF_LIGHT = 299_792_458.0

SeedLike = Union[int, Sequence[int]]


@dataclass
class ChannelModel:
    """A single LOS link.

    The channel owns its random stream: every call to ``jittered_instant``
    advances it, so identical seeds and identical call sequences give
    identical draws. ``rng_seed`` may be an int or a tuple of ints (used as
    ``SeedSequence`` entropy, which is how batches derive substreams).
    """

    distance_m: float
    propagation_speed: float = SPEED_OF_LIGHT
    timestamp_jitter_std: float = 0.0
    rng_seed: SeedLike = 0
    rng: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.distance_m < 0:
            raise ValueError(f"distance_m must be >= 0, got {self.distance_m}")
        if not self.propagation_speed > 0:
            raise ValueError(f"propagation_speed must be > 0, got {self.propagation_speed}")
        if self.timestamp_jitter_std < 0:
            raise ValueError(f"timestamp_jitter_std must be >= 0, got {self.timestamp_jitter_std}")
        self.rng = np.random.default_rng(np.random.SeedSequence(_entropy(self.rng_seed)))

    def reseeded(self, seed: SeedLike) -> ChannelModel:
        """Fresh copy of this link with its own stream."""
        return replace(self, rng_seed=seed)

    def with_distance(self, distance_m: float) -> ChannelModel:
        return replace(self, distance_m=distance_m)


def _entropy(seed: SeedLike) -> int | tuple[int, ...]:
    # SeedSequence ignores trailing zero words, so (s, 0) would alias s;
    # tagging tuples with their length keeps every key distinct
    if isinstance(seed, (int, np.integer)):
        return int(seed)
    key = tuple(int(x) for x in seed)
    return (len(key), *key)


def propagation_delay(ch: ChannelModel) -> float:
    return ch.distance_m / ch.propagation_speed


def jittered_instant(ch: ChannelModel, true_instant: Real) -> Real:
    """``true_instant`` plus one Gaussian draw from the channel's stream.

    Exact ``Fraction`` inputs stay exact; with zero jitter the input is
    returned untouched and no draw is consumed.
    """
    if ch.timestamp_jitter_std == 0:
        return true_instant
    noise = ch.rng.normal(0.0, ch.timestamp_jitter_std)
    if isinstance(true_instant, Fraction):
        return true_instant + Fraction(noise)
    return true_instant + noise


def tof_to_distance(tof: Real, ch: ChannelModel) -> float:
    return float(tof) * ch.propagation_speed


def meters_to_seconds(meters: float, speed: float = SPEED_OF_LIGHT) -> float:
    return meters / speed
