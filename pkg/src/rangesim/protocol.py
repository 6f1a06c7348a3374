"""Timestamp algebra for TWR, SDS-TWR and SDS-TWR-MA.

Node A is the initiator and node B the responder. In a six-stamp exchange
A owns t1, t4, t5 and B owns t2, t3, t6:

    A --START-->  B      t1 (A tx)  t2 (B rx)
    A <--ACK----  B      t4 (A rx)  t3 (B tx)
    A --FINAL-->  B      t5 (A tx)  t6 (B rx)

TWR uses only t1..t4. The multi-acknowledgement variant continues the
ping-pong: a START followed by ``2k`` alternating acknowledgements gives
``2k + 1`` timed frames. Round ``j`` reads frames ``2j, 2j+1, 2j+2`` as
the (t1,t2), (t3,t4), (t5,t6) pairs of a six-stamp exchange, so adjacent
rounds share a frame and the chain yields ``k`` estimates.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from typing import Optional, Sequence

from rangesim.clock import (
    DEFAULT_RESOLUTION,
    TIMESTAMP_MODULUS,
    TickResolution,
    Timestamp,
    tick_diff,
)

INITIATOR = "A"
RESPONDER = "B"

STAMP_NAMES = ("t1", "t2", "t3", "t4", "t5", "t6")
STAMP_OWNERS = {"t1": INITIATOR, "t2": RESPONDER, "t3": RESPONDER,
                "t4": INITIATOR, "t5": INITIATOR, "t6": RESPONDER}


class ExchangeError(ValueError):
    """An exchange violates a structural invariant; ``reason`` names it."""

    def __init__(self, reason: str, detail: str = "") -> None:
        self.reason = reason
        super().__init__(f"{reason}: {detail}" if detail else reason)


class ProtocolIncompleteError(ExchangeError):
    pass


class Kind(enum.Enum):
    TWR = "twr"
    SDS_TWR = "sds-twr"
    SDS_TWR_MA = "sds-twr-ma"


@dataclass(frozen=True)
class ProtocolKind:
    kind: Kind
    k: int = 1

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.kind is not Kind.SDS_TWR_MA and self.k != 1:
            raise ValueError(f"{self.kind.value} takes no round count")

    @classmethod
    def twr(cls) -> ProtocolKind:
        return cls(Kind.TWR)

    @classmethod
    def sds_twr(cls) -> ProtocolKind:
        return cls(Kind.SDS_TWR)

    @classmethod
    def sds_twr_ma(cls, k: int) -> ProtocolKind:
        return cls(Kind.SDS_TWR_MA, k)

    @classmethod
    def parse(cls, text: str) -> ProtocolKind:
        """Parse ``twr``, ``sds-twr`` or ``sds-twr-ma:K``."""
        text = text.strip().lower()
        m = re.fullmatch(r"sds-twr-ma:(\d+)", text)
        if m:
            return cls.sds_twr_ma(int(m.group(1)))
        if text == "twr":
            return cls.twr()
        if text == "sds-twr":
            return cls.sds_twr()
        raise ValueError(f"unknown protocol {text!r}")

    @property
    def label(self) -> str:
        if self.kind is Kind.SDS_TWR_MA:
            return f"sds-twr-ma:{self.k}"
        return self.kind.value

    @property
    def frame_count(self) -> int:
        """Timed frames in one session (the MA report frame carries no stamps)."""
        return {Kind.TWR: 2, Kind.SDS_TWR: 3}.get(self.kind, 2 * self.k + 1)

    def __str__(self) -> str:
        return self.label


@dataclass(frozen=True)
class ReplyDelayPolicy:
    delay_b: Optional[float] = None
    delay_a: Optional[float] = None

    def __post_init__(self) -> None:
        for name in ("delay_b", "delay_a"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise ValueError(f"{name} must be >= 0, got {v}")

    def check_wrap(self, resolution: TickResolution = DEFAULT_RESOLUTION) -> None:
        for name in ("delay_b", "delay_a"):
            v = getattr(self, name)
            if v is not None and v >= resolution.wrap_seconds:
                raise ValueError(f"{name}={v} s exceeds the counter wrap ({resolution.wrap_seconds:.3f} s)")


@dataclass(frozen=True)
class RangingExchange:
    t1: Optional[Timestamp] = None
    t2: Optional[Timestamp] = None
    t3: Optional[Timestamp] = None
    t4: Optional[Timestamp] = None
    t5: Optional[Timestamp] = None
    t6: Optional[Timestamp] = None
    ma_timestamps: tuple[Timestamp, ...] = ()

    @property
    def used_count(self) -> int:
        return sum(getattr(self, n) is not None for n in STAMP_NAMES)

    @classmethod
    def from_chain(cls, chain: Sequence[Timestamp]) -> RangingExchange:
        """Build an MA exchange; the first round also fills t1..t6."""
        chain = tuple(chain)
        head = dict(zip(STAMP_NAMES, chain[:6]))
        return cls(**head, ma_timestamps=chain)

    @classmethod
    def from_ticks(cls, **ticks: int) -> RangingExchange:
        """Convenience constructor: ``from_ticks(t1=0, t2=10, ...)``."""
        return cls(**{n: Timestamp(v % TIMESTAMP_MODULUS, STAMP_OWNERS[n]) for n, v in ticks.items()})


def required_stamps(ex: RangingExchange, names: Sequence[str]) -> list[Timestamp]:
    stamps = []
    for n in names:
        ts = getattr(ex, n)
        if ts is None:
            raise ProtocolIncompleteError(f"missing {n}")
        stamps.append(ts)
    return stamps


def _round_windows(chain: Sequence[Timestamp]) -> list[tuple[Timestamp, ...]]:
    """Split an MA chain into k six-stamp windows sharing boundary frames."""
    if len(chain) < 6 or len(chain) % 4 != 2:
        raise ProtocolIncompleteError(
            "missing rounds", f"chain of {len(chain)} stamps is not 4k+2 with k >= 1"
        )
    k = (len(chain) - 2) // 4
    return [tuple(chain[4 * j: 4 * j + 6]) for j in range(k)]


def _owner_sequences(ex: RangingExchange, kind: ProtocolKind) -> dict[str, list[tuple[str, Timestamp]]]:
    if kind.kind is Kind.SDS_TWR_MA:
        chain = ex.ma_timestamps
        seqs: dict[str, list[tuple[str, Timestamp]]] = {INITIATOR: [], RESPONDER: []}
        for i, ts in enumerate(chain):
            frame, is_rx = divmod(i, 2)
            a_sends = frame % 2 == 0
            owner = RESPONDER if a_sends == bool(is_rx) else INITIATOR
            seqs[owner].append((f"stamp[{i}]", ts))
        return seqs
    names = STAMP_NAMES[:4] if kind.kind is Kind.TWR else STAMP_NAMES
    order = {INITIATOR: [], RESPONDER: []}
    for n in names:
        order[STAMP_OWNERS[n]].append((n, getattr(ex, n)))
    return order


def validate_exchange(ex: RangingExchange, kind: ProtocolKind) -> None:
    """Raise ``ExchangeError`` naming the first violated invariant.

    Checks, in order: presence of every stamp the protocol needs,
    ownership tags (only where stamps carry one), then per-owner ordering.
    A step backwards is detected as a forward modular step of more than
    half the counter range.
    """
    if kind.kind is Kind.SDS_TWR_MA:
        windows = _round_windows(ex.ma_timestamps)
        if len(windows) != kind.k:
            raise ProtocolIncompleteError(
                "missing rounds", f"chain yields {len(windows)} rounds, protocol needs {kind.k}"
            )
    else:
        required_stamps(ex, STAMP_NAMES[:4] if kind.kind is Kind.TWR else STAMP_NAMES)

    seqs = _owner_sequences(ex, kind)
    for owner, seq in seqs.items():
        for name, ts in seq:
            if ts.owner and ts.owner != owner:
                raise ExchangeError("ownership", f"{name} tagged {ts.owner!r}, expected {owner!r}")
    half = TIMESTAMP_MODULUS // 2
    for owner, seq in seqs.items():
        span = 0
        for (pn, prev), (name, ts) in zip(seq, seq[1:]):
            step = tick_diff(ts, prev)
            if step >= half:
                raise ExchangeError("ordering", f"{name} precedes {pn} on {owner}'s clock")
            span += step
        if span >= TIMESTAMP_MODULUS:
            raise ExchangeError("wrap", f"{owner}'s stamps span more than one counter wrap")


def _sds_ticks(t1: Timestamp, t2: Timestamp, t3: Timestamp,
               t4: Timestamp, t5: Timestamp, t6: Timestamp) -> int:
    """Numerator of the SDS estimate, in ticks (divide by 4)."""
    return (tick_diff(t4, t1) - tick_diff(t3, t2)) + (tick_diff(t6, t3) - tick_diff(t5, t4))


def tof_twr(ex: RangingExchange, resolution: TickResolution = DEFAULT_RESOLUTION) -> float:
    t1, t2, t3, t4 = required_stamps(ex, STAMP_NAMES[:4])
    return (tick_diff(t4, t1) - tick_diff(t3, t2)) * resolution.seconds_per_tick / 2


def tof_sds_twr(ex: RangingExchange, resolution: TickResolution = DEFAULT_RESOLUTION) -> float:
    stamps = required_stamps(ex, STAMP_NAMES)
    return _sds_ticks(*stamps) * resolution.seconds_per_tick / 4


def ma_round_tofs(ex: RangingExchange, resolution: TickResolution = DEFAULT_RESOLUTION) -> list[float]:
    """Per-round SDS estimates of an MA chain, in seconds."""
    return [_sds_ticks(*w) * resolution.seconds_per_tick / 4 for w in _round_windows(ex.ma_timestamps)]


def tof_sds_twr_ma(ex: RangingExchange, resolution: TickResolution = DEFAULT_RESOLUTION) -> float:
    windows = _round_windows(ex.ma_timestamps)
    if len(windows) == 1:
        return tof_sds_twr(RangingExchange(*windows[0]), resolution)
    total = sum(_sds_ticks(*w) for w in windows)
    return total * resolution.seconds_per_tick / (4 * len(windows))


def estimate_tof(ex: RangingExchange, kind: ProtocolKind,
                 resolution: TickResolution = DEFAULT_RESOLUTION) -> float:
    if kind.kind is Kind.TWR:
        return tof_twr(ex, resolution)
    if kind.kind is Kind.SDS_TWR:
        return tof_sds_twr(ex, resolution)
    return tof_sds_twr_ma(ex, resolution)
