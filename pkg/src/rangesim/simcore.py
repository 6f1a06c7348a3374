"""Event-driven execution of one ranging session between two nodes.

Times inside a session are exact ``Fraction`` seconds. Frames are
scheduled in true time; each RMARKER instant is stamped through the
owning node's clock after the channel perturbs it, so jitter changes what
is recorded but never the order of events. Each node is assumed to be
listening between its own consecutive events, and that listening time is
fed to its clock (the self-heating model) before the next stamp.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from rangesim.channel import ChannelModel, SeedLike, jittered_instant, propagation_delay
from rangesim.clock import (
    DEFAULT_RESOLUTION,
    ClockModel,
    TickResolution,
    Timestamp,
    accumulate_rx,
    as_fraction,
    local_timestamp,
)
from rangesim.correction import (
    ClockOffsetEstimate,
    estimate_clock_offset,
    tof_twr_corrected,
)
from rangesim.protocol import (
    INITIATOR,
    RESPONDER,
    STAMP_NAMES,
    Kind,
    ProtocolKind,
    RangingExchange,
    ReplyDelayPolicy,
    estimate_tof,
)

DEFAULT_PROCESSING_TIME = 100e-6
DEFAULT_SESSION_SPACING = 0.2
# leaves room for negative jitter on the first stamp of a clock starting at 0
DEFAULT_SESSION_START = 1.0


class SessionAbortedError(RuntimeError):
    pass


@dataclass(frozen=True)
class NodeSim:
    id: str
    clock: ClockModel
    role: str = INITIATOR

    def __post_init__(self) -> None:
        if self.role not in (INITIATOR, RESPONDER):
            raise ValueError(f"role must be {INITIATOR!r} or {RESPONDER!r}, got {self.role!r}")

    @classmethod
    def initiator(cls, clock: ClockModel = ClockModel(), id: str = "A") -> NodeSim:
        return cls(id, clock, INITIATOR)

    @classmethod
    def responder(cls, clock: ClockModel = ClockModel(), id: str = "B") -> NodeSim:
        return cls(id, clock, RESPONDER)


@dataclass
class SessionConfig:
    protocol: ProtocolKind
    channel: ChannelModel
    delays: ReplyDelayPolicy = field(default_factory=ReplyDelayPolicy)
    session_start: float = DEFAULT_SESSION_START
    processing_time: float = DEFAULT_PROCESSING_TIME
    offset_noise_ppm: float = 0.0
    resolution: TickResolution = DEFAULT_RESOLUTION

    def __post_init__(self) -> None:
        if self.processing_time < 0:
            raise ValueError("processing_time must be >= 0")
        for name in ("delay_b", "delay_a"):
            v = getattr(self.delays, name)
            if v is not None and v < self.processing_time:
                raise ValueError(f"{name}={v} s is shorter than processing_time={self.processing_time} s")
        self.delays.check_wrap(self.resolution)

    @property
    def reply_b(self) -> float:
        return self.processing_time if self.delays.delay_b is None else self.delays.delay_b

    @property
    def reply_a(self) -> float:
        return self.processing_time if self.delays.delay_a is None else self.delays.delay_a


@dataclass(frozen=True)
class StampEvent:
    """One recorded RMARKER: who stamped it, when it really happened, what was read."""

    frame: int
    direction: str  # "tx" | "rx"
    owner: str
    true_time: Fraction
    recorded_time: Fraction
    stamp: Timestamp


@dataclass(frozen=True)
class SessionResult:
    exchange: RangingExchange
    true_tof: float
    raw_tof: float
    corrected_tof: Optional[float]
    offsets_used: ClockOffsetEstimate
    protocol: ProtocolKind
    propagation_speed: float
    trace: tuple[StampEvent, ...] = field(default=(), compare=False, repr=False)

    @property
    def true_distance(self) -> float:
        return self.true_tof * self.propagation_speed

    @property
    def raw_distance(self) -> float:
        return self.raw_tof * self.propagation_speed

    @property
    def corrected_distance(self) -> Optional[float]:
        if self.corrected_tof is None:
            return None
        return self.corrected_tof * self.propagation_speed


def _frame_plan(protocol: ProtocolKind) -> list[str]:
    """Sender of each timed frame, in order."""
    return [INITIATOR if i % 2 == 0 else RESPONDER for i in range(protocol.frame_count)]


def run_session(
    a: NodeSim,
    b: NodeSim,
    cfg: SessionConfig,
    correction: bool = False,
) -> SessionResult:
    """Run one exchange and estimate its ToF.

    The ClockOffset readout happens when B decodes the first frame, and is
    always drawn (so enabling correction never shifts the random stream);
    ``correction`` only controls whether the corrected ToF is computed.
    Correction is defined for TWR only.
    """
    if a.role != INITIATOR or b.role != RESPONDER:
        raise ValueError("session needs one initiator (a) and one responder (b)")
    if correction and cfg.protocol.kind is not Kind.TWR:
        raise ValueError(f"drift correction is defined for TWR only, not {cfg.protocol}")

    ch = cfg.channel
    res = cfg.resolution
    tof = propagation_delay(ch)
    tof_exact = Fraction(tof)
    start = as_fraction(cfg.session_start)
    clocks = {INITIATOR: replace(a.clock, owner=INITIATOR), RESPONDER: replace(b.clock, owner=RESPONDER)}
    last_event = {INITIATOR: start, RESPONDER: start}
    reply = {INITIATOR: Fraction(cfg.reply_a), RESPONDER: Fraction(cfg.reply_b)}

    senders = _frame_plan(cfg.protocol)
    horizon = start + len(senders) * tof_exact + sum(reply[s] for s in senders[1:])
    worst_rate = max(c.rate for c in clocks.values())
    if (horizon - start) * worst_rate >= res.exact * (1 << 40):
        raise SessionAbortedError(
            f"session lasts {float(horizon - start):.3f} s, beyond the counter wrap of {res.wrap_seconds:.3f} s"
        )

    # (true_time, seq, frame, direction, owner); seq keeps simultaneous events in schedule order
    queue: list[tuple[Fraction, int, int, str, str]] = []
    seq = 0

    def schedule(t: Fraction, frame: int, direction: str, owner: str) -> None:
        nonlocal seq
        heapq.heappush(queue, (t, seq, frame, direction, owner))
        seq += 1

    schedule(start, 0, "tx", senders[0])
    trace: list[StampEvent] = []
    offset: Optional[ClockOffsetEstimate] = None
    while queue:
        t, _, frame, direction, owner = heapq.heappop(queue)
        listened = t - last_event[owner]
        clocks[owner] = accumulate_rx(clocks[owner], listened, at=last_event[owner])
        last_event[owner] = t
        recorded = jittered_instant(ch, t)
        if recorded < clocks[owner].phase_origin:
            raise SessionAbortedError(f"frame {frame} {direction} precedes {owner}'s clock origin")
        trace.append(StampEvent(frame, direction, owner, t, recorded, local_timestamp(clocks[owner], recorded, res)))
        if direction == "tx":
            receiver = RESPONDER if owner == INITIATOR else INITIATOR
            schedule(t + tof_exact, frame, "rx", receiver)
        else:
            if offset is None:
                offset = estimate_clock_offset(
                    clocks[INITIATOR], clocks[RESPONDER], cfg.offset_noise_ppm, ch.rng
                )
            if frame + 1 < len(senders):
                schedule(t + reply[owner], frame + 1, "tx", owner)

    assert offset is not None
    chain = [ev.stamp for ev in sorted(trace, key=lambda e: (e.frame, e.direction != "tx"))]
    if cfg.protocol.kind is Kind.SDS_TWR_MA:
        exchange = RangingExchange.from_chain(chain)
    else:
        exchange = RangingExchange(**dict(zip(STAMP_NAMES, chain)))
    raw = estimate_tof(exchange, cfg.protocol, res)
    corrected = tof_twr_corrected(exchange, offset, res) if correction else None
    return SessionResult(
        exchange=exchange,
        true_tof=tof,
        raw_tof=raw,
        corrected_tof=corrected,
        offsets_used=offset,
        protocol=cfg.protocol,
        propagation_speed=ch.propagation_speed,
        trace=tuple(trace),
    )


def trial_seed(seed: SeedLike, trial: int) -> tuple[int, ...]:
    """Entropy for trial ``trial`` of a batch seeded with ``seed``."""
    base = (seed,) if isinstance(seed, (int, np.integer)) else tuple(seed)
    return (*(int(s) for s in base), trial)


def trial_inputs(
    a: NodeSim,
    b: NodeSim,
    cfg: SessionConfig,
    seed: SeedLike,
    trial: int,
    spacing: float = DEFAULT_SESSION_SPACING,
) -> tuple[NodeSim, NodeSim, SessionConfig]:
    """Nodes and config for trial ``trial`` of a batch.

    The session starts ``trial * spacing`` after ``cfg.session_start``; the
    channel is reseeded from ``trial_seed(seed, trial)``. Both clocks get a
    uniformly random sub-tick phase (their own substream, so the channel
    stream is untouched): independent oscillators are never aligned to
    each other's tick grid, and without this every trial would hit the
    same quantisation pattern.
    """
    key = trial_seed(seed, trial)
    phase_rng = np.random.default_rng(np.random.SeedSequence((len(key) + 1, *key, 1)))
    tick = cfg.resolution.exact
    nodes = []
    for node in (a, b):
        shift = Fraction(phase_rng.random()) * tick
        clock = replace(node.clock, phase_origin=as_fraction(node.clock.phase_origin) - shift)
        nodes.append(replace(node, clock=clock))
    trial_cfg = replace(
        cfg,
        channel=cfg.channel.reseeded(key),
        session_start=as_fraction(cfg.session_start) + trial * Fraction(spacing),
    )
    return nodes[0], nodes[1], trial_cfg


def run_batch(
    a: NodeSim,
    b: NodeSim,
    cfg: SessionConfig,
    trials: int,
    correction: bool = False,
    seed: SeedLike = 0,
    spacing: float = DEFAULT_SESSION_SPACING,
) -> list[SessionResult]:
    """Run ``trials`` independent sessions (see ``trial_inputs``)."""
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    results = []
    for i in range(trials):
        try:
            results.append(run_session(*trial_inputs(a, b, cfg, seed, i, spacing), correction))
        except SessionAbortedError as exc:
            raise SessionAbortedError(f"trial {i}: {exc}") from exc
    return results


def default_nodes(drift_ppm_a: float = 0.0, drift_ppm_b: float = 0.0,
                  temp_coeff_b: float = 0.0, temp_coeff_a: float = 0.0) -> tuple[NodeSim, NodeSim]:
    return (
        NodeSim.initiator(ClockModel(drift_ppm_a, temp_coeff_a)),
        NodeSim.responder(ClockModel(drift_ppm_b, temp_coeff_b)),
    )


def distances(results: Sequence[SessionResult], corrected: bool = False) -> list[float]:
    if corrected:
        return [r.corrected_distance for r in results]  # type: ignore[misc]
    return [r.raw_distance for r in results]
