"""Deterministic UWB two-way ranging simulator with clock-drift correction."""

from rangesim.channel import ChannelModel, propagation_delay, tof_to_distance
from rangesim.clock import ClockModel, TickResolution, Timestamp, local_timestamp, tick_diff
from rangesim.correction import ClockOffsetEstimate, calibrate_bias, estimate_clock_offset, tof_twr_corrected
from rangesim.harness import RangingStats, SweepSpec, calibrate_jitter, run_sweep, summarize, write_csv
from rangesim.protocol import ProtocolKind, RangingExchange, ReplyDelayPolicy, tof_sds_twr, tof_sds_twr_ma, tof_twr
from rangesim.simcore import NodeSim, SessionConfig, SessionResult, run_batch, run_session

__version__ = "0.1.0"
