import sys

import hypothesis
import pytest

from rangesim.channel import ChannelModel
from rangesim.protocol import ProtocolKind, ReplyDelayPolicy
from rangesim.simcore import SessionConfig, default_nodes

hypothesis.settings.register_profile("fast", max_examples=10)
hypothesis.settings.register_profile("default", max_examples=60, deadline=None)
hypothesis.settings.load_profile("default")


@pytest.fixture
def twr_config():
    def make(distance=2.0, delay=1e-3, jitter=0.0, noise=0.0, start=1.0):
        return SessionConfig(
            ProtocolKind.twr(),
            ChannelModel(distance, timestamp_jitter_std=jitter),
            ReplyDelayPolicy(delay),
            session_start=start,
            offset_noise_ppm=noise,
        )
    return make


@pytest.fixture
def drifting_nodes():
    return default_nodes(0.0, 20.0)


def pytest_terminal_summary(terminalreporter):
    mod = next((m for name, m in list(sys.modules.items()) if name.endswith("test_acceptance")), None)
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for line in results:
            terminalreporter.write_line(line)
