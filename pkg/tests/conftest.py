import numpy as np
import pytest

from aggnet.datasets import gen_synthetic
from aggnet.model import AggNet, HashConfig, ModelConfig
from aggnet.numcore import make_rng

_ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE_KEY] = []


@pytest.fixture
def acceptance_log(request):
    """Append one PASS/FAIL line per criterion; echoed in the terminal summary."""
    lines = request.config.stash[_ACCEPTANCE_KEY]

    def emit(line: str):
        print(line)
        lines.append(line)

    return emit


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def small_data():
    return gen_synthetic(80, 4, 12, 3.0, 0.2, make_rng(7))


def make_model(pooling="netvlad", hashing=True, d_in=12, d=8, hidden=(10,), K=3, seed=0,
               penalty_weight=0.1):
    cfg = ModelConfig(d_in=d_in, d=d, hidden=hidden, pooling=pooling, K=K,
                      hashing=HashConfig(hashing, penalty_weight, 3.0))
    return AggNet(cfg, np.random.default_rng(seed))
