import numpy as np
import pytest

from consensus_pose.config import Config
from consensus_pose.logger import Logger
from consensus_pose.models import LogPolarGrid
from consensus_pose.selftest import SMALL_GRID


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_grid() -> LogPolarGrid:
    return SMALL_GRID


@pytest.fixture
def quiet_logger():
    return Logger("consensus_pose_test", log_dir=None, console=False)


@pytest.fixture
def config(tmp_path, quiet_logger) -> Config:
    """Default configuration; the path does not exist so every default applies."""
    return Config(str(tmp_path / "missing.cfg"), quiet_logger)
