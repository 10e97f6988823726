import logging
import threading

import pytest

from consensus_pose.logger import Logger
from consensus_pose.workers import TaskRunner


def test_results_keep_submission_order(quiet_logger):
    tasks = [(f"squaring {n}", lambda x: x * x, (n,)) for n in range(10)]
    assert TaskRunner(quiet_logger).map(tasks) == [n * n for n in range(10)]
    assert TaskRunner(quiet_logger, threads=4).map(tasks) == [n * n for n in range(10)]


def test_tasks_run_on_several_threads(quiet_logger):
    barrier = threading.Barrier(2, timeout=5)

    def meet(n):
        barrier.wait()
        return n

    assert TaskRunner(quiet_logger, threads=2).map([("meeting", meet, (n,)) for n in range(2)]) == [0, 1]


def test_threads_clamped(quiet_logger):
    assert TaskRunner(quiet_logger, threads=0).threads == 1


@pytest.mark.parametrize("threads", [1, 3])
def test_failure_logged_and_raised(tmp_path, threads):
    logger = Logger("consensus_pose_workers", log_dir=str(tmp_path), console=False)

    def explode():
        raise KeyError("missing field")

    with pytest.raises(KeyError):
        TaskRunner(logger, threads).map([("fine", int, ()), ("aggregating thorax", explode, ())])
    text = (tmp_path / "consensus_pose_workers.log").read_text()
    assert "Error while aggregating thorax..." in text
    assert "Traceback" in text and "missing field" in text


def test_logger_file_levels(tmp_path):
    logger = Logger("consensus_pose_levels", log_dir=str(tmp_path / "logs"), console=False)
    logger.debug("debug line")
    logger.warning("warning line")
    logger.log("ignored", level="verbose")
    lines = (tmp_path / "logs" / "consensus_pose_levels.log").read_text().splitlines()
    assert len(lines) == 2
    assert " - consensus_pose_levels_logger - DEBUG - debug line" in lines[0]
    assert "WARNING - warning line" in lines[1]


def test_logger_does_not_stack_handlers(tmp_path):
    for _ in range(3):
        logger = Logger("consensus_pose_stack", log_dir=str(tmp_path))
    handlers = logger.Logger.handlers
    assert len(handlers) == 2
    assert {type(h) for h in handlers} == {logging.FileHandler, logging.StreamHandler}
    assert logger.Logger.propagate is False


def test_silent_logger():
    logger = Logger("consensus_pose_silent", log_dir=None, console=False)
    assert [type(h) for h in logger.Logger.handlers] == [logging.NullHandler]
    logger.info("nowhere")
