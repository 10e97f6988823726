from concurrent.futures import ThreadPoolExecutor
from traceback import format_exc
from typing import Callable, Iterable, List, Tuple

from .logger import Logger


class TaskRunner:
    """
    Runs independent tasks (per-keypoint aggregation, per-pair consensus) on a
    thread pool and returns their results in submission order. A failing task
    has its tag and traceback logged as an error, then its exception is raised
    again.
    """

    def __init__(self, logger: Logger, threads: int = 1):
        self.logger = logger
        self.threads = max(1, int(threads))

    def _run_task(self, tag: str, func: Callable, args: Tuple):
        try:
            return func(*args)
        except Exception:  # pylint: disable=broad-except
            self.logger.error(f"Error while {tag}...\n{format_exc()}")
            raise

    def map(self, tasks: Iterable[Tuple[str, Callable, Tuple]]) -> List:
        tasks = list(tasks)
        if self.threads == 1 or len(tasks) < 2:
            return [self._run_task(tag, func, args) for tag, func, args in tasks]
        with ThreadPoolExecutor(max_workers=self.threads) as executor:
            futures = [executor.submit(self._run_task, tag, func, args) for tag, func, args in tasks]
            return [future.result() for future in futures]
