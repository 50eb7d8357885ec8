"""Bounded worker pool for independent numeric jobs."""

import asyncio
import logging
from typing import Callable, Iterable, TypeVar

from bergman_lab.config import get_config

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


class OrderedRunner:
    """Runs blocking jobs in worker threads, at most ``max_concurrent`` at a time.

    Results come back in submission order whatever order the jobs finish in.
    """

    def __init__(self, max_concurrent: int | None = None):
        self.max_concurrent = max_concurrent or get_config().worker_count
        self.completed = 0

    async def _run_with_semaphore(
        self, semaphore: asyncio.Semaphore, func: Callable[[T], R], item: T
    ) -> R:
        async with semaphore:
            result = await asyncio.to_thread(func, item)
            self.completed += 1
            return result

    async def map(self, func: Callable[[T], R], items: Iterable[T]) -> list[R]:
        """Run ``func`` over ``items`` concurrently."""
        semaphore = asyncio.Semaphore(self.max_concurrent)
        jobs = [self._run_with_semaphore(semaphore, func, item) for item in items]
        logger.debug(f"Running {len(jobs)} jobs on {self.max_concurrent} workers")
        return list(await asyncio.gather(*jobs))

    def run(self, func: Callable[[T], R], items: Iterable[T]) -> list[R]:
        """Blocking entry point; a single worker runs inline without an event loop."""
        items = list(items)
        if self.max_concurrent == 1:
            results = [func(item) for item in items]
            self.completed += len(results)
            return results
        return asyncio.run(self.map(func, items))


def run_ordered(func: Callable[[T], R], items: Iterable[T], workers: int | None = None) -> list[R]:
    return OrderedRunner(workers).run(func, items)
