#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Strategy pattern for running independent Monte Carlo replicates

Provides interchangeable execution strategies:
- Sequential processing (default, single thread)
- Parallel processing (thread pool)

Every task derives its randomness from its own seed, so results do not
depend on the strategy or on completion order; results are always returned
in task order.
"""

from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor, as_completed
from typing import Callable, List, Optional, Sequence, TypeVar
import logging

logger = logging.getLogger(__name__)

T = TypeVar("T")
Task = Callable[[], T]

PROGRESS_EVERY = 50


class ReplicateStrategy(ABC):
    """Abstract base class for replicate execution strategies"""

    @abstractmethod
    def run(self, tasks: Sequence[Task], label: str = "replicates") -> List[T]:
        """
        Execute every task

        Args:
            tasks: zero-argument callables
            label: name used in progress messages

        Returns:
            Task results, in task order
        """


def _log_progress(label: str, completed: int, total: int):
    if completed % PROGRESS_EVERY == 0 or completed == total:
        logger.info(f"{label}: {completed}/{total} done")


class SequentialStrategy(ReplicateStrategy):
    """Run tasks one by one in the calling thread"""

    def run(self, tasks: Sequence[Task], label: str = "replicates") -> List[T]:
        results: List[T] = []
        total = len(tasks)
        for index, task in enumerate(tasks):
            results.append(task())
            _log_progress(label, index + 1, total)
        return results


class ParallelStrategy(ReplicateStrategy):
    """
    Run tasks on a thread pool

    numpy releases the GIL inside its kernels, so threads help for the
    larger sample sizes.
    """

    def __init__(self, max_workers: int = 2):
        if max_workers < 1:
            raise ValueError("max_workers must be at least 1")
        self.max_workers = max_workers

    def run(self, tasks: Sequence[Task], label: str = "replicates") -> List[T]:
        total = len(tasks)
        results: List[Optional[T]] = [None] * total
        with ThreadPoolExecutor(max_workers=self.max_workers) as executor:
            futures = {executor.submit(task): index for index, task in enumerate(tasks)}
            completed = 0
            for future in as_completed(futures):
                results[futures[future]] = future.result()
                completed += 1
                _log_progress(label, completed, total)
        return results  # type: ignore[return-value]


def strategy_for_threads(threads: int) -> ReplicateStrategy:
    """Sequential for one thread, otherwise a pool of the given size"""
    if threads <= 1:
        return SequentialStrategy()
    return ParallelStrategy(max_workers=threads)
