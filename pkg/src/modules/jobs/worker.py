# src/modules/jobs/worker.py

import asyncio
import logging
from typing import Callable, List, Optional, Sequence, Tuple, TypeVar

from tqdm import tqdm

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


async def unit_worker(
    queue: asyncio.Queue,
    fn: Callable[[T], R],
    results: List[Optional[R]],
    failures: List[Tuple[int, BaseException]],
    stop_event: asyncio.Event,
    progress: Optional[tqdm] = None,
):
    """
    Consumes (index, unit) pairs from the queue and runs fn on a thread.
    Stops taking new units once any unit has failed.
    """
    while not stop_event.is_set():
        try:
            index, unit = queue.get_nowait()
        except asyncio.QueueEmpty:
            return
        try:
            results[index] = await asyncio.to_thread(fn, unit)
        except Exception as e:
            logger.debug(f"Work unit {index} failed: {e}")
            failures.append((index, e))
            stop_event.set()
        finally:
            queue.task_done()
            if progress is not None:
                progress.update(1)


async def run_work_units(
    units: Sequence[T],
    fn: Callable[[T], R],
    threads: int = 1,
    desc: str = "Work units",
    show_progress: bool = False,
) -> List[R]:
    """
    Runs fn over every unit on up to `threads` worker threads and returns the
    results in submission order. If units fail, the one submitted first is re-raised.
    """
    units = list(units)
    if not units:
        return []

    queue: asyncio.Queue = asyncio.Queue()
    for item in enumerate(units):
        queue.put_nowait(item)

    results: List[Optional[R]] = [None] * len(units)
    failures: List[Tuple[int, BaseException]] = []
    stop_event = asyncio.Event()
    workers = max(1, min(threads, len(units)))

    with tqdm(total=len(units), desc=desc, disable=not show_progress) as progress:
        tasks = [
            asyncio.create_task(unit_worker(queue, fn, results, failures, stop_event, progress))
            for _ in range(workers)
        ]
        await asyncio.gather(*tasks)

    if failures:
        index, error = min(failures, key=lambda f: f[0])
        logger.debug(f"{len(failures)} of {len(units)} work units failed; first is unit {index}")
        raise error
    return results


def split_range(count: int, parts: int) -> List[Tuple[int, int]]:
    """Splits 0..count into at most `parts` contiguous, near-equal (start, stop) ranges."""
    parts = max(1, min(parts, count))
    bounds = [round(i * count / parts) for i in range(parts + 1)]
    return [(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
