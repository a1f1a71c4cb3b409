from __future__ import annotations

import asyncio
import logging
from collections.abc import AsyncIterator, Callable, Sequence
from typing import Generic, TypeVar

log = logging.getLogger(__name__)

MAX_CONCURRENT = 4

T = TypeVar("T")


class EnsembleOrchestrator(Generic[T]):
    """
    Runs one pure, seed-indexed task per ensemble member concurrently.

    The task (e.g. "integrate this stepper on the path of seed k") is injected;
    this class creates nothing itself. Members run in worker threads through
    asyncio.to_thread, gated by a semaphore, so numpy releases the GIL where it can.

    In tests you can pass any plain function of the seed and check the
    batching without touching the numerics.
    """

    def __init__(self, task: Callable[[int], T], max_concurrent: int = MAX_CONCURRENT) -> None:
        if max_concurrent < 1:
            raise ValueError(f"max_concurrent must be >= 1, got {max_concurrent}")
        self._task = task
        self._semaphore = asyncio.Semaphore(max_concurrent)
        self._max_concurrent = max_concurrent

    async def _run_member(self, seed: int) -> tuple[int, T]:
        async with self._semaphore:
            result = await asyncio.to_thread(self._task, seed)
        log.debug("Member finished | seed=%d", seed)
        return seed, result

    async def run(self, seeds: Sequence[int]) -> AsyncIterator[list[tuple[int, T]]]:
        """
        Async generator: yields (seed, result) batches, each sorted by seed.

        Seeds are processed in chunks of max_concurrent * 4; every chunk is
        launched at once with asyncio.gather.
        """
        chunk_size = self._max_concurrent * 4
        chunks = (len(seeds) + chunk_size - 1) // chunk_size
        log.info("Starting ensemble | members=%d | concurrency=%d", len(seeds), self._max_concurrent)

        for i in range(0, len(seeds), chunk_size):
            chunk = seeds[i: i + chunk_size]
            batch = await asyncio.gather(*[self._run_member(seed) for seed in chunk])
            log.info("Chunk %d/%d | +%d members", i // chunk_size + 1, chunks, len(batch))
            yield sorted(batch, key=lambda item: item[0])

        log.info("Ensemble complete | members=%d", len(seeds))

    async def collect(self, seeds: Sequence[int]) -> dict[int, T]:
        """Every member's result keyed by seed."""
        results: dict[int, T] = {}
        async for batch in self.run(seeds):
            results.update(batch)
        return results
