"""Parallel driver running :func:`optimize_rate` over a grid of hardware points."""

import logging
import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from diqkdsps.exceptions import DiqkdError
from diqkdsps.optimizer import OptimizationResult, OptimizerConfig, optimize_rate
from diqkdsps.photonic import OverlapModel, PhysicalParams

logger = logging.getLogger(__name__)

GridPoint = Tuple[PhysicalParams, OverlapModel]


@dataclass(frozen=True)
class SweepRow:
    """Result (or failure message) of one grid point, in grid order."""
    index: int
    params: PhysicalParams
    overlaps: OverlapModel
    rng_seed: int
    result: Optional[OptimizationResult] = None
    error: Optional[str] = None


def point_seeds(rng_seed: int, count: int) -> List[int]:
    """Independent per-point seeds derived from one root seed."""
    children = np.random.SeedSequence(rng_seed).spawn(count)
    return [int(child.generate_state(1)[0]) for child in children]


def _run_point(index: int, params: PhysicalParams, overlaps: OverlapModel, config: OptimizerConfig) -> SweepRow:
    try:
        result = optimize_rate(params, overlaps, config)
        return SweepRow(index, params, overlaps, config.rng_seed, result=result)
    except DiqkdError as exc:
        logger.error("grid point %d failed: %s", index, exc.message)
        return SweepRow(index, params, overlaps, config.rng_seed, error=f"{exc.code.value if exc.code else ''}: {exc.message}")


def sweep(grid: Sequence[GridPoint], config: OptimizerConfig = OptimizerConfig(),
          pool: Optional[int] = None) -> List[SweepRow]:
    """Optimize every grid point, concurrently when ``pool`` > 1.

    Rows come back in grid order and each point's randomness depends only on
    its own derived seed, so the table does not depend on the pool size.
    """
    workers = config.pool if pool is None else pool
    seeds = point_seeds(config.rng_seed, len(grid))
    tasks = [(i, params, overlaps, replace(config, rng_seed=seed))
             for i, ((params, overlaps), seed) in enumerate(zip(grid, seeds))]
    logger.info("sweeping %d grid points with %d worker(s)", len(tasks), max(1, workers))
    if workers > 1 and len(tasks) > 1:
        context = multiprocessing.get_context("spawn")
        with ProcessPoolExecutor(max_workers=workers, mp_context=context) as executor:
            futures = [executor.submit(_run_point, *task) for task in tasks]
            rows = []
            for future in futures:
                rows.append(future.result())
                logger.info("grid point %d/%d done", len(rows), len(tasks))
            return rows
    rows = []
    for task in tasks:
        rows.append(_run_point(*task))
        logger.info("grid point %d/%d done", len(rows), len(tasks))
    return rows
