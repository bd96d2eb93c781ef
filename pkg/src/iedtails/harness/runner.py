"""Deterministic sharded execution.

Work is split into a fixed list of shards that does not depend on the
number of workers; shard ``i`` draws from stream ``i`` of the run seed and
results are merged in shard order, so outputs are identical for any
worker count.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from typing import Any, Callable, Sequence

from ..errors import ArgumentError

__all__ = ["map_shards", "shard_sizes"]


def shard_sizes(total: int, shard_size: int) -> list[int]:
    if total < 1 or shard_size < 1:
        raise ArgumentError(f"need total >= 1 and shard_size >= 1, got {total}, {shard_size}")
    full, rest = divmod(total, shard_size)
    return [shard_size] * full + ([rest] if rest else [])


def _call(args):
    fn, kw = args
    return fn(**kw)


def map_shards(fn: Callable[..., Any], shard_kwargs: Sequence[dict], workers: int = 1) -> list:
    """``[fn(**kw) for kw in shard_kwargs]``, optionally across processes."""
    jobs = [(fn, kw) for kw in shard_kwargs]
    if workers <= 1 or len(jobs) <= 1:
        return [_call(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(_call, jobs))
