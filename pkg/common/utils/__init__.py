"""
Common utility functions shared across quadflow modules.
"""

import math
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from pathlib import Path
from typing import BinaryIO, Callable, Iterator, List, Sequence, TypeVar, Union

T = TypeVar("T")
R = TypeVar("R")


@contextmanager
def atomic_write(path: Union[str, Path]) -> Iterator[BinaryIO]:
    """
    Open a temporary file next to ``path`` for binary writing and move it into
    place only after the block completes without raising.
    """
    target = Path(path)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{target.name}.", suffix=".tmp", dir=target.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            yield fh
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp_name, target)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise


def parse_time_list(text: str) -> List[float]:
    """Parse a comma-separated list of times such as ``"0.5,0.25"``"""
    times = []
    for token in text.split(","):
        token = token.strip()
        if not token:
            continue
        value = float(token)
        if not math.isfinite(value):
            raise ValueError(f"time must be finite, got {token!r}")
        times.append(value)
    if not times:
        raise ValueError("no time values given")
    return times


def format_time_tag(t: float) -> str:
    """Compact text for a time value used in file names (0.5 -> '0.5')"""
    return f"{float(t):g}"


def evenly_spaced_times(count: int) -> List[float]:
    """``count`` interior times of the unit interval: 7 -> 0.125, 0.25, ..., 0.875"""
    if count < 1:
        raise ValueError("count must be at least 1")
    return [(i + 1) / (count + 1) for i in range(count)]


def parallel_map(func: Callable[[T], R], items: Sequence[T], threads: int = 1) -> List[R]:
    """
    Apply ``func`` to every item, in order, on up to ``threads`` worker threads.
    Results come back in input order regardless of completion order.
    """
    if threads <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=min(threads, len(items))) as pool:
        return list(pool.map(func, items))
