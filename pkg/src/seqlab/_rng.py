"""Counter-indexed random substreams.

Every random draw is addressed by ``(seed, tag, chunk)`` so results do not
depend on how work is split across threads.
"""
import os
import zlib
from concurrent.futures import ThreadPoolExecutor

import numpy as np

CHUNK = 256
_THREADS = None


def tag_of(*parts) -> int:
    """Stable 32-bit tag from strings/ints."""
    return zlib.crc32("/".join(str(p) for p in parts).encode()) & 0xFFFFFFFF


def substream(seed: int, tag: int, index: int = 0) -> np.random.Generator:
    return np.random.default_rng([int(seed) & 0xFFFFFFFF, int(tag), int(index)])


def chunk_bounds(count: int, chunk: int = CHUNK):
    return [(s, min(s + chunk, count)) for s in range(0, count, chunk)]


def gaussian_rows(seed, tag, count, dim, chunk=CHUNK):
    """``count`` standard normal rows; row block j comes from substream j."""
    out = np.empty((count, dim))
    for j, (a, b) in enumerate(chunk_bounds(count, chunk)):
        out[a:b] = substream(seed, tag, j).standard_normal((b - a, dim))
    return out


def set_threads(k):
    global _THREADS
    _THREADS = None if k is None else max(1, int(k))


def get_threads() -> int:
    if _THREADS is not None:
        return _THREADS
    try:
        return max(1, int(os.environ.get("SEQLAB_THREADS", "1")))
    except ValueError:
        return 1


def ordered_map(fn, items):
    """Map preserving order; parallel when more than one thread is allowed."""
    items = list(items)
    k = get_threads()
    if k <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=k) as ex:
        return list(ex.map(fn, items))
