"""Deterministic pairwise reductions over the exhaustive input space.

The mean over all 2**n inputs is computed by a fixed binary tree: adjacent
counters are added first, then adjacent pairs, and so on. Because chunks
are power-of-two sized and aligned to the counter, each chunk reduces to
exactly one node of that tree, so splitting work across threads does not
change a single bit of the result.
"""

from concurrent.futures import ThreadPoolExecutor

import numpy as np

# 2**16 rows per chunk keeps per-thread temporaries near a few MB.
CHUNK_LOG2 = 16


def tree_sum(values) -> np.ndarray:
    """Pairwise sum along axis 0 with a fixed tree shape.

    Non power-of-two lengths are padded with zeros at the end, which
    leaves every partial sum unchanged.
    """
    a = np.asarray(values, dtype=np.float64)
    length = a.shape[0]
    if length == 0:
        return np.zeros(a.shape[1:])
    size = 1 << (length - 1).bit_length()
    if size != length:
        pad = np.zeros((size - length,) + a.shape[1:])
        a = np.concatenate([a, pad])
    while a.shape[0] > 1:
        a = a[0::2] + a[1::2]
    return a[0]


def tree_mean(values) -> np.ndarray:
    a = np.asarray(values, dtype=np.float64)
    return tree_sum(a) / a.shape[0]


def chunk_ranges(n: int, chunk_log2: int = CHUNK_LOG2):
    total = 1 << n
    step = 1 << min(chunk_log2, n)
    return [(start, start + step) for start in range(0, total, step)]


def map_tree_sum(fn, n: int, threads: int = 1, chunk_log2: int = CHUNK_LOG2):
    """Apply ``fn(start, stop)`` to aligned counter chunks and tree-sum the results.

    ``fn`` returns an array whose axis 0 runs over the inputs of the chunk
    (or a tuple of such arrays). The return mirrors that structure with axis
    0 summed. The output is independent of ``threads``.
    """
    ranges = chunk_ranges(n, chunk_log2)

    def reduce_chunk(bounds):
        out = fn(*bounds)
        if isinstance(out, tuple):
            return tuple(tree_sum(o) for o in out)
        return tree_sum(out)

    if threads > 1 and len(ranges) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            partials = list(pool.map(reduce_chunk, ranges))
    else:
        partials = [reduce_chunk(r) for r in ranges]

    if isinstance(partials[0], tuple):
        return tuple(tree_sum(np.stack(parts)) for parts in zip(*partials))
    return tree_sum(np.stack(partials))
