import math
from fractions import Fraction

import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from parity_attention.reduction import chunk_ranges, map_tree_sum, tree_mean, tree_sum


@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=70))
def test_tree_sum_close_to_exact(values):
    exact = float(sum(Fraction(v) for v in values))
    assert math.isclose(float(tree_sum(values)), exact, rel_tol=1e-9, abs_tol=1e-6)


def test_tree_sum_shape_is_fixed():
    v = np.array([1e16, 1.0, -1e16, 1.0])
    # ((1e16 + 1) + (-1e16 + 1)) under the pairwise tree
    assert tree_sum(v) == (1e16 + 1.0) + (-1e16 + 1.0)


def test_tree_mean_and_empty():
    assert tree_mean([1.0, 2.0, 3.0, 6.0]) == 3.0
    assert tree_sum(np.zeros((0, 3))).shape == (3,)


def test_chunks_cover_counter_range():
    assert chunk_ranges(3, 1) == [(0, 2), (2, 4), (4, 6), (6, 8)]
    assert chunk_ranges(3, 16) == [(0, 8)]


def test_threads_and_chunking_do_not_change_bits():
    rng = np.random.default_rng(0)
    data = rng.normal(size=1 << 12) * 10.0 ** rng.integers(-8, 8, size=1 << 12)
    extra = rng.normal(size=(1 << 12, 3))

    def fn(a, b):
        return data[a:b], extra[a:b]

    ref = (tree_sum(data), tree_sum(extra))
    for chunk_log2 in (0, 3, 7, 12, 16):
        for threads in (1, 3, 8):
            s, e = map_tree_sum(fn, 12, threads, chunk_log2)
            assert s.tobytes() == ref[0].tobytes()
            assert e.tobytes() == ref[1].tobytes()
