import numpy as np
from hypothesis import given, strategies as st

from binpipe.graph import bin_grid, bin_rect
from binpipe.oracle import brute_bin_assign
from binpipe.runtime.binning import (
    bbox_bins,
    bin_at,
    ceil_chunks,
    even_chunk,
    group_by_bin,
    round_robin_bins,
)
from binpipe.runtime.dispatch import split_units

SCREEN = (1024, 768)
GRIDS = [(1024, 768), (128, 96), (32, 24), (8, 8)]

coord = st.floats(-50, 1100, allow_nan=False)


@given(st.sampled_from(GRIDS), coord, coord, coord, coord)
def test_bbox_bins_matches_brute(bs, a, b, c, d):
    box = (min(a, c), min(b, d), max(a, c), max(b, d))
    _, bins = bbox_bins([box[0]], [box[1]], [box[2]], [box[3]], bs, SCREEN)
    assert bins.tolist() == brute_bin_assign(box, bs, SCREEN)


def test_example_box_on_corner():
    _, bins = bbox_bins([0.0], [0.0], [20.0], [20.0], (10, 10), (40, 40))
    # closed rectangles: the box touches the bins that start at x=20 and y=20
    assert sorted(bins.tolist()) == [0, 1, 2, 4, 5, 6, 8, 9, 10]


def test_bbox_bins_nonfinite_and_offscreen():
    p, b = bbox_bins([np.nan, 2000.0], [0.0, 0.0], [1.0, 2100.0], [1.0, 5.0], (8, 8), SCREEN)
    assert len(b) == 0


def test_clipped_grid_and_rect():
    assert bin_grid((100, 100), (250, 120)) == (3, 2)
    assert bin_rect(5, (100, 100), (250, 120)) == (200, 100, 250, 120)
    assert bin_at(249, 119, (100, 100), (250, 120)) == 5


def test_round_robin_is_balanced():
    b = round_robin_bins(1000, 7, 3)
    counts = np.bincount(b, minlength=7)
    assert counts.max() - counts.min() <= 1
    assert b[0] == 3


def test_group_by_bin_stable():
    batch = np.arange(6)
    out = group_by_bin(batch, np.array([0, 1, 2, 3, 4, 5]), np.array([2, 0, 2, 0, 1, 2]))
    assert [(k, v.tolist()) for k, v in out] == [(0, [1, 3]), (1, [4]), (2, [0, 2, 5])]


@given(st.integers(0, 500), st.integers(1, 64), st.integers(1, 8))
def test_chunks_partition(n, size, workers):
    for step in (size, None):
        units = split_units(0, 0, np.arange(n), step, workers)
        got = np.concatenate([u.batch for u in units]) if units else np.zeros(0, int)
        assert got.tolist() == list(range(n))
    assert ceil_chunks(n, size) == ([(a, min(a + size, n)) for a in range(0, n, size)])
    assert even_chunk(n, workers) * workers >= n
