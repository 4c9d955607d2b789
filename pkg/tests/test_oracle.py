import math

import numpy as np
import pytest

from binpipe.oracle import ImageDiff, brute_bin_assign, compare_images, reference_render
from binpipe.pipelines.scenes import quad
from binpipe.pipelines.shading import BACKGROUND
from binpipe.primitives import OBJTRI


def test_empty_scene_is_background():
    img = reference_render(np.zeros(0, dtype=OBJTRI), (8, 6))
    assert img.shape == (6, 8, 3)
    assert (img == np.array(BACKGROUND)).all()


def test_compare_images_reports_first_pixel():
    a = np.zeros((4, 5, 3))
    b = a.copy()
    b[2, 3, 1] = 0.25
    b[3, 0, 0] = 0.5
    d = compare_images(a, b)
    assert d == ImageDiff(2, 0.5, (3, 2))
    assert not d.identical and "2 differing" in str(d)
    assert compare_images(a, a.copy()).identical


def test_compare_images_bitwise():
    a = np.zeros((1, 1, 3))
    b = a.copy()
    b[0, 0, 0] = -0.0
    assert compare_images(a, b).count == 1
    with pytest.raises(ValueError):
        compare_images(a, np.zeros((2, 1, 3)))


def test_brute_bin_assign_edges():
    assert brute_bin_assign((0, 0, 0, 0), (10, 10), (30, 30)) == [0]
    assert brute_bin_assign((10, 10, 10, 10), (10, 10), (30, 30)) == [0, 1, 3, 4]
    assert brute_bin_assign((math.nan, 0, 1, 1), (10, 10), (30, 30)) == []
    assert brute_bin_assign((31, 31, 40, 40), (10, 10), (30, 30)) == []


def test_quad_reference_deterministic():
    a = reference_render(quad().prims, (64, 48))
    b = reference_render(quad().prims, (64, 48))
    assert a.tobytes() == b.tobytes()
    assert (a != np.array(BACKGROUND)).any(-1).sum() > 64 * 48 // 4


def test_triangle_behind_camera_culled():
    t = quad().prims.copy()
    t["p"][:, :, 2] += 10.0
    img = reference_render(t, (32, 24))
    assert (img == np.array(BACKGROUND)).all()
