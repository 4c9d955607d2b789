import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from binpipe.imageio import quantize, read_ppm, write_ppm


def test_quantize_rounding():
    v = np.array([[[0.0, 1.0, 2.0], [-1.0, 0.5 / 255, 0.4 / 255]]])
    assert quantize(v).tolist() == [[[0, 255, 255], [0, 1, 0]]]


@given(arrays(np.float64, (3, 4, 3), elements=st.floats(0, 1)))
def test_round_trip(img):
    import tempfile, os
    with tempfile.TemporaryDirectory() as d:
        p = os.path.join(d, "x.ppm")
        write_ppm(p, img)
        assert (read_ppm(p) == quantize(img)).all()


def test_header_comment(tmp_path):
    p = tmp_path / "c.ppm"
    p.write_bytes(b"P6\n# made by hand\n1 1\n255\n\x01\x02\x03")
    assert read_ppm(p).tolist() == [[[1, 2, 3]]]
    p.write_bytes(b"P6\n2 2\n255\n\x01")
    with pytest.raises(ValueError):
        read_ppm(p)
    p.write_bytes(b"P3\n1 1\n255\n1 2 3")
    with pytest.raises(ValueError):
        read_ppm(p)
