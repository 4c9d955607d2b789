import numpy as np
import pytest

from binpipe.graph import ScheduleKind
from binpipe.oracle import compare_images, reference_render, reference_reyes
from binpipe.pipelines.scenes import load_obj, load_scene, patch_array, procedural, quad, soup, teapot
from binpipe.pipelines.variants import RASTER_VARIANTS, apply_overrides, build_variant, parse_override
from binpipe.render import render

SCREEN = (160, 120)


@pytest.fixture(scope="module")
def small_soup():
    return soup(400, "mixed", seed=3, screen=SCREEN)


@pytest.mark.parametrize("variant", RASTER_VARIANTS)
def test_variants_match_reference_small(variant, small_soup):
    ref = reference_render(small_soup.prims, SCREEN, small_soup.camera)
    res = render(build_variant(variant, SCREEN), small_soup)
    assert compare_images(res.image, ref).identical
    assert res.stats.exactly_once and res.stats.conserved


def test_forward_equals_deferred(small_soup):
    a = render(build_variant("binned", SCREEN), small_soup).image
    b = render(build_variant("deferred", SCREEN), small_soup).image
    assert a.tobytes() == b.tobytes()


def test_overrides_keep_image(small_soup):
    ref = render(build_variant("baseline", SCREEN), small_soup).image
    g = build_variant("binned", SCREEN, ["*.bin=32x16", "Rasterizer.schedule=All:64"])
    assert g.stage("Rasterizer").schedule.kind is ScheduleKind.ALL
    assert g.stage("FragmentShader").bin_config.bin_width == 32
    assert render(g, small_soup, workers=2).image.tobytes() == ref.tobytes()


@pytest.mark.parametrize("bad", ["Rasterizer", "x.bin=8", "x.schedule=Fast", "x.color=1"])
def test_parse_override_rejects(bad):
    with pytest.raises(ValueError):
        parse_override(bad)


def test_unknown_variant():
    with pytest.raises(ValueError):
        build_variant("gpu")


def test_reyes_small_patch_array():
    sc = patch_array(2)
    res = render(build_variant("reyes", SCREEN), sc)
    ref = reference_reyes(sc.prims, SCREEN, sc.camera)
    assert compare_images(res.image, ref).identical


def test_teapot_data():
    t = teapot()
    assert len(t.prims) == 32
    assert np.isfinite(t.prims["cp"]).all()


def test_procedural_specs():
    assert len(procedural("soup:n=50,size=small,seed=1")) == 50
    assert procedural("quad").name == "quad"
    assert len(procedural("patch-array:n=3")) == 9
    for bad in ("cube", "soup:n", "soup:size=huge"):
        with pytest.raises(ValueError):
            procedural(bad)


def test_soup_is_seeded():
    a = soup(100, "small", seed=4)
    b = soup(100, "small", seed=4)
    assert a.prims.tobytes() == b.prims.tobytes()
    assert a.prims.tobytes() != soup(100, "small", seed=5).prims.tobytes()


def test_load_obj(tmp_path):
    p = tmp_path / "m.obj"
    p.write_text("# square\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvn 0 0 1\nf 1//1 2//1 3//1 4//1\nf -4 -3 -2\n")
    tris = load_obj(p)
    assert len(tris) == 3
    assert (tris["n"][:2, :, 2] == 1.0).all()
    assert tris["n"][2, 0].tolist() == [0.0, 0.0, 1.0]
    sc = load_scene(p)
    assert sc.kind == "triangles"


def test_load_obj_bad_index(tmp_path):
    p = tmp_path / "m.obj"
    p.write_text("v 0 0 0\nf 1 2 3\n")
    with pytest.raises(ValueError):
        load_obj(p)


def test_load_patch_file(tmp_path):
    p = tmp_path / "one.patches"
    p.write_text("# a flat patch\n" + "\n".join(f"{c} {r} 0" for r in range(4) for c in range(4)) + "\n")
    sc = load_scene(p)
    assert sc.kind == "patches" and len(sc) == 1
    p.write_text("0 0 0\n")
    with pytest.raises(ValueError):
        load_scene(p)


def test_quad_covers_screen_centre():
    res = render(build_variant("freepipe", SCREEN), quad())
    assert res.targets.coverage > SCREEN[0] * SCREEN[1] // 4
