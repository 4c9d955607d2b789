import json

import pytest

from binpipe.description import DescriptionError, doc_to_graph, dump_pipeline, dumps, graph_to_doc, load_pipeline
from binpipe.pipelines.variants import VARIANTS, build_variant
from binpipe.pipelines.testgraphs import end_bin_blend
from binpipe.synthesis import synthesize


@pytest.mark.parametrize("name", VARIANTS)
def test_round_trip(name, tmp_path):
    g = build_variant(name, (320, 240))
    p = tmp_path / "g.json"
    dump_pipeline(g, p)
    h = load_pipeline(p)
    assert graph_to_doc(h) == graph_to_doc(g)
    assert len(synthesize(h).kernels) == len(synthesize(g).kernels)


def test_defaults_fill_in():
    doc = {"name": "tiny", "screen": [64, 64], "stages": [
        {"name": "VertexShader", "process": "vertex_shader", "input": "vertex", "outputs": ["triangle"]},
        {"name": "Rasterizer", "process": "rasterizer", "input": "triangle", "outputs": ["fragment"],
         "assign": "AssignToBoundingBox", "bin": [8, 8]},
        {"name": "DepthTest", "process": "depth_test", "input": "fragment", "outputs": ["fragment"]},
        {"name": "Composite", "process": "composite", "input": "fragment", "dependencies": ["EndBin"]},
    ], "edges": [["VertexShader", 0, "Rasterizer"], ["Rasterizer", 0, "DepthTest"], ["DepthTest", 0, "Composite"]]}
    g = doc_to_graph(doc)
    assert g.stage("VertexShader").bin_config.threads_per_bin == 64
    assert g.stage("Composite").dependencies[0].kind.value == "EndBin"


def test_end_stage_dependency_text():
    doc = graph_to_doc(end_bin_blend())
    assert any("EndBin" in s["dependencies"] for s in doc["stages"])


@pytest.mark.parametrize("mutate,msg", [
    (lambda d: d.update(extra=1), "unknown top-level"),
    (lambda d: d["stages"][0].update(colour="red"), "unknown keys"),
    (lambda d: d["stages"][0].pop("process"), "missing"),
    (lambda d: d["stages"][0].update(process="nope"), "nope"),
    (lambda d: d["stages"][0].update(schedule="Fastest"), "Fastest"),
    (lambda d: d.update(screen=[0, 10]), "screen"),
    (lambda d: d["edges"].append(["VertexShader", 0, "Ghost"]), "Ghost"),
    (lambda d: d["edges"].append(["VertexShader"]), "edge"),
])
def test_invalid_documents(mutate, msg):
    doc = json.loads(dumps(build_variant("baseline", (64, 64))))
    mutate(doc)
    with pytest.raises(DescriptionError, match=msg):
        doc_to_graph(doc)


def test_invalid_json(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{")
    with pytest.raises(DescriptionError):
        load_pipeline(p)
