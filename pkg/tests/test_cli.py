import io
import json
import subprocess
import sys

import pytest

from binpipe.cli import main
from binpipe.imageio import read_ppm

SMALL = ["--screen", "160x120"]


def run(*argv):
    out = io.StringIO()
    code = main(list(argv), out)
    return code, out.getvalue()


@pytest.mark.parametrize("variant,kernels", [("freepipe", 1), ("baseline", 5), ("binned_fused", 4)])
def test_inspect_kernel_counts(variant, kernels):
    code, text = run("inspect", "--variant", variant)
    assert code == 0
    assert f"kernels: {kernels}" in text


def test_inspect_stop_after():
    code, text = run("inspect", "--variant", "freepipe", "--stop-after", "baseline")
    assert code == 0 and "kernels: 5" in text


def test_render_deterministic_across_workers(tmp_path):
    imgs = []
    for w in (1, 3):
        p = tmp_path / f"w{w}.ppm"
        s = tmp_path / f"w{w}.json"
        code, _ = run("render", "--variant", "binned", *SMALL, "--proc-scene", "soup:n=300,seed=2",
                      "--workers", str(w), "--out", str(p), "--stats", str(s))
        assert code == 0
        imgs.append(p.read_bytes())
        st = json.loads(s.read_text())
        assert st["units"]["exactly_once"] and st["conservation"]["ok"]
    assert imgs[0] == imgs[1]
    assert read_ppm(tmp_path / "w1.ppm").shape == (120, 160, 3)


def test_verify_passes_and_fault_fails():
    code, text = run("verify", "--variant", "deferred", *SMALL, "--proc-scene", "soup:n=300,seed=2")
    assert code == 0 and "0 differing pixels" in text and "PASS" in text
    code, text = run("verify", "--variant", "deferred", *SMALL, "--proc-scene", "soup:n=300,seed=2",
                     "--fault", "skew-depth")
    assert code == 1 and "FAIL" in text


def test_verify_reyes():
    code, text = run("verify", "--variant", "reyes", *SMALL, "--proc-scene", "patch-array:n=2")
    assert code == 0, text


def test_bench_json(tmp_path):
    p = tmp_path / "b.json"
    code, text = run("bench", "--variant", "freepipe", "--variant", "baseline@*.schedule=Serialize", *SMALL,
                     "--proc-scene", "soup:n=100,seed=1", "--repeat", "2", "--shader-cost", "0,4",
                     "--out", str(p))
    assert code == 0
    doc = json.loads(p.read_text())
    assert len(doc["rows"]) == 4
    assert set(doc["fastest"]) == {"0", "4"}
    rows = {(r["config"], r["shader_cost"]): r for r in doc["rows"]}
    assert rows[("freepipe", 0)]["inter_stage_traffic"] == 0
    assert rows[("baseline@*.schedule=Serialize", 4)]["kernels"] == 1
    assert "fastest at K=0" in text


def test_export_and_load(tmp_path):
    p = tmp_path / "g.json"
    assert run("export", "--variant", "binned", *SMALL, "--out", str(p))[0] == 0
    code, text = run("inspect", "--pipeline-file", str(p))
    assert code == 0 and "160x120" in text
    code, _ = run("verify", "--pipeline-file", str(p), "--proc-scene", "quad")
    assert code == 0


@pytest.mark.parametrize("argv", [
    ["render", "--variant", "binned", "--scene", "/nonexistent.obj"],
    ["render", "--variant", "binned", "--override", "Nope.bin=8x8"],
    ["render", "--variant", "binned", "--proc-scene", "cube"],
    ["inspect", "--variant", "binned", "--stop-after", "bogus"],
])
def test_errors_exit_2(argv, capsys):
    assert main(argv, io.StringIO()) == 2
    assert capsys.readouterr().err.startswith("binpipe: error:")


def test_bad_screen_is_usage_error():
    with pytest.raises(SystemExit) as e:
        main(["inspect", "--screen", "10by10"], io.StringIO())
    assert e.value.code == 2


def test_console_script_module():
    r = subprocess.run([sys.executable, "-m", "binpipe.cli", "inspect", "--variant", "freepipe"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and "kernels: 1" in r.stdout
