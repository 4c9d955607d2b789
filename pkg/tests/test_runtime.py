import threading

import numpy as np
import pytest

from binpipe.graph import (
    AssignKind,
    BinAssignDirective,
    BinConfig,
    PipelineGraph,
    ScheduleDirective,
    ScheduleKind,
    StageDecl,
    add_stage,
    chain,
    connect,
)
from binpipe.render import render
from binpipe.pipelines.scenes import quad
from binpipe.pipelines.variants import build_variant
from binpipe.runtime import LoopCapExceeded, PhaseError
from binpipe.runtime.executor import execute
from binpipe.synthesis import synthesize


class Sink:
    def __init__(self):
        self.lock = threading.Lock()
        self.seen = []
        self.chunks = []


def stage(name, process, out=(), assign=AssignKind.PREVIOUS_BINS, bins=(0, 0), schedule=ScheduleKind.LOAD_BALANCE,
          split=None, fn=None):
    return StageDecl(name=name, process=process, input_type="item", output_types=tuple(out),
                     bin_config=BinConfig(*bins), assign_bin=BinAssignDirective(assign, fn),
                     schedule=ScheduleDirective(schedule, split))


def forward(batch, ctx):
    ctx.emit(batch * 2)


def collect(batch, ctx):
    with ctx.targets.lock:
        ctx.targets.seen.extend(batch.tolist())
        ctx.targets.chunks.append(len(batch))


def spread(batch, actx):
    return np.arange(len(batch)) % actx.nbins


def two_stage(schedule=ScheduleKind.LOAD_BALANCE, split=None):
    g = PipelineGraph(screen=(64, 64), name="t")
    g = add_stage(g, stage("Gen", forward, ["item"], AssignKind.CUSTOM, (16, 16), fn=spread))
    g = add_stage(g, stage("Use", collect, (), bins=(16, 16), schedule=schedule, split=split))
    return chain(g, "Gen", "Use")


@pytest.mark.parametrize("workers", [1, 4])
@pytest.mark.parametrize("kind", list(ScheduleKind))
def test_every_item_processed_exactly_once(workers, kind):
    g = two_stage(kind, 7 if kind is ScheduleKind.ALL else None)
    sink = Sink()
    _, st = execute(synthesize(g), np.arange(500), workers=workers, targets=sink, strip_mine=128)
    assert sorted(sink.seen) == [2 * i for i in range(500)]
    assert st.exactly_once and st.conserved
    assert st.strips == 4


def test_split_all_respects_tile_size():
    g = two_stage(ScheduleKind.ALL, 5)
    sink = Sink()
    execute(synthesize(g), np.arange(300), workers=2, targets=sink)
    assert max(sink.chunks) <= 5


def countdown(batch, ctx):
    ctx.emit(batch[batch > 0] - 1, 0)
    ctx.emit(batch[batch == 0], 1)


def loop_graph():
    g = PipelineGraph(screen=(32, 32), name="loop")
    g = add_stage(g, stage("Dec", countdown, ["item", "item"]))
    g = add_stage(g, stage("Use", collect))
    g = connect(g, "Dec", 0, "Dec")
    return connect(g, "Dec", 1, "Use")


def test_loop_runs_until_empty():
    sink = Sink()
    _, st = execute(synthesize(loop_graph()), np.array([0, 3, 5]), targets=sink, cycle_cap=8)
    assert sorted(sink.seen) == [0, 0, 0]
    assert max(st.loop_iterations.values()) == 6
    assert st.exactly_once and st.conserved


def test_loop_cap_exceeded():
    with pytest.raises(LoopCapExceeded) as e:
        execute(synthesize(loop_graph()), np.array([10]), targets=Sink(), cycle_cap=4)
    assert e.value.cap == 4


def boom(batch, ctx):
    raise RuntimeError("bad input")


def test_phase_error_names_stage():
    g = PipelineGraph(screen=(32, 32), name="boom")
    g = add_stage(g, stage("Gen", forward, ["item"]))
    g = add_stage(g, stage("Bad", boom))
    g = chain(g, "Gen", "Bad")
    with pytest.raises(PhaseError) as e:
        execute(synthesize(g), np.arange(3), targets=Sink())
    assert e.value.stage == "Bad"
    assert "bad input" in str(e.value)


def test_custom_assign_out_of_range():
    bad = lambda batch, actx: np.full(len(batch), actx.nbins)
    g2 = PipelineGraph(screen=(64, 64), name="t")
    g2 = add_stage(g2, stage("Gen", forward, ["item"], AssignKind.CUSTOM, (16, 16), fn=bad))
    g2 = add_stage(g2, stage("Use", collect))
    g2 = chain(g2, "Gen", "Use")
    with pytest.raises(PhaseError):
        execute(synthesize(g2), np.arange(3), targets=Sink())


def test_fused_pipeline_has_no_traffic():
    res = render(build_variant("freepipe", (128, 96)), quad())
    assert res.stats.inter_stage_traffic == 0
    res = render(build_variant("baseline", (128, 96)), quad())
    assert res.stats.inter_stage_traffic > 0
    assert res.stats.exactly_once and res.stats.conserved


def test_bad_executor_arguments():
    m = synthesize(two_stage())
    with pytest.raises(ValueError):
        execute(m, np.arange(3), workers=0)
    with pytest.raises(ValueError):
        execute(m, {"Use": np.arange(3)})
