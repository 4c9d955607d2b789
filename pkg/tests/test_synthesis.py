import random
from collections import Counter

import pytest
from hypothesis import given, strategies as st

from binpipe.graph import ScheduleKind, normalize_bins
from binpipe.pipelines.testgraphs import (
    bucketing,
    end_bin_blend,
    end_stage_chain,
    linear_raster,
    random_dag,
    ray_trace_loop,
    shadow_map,
)
from binpipe.pipelines.variants import build_variant
from binpipe.synthesis import (
    PASSES,
    DispatchMode,
    Phase,
    SynthesisError,
    Sync,
    fusion_blockers,
    synthesis_report,
    synthesize,
)


def test_kernel_counts_for_shipped_variants():
    assert len(synthesize(build_variant("freepipe")).kernels) == 1
    assert len(synthesize(build_variant("baseline")).kernels) == 5
    m = synthesize(build_variant("binned_fused"))
    assert m.fused_with("Rasterizer", "FragmentShader")
    assert not m.fused_with("FragmentShader", "DepthTest")


def test_baseline_stops_before_passes():
    m = synthesize(linear_raster(ScheduleKind.DIRECT_MAP), "baseline")
    assert len(m.kernels) == 5
    assert all(k.dispatch.mode is DispatchMode.PRESCHEDULED for k in m.kernels)
    with pytest.raises(ValueError):
        synthesize(linear_raster(), "nonsense")


def test_preschedule_hoists_schedule():
    m = synthesize(linear_raster(ScheduleKind.DIRECT_MAP), "preschedule")
    k0 = m.kernels[0]
    assert ("Rasterizer", Phase.SCHEDULE) in k0.phases


def test_load_balance_schedule_eliminated():
    m = synthesize(linear_raster(ScheduleKind.LOAD_BALANCE), "eliminate")
    assert not any(ph is Phase.SCHEDULE for k in m.kernels for _, ph in k.phases)


def test_end_stage_gives_global_barrier_and_blocks_fusion():
    m = synthesize(end_stage_chain())
    k = m.kernels[m.kernel_of("Normalize")]
    assert k.entry_sync is Sync.GLOBAL
    assert not m.fused_with("Accumulate", "Normalize")
    assert m.fused_with("Produce", "Accumulate")


def test_end_bin_unsplit_fuses_with_local_barrier():
    m = synthesize(end_bin_blend())
    assert len(m.kernels) == 1
    assert m.kernels[0].sync_before("Blend") is Sync.LOCAL


def test_end_bin_split_becomes_global():
    m = synthesize(end_bin_blend(split=16))
    k = m.kernels[m.kernel_of("Blend")]
    assert k.entry_sync is Sync.GLOBAL
    assert not m.fused_with("Collect", "Blend")


def test_loop_kernels_are_not_fused():
    m = synthesize(ray_trace_loop())
    assert m.kernels[m.kernel_of("Intersect")].loop is not None
    assert not m.fused_with("Intersect", "Shade")


def test_depth_first_group_kernels():
    m = synthesize(bucketing())
    groups = {m.kernels[m.kernel_of(s)].group for s in ("Bucket", "Refine", "Resolve")}
    assert len(groups) == 1 and None not in groups
    assert m.kernels[m.kernel_of("Gather")].group is None


def test_shadow_map_fragment_shade_waits_globally():
    m = synthesize(shadow_map())
    assert m.kernels[m.kernel_of("FragmentShade")].entry_sync is Sync.GLOBAL


def test_fusion_blockers_explain():
    m = synthesize(linear_raster(ScheduleKind.LOAD_BALANCE))
    why = fusion_blockers(m.kernels[0], m.kernels[1], m.skeleton)
    assert "schedules differ" in why


def test_fused_wires_marked():
    m = synthesize(build_variant("freepipe"))
    assert all(w.fused for w in m.wiring)
    m = synthesize(build_variant("baseline"))
    assert not any(w.fused for w in m.wiring)


def test_report_text():
    text = synthesis_report(synthesize(build_variant("freepipe")))
    assert "kernels: 1" in text and "LocalPerBinBarrier" in text


def test_invalid_graph_rejected():
    from binpipe.graph import PipelineGraph
    with pytest.raises(SynthesisError):
        synthesize(PipelineGraph())


def process_multiset(m):
    return Counter(s for k in m.kernels for s, ph in k.phases if ph is Phase.PROCESS)


@given(st.integers(0, 2**32 - 1))
def test_passes_conserve_process_phases(seed):
    g = random_dag(random.Random(seed))
    want = Counter(g.stage_names)
    assert process_multiset(synthesize(g, "baseline")) == want
    for name, _ in PASSES:
        assert process_multiset(synthesize(g, name)) == want
    m = synthesize(g)
    # every stage ordered before its consumers' kernels (back edges excepted)
    for p, _, c in normalize_bins(g).edges:
        assert m.kernel_of(p) <= m.kernel_of(c)
