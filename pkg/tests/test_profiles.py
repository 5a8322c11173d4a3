from __future__ import annotations

import pytest

from hwnas.errors import (
    DuplicateKeyError,
    MissingLatencyError,
    NonPositiveLatencyError,
    ParseError,
)
from hwnas.profiles import (
    CSV_HEADER,
    CostRules,
    HardwareKind,
    LatencyTable,
    coverage_check,
    load_latency_table,
    save_latency_table,
    synth_profile,
)

SEEDS = range(5)


def _grouped_kernel_variants(pool):
    """Ids grouped by (family, expansion, se) across kernels 3/5/7."""
    groups = {}
    for op in pool:
        if op.family.value == "ChoiceX":
            continue
        groups.setdefault((op.family, op.expansion, op.se), []).append(op)
    return {key: sorted(ops, key=lambda o: o.kernel)
            for key, ops in groups.items()}


def test_synth_profile_reproducible(backbone20, pool):
    t1 = synth_profile(HardwareKind.VPU, backbone20, pool, seed=42)
    t2 = synth_profile(HardwareKind.VPU, backbone20, pool, seed=42)
    assert t1.entries == t2.entries
    assert t1.hardware == "vpu"
    t3 = synth_profile(HardwareKind.VPU, backbone20, pool, seed=43)
    assert t1.entries != t3.entries


def test_synth_profile_full_coverage(backbone20, pool):
    table = synth_profile(HardwareKind.DSP, backbone20, pool, seed=0)
    assert len(table.entries) == 20 * 32
    assert coverage_check(table, backbone20, pool) == []


def test_dsp_kernel_monotonicity(backbone20, pool):
    groups = _grouped_kernel_variants(pool)
    for seed in SEEDS:
        table = synth_profile(HardwareKind.DSP, backbone20, pool, seed=seed)
        for layer in range(1, 21):
            for ops in groups.values():
                lats = [table.latency(layer, op.id) for op in ops]
                assert lats == sorted(lats), \
                    f"seed {seed} layer {layer}: {[o.id for o in ops]} -> {lats}"


def test_vpu_se_penalty_ratio(backbone20, pool):
    for seed in SEEDS:
        table = synth_profile(HardwareKind.VPU, backbone20, pool, seed=seed)
        ratio = table.latency(2, "Choice_3_SE") / table.latency(2, "Choice_3")
        assert ratio > 10


def test_cpu_choice3_cheapest_at_56x64(backbone20, pool):
    for seed in SEEDS:
        table = synth_profile(HardwareKind.CPU, backbone20, pool, seed=seed)
        lats = {op.id: table.latency(2, op.id) for op in pool}
        assert min(lats, key=lats.get) == "Choice_3"


def test_all_latencies_positive(backbone20, pool):
    for kind in HardwareKind:
        table = synth_profile(kind, backbone20, pool, seed=1)
        assert all(ms > 0 for ms in table.entries.values())


def test_custom_rules_accepted(backbone20, pool):
    rules = CostRules(base_ms=1e-8, w_flops=1.0, w_mem=0.1,
                      kernel_penalty=(1.0, 2.0, 4.0), se_penalty=2.0)
    table = synth_profile(rules, backbone20, pool, seed=0)
    assert table.hardware == "custom"
    assert len(table.entries) == 640


def test_save_load_round_trip(tmp_path, backbone20, pool):
    table = synth_profile(HardwareKind.CPU, backbone20, pool, seed=5)
    path = tmp_path / "cpu.csv"
    save_latency_table(table, path)
    loaded = load_latency_table(path)
    assert loaded.hardware == table.hardware
    assert loaded.entries == table.entries  # full-precision floats


def test_load_well_formed_640_rows(tmp_path, backbone20, pool):
    path = tmp_path / "t.csv"
    save_latency_table(synth_profile(HardwareKind.DSP, backbone20, pool, 0), path)
    table = load_latency_table(path)
    assert len(table.entries) == 640


def test_load_rejects_zero_latency(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text(f"{CSV_HEADER}\ncpu,1,SEP_3,0.0\n")
    with pytest.raises(NonPositiveLatencyError):
        load_latency_table(path)


def test_load_rejects_duplicate_key(tmp_path):
    path = tmp_path / "dup.csv"
    path.write_text(f"{CSV_HEADER}\ncpu,3,SEP_3,1.0\ncpu,3,SEP_3,2.0\n")
    with pytest.raises(DuplicateKeyError):
        load_latency_table(path)


def test_load_rejects_bad_header(tmp_path):
    path = tmp_path / "hdr.csv"
    path.write_text("latency,layer\n")
    with pytest.raises(ParseError):
        load_latency_table(path)


def test_load_parse_error_names_line(tmp_path):
    path = tmp_path / "mangled.csv"
    path.write_text(f"{CSV_HEADER}\ncpu,1,SEP_3,1.0\ncpu,not_an_int,SEP_3,1.0\n")
    with pytest.raises(ParseError) as err:
        load_latency_table(path)
    assert err.value.line == 3


def test_load_rejects_mixed_hardware(tmp_path):
    path = tmp_path / "mixed.csv"
    path.write_text(f"{CSV_HEADER}\ncpu,1,SEP_3,1.0\ndsp,1,SEP_5,1.0\n")
    with pytest.raises(ParseError):
        load_latency_table(path)


def test_coverage_check_reports_missing(backbone20, pool):
    table = synth_profile(HardwareKind.DSP, backbone20, pool, seed=0)
    entries = dict(table.entries)
    del entries[(3, "SEP_3")]
    partial = LatencyTable(hardware="dsp", entries=entries)
    assert coverage_check(partial, backbone20, pool) == [(3, "SEP_3")]


def test_coverage_check_empty_table(backbone20, pool):
    empty = LatencyTable(hardware="dsp", entries={})
    assert len(coverage_check(empty, backbone20, pool)) == 640


def test_missing_latency_error_names_pair(backbone20, pool):
    empty = LatencyTable(hardware="dsp", entries={})
    with pytest.raises(MissingLatencyError) as err:
        empty.latency(4, "MB_3_6")
    assert err.value.layer == 4
    assert err.value.operator == "MB_3_6"
