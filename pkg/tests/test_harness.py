import json
from pathlib import Path

import pytest

from ulp_memsim._config import RunLimits
from ulp_memsim.errors import ConfigParseError, ExperimentError, MemSimError, TraceError
from ulp_memsim.harness import (
    COLUMNS,
    PMCA_SPEEDUP,
    POWER_REPORT,
    STRIDE_SWEEP,
    Experiment,
    ResultTable,
    build_trace,
    ccr_grid,
    emit_csv,
    load_experiment,
    load_experiment_file,
    read_csv,
    run_experiment,
    run_experiment_async,
)
from ulp_memsim.host import TraceRecord, write_trace


EXPERIMENTS = Path(__file__).resolve().parent.parent / "experiments"


def _stride_experiment(seed=1):
    return Experiment(
        STRIDE_SWEEP,
        {"strides": [1, 8, 16], "configs": ["hyper-llc", "hyper"]},
        seed=seed,
        name="stride_sweep",
    )


@pytest.mark.parametrize("path", sorted(EXPERIMENTS.glob("*.json")), ids=lambda path: path.stem)
def test_shipped_experiments_load(path):
    e = load_experiment_file(path)
    assert e.output_name == path.stem
    assert e.base_dir == EXPERIMENTS


@pytest.mark.parametrize(
    "text, exp_error, exp_msg", (
        ('{"kind": "stride-sweep",', ConfigParseError, "malformed experiment"),
        ("[]", ConfigParseError, "experiment must be an object"),
        ('{"kind": "fft"}', ExperimentError, "unknown experiment kind 'fft'"),
        ('{"kind": "power-report", "parameters": []}', ExperimentError, "parameters must be an object"),
        ('{"kind": "power-report", "seed": true}', ExperimentError, "seed must be an integer"),
    )
)
def test_load_experiment_errors(text, exp_error, exp_msg):
    with pytest.raises(exp_error, match=exp_msg):
        load_experiment(text)


def test_load_experiment_file_missing(tmp_path):
    with pytest.raises(ExperimentError, match="cannot read"):
        load_experiment_file(tmp_path / "missing.json")


@pytest.mark.asyncio
async def test_power_report(soc_config):
    table = await run_experiment_async(soc_config, Experiment(POWER_REPORT))

    assert table.columns == COLUMNS[POWER_REPORT]
    rows = table.as_dicts()
    assert [row["component"] for row in rows] == ["top", "cva6", "pmca", "mem-ctrl", "total"]
    assert rows[-1]["power_mw"] == pytest.approx(237.74)


@pytest.mark.asyncio
async def test_pmca_speedup(soc_config):
    e = Experiment(PMCA_SPEEDUP, {"kernels": ["matmul-int8"], "invocations": [1, 1000]})

    table = await run_experiment_async(soc_config, e, RunLimits(max_concurrency=2))

    assert table.column("kernel") == ["matmul-int8", "matmul-int8"]
    assert table.column("invocations") == [1, 1000]
    assert table.column("overhead_cycles") == [18_621, 18_621]
    assert table.column("speedup") == pytest.approx([100.85, 114.05], rel=1e-3)
    assert table.column("gops") == pytest.approx([13.8, 13.8])
    assert table.column("gops_per_w")[0] == pytest.approx(156.498, rel=1e-4)


@pytest.mark.asyncio
async def test_pmca_speedup_unknown_kernel(soc_config):
    e = Experiment(PMCA_SPEEDUP, {"kernels": ["matmul-int8", "conv2d"]})
    with pytest.raises(ExperimentError, match="unknown kernel 'conv2d'"):
        await run_experiment_async(soc_config, e)


@pytest.mark.asyncio
async def test_pmca_speedup_custom_catalog(soc_config, tmp_path):
    tiny = {"name": "tiny", "benchmark": "dsp-fp32", "total_ops": 32000, "bytes_in": 1024, "bytes_out": 1024}
    (tmp_path / "kernels.json").write_text(json.dumps({"kernels": [tiny]}), encoding="utf-8")
    e = Experiment(PMCA_SPEEDUP, {"catalog": "kernels.json", "invocations": [1]}, base_dir=tmp_path)

    table = await run_experiment_async(soc_config, e)

    assert table.column("kernel") == ["tiny"]
    assert table.column("host_cycles") == [64_000.0]


@pytest.mark.asyncio
async def test_stride_sweep(soc_config):
    table = await run_experiment_async(soc_config, _stride_experiment())

    assert table.columns == COLUMNS[STRIDE_SWEEP]
    assert table.column("stride") == [1, 1, 8, 8, 16, 16]
    assert table.column("config") == ["hyper-llc", "hyper"] * 3
    assert table.column("l1_miss_ratio") == [0.0, 0.0, 0.0, 0.0, 1.0, 1.0]


def test_stride_sweep_csv_is_deterministic(soc_config, tmp_path):
    first = emit_csv(run_experiment(soc_config, _stride_experiment()), tmp_path / "first.csv")
    second = emit_csv(
        run_experiment(soc_config, _stride_experiment(), RunLimits(max_concurrency=1)), tmp_path / "second.csv"
    )

    assert first.read_bytes() == second.read_bytes()
    assert first.read_text(encoding="utf-8").splitlines()[0] == ",".join(COLUMNS[STRIDE_SWEEP])


def test_random_trace_replay_is_seeded(soc_config):
    def replay(seed):
        e = Experiment("trace-replay", {"generator": {"kind": "random", "n": 2_000, "span": 262_144}}, seed=seed)
        return run_experiment(soc_config, e).rows

    assert replay(3) == replay(3)
    assert replay(3) != replay(4)


@pytest.mark.asyncio
async def test_llc_compare_with_config_variant(soc_config):
    e = Experiment(
        "llc-compare",
        {
            "generator": {"kind": "random", "n": 3_000, "span": 1_048_576},
            "configs": ["hyper-llc", "hyper-single-bus"],
            "config_overrides": {
                "hyper-single-bus": {
                    "memory": "hyper-llc",
                    "config": {
                        "hyper": {"n_buses": 1},
                        "address_map": {"dram": {"size": "0x10000000"}, "cacheable_window": {"size": "0x10000000"}},
                    },
                }
            },
        },
        seed=7,
    )

    table = await run_experiment_async(soc_config, e)

    dual, single = table.as_dicts()
    assert (dual["config"], single["config"]) == ("hyper-llc", "hyper-single-bus")
    assert dual["backend_read_bytes"] == single["backend_read_bytes"]
    assert dual["cycles"] < single["cycles"]


@pytest.mark.parametrize(
    "parameters, exp_msg", (
        ({"configs": ["hyper-l3"]}, "unresolvable config variant 'hyper-l3'"),
        (
            {"configs": ["fast"], "config_overrides": {"fast": {"memory": "sram"}}},
            "names unknown memory configuration 'sram'",
        ),
        ({"configs": ["x"], "config_overrides": {"x": "oops"}}, "config variant 'x' must be an object"),
        ({"configs": ["x"], "config_overrides": {"x": {"config": []}}}, "config of variant 'x' must be an object"),
        ({"generator": {"kind": "zipf"}}, "unknown trace generator 'zipf'"),
        ({"generator": {"kind": "random", "n": 10, "span": 64, "skew": 2}}, "bad random generator arguments"),
        ({"trace": "missing.trace"}, "cannot read trace"),
    )
)
def test_llc_compare_errors(soc_config, tmp_path, parameters, exp_msg):
    with pytest.raises(ExperimentError, match=exp_msg):
        run_experiment(soc_config, Experiment("llc-compare", parameters, base_dir=tmp_path))


def test_trace_replay_from_file(soc_config, tmp_path):
    records = [TraceRecord("read", 0x8000_0000), TraceRecord("write", 0x8000_0008), TraceRecord("read", 0x1C00_0000)]
    (tmp_path / "short.trace").write_text(write_trace(records), encoding="utf-8")
    (tmp_path / "replay.json").write_text(
        json.dumps({"kind": "trace-replay", "parameters": {"trace": "short.trace", "config": "ddr4"}}),
        encoding="utf-8",
    )

    table = run_experiment(soc_config, load_experiment_file(tmp_path / "replay.json"))

    (row,) = table.as_dicts()
    assert (row["config"], row["records"], row["l1_misses"]) == ("ddr4", 3, 2)
    assert (row["backend_read_bytes"], row["backend_write_bytes"]) == (64, 8)


def test_trace_replay_unmapped_record(soc_config, tmp_path):
    (tmp_path / "bad.trace").write_text("R,0x80000000,8\nR,0x40000000,8\n", encoding="utf-8")
    e = Experiment("trace-replay", {"trace": "bad.trace"}, base_dir=tmp_path)

    with pytest.raises(TraceError, match="record 1"):
        run_experiment(soc_config, e)


def test_build_trace_stride_generator(soc_config):
    e = Experiment("trace-replay", {"generator": {"kind": "stride", "stride_s": 2, "rounds": 3}})

    trace, warmup = build_trace(soc_config, e)

    assert warmup == 512 + 64
    assert len(trace) == 512 + 3 * 64


def test_ccr_grid():
    grid = ccr_grid({"ccr_grid": {"start": 4.0, "stop": 0.25, "points": 5}})

    assert grid == pytest.approx([4.0, 2.0, 1.0, 0.5, 0.25])
    with pytest.raises(ExperimentError, match="positive start, stop and points"):
        ccr_grid({"ccr_grid": {"stop": 0}})


@pytest.mark.asyncio
async def test_ccr_efficiency(soc_config):
    e = Experiment("ccr-efficiency", {"ccr_grid": {"start": 4.0, "stop": 0.1, "points": 12}})

    table = await run_experiment_async(soc_config, e)

    rows = table.as_dicts()
    assert len(rows) == 12
    assert rows[0]["kernel"] == "ccr-4"
    for row in rows:
        if row["ccr_hyper"] >= 1:
            assert row["relative_efficiency"] == pytest.approx(2.0)
            assert row["gops_lpddr"] == pytest.approx(row["gops_hyper"], rel=1e-3)
    efficiencies = [row["relative_efficiency"] for row in rows]
    assert all(later <= earlier + 1e-9 for earlier, later in zip(efficiencies, efficiencies[1:]))
    assert efficiencies[-1] < 1.0


def test_emit_empty_table(tmp_path):
    path = emit_csv(ResultTable(POWER_REPORT, COLUMNS[POWER_REPORT]), tmp_path / "empty.csv")

    assert path.read_text(encoding="utf-8") == "component,freq_mhz,leakage_mw,dynamic_uw_per_mhz,power_mw\n"
    assert read_csv(path, POWER_REPORT).rows == []


def test_csv_round_trip(soc_config, tmp_path):
    table = run_experiment(soc_config, Experiment(PMCA_SPEEDUP, {"invocations": [1]}))

    path = emit_csv(table, tmp_path / "pmca.csv")
    loaded = read_csv(path, PMCA_SPEEDUP)

    assert loaded.columns == table.columns
    assert loaded.column("kernel") == table.column("kernel")
    assert loaded.column("invocations") == [1, 1, 1]
    assert loaded.column("speedup") == pytest.approx(table.column("speedup"), rel=1e-5)
    assert path.read_text(encoding="utf-8").splitlines()[1].startswith("matmul-int8,1,")


def test_emit_csv_unwritable(tmp_path):
    with pytest.raises(MemSimError, match="cannot write"):
        emit_csv(ResultTable(POWER_REPORT, COLUMNS[POWER_REPORT]), tmp_path / "missing" / "out.csv")
