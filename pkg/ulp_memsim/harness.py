"""
Implements the experiment harness: experiment documents, the six experiment kinds, concurrent execution of
independent points and CSV output.
"""
import asyncio
import csv
import json
import logging
import math
import typing as t
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

from ulp_memsim._config import DEFAULT_RUN_LIMITS, RunLimits
from ulp_memsim.config import SocConfig
from ulp_memsim.constants import HYPER_LLC, MEMORY_CONFIGS
from ulp_memsim.errors import ConfigParseError, ExperimentError, MemSimError
from ulp_memsim.host import (
    SimResult,
    StrideBenchmarkSpec,
    TraceRecord,
    build_memory_system,
    gen_locality_trace,
    gen_random_trace,
    gen_stride_trace,
    read_trace,
    run_trace,
    stride_warmup,
)
from ulp_memsim.memory import DdrBackend, HyperRamBackend
from ulp_memsim.pmca import (
    KernelCatalog,
    KernelDescriptor,
    default_catalog,
    host_exec_cycles,
    kernel_from_calibration,
    load_catalog,
    offload_total_cycles,
    ops_for_ccr,
    transfer_cycles,
)
from ulp_memsim.power import host_gops_per_w, kernel_gops, kernel_gops_per_w, relative_efficiency, table_power_report
from ulp_memsim.utils import fmt_number


logger = logging.getLogger(__name__)

STRIDE_SWEEP = "stride-sweep"
LLC_COMPARE = "llc-compare"
TRACE_REPLAY = "trace-replay"
PMCA_SPEEDUP = "pmca-speedup"
CCR_EFFICIENCY = "ccr-efficiency"
POWER_REPORT = "power-report"

COLUMNS: t.Dict[str, t.Tuple[str, ...]] = {
    STRIDE_SWEEP: ("stride", "config", "l1_miss_ratio", "llc_miss_ratio", "cycles"),
    LLC_COMPARE: (
        "config",
        "records",
        "l1_miss_ratio",
        "llc_miss_ratio",
        "cycles",
        "backend_read_bytes",
        "backend_write_bytes",
    ),
    TRACE_REPLAY: (
        "config",
        "records",
        "cycles",
        "l1_hits",
        "l1_misses",
        "llc_hits",
        "llc_misses",
        "llc_evictions",
        "llc_writebacks",
        "backend_read_bytes",
        "backend_write_bytes",
        "seconds",
    ),
    PMCA_SPEEDUP: (
        "kernel",
        "invocations",
        "host_cycles",
        "pmca_cycles",
        "overhead_cycles",
        "speedup",
        "gops",
        "gops_per_w",
        "host_gops_per_w",
    ),
    CCR_EFFICIENCY: (
        "kernel",
        "ccr_hyper",
        "gops_hyper",
        "gops_lpddr",
        "gops_per_w_hyper",
        "gops_per_w_lpddr",
        "relative_efficiency",
    ),
    POWER_REPORT: ("component", "freq_mhz", "leakage_mw", "dynamic_uw_per_mhz", "power_mw"),
}

EXPERIMENT_KINDS = tuple(COLUMNS)

DEFAULT_STRIDES = (1, 2, 4, 8, 16, 32)
DEFAULT_INVOCATIONS = (1, 1000)
DEFAULT_CCR_GRID = {"start": 4.0, "stop": 0.1, "points": 40}

Row = t.Tuple[t.Any, ...]
Point = t.Callable[[], t.List[Row]]


@dataclass(frozen=True)
class Experiment:
    """
    One experiment document.

    Arguments:
    kind: one of ``stride-sweep``, ``llc-compare``, ``trace-replay``, ``pmca-speedup``, ``ccr-efficiency``,
        ``power-report``.
    parameters: kind-specific settings; missing ones take defaults.
    seed: seed of every randomized trace generator.
    name: stem of the CSV file; defaults to the kind.
    base_dir: directory that relative trace and catalog paths are resolved against.
    """

    kind: str
    parameters: t.Mapping[str, t.Any] = field(default_factory=dict)
    seed: int = 0
    name: Optional[str] = None
    base_dir: Optional[Path] = None

    @property
    def output_name(self) -> str:
        return self.name or self.kind

    def resolve(self, path: str) -> Path:
        candidate = Path(path)
        if candidate.is_absolute() or self.base_dir is None:
            return candidate
        return self.base_dir / candidate


@dataclass
class ResultTable:
    kind: str
    columns: t.Tuple[str, ...]
    rows: t.List[Row] = field(default_factory=list)

    def as_dicts(self) -> t.List[t.Dict[str, t.Any]]:
        return [dict(zip(self.columns, row)) for row in self.rows]

    def column(self, name: str) -> t.List[t.Any]:
        index = self.columns.index(name)
        return [row[index] for row in self.rows]


def load_experiment(text: str, base_dir: Optional[Path] = None) -> Experiment:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigParseError("malformed experiment: {msg}".format(msg=err.msg), err.lineno, err.colno)
    if not isinstance(data, dict):
        raise ConfigParseError("experiment must be an object")

    kind = data.get("kind")
    if kind not in EXPERIMENT_KINDS:
        raise ExperimentError("unknown experiment kind {kind!r}".format(kind=kind))
    parameters = data.get("parameters", {})
    if not isinstance(parameters, dict):
        raise ExperimentError("parameters must be an object")
    seed = data.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ExperimentError("seed must be an integer")
    return Experiment(kind, parameters, seed, data.get("name"), base_dir)


def load_experiment_file(path: t.Union[str, Path]) -> Experiment:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as err:
        raise ExperimentError("cannot read {path}: {err}".format(path=path, err=err.strerror))
    return load_experiment(text, path.parent)


def _variant(cfg: SocConfig, e: Experiment, name: str) -> t.Tuple[SocConfig, str]:
    """A configuration variant: a memory configuration name, or one declared under ``config_overrides``."""
    if name in MEMORY_CONFIGS:
        return cfg, name
    variants = e.parameters.get("config_overrides", {})
    if name not in variants:
        raise ExperimentError("unresolvable config variant {name!r}".format(name=name))
    variant = variants[name]
    if not isinstance(variant, dict):
        raise ExperimentError("config variant {name!r} must be an object".format(name=name))
    memory = variant.get("memory", HYPER_LLC)
    if memory not in MEMORY_CONFIGS:
        raise ExperimentError(
            "variant {name!r} names unknown memory configuration {memory!r}".format(name=name, memory=memory)
        )
    overrides = variant.get("config", {})
    if not isinstance(overrides, dict):
        raise ExperimentError("config of variant {name!r} must be an object".format(name=name))
    return cfg.with_overrides(overrides), memory


def _configs(cfg: SocConfig, e: Experiment) -> t.List[t.Tuple[str, SocConfig, str]]:
    names = e.parameters.get("configs", list(MEMORY_CONFIGS))
    return [(name, *_variant(cfg, e, name)) for name in names]


def _replay(cfg: SocConfig, memory: str, trace: t.Sequence[TraceRecord], warmup: int, label: str) -> SimResult:
    result = run_trace(trace, build_memory_system(cfg, memory), warmup)
    return replace(result, config=label)


def _stride_points(cfg: SocConfig, e: Experiment) -> t.List[Point]:
    rounds = int(e.parameters.get("rounds", 8))
    access_bytes = int(e.parameters.get("access_bytes", 8))
    configs = _configs(cfg, e)
    points = []
    for stride in e.parameters.get("strides", DEFAULT_STRIDES):
        spec = StrideBenchmarkSpec(int(stride), rounds, access_bytes)
        for label, variant_cfg, memory in configs:

            def point(spec=spec, label=label, variant_cfg=variant_cfg, memory=memory) -> t.List[Row]:
                base = variant_cfg.address_map.cacheable_window.base
                trace = gen_stride_trace(spec, variant_cfg.l1, base)
                result = _replay(variant_cfg, memory, trace, stride_warmup(spec, variant_cfg.l1), label)
                return [(spec.stride_s, label, result.l1_miss_ratio, result.llc_miss_ratio, result.cycles)]

            points.append(point)
    return points


def build_trace(cfg: SocConfig, e: Experiment) -> t.Tuple[t.List[TraceRecord], int]:
    """The trace of a replay experiment and its warm-up length, from a file or a seeded generator."""
    if "trace" in e.parameters:
        path = e.resolve(e.parameters["trace"])
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as err:
            raise ExperimentError("cannot read trace {path}: {err}".format(path=path, err=err.strerror))
        return read_trace(text), int(e.parameters.get("warmup", 0))

    generator = dict(e.parameters.get("generator", {"kind": "locality", "n": 20_000}))
    kind = generator.pop("kind", "locality")
    base = int(generator.pop("base", cfg.address_map.cacheable_window.base))
    try:
        if kind == "random":
            return gen_random_trace(e.seed, base=base, **generator), 0
        if kind == "locality":
            return gen_locality_trace(e.seed, base=base, **generator)
        if kind == "stride":
            spec = StrideBenchmarkSpec(**generator)
            return gen_stride_trace(spec, cfg.l1, base), stride_warmup(spec, cfg.l1)
    except TypeError as err:
        raise ExperimentError("bad {kind} generator arguments: {err}".format(kind=kind, err=err))
    raise ExperimentError("unknown trace generator {kind!r}".format(kind=kind))


def _llc_compare_points(cfg: SocConfig, e: Experiment) -> t.List[Point]:
    trace, warmup = build_trace(cfg, e)
    points = []
    for label, variant_cfg, memory in _configs(cfg, e):

        def point(label=label, variant_cfg=variant_cfg, memory=memory) -> t.List[Row]:
            r = _replay(variant_cfg, memory, trace, warmup, label)
            return [
                (
                    r.config,
                    r.records,
                    r.l1_miss_ratio,
                    r.llc_miss_ratio,
                    r.cycles,
                    r.backend_read_bytes,
                    r.backend_write_bytes,
                )
            ]

        points.append(point)
    return points


def _trace_replay_points(cfg: SocConfig, e: Experiment) -> t.List[Point]:
    trace, warmup = build_trace(cfg, e)
    label = e.parameters.get("config", HYPER_LLC)
    variant_cfg, memory = _variant(cfg, e, label)

    def point() -> t.List[Row]:
        r = _replay(variant_cfg, memory, trace, warmup, label)
        return [
            (
                r.config,
                r.records,
                r.cycles,
                r.l1_hits,
                r.l1_misses,
                r.llc_hits,
                r.llc_misses,
                r.llc_evictions,
                r.llc_writebacks,
                r.backend_read_bytes,
                r.backend_write_bytes,
                r.seconds,
            )
        ]

    return [point]


def _catalog(cfg: SocConfig, e: Experiment) -> KernelCatalog:
    if "catalog" not in e.parameters:
        return default_catalog(cfg.calibration)
    path = e.resolve(e.parameters["catalog"])
    try:
        return load_catalog(path.read_text(encoding="utf-8"), cfg.calibration)
    except OSError as err:
        raise ExperimentError("cannot read catalog {path}: {err}".format(path=path, err=err.strerror))


def _hyper_backend(cfg: SocConfig) -> HyperRamBackend:
    return HyperRamBackend(cfg.hyper, cfg.clocks.soc_mhz, cfg.address_map.dram.base)


def _lpddr_backend(cfg: SocConfig) -> DdrBackend:
    return DdrBackend(cfg.ddr, cfg.clocks.soc_mhz, cfg.address_map.dram.base)


def _pmca_points(cfg: SocConfig, e: Experiment) -> t.List[Point]:
    catalog = _catalog(cfg, e)
    names = e.parameters.get("kernels", list(catalog))
    unknown = [name for name in names if name not in catalog]
    if unknown:
        raise ExperimentError("unknown kernel {names}".format(names=", ".join(map(repr, unknown))))

    points = []
    for name in names:
        for invocations in e.parameters.get("invocations", DEFAULT_INVOCATIONS):
            kernel = replace(catalog[name], invocations=int(invocations))

            def point(k: KernelDescriptor = kernel) -> t.List[Row]:
                cost = offload_total_cycles(k, _hyper_backend(cfg), cfg.clocks)
                host = host_exec_cycles(k)
                return [
                    (
                        k.name,
                        k.invocations,
                        host,
                        cost.total_cycles,
                        cost.overhead_cycles,
                        host / cost.total_cycles,
                        kernel_gops(k, cfg.clocks),
                        kernel_gops_per_w(k, cfg),
                        host_gops_per_w(k, cfg),
                    )
                ]

            points.append(point)
    return points


def ccr_grid(parameters: t.Mapping[str, t.Any]) -> t.List[float]:
    """Log-spaced CCR targets, in declared order."""
    grid = {**DEFAULT_CCR_GRID, **parameters.get("ccr_grid", {})}
    if grid["start"] <= 0 or grid["stop"] <= 0 or int(grid["points"]) < 1:
        raise ExperimentError("ccr_grid needs positive start, stop and points")
    return [float(x) for x in np.logspace(math.log10(grid["start"]), math.log10(grid["stop"]), int(grid["points"]))]


def synthetic_kernel(cfg: SocConfig, parameters: t.Mapping[str, t.Any], target_ccr: float) -> KernelDescriptor:
    """A kernel with fixed traffic whose op count puts its HyperRAM CCR at ``target_ccr`` or just above."""
    reads_only = bool(parameters.get("reads_only", False))
    sizes = {
        "bytes_in": int(parameters.get("bytes_in", 48 * 1024)),
        "bytes_out": int(parameters.get("bytes_out", 16 * 1024)),
        "tile_bytes": int(parameters.get("tile_bytes", 16 * 1024)),
    }
    benchmark = parameters.get("benchmark", "matmul-int8")
    sizing = kernel_from_calibration(cfg.calibration, "sizing", benchmark, total_ops=0, **sizes)
    transfer = transfer_cycles(sizing, _hyper_backend(cfg), cfg.clocks.cluster_mhz, reads_only)
    name = "ccr-{target:.4g}".format(target=target_ccr)
    return replace(sizing, name=name, total_ops=ops_for_ccr(target_ccr, transfer, sizing.pmca_ops_per_cycle))


def _ccr_points(cfg: SocConfig, e: Experiment) -> t.List[Point]:
    reads_only = bool(e.parameters.get("reads_only", False))
    points = []
    for target in ccr_grid(e.parameters):

        def point(target: float = target) -> t.List[Row]:
            k = synthetic_kernel(cfg, e.parameters, target)
            a = relative_efficiency(cfg, k, cfg.clocks, _hyper_backend(cfg), _lpddr_backend(cfg), reads_only)
            return [
                (k.name, a.ccr_hyper, a.gops, a.gops_lpddr, a.gops_per_w, a.gops_per_w_lpddr, a.relative_efficiency)
            ]

        points.append(point)
    return points


def _power_points(cfg: SocConfig, e: Experiment) -> t.List[Point]:
    def point() -> t.List[Row]:
        return [
            (row.component, row.freq_mhz, row.leakage_mw, row.dynamic_uw_per_mhz, row.power_mw)
            for row in table_power_report(cfg)
        ]

    return [point]


POINT_BUILDERS: t.Dict[str, t.Callable[[SocConfig, Experiment], t.List[Point]]] = {
    STRIDE_SWEEP: _stride_points,
    LLC_COMPARE: _llc_compare_points,
    TRACE_REPLAY: _trace_replay_points,
    PMCA_SPEEDUP: _pmca_points,
    CCR_EFFICIENCY: _ccr_points,
    POWER_REPORT: _power_points,
}


async def run_experiment_async(
    cfg: SocConfig, e: Experiment, run_limits: RunLimits = DEFAULT_RUN_LIMITS
) -> ResultTable:
    """
    Run every point of ``e`` as its own simulation instance, at most ``run_limits.max_concurrency`` at a time.

    :param cfg: validated configuration shared read-only by all points
    :param e: experiment document
    :param run_limits: advanced feature that allows to bound the number of points in flight.
    :return: the result table, rows in declaration order
    """
    if e.kind not in POINT_BUILDERS:
        raise ExperimentError("unknown experiment kind {kind!r}".format(kind=e.kind))
    try:
        points = POINT_BUILDERS[e.kind](cfg, e)
    except (TypeError, ValueError, KeyError) as err:
        raise ExperimentError("bad parameters for {kind}: {err}".format(kind=e.kind, err=err))

    logger.info("Running %s: %d points", e.output_name, len(points))
    semaphore = asyncio.Semaphore(max(1, run_limits.max_concurrency))

    async def run(point: Point) -> t.List[Row]:
        async with semaphore:
            return await asyncio.to_thread(point)

    results = await asyncio.gather(*(run(point) for point in points))
    table = ResultTable(e.kind, COLUMNS[e.kind], [row for rows in results for row in rows])
    logger.info("Finished %s: %d rows", e.output_name, len(table.rows))
    return table


def run_experiment(cfg: SocConfig, e: Experiment, run_limits: RunLimits = DEFAULT_RUN_LIMITS) -> ResultTable:
    return asyncio.run(run_experiment_async(cfg, e, run_limits))


def emit_csv(table: ResultTable, path: t.Union[str, Path]) -> Path:
    """Write a header row and one row per result point; floats carry six significant digits."""
    path = Path(path)
    try:
        with path.open("w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(table.columns)
            for row in table.rows:
                writer.writerow([fmt_number(value) for value in row])
    except OSError as err:
        raise MemSimError("cannot write {path}: {err}".format(path=path, err=err.strerror))
    logger.info("Wrote %d rows to %s", len(table.rows), path)
    return path


def read_csv(path: t.Union[str, Path], kind: str = "") -> ResultTable:
    try:
        frame = pd.read_csv(path, keep_default_na=False)
    except (OSError, pd.errors.ParserError) as err:
        raise MemSimError("cannot read {path}: {err}".format(path=path, err=err))
    return ResultTable(kind, tuple(frame.columns), list(frame.itertuples(index=False, name=None)))
