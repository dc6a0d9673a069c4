"""
Implements the host side: the write-through L1 data cache, memory trace generation and file I/O, and in-order
replay of traces through L1, the optional LLC and a main-memory backend.
"""
import logging
import typing as t
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ulp_memsim.address_map import AddressMap
from ulp_memsim.constants import (
    DDR4_LLC,
    HYPER_LLC,
    HYPER_ONLY,
    L2SPM,
    MEMORY_CONFIGS,
    READ,
    UNMAPPED,
    WRITE,
    KiB,
    TxnKind,
)
from ulp_memsim.errors import ExperimentError, MemSimError, TraceError
from ulp_memsim.llc import LlcState, llc_access
from ulp_memsim.memory import DdrBackend, HyperRamBackend, MemoryBackend, MemTxn, ScratchpadBackend


if t.TYPE_CHECKING:  # pragma: no cover
    from ulp_memsim.config import SocConfig


logger = logging.getLogger(__name__)

ACCESS_SIZES = frozenset((1, 2, 4, 8))
OPS = {"R": READ, "W": WRITE}


@dataclass(frozen=True)
class L1Config:
    """Write-through, no-write-allocate L1 D-cache with LRU replacement; one way spans ``way_bytes``."""

    size_bytes: int = 32 * KiB
    way_bytes: int = 4 * KiB
    line_bytes: int = 64

    @property
    def n_ways(self) -> int:
        return self.size_bytes // self.way_bytes

    @property
    def n_sets(self) -> int:
        return self.way_bytes // self.line_bytes


@dataclass(frozen=True)
class TraceRecord:
    op: TxnKind
    addr: int
    len_bytes: int = 8

    def __post_init__(self):
        if self.op not in (READ, WRITE):
            raise MemSimError("invalid trace op {op!r}".format(op=self.op))
        if self.len_bytes not in ACCESS_SIZES:
            raise MemSimError("len_bytes must be one of 1, 2, 4, 8, got {n}".format(n=self.len_bytes))
        if self.addr % self.len_bytes:
            raise MemSimError("misaligned access at {addr:#x}".format(addr=self.addr))


@dataclass(frozen=True)
class StrideBenchmarkSpec:
    stride_s: int
    rounds: int = 8
    access_bytes: int = 8

    def __post_init__(self):
        if self.stride_s < 1:
            raise MemSimError("stride_s must be at least 1")
        if self.rounds < 3:
            raise MemSimError("rounds must be at least 3: fill, warm-up and one measured round")
        if self.access_bytes not in ACCESS_SIZES:
            raise MemSimError("access_bytes must be one of 1, 2, 4, 8")


@dataclass
class L1Stats:
    hits: int = 0
    misses: int = 0


class L1State:
    """Resident line numbers per set, least recently used first."""

    def __init__(self, cfg: L1Config):
        self.cfg = cfg
        self.sets: t.List[t.List[int]] = [[] for _ in range(cfg.n_sets)]
        self.stats = L1Stats()

    def reset_stats(self) -> None:
        self.stats = L1Stats()


@dataclass(frozen=True)
class L1Outcome:
    hit: bool
    downstream: Optional[MemTxn] = None


def l1_access(state: L1State, rec: TraceRecord) -> L1Outcome:
    """Look up one access. Reads allocate on a miss; every write is forwarded downstream and never allocates."""
    cfg = state.cfg
    line_no = rec.addr // cfg.line_bytes
    lines = state.sets[line_no % cfg.n_sets]
    hit = line_no in lines
    if hit:
        lines.remove(line_no)
        lines.append(line_no)
        state.stats.hits += 1
    else:
        state.stats.misses += 1

    if rec.op == WRITE:
        return L1Outcome(hit, MemTxn(WRITE, rec.addr, rec.len_bytes))
    if hit:
        return L1Outcome(True)

    if len(lines) == cfg.n_ways:
        lines.pop(0)
    lines.append(line_no)
    return L1Outcome(False, MemTxn(READ, line_no * cfg.line_bytes, cfg.line_bytes))


def gen_stride_trace(spec: StrideBenchmarkSpec, l1: L1Config, base: int) -> t.List[TraceRecord]:
    """Fill one L1 way sequentially, then read ``rounds`` rounds of one way's worth of lines ``stride_s`` lines apart.

    The number of touches per round is constant, so the footprint, and with it the miss ratio, grows with the
    stride.
    """
    trace = [TraceRecord(READ, base + off, spec.access_bytes) for off in range(0, l1.way_bytes, spec.access_bytes)]
    step = spec.stride_s * l1.line_bytes
    round_ = [TraceRecord(READ, base + i * step, spec.access_bytes) for i in range(l1.way_bytes // l1.line_bytes)]
    for _ in range(spec.rounds):
        trace.extend(round_)
    return trace


def stride_warmup(spec: StrideBenchmarkSpec, l1: L1Config) -> int:
    """Records of the fill phase plus the warm-up round."""
    return l1.way_bytes // spec.access_bytes + l1.way_bytes // l1.line_bytes


def gen_random_trace(
    seed: int, n: int, base: int, span: int, write_ratio: float = 0.3, access_bytes: int = 8
) -> t.List[TraceRecord]:
    """Uniformly random aligned accesses over ``[base, base + span)``."""
    rng = np.random.default_rng(seed)
    slots = rng.integers(0, span // access_bytes, size=n)
    writes = rng.random(n) < write_ratio
    return [
        TraceRecord(WRITE if is_write else READ, base + int(slot) * access_bytes, access_bytes)
        for slot, is_write in zip(slots, writes)
    ]


def gen_locality_trace(
    seed: int,
    n: int,
    base: int,
    hot_bytes: int = 8 * KiB,
    warm_bytes: int = 96 * KiB,
    p_warm: float = 0.05,
    p_cold: float = 0.00025,
    write_ratio: float = 0.2,
    line_bytes: int = 64,
) -> t.Tuple[t.List[TraceRecord], int]:
    """A trace with a small hot set, a warm set sized for the LLC and rare first-touch accesses past both.

    The trace opens with one read per line of the hot and warm sets; that sweep length is returned as the warm-up
    count. Cold accesses are reads of lines never seen before.
    """
    rng = np.random.default_rng(seed)
    sweep = [TraceRecord(READ, base + off) for off in range(0, hot_bytes + warm_bytes, line_bytes)]
    pick = rng.random(n)
    writes = rng.random(n) < write_ratio
    hot_slots = rng.integers(0, hot_bytes // 8, size=n)
    warm_slots = rng.integers(0, warm_bytes // 8, size=n)

    cold_base = base + hot_bytes + warm_bytes
    cold_lines = 0
    body = []
    for i in range(n):
        if pick[i] < p_cold:
            body.append(TraceRecord(READ, cold_base + cold_lines * line_bytes))
            cold_lines += 1
            continue
        if pick[i] < p_cold + p_warm:
            addr = base + hot_bytes + int(warm_slots[i]) * 8
        else:
            addr = base + int(hot_slots[i]) * 8
        body.append(TraceRecord(WRITE if writes[i] else READ, addr))
    return sweep + body, len(sweep)


def read_trace(text: str) -> t.List[TraceRecord]:
    """Parse ``R|W,<hex-address>,<len>`` lines; ``#`` starts a comment line."""
    records = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = [part.strip() for part in line.split(",")]
        if len(parts) != 3 or parts[0].upper() not in OPS:
            raise TraceError("malformed trace line {line!r}".format(line=line), lineno, unit="line")
        try:
            records.append(TraceRecord(OPS[parts[0].upper()], int(parts[1], 16), int(parts[2])))
        except (ValueError, MemSimError) as err:
            raise TraceError("invalid trace line {line!r}: {err}".format(line=line, err=err), lineno, unit="line")
    return records


def write_trace(records: t.Iterable[TraceRecord]) -> str:
    return "".join(
        "{op},{addr:#x},{n}\n".format(op="W" if rec.op == WRITE else "R", addr=rec.addr, n=rec.len_bytes)
        for rec in records
    )


@dataclass
class MemorySystem:
    """One simulation instance: every piece of mutable state a replay touches."""

    name: str
    address_map: AddressMap
    l1: L1State
    dram: MemoryBackend
    l2spm: MemoryBackend
    llc: Optional[LlcState] = None
    soc_freq_mhz: float = 400.0

    def reset_stats(self) -> None:
        self.l1.reset_stats()
        self.dram.reset_stats()
        self.l2spm.reset_stats()
        if self.llc is not None:
            self.llc.reset_stats()


def build_memory_system(cfg: "SocConfig", name: str) -> MemorySystem:
    """Instantiate one of the four host memory configurations: ``ddr4-llc``, ``hyper-llc``, ``ddr4``, ``hyper``."""
    if name not in MEMORY_CONFIGS:
        raise ExperimentError("unknown memory configuration {name}".format(name=name))

    soc = cfg.clocks.soc_mhz
    dram_base = cfg.address_map.dram.base
    backend: MemoryBackend
    if name in (HYPER_LLC, HYPER_ONLY):
        backend = HyperRamBackend(cfg.hyper, soc, dram_base)
    else:
        backend = DdrBackend(cfg.ddr, soc, dram_base)
    return MemorySystem(
        name=name,
        address_map=cfg.address_map,
        l1=L1State(cfg.l1),
        dram=backend,
        l2spm=ScratchpadBackend(cfg.l2spm_timing, soc),
        llc=LlcState(cfg.llc) if name in (DDR4_LLC, HYPER_LLC) else None,
        soc_freq_mhz=soc,
    )


@dataclass(frozen=True)
class SimResult:
    config: str
    records: int
    cycles: int
    l1_hits: int
    l1_misses: int
    llc_hits: int
    llc_misses: int
    llc_evictions: int
    llc_writebacks: int
    backend_read_bytes: int
    backend_write_bytes: int
    backend_txns: int
    soc_freq_mhz: float

    @property
    def l1_miss_ratio(self) -> float:
        accesses = self.l1_hits + self.l1_misses
        return self.l1_misses / accesses if accesses else 0.0

    @property
    def llc_miss_ratio(self) -> float:
        accesses = self.llc_hits + self.llc_misses
        return self.llc_misses / accesses if accesses else 0.0

    @property
    def llc_hit_rate(self) -> float:
        accesses = self.llc_hits + self.llc_misses
        return self.llc_hits / accesses if accesses else 0.0

    @property
    def seconds(self) -> float:
        return self.cycles / (self.soc_freq_mhz * 1e6)


def _downstream(system: MemorySystem, region: str, txn: MemTxn) -> int:
    if region == L2SPM:
        return system.l2spm.access(txn)
    if system.llc is None:
        return system.dram.access(txn)
    return llc_access(system.llc, system.llc.cfg, txn, system.dram, system.address_map).soc_cycles


def run_trace(trace: t.Sequence[TraceRecord], system: MemorySystem, warmup: int = 0) -> SimResult:
    """Replay ``trace`` in order with one access outstanding at a time.

    Every access takes one SoC cycle; an access that leaves the L1 stalls the core for the downstream latency.
    Statistics restart after the first ``warmup`` records; cache contents carry over.
    """
    if warmup >= len(trace) and trace:
        logger.warning("Warm-up of %d records leaves nothing to measure in %s", warmup, system.name)

    cycles = 0
    for index, rec in enumerate(trace):
        if index == warmup:
            system.reset_stats()
            cycles = 0
        region = system.address_map.classify(rec.addr)
        if region == UNMAPPED:
            raise TraceError("unmapped address {addr:#x}".format(addr=rec.addr), index)
        outcome = l1_access(system.l1, rec)
        cycles += 1
        if outcome.downstream is not None:
            cycles += _downstream(system, region, outcome.downstream)

    if warmup >= len(trace):
        system.reset_stats()
        cycles = 0

    llc = system.llc.stats if system.llc is not None else None
    result = SimResult(
        config=system.name,
        records=max(len(trace) - warmup, 0),
        cycles=cycles,
        l1_hits=system.l1.stats.hits,
        l1_misses=system.l1.stats.misses,
        llc_hits=llc.hits if llc else 0,
        llc_misses=llc.misses if llc else 0,
        llc_evictions=llc.evictions if llc else 0,
        llc_writebacks=llc.writebacks if llc else 0,
        backend_read_bytes=system.dram.stats.read_bytes,
        backend_write_bytes=system.dram.stats.write_bytes,
        backend_txns=system.dram.stats.txns,
        soc_freq_mhz=system.soc_freq_mhz,
    )
    logger.debug("Replayed %d records on %s: %d cycles", len(trace), system.name, cycles)
    return result
