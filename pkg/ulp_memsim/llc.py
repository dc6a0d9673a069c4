"""
Implements the set-associative last-level cache: region filtering, descriptor splitting, tag lookup with true LRU,
write-back/write-allocate traffic generation and hit/miss accounting. Only tags and flags are kept, never data.
"""
import logging
import typing as t
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

from ulp_memsim.address_map import AddressMap, Region
from ulp_memsim.constants import DRAM_CACHEABLE, READ, WRITE, TxnKind
from ulp_memsim.memory import MemoryBackend, MemTxn, dma_expand_2d


logger = logging.getLogger(__name__)

TAG_LOOKUP_CYCLES = 1


@dataclass(frozen=True)
class LlcConfig:
    """
    LLC geometry: ``size = n_ways * n_lines * n_blocks * axi_dw_bits / 8``.

    Arguments:
    axi_dw_bits: width of one block, equal to the AXI data width.
    n_blocks: blocks per line.
    n_lines: lines per way, i.e. the number of sets.
    n_ways: associativity.
    """

    axi_dw_bits: int = 64
    n_blocks: int = 8
    n_lines: int = 256
    n_ways: int = 8

    @property
    def block_bytes(self) -> int:
        return self.axi_dw_bits // 8

    @property
    def line_bytes(self) -> int:
        return self.n_blocks * self.block_bytes

    @property
    def size_bytes(self) -> int:
        return self.n_ways * self.n_lines * self.line_bytes


@dataclass(frozen=True)
class LineDescriptor:
    line_addr: int
    kind: TxnKind
    set_index: int
    tag: int
    blocks: int = 1

    @classmethod
    def of(cls, cfg: LlcConfig, line_addr: int, kind: TxnKind, blocks: int = 1) -> "LineDescriptor":
        line_no = line_addr // cfg.line_bytes
        return cls(line_addr, kind, line_no % cfg.n_lines, line_no // cfg.n_lines, blocks)


@dataclass(frozen=True)
class Eviction:
    victim_addr: int
    dirty: bool


@dataclass(frozen=True)
class LookupOutcome:
    hit: bool
    eviction: Optional[Eviction] = None


@dataclass
class LlcStats:
    hits: int = 0
    misses: int = 0
    evictions: int = 0
    writebacks: int = 0
    cycles: int = 0
    refill_bytes: int = 0
    writeback_bytes: int = 0
    bypass_txns: int = 0

    @property
    def miss_ratio(self) -> float:
        accesses = self.hits + self.misses
        return self.misses / accesses if accesses else 0.0

    def as_record(self) -> t.Dict[str, int]:
        return asdict(self)


class LlcState:
    """Tag, valid and dirty arrays per (set, way) plus a recency list per set, least recent first."""

    def __init__(self, cfg: LlcConfig):
        self.cfg = cfg
        self.tags = [[0] * cfg.n_ways for _ in range(cfg.n_lines)]
        self.valid = [[False] * cfg.n_ways for _ in range(cfg.n_lines)]
        self.dirty = [[False] * cfg.n_ways for _ in range(cfg.n_lines)]
        self.lru = [list(range(cfg.n_ways)) for _ in range(cfg.n_lines)]
        self.stats = LlcStats()

    def valid_lines(self) -> int:
        return sum(sum(row) for row in self.valid)

    def reset_stats(self) -> None:
        self.stats = LlcStats()

    def line_addr(self, set_index: int, tag: int) -> int:
        return (tag * self.cfg.n_lines + set_index) * self.cfg.line_bytes


@dataclass
class LlcAccessResult:
    soc_cycles: int = 0
    backend_txns: t.List[MemTxn] = field(default_factory=list)
    hit_count: int = 0
    miss_count: int = 0


def decompose(cfg: LlcConfig, txn: MemTxn) -> t.List[LineDescriptor]:
    """Split a cacheable transaction into ascending, line-aligned descriptors covering ``[addr, addr + len)``."""
    descriptors = []
    for line in dma_expand_2d(txn):
        start, end = line.addr, line.addr + line.len_bytes
        line_addr = start - start % cfg.line_bytes
        while line_addr < end:
            first = max(start, line_addr) - line_addr
            last = min(end, line_addr + cfg.line_bytes) - line_addr
            blocks = (last - 1) // cfg.block_bytes - first // cfg.block_bytes + 1
            descriptors.append(LineDescriptor.of(cfg, line_addr, line.kind, blocks))
            line_addr += cfg.line_bytes
    return descriptors


def split_at_window(txn: MemTxn, window: Region) -> t.List[MemTxn]:
    """Cut a transaction at the window edges so that every piece lies wholly inside or wholly outside it."""
    edges = (window.base, window.end)
    lines = dma_expand_2d(txn)
    straddles = any(line.addr < edge < line.addr + line.len_bytes for line in lines for edge in edges)
    if not straddles and len({line.addr in window for line in lines}) == 1:
        return [txn]
    pieces = []
    for line in lines:
        start, end = line.addr, line.addr + line.len_bytes
        cuts = sorted({start, end, *(edge for edge in edges if start < edge < end)})
        pieces.extend(replace(line, addr=lo, len_bytes=hi - lo) for lo, hi in zip(cuts, cuts[1:]))
    return pieces


def lookup_and_update(state: LlcState, d: LineDescriptor) -> LookupOutcome:
    """Tag lookup; on a miss the victim is an invalid way if any, else the least recently used one."""
    idx = d.set_index
    tags, valid, dirty, recency = state.tags[idx], state.valid[idx], state.dirty[idx], state.lru[idx]
    for way in range(state.cfg.n_ways):
        if valid[way] and tags[way] == d.tag:
            recency.remove(way)
            recency.append(way)
            if d.kind == WRITE:
                dirty[way] = True
            state.stats.hits += 1
            return LookupOutcome(hit=True)

    state.stats.misses += 1
    invalid = [way for way in recency if not valid[way]]
    victim = invalid[0] if invalid else recency[0]
    eviction = None
    if valid[victim]:
        eviction = Eviction(state.line_addr(d.set_index, tags[victim]), dirty[victim])
        state.stats.evictions += 1

    tags[victim], valid[victim], dirty[victim] = d.tag, True, d.kind == WRITE
    recency.remove(victim)
    recency.append(victim)
    return LookupOutcome(hit=False, eviction=eviction)


def llc_access(
    state: LlcState, cfg: LlcConfig, txn: MemTxn, backend: MemoryBackend, address_map: AddressMap
) -> LlcAccessResult:
    """Serve one transaction through the LLC, timing any outgoing traffic on ``backend``.

    Each descriptor costs the tag lookup plus one cycle per accessed block; a miss then writes back a dirty
    victim and refills the line, one after the other. A transaction crossing an edge of the cacheable window is
    served piece by piece.
    """
    result = LlcAccessResult()
    pieces = split_at_window(txn, address_map.cacheable_window)
    if len(pieces) > 1:
        for piece in pieces:
            part = llc_access(state, cfg, piece, backend, address_map)
            result.soc_cycles += part.soc_cycles
            result.backend_txns.extend(part.backend_txns)
            result.hit_count += part.hit_count
            result.miss_count += part.miss_count
        return result

    if address_map.classify(txn.addr) != DRAM_CACHEABLE:
        result.soc_cycles = backend.access(txn)
        result.backend_txns.append(txn)
        state.stats.bypass_txns += 1
        state.stats.cycles += result.soc_cycles
        return result

    for d in decompose(cfg, txn):
        cycles = TAG_LOOKUP_CYCLES + d.blocks
        outcome = lookup_and_update(state, d)
        if outcome.hit:
            result.hit_count += 1
        else:
            result.miss_count += 1
            if outcome.eviction is not None and outcome.eviction.dirty:
                writeback = MemTxn(WRITE, outcome.eviction.victim_addr, cfg.line_bytes, source="llc")
                cycles += backend.access(writeback)
                result.backend_txns.append(writeback)
                state.stats.writebacks += 1
                state.stats.writeback_bytes += cfg.line_bytes
            refill = MemTxn(READ, d.line_addr, cfg.line_bytes, source="llc")
            cycles += backend.access(refill)
            result.backend_txns.append(refill)
            state.stats.refill_bytes += cfg.line_bytes
        result.soc_cycles += cycles

    state.stats.cycles += result.soc_cycles
    logger.debug(
        "LLC %s at %#x: %d hits, %d misses, %d cycles",
        txn.kind,
        txn.addr,
        result.hit_count,
        result.miss_count,
        result.soc_cycles,
    )
    return result
