"""
Implements the main-memory backends: the HyperRAM controller (chip-select demultiplexing, dual-bus interleaving,
uDMA 2D bursts, bus timing) and the affine DDR/LPDDR and scratchpad models used for comparison.
"""
import abc
import logging
import typing as t
from dataclasses import dataclass, replace
from typing import Optional

from ulp_memsim.constants import HYPER, LPDDR, READ, TXN_SOURCES, WRITE, MiB, TxnKind, TxnSource
from ulp_memsim.errors import AddressError, TransactionError
from ulp_memsim.utils import ceil_div, convert_cycles


logger = logging.getLogger(__name__)

HYPER_MAX_BUS_MHZ = 200.0
HYPER_MAX_DEVICE_BYTES = 64 * MiB
HYPER_BYTES_PER_BUS_CYCLE = 2  # 8-bit DDR bus
HYPER_BASE_PINS = 11


@dataclass(frozen=True)
class Burst2D:
    count: int
    stride_bytes: int


@dataclass(frozen=True)
class MemTxn:
    """A read or write transaction, optionally shaped as a 2D burst of ``count`` lines of ``len_bytes``."""

    kind: TxnKind
    addr: int
    len_bytes: int
    burst2d: Optional[Burst2D] = None
    source: TxnSource = "host"

    def __post_init__(self):
        if self.kind not in (READ, WRITE):
            raise TransactionError("invalid transaction kind {kind!r}".format(kind=self.kind))
        if self.len_bytes <= 0:
            raise TransactionError("len_bytes must be positive, got {n}".format(n=self.len_bytes))
        if self.addr < 0:
            raise TransactionError("addr cannot be negative")
        if self.source not in TXN_SOURCES:
            raise TransactionError("unknown transaction source {source!r}".format(source=self.source))
        if self.burst2d is not None:
            if self.burst2d.count < 1:
                raise TransactionError("burst2d count must be at least 1")
            if self.burst2d.stride_bytes < self.len_bytes:
                raise TransactionError("burst2d stride_bytes cannot be smaller than len_bytes")

    @property
    def total_bytes(self) -> int:
        return self.len_bytes * (self.burst2d.count if self.burst2d else 1)

    @property
    def is_write(self) -> bool:
        return self.kind == WRITE


@dataclass(frozen=True)
class HyperConfig:
    """
    HyperBUS topology and timing.

    Arguments:
    n_cs: chip selects per bus; devices on one bus are mapped contiguously.
    n_buses: 1 or 2; with 2 buses the two devices behind one chip select are interleaved in 16-bit blocks.
    mem_bytes_per_cs: capacity of one device.
    bus_freq_mhz: HyperBUS clock.
    t_init_bus_cycles: initial access latency of every transaction.
    device_power_mw: active power of the whole device population.
    """

    n_cs: int = 4
    n_buses: int = 2
    mem_bytes_per_cs: int = 64 * MiB
    bus_freq_mhz: float = 200.0
    t_init_bus_cycles: int = 7
    device_power_mw: float = 25.0

    @property
    def total_capacity(self) -> int:
        return self.n_cs * self.n_buses * self.mem_bytes_per_cs

    @property
    def pin_count(self) -> int:
        return HYPER_BASE_PINS + self.n_cs

    @property
    def cs_window_bytes(self) -> int:
        """Bytes of address space behind one chip select (a device pair on dual-bus configs)."""
        return self.n_buses * self.mem_bytes_per_cs


@dataclass(frozen=True)
class DdrConfig:
    """Ideal DDR4/LPDDR4 subsystem; ``subsystem_power_mw`` of ``None`` is resolved by the config loader."""

    fixed_latency_soc_cycles: int = 10
    bytes_per_soc_cycle: int = 8
    subsystem_power_mw: Optional[float] = None


@dataclass(frozen=True)
class ScratchpadTiming:
    latency_cycles: int = 2
    bytes_per_cycle: int = 8


@dataclass(frozen=True)
class DeviceLocation:
    bus_id: int
    cs_id: int
    device_addr: int


def map_address(cfg: HyperConfig, addr: int) -> DeviceLocation:
    """Locate a dram-relative byte address on the device population."""
    if not 0 <= addr < cfg.total_capacity:
        raise AddressError("address outside HyperRAM capacity", addr)
    if cfg.n_buses == 1:
        return DeviceLocation(0, addr // cfg.mem_bytes_per_cs, addr % cfg.mem_bytes_per_cs)

    pair_bytes = 2 * cfg.mem_bytes_per_cs
    offset = addr % pair_bytes
    block = offset // 2
    return DeviceLocation(block % 2, addr // pair_bytes, (block // 2) * 2 + offset % 2)


def unmap_address(cfg: HyperConfig, loc: DeviceLocation) -> int:
    """Inverse of :func:`map_address`."""
    in_range = 0 <= loc.cs_id < cfg.n_cs and 0 <= loc.bus_id < cfg.n_buses
    if not in_range or not 0 <= loc.device_addr < cfg.mem_bytes_per_cs:
        raise AddressError("device location out of range", loc.device_addr)
    if cfg.n_buses == 1:
        return loc.cs_id * cfg.mem_bytes_per_cs + loc.device_addr

    block = (loc.device_addr // 2) * 2 + loc.bus_id
    return loc.cs_id * 2 * cfg.mem_bytes_per_cs + block * 2 + loc.device_addr % 2


def _bus0_bytes_below(end: int) -> int:
    # bus 0 owns bytes whose offset mod 4 is 0 or 1
    return (end // 4) * 2 + min(end % 4, 2)


def bus_bytes(cfg: HyperConfig, addr: int, len_bytes: int) -> t.Tuple[int, ...]:
    """Split a contiguous dram-relative range into the bytes carried by each bus."""
    if cfg.n_buses == 1:
        return (len_bytes,)
    on_bus0 = _bus0_bytes_below(addr + len_bytes) - _bus0_bytes_below(addr)
    return on_bus0, len_bytes - on_bus0


def dma_expand_2d(txn: MemTxn) -> t.List[MemTxn]:
    """Expand a 2D burst into its ordered 1D lines; a 1D transaction expands to itself."""
    if txn.burst2d is None:
        return [txn]
    return [
        replace(txn, addr=txn.addr + i * txn.burst2d.stride_bytes, burst2d=None) for i in range(txn.burst2d.count)
    ]


def split_at_devices(cfg: HyperConfig, txn: MemTxn) -> t.List[MemTxn]:
    """Demultiplex a 1D dram-relative transaction at chip-select boundaries."""
    window = cfg.cs_window_bytes
    pieces = []
    addr, remaining = txn.addr, txn.len_bytes
    while remaining:
        chunk = min(remaining, window - addr % window)
        pieces.append(replace(txn, addr=addr, len_bytes=chunk, burst2d=None))
        addr += chunk
        remaining -= chunk
    return pieces


def hyper_access_cycles(cfg: HyperConfig, txn: MemTxn) -> int:
    """Bus cycles of one dram-relative transaction that stays behind a single chip select.

    The buses of a dual-bus configuration run in parallel, so the slower bus sets the time. A 2D burst is
    issued line by line.
    """
    if txn.burst2d is not None:
        return sum(hyper_access_cycles(cfg, line) for line in dma_expand_2d(txn))

    window = cfg.cs_window_bytes
    if txn.addr + txn.len_bytes > cfg.total_capacity:
        raise AddressError("transaction exceeds HyperRAM capacity", txn.addr)
    if txn.addr // window != (txn.addr + txn.len_bytes - 1) // window:
        raise TransactionError("transaction at {addr:#x} crosses a device boundary".format(addr=txn.addr))

    busy = [ceil_div(n, HYPER_BYTES_PER_BUS_CYCLE) for n in bus_bytes(cfg, txn.addr, txn.len_bytes) if n]
    return cfg.t_init_bus_cycles + max(busy)


def ddr_access_cycles(cfg: DdrConfig, txn: MemTxn) -> int:
    if txn.burst2d is not None:
        return sum(ddr_access_cycles(cfg, line) for line in dma_expand_2d(txn))
    return cfg.fixed_latency_soc_cycles + ceil_div(txn.len_bytes, cfg.bytes_per_soc_cycle)


def sustained_bandwidth_gbps(cfg: HyperConfig, len_bytes: int) -> float:
    """Bandwidth of one aligned transfer of ``len_bytes``, initial latency included."""
    cycles = hyper_access_cycles(cfg, MemTxn(READ, 0, len_bytes))
    return len_bytes * 8 * cfg.bus_freq_mhz * 1e6 / cycles / 1e9


@dataclass
class BackendStats:
    txns: int = 0
    read_bytes: int = 0
    write_bytes: int = 0
    cycles: int = 0


class MemoryBackend(abc.ABC):
    """Common surface of the main-memory models.

    ``access`` times a transaction in cycles of a destination clock domain (the SoC domain unless told
    otherwise) and records traffic; ``cycles_for`` does the same without touching the statistics.
    """

    kind: str = ""

    def __init__(self, soc_freq_mhz: float, dram_base: int = 0):
        self.soc_freq_mhz = soc_freq_mhz
        self.dram_base = dram_base
        self.stats = BackendStats()

    @property
    @abc.abstractmethod
    def device_power_mw(self) -> float:
        ...

    @abc.abstractmethod
    def cycles_for(self, txn: MemTxn, domain_mhz: Optional[float] = None) -> int:
        ...

    def access(self, txn: MemTxn, domain_mhz: Optional[float] = None) -> int:
        cycles = self.cycles_for(txn, domain_mhz)
        self.stats.txns += 1
        if txn.is_write:
            self.stats.write_bytes += txn.total_bytes
        else:
            self.stats.read_bytes += txn.total_bytes
        self.stats.cycles += cycles
        return cycles

    def reset_stats(self) -> None:
        self.stats = BackendStats()

    def transfer_seconds(self, n_bytes: int, tile_bytes: int) -> float:
        """Wall time to read ``n_bytes`` from the start of main memory in bursts of ``tile_bytes``."""
        if tile_bytes <= 0:
            raise TransactionError("tile_bytes must be positive")
        cycles = sum(
            self.cycles_for(MemTxn(READ, self.dram_base + off, min(tile_bytes, n_bytes - off)))
            for off in range(0, n_bytes, tile_bytes)
        )
        return cycles / (self.soc_freq_mhz * 1e6)


class HyperRamBackend(MemoryBackend):
    kind = HYPER

    def __init__(self, cfg: HyperConfig, soc_freq_mhz: float, dram_base: int = 0):
        super().__init__(soc_freq_mhz, dram_base)
        self.cfg = cfg

    @property
    def device_power_mw(self) -> float:
        return self.cfg.device_power_mw

    def bus_cycles(self, txn: MemTxn) -> int:
        rel = replace(txn, addr=txn.addr - self.dram_base)
        if rel.addr < 0:
            raise AddressError("address below the dram region", txn.addr)
        total = 0
        for line in dma_expand_2d(rel):
            pieces = split_at_devices(self.cfg, line)
            if len(pieces) > 1:
                logger.debug("Transaction at %#x split into %d device accesses", line.addr, len(pieces))
            total += sum(hyper_access_cycles(self.cfg, piece) for piece in pieces)
        return total

    def cycles_for(self, txn: MemTxn, domain_mhz: Optional[float] = None) -> int:
        return convert_cycles(self.bus_cycles(txn), self.cfg.bus_freq_mhz, domain_mhz or self.soc_freq_mhz)


class AffineBackend(MemoryBackend):
    """Fixed latency then a constant number of bytes per SoC cycle."""

    def __init__(self, latency_cycles: int, bytes_per_cycle: int, soc_freq_mhz: float, dram_base: int = 0):
        super().__init__(soc_freq_mhz, dram_base)
        self.timing = DdrConfig(fixed_latency_soc_cycles=latency_cycles, bytes_per_soc_cycle=bytes_per_cycle)

    @property
    def device_power_mw(self) -> float:
        return 0.0

    def cycles_for(self, txn: MemTxn, domain_mhz: Optional[float] = None) -> int:
        cycles = ddr_access_cycles(self.timing, txn)
        if domain_mhz is None or domain_mhz == self.soc_freq_mhz:
            return cycles
        return convert_cycles(cycles, self.soc_freq_mhz, domain_mhz)


class DdrBackend(AffineBackend):
    kind = LPDDR

    def __init__(self, cfg: DdrConfig, soc_freq_mhz: float, dram_base: int = 0):
        super().__init__(cfg.fixed_latency_soc_cycles, cfg.bytes_per_soc_cycle, soc_freq_mhz, dram_base)
        self.cfg = cfg

    @property
    def device_power_mw(self) -> float:
        return self.cfg.subsystem_power_mw or 0.0


class ScratchpadBackend(AffineBackend):
    kind = "l2spm"

    def __init__(self, timing: ScratchpadTiming, soc_freq_mhz: float):
        super().__init__(timing.latency_cycles, timing.bytes_per_cycle, soc_freq_mhz)

