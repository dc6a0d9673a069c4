"""
Implements the accelerator cost model: tiled, double-buffered kernel execution on the cluster, the one-off
offload cost (mailbox handshake plus lazy code load) and the speedup over the host core.

The cluster is modelled by calibrated throughput, not instruction by instruction.
"""
import json
import logging
import math
import typing as t
from dataclasses import dataclass, field, replace
from importlib import resources

from ulp_memsim.clocks import Clocks
from ulp_memsim.constants import READ, WRITE, KiB, TxnKind
from ulp_memsim.errors import ConfigParseError, ModelError
from ulp_memsim.memory import MemoryBackend, MemTxn
from ulp_memsim.utils import convert_cycles


logger = logging.getLogger(__name__)

L1SPM_BYTES = 128 * KiB
DEFAULT_OFFLOAD_FIXED_CYCLES = 5_000


@dataclass(frozen=True)
class CalibrationEntry:
    host_ops_per_cycle: float
    pmca_ops_per_cycle: float
    code_size_bytes: int


@dataclass(frozen=True)
class CalibrationTable:
    """Measured per-benchmark throughputs and the fixed offload handshake cost in host-core cycles."""

    entries: t.Mapping[str, CalibrationEntry] = field(default_factory=dict)
    offload_fixed_cycles: int = DEFAULT_OFFLOAD_FIXED_CYCLES

    def __getitem__(self, benchmark: str) -> CalibrationEntry:
        try:
            return self.entries[benchmark]
        except KeyError:
            raise ModelError("no calibration for benchmark {name}".format(name=benchmark))


@dataclass(frozen=True)
class KernelDescriptor:
    """
    One offloadable workload; ``total_ops`` and the byte counts are per invocation.

    Inputs are streamed from ``in_offset`` and results written to ``out_offset`` (both relative to the main-memory
    base); the binary sits at ``code_offset``.
    """

    name: str
    total_ops: int
    bytes_in: int
    bytes_out: int
    host_ops_per_cycle: float
    pmca_ops_per_cycle: float
    code_size_bytes: int = 0
    invocations: int = 1
    tile_bytes: int = 16 * KiB
    offload_fixed_cycles: int = DEFAULT_OFFLOAD_FIXED_CYCLES
    in_offset: int = 0
    out_offset: t.Optional[int] = None
    code_offset: t.Optional[int] = None

    def __post_init__(self):
        if self.tile_bytes > L1SPM_BYTES or self.tile_bytes < 0:
            raise ModelError("tile_bytes must fit the 128 KiB L1SPM, got {n}".format(n=self.tile_bytes))
        if self.host_ops_per_cycle <= 0 or self.pmca_ops_per_cycle <= 0:
            raise ModelError("throughputs must be positive for kernel {name}".format(name=self.name))
        if self.invocations < 1:
            raise ModelError("invocations must be at least 1")
        if min(self.total_ops, self.bytes_in, self.bytes_out, self.code_size_bytes, self.offload_fixed_cycles) < 0:
            raise ModelError("kernel {name} has a negative size".format(name=self.name))

    @property
    def out_addr_offset(self) -> int:
        return self.in_offset + self.bytes_in if self.out_offset is None else self.out_offset

    @property
    def code_addr_offset(self) -> int:
        return self.out_addr_offset + self.bytes_out if self.code_offset is None else self.code_offset


@dataclass(frozen=True)
class PmcaExecution:
    cluster_cycles: float
    invocation_cycles: float
    t_compute: float
    t_mem: int
    prologue: int
    epilogue: int
    mem_txns: t.Tuple[MemTxn, ...]


@dataclass(frozen=True)
class OffloadCost:
    total_cycles: float
    overhead_cycles: int
    execution: PmcaExecution


def _tiles(kind: TxnKind, addr: int, n_bytes: int, tile_bytes: int) -> t.List[MemTxn]:
    return [
        MemTxn(kind, addr + off, min(tile_bytes, n_bytes - off), source="pmca-dma")
        for off in range(0, n_bytes, tile_bytes)
    ]


def dma_tiles(k: KernelDescriptor, dram_base: int, reads_only: bool = False) -> t.Tuple[t.List[MemTxn], t.List[MemTxn]]:
    """Tile-sized DMA bursts of one invocation: input loads, then result stores."""
    if k.tile_bytes == 0:
        raise ModelError("tile_bytes cannot be zero in {name}".format(name=k.name))
    loads = _tiles(READ, dram_base + k.in_offset, k.bytes_in, k.tile_bytes)
    stores = [] if reads_only else _tiles(WRITE, dram_base + k.out_addr_offset, k.bytes_out, k.tile_bytes)
    return loads, stores


def transfer_cycles(k: KernelDescriptor, backend: MemoryBackend, domain_mhz: float, reads_only: bool = False) -> int:
    """Cycles of ``domain_mhz`` the backend needs to move one invocation's traffic."""
    loads, stores = dma_tiles(k, backend.dram_base, reads_only)
    return sum(backend.cycles_for(txn, domain_mhz) for txn in loads + stores)


def pmca_exec_cycles(k: KernelDescriptor, backend: MemoryBackend, clocks: Clocks) -> PmcaExecution:
    """Cluster cycles of all invocations under double buffering.

    Compute and DMA overlap, so an invocation costs the longer of the two plus the non-overlapped first load
    and last store.
    """
    if k.tile_bytes == 0:
        raise ModelError("tile_bytes cannot be zero in pmca_exec_cycles")

    cluster = clocks.cluster_mhz
    loads, stores = dma_tiles(k, backend.dram_base)
    t_compute = k.total_ops / k.pmca_ops_per_cycle
    t_mem = sum(backend.cycles_for(txn, cluster) for txn in loads + stores)
    prologue = backend.cycles_for(loads[0], cluster) if loads else 0
    epilogue = backend.cycles_for(stores[-1], cluster) if stores else 0
    invocation = max(t_compute, t_mem) + prologue + epilogue

    logger.debug(
        "Kernel %s: compute %.1f, memory %d, prologue %d, epilogue %d cluster cycles",
        k.name,
        t_compute,
        t_mem,
        prologue,
        epilogue,
    )
    return PmcaExecution(
        cluster_cycles=k.invocations * invocation,
        invocation_cycles=invocation,
        t_compute=t_compute,
        t_mem=t_mem,
        prologue=prologue,
        epilogue=epilogue,
        mem_txns=tuple(loads + stores) * k.invocations,
    )


def offload_overhead_cycles(k: KernelDescriptor, backend: MemoryBackend, clocks: Clocks) -> int:
    """Handshake plus loading the binary from main memory, charged once before the first invocation."""
    cluster = clocks.cluster_mhz
    overhead = convert_cycles(k.offload_fixed_cycles, clocks.core_mhz, cluster)
    if k.code_size_bytes:
        code = MemTxn(READ, backend.dram_base + k.code_addr_offset, k.code_size_bytes, source="udma")
        overhead += backend.cycles_for(code, cluster)
    return overhead


def offload_total_cycles(k: KernelDescriptor, backend: MemoryBackend, clocks: Clocks) -> OffloadCost:
    execution = pmca_exec_cycles(k, backend, clocks)
    overhead = offload_overhead_cycles(k, backend, clocks)
    return OffloadCost(overhead + execution.cluster_cycles, overhead, execution)


def host_exec_cycles(k: KernelDescriptor) -> float:
    return k.invocations * k.total_ops / k.host_ops_per_cycle


def speedup_vs_host(k: KernelDescriptor, backend: MemoryBackend, clocks: Clocks) -> float:
    """Host-core cycles over cluster cycles, each counted in its own clock domain."""
    return host_exec_cycles(k) / offload_total_cycles(k, backend, clocks).total_cycles


def kernel_from_calibration(
    calibration: CalibrationTable, name: str, benchmark: t.Optional[str] = None, **sizes: t.Any
) -> KernelDescriptor:
    entry = calibration[benchmark or name]
    return KernelDescriptor(
        name=name,
        host_ops_per_cycle=entry.host_ops_per_cycle,
        pmca_ops_per_cycle=entry.pmca_ops_per_cycle,
        code_size_bytes=entry.code_size_bytes,
        offload_fixed_cycles=calibration.offload_fixed_cycles,
        **sizes,
    )


def calibration_from_mapping(data: t.Mapping[str, t.Any]) -> CalibrationTable:
    entries = {
        name: CalibrationEntry(
            host_ops_per_cycle=float(entry["host_ops_per_cycle"]),
            pmca_ops_per_cycle=float(entry["pmca_ops_per_cycle"]),
            code_size_bytes=int(entry.get("code_size_bytes", 0)),
        )
        for name, entry in data.get("benchmarks", {}).items()
    }
    return CalibrationTable(entries, int(data.get("offload_fixed_cycles", DEFAULT_OFFLOAD_FIXED_CYCLES)))


def calibration_to_mapping(calibration: CalibrationTable) -> t.Dict[str, t.Any]:
    return {
        "offload_fixed_cycles": calibration.offload_fixed_cycles,
        "benchmarks": {
            name: {
                "host_ops_per_cycle": entry.host_ops_per_cycle,
                "pmca_ops_per_cycle": entry.pmca_ops_per_cycle,
                "code_size_bytes": entry.code_size_bytes,
            }
            for name, entry in calibration.entries.items()
        },
    }


KernelCatalog = t.Dict[str, KernelDescriptor]

KERNEL_SIZE_KEYS = ("total_ops", "bytes_in", "bytes_out", "tile_bytes", "invocations", "in_offset")


def load_catalog(text: str, calibration: CalibrationTable) -> KernelCatalog:
    """Parse a kernel catalog; a ``calibration`` block in the document extends or overrides ``calibration``."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigParseError("malformed kernel catalog: {msg}".format(msg=err.msg), err.lineno, err.colno)
    if not isinstance(data, dict) or not isinstance(data.get("kernels"), list):
        raise ConfigParseError("kernel catalog needs a top-level 'kernels' list")

    if "calibration" in data:
        extra = calibration_from_mapping(data["calibration"])
        offload = data["calibration"].get("offload_fixed_cycles", calibration.offload_fixed_cycles)
        entries = {**calibration.entries, **extra.entries}
        calibration = replace(calibration, entries=entries, offload_fixed_cycles=int(offload))

    catalog: KernelCatalog = {}
    for entry in data["kernels"]:
        name = entry.get("name")
        if not name:
            raise ModelError("kernel name cannot be blank in the catalog")
        sizes = {key: int(entry[key]) for key in KERNEL_SIZE_KEYS if key in entry}
        catalog[name] = kernel_from_calibration(calibration, name, entry.get("benchmark"), **sizes)
    logger.debug("Loaded %d kernels: %s", len(catalog), ", ".join(catalog))
    return catalog


def default_catalog(calibration: CalibrationTable) -> KernelCatalog:
    text = resources.files("ulp_memsim").joinpath("data/kernels.json").read_text(encoding="utf-8")
    return load_catalog(text, calibration)


def scale_invocations(k: KernelDescriptor, invocations: int) -> KernelDescriptor:
    return replace(k, invocations=invocations)


def ops_for_ccr(target_ccr: float, transfer: int, pmca_ops_per_cycle: float) -> int:
    """Smallest op count whose compute time is at least ``target_ccr`` times ``transfer`` cluster cycles."""
    return max(1, math.ceil(target_ccr * transfer * pmca_ops_per_cycle))
