from typing import Literal

from typing_extensions import TypeAlias


KiB: int = 1024
MiB: int = 1024 * KiB

# Address region tags

RegionTag: TypeAlias = Literal["l2spm", "dram-cacheable", "dram-bypass", "unmapped"]

L2SPM: RegionTag = "l2spm"
DRAM_CACHEABLE: RegionTag = "dram-cacheable"
DRAM_BYPASS: RegionTag = "dram-bypass"
UNMAPPED: RegionTag = "unmapped"

# Transaction kinds and initiators

TxnKind: TypeAlias = Literal["read", "write"]
TxnSource: TypeAlias = Literal["host", "llc", "pmca-dma", "udma"]

READ: TxnKind = "read"
WRITE: TxnKind = "write"

TXN_SOURCES = frozenset(("host", "llc", "pmca-dma", "udma"))

# Clock domains

HOST_CORE: str = "host-core"
HOST_DOMAIN: str = "host-domain"
PERIPHERAL_DOMAIN: str = "peripheral-domain"
CLUSTER: str = "cluster"

CLOCK_DOMAINS = (HOST_CORE, HOST_DOMAIN, PERIPHERAL_DOMAIN, CLUSTER)

# Power components and the domain each one is clocked from

TOP: str = "top"
CVA6: str = "cva6"
PMCA: str = "pmca"
MEM_CTRL: str = "mem-ctrl"

COMPONENTS = (TOP, CVA6, PMCA, MEM_CTRL)
COMPONENT_DOMAINS = {TOP: HOST_DOMAIN, CVA6: HOST_CORE, PMCA: CLUSTER, MEM_CTRL: PERIPHERAL_DOMAIN}

# Main-memory backends

BackendKind: TypeAlias = Literal["hyper", "lpddr", "none"]

HYPER: BackendKind = "hyper"
LPDDR: BackendKind = "lpddr"
NO_BACKEND: BackendKind = "none"

# The four memory configurations compared on the host

DDR4_LLC: str = "ddr4-llc"
HYPER_LLC: str = "hyper-llc"
DDR4: str = "ddr4"
HYPER_ONLY: str = "hyper"

MEMORY_CONFIGS = (DDR4_LLC, HYPER_LLC, DDR4, HYPER_ONLY)
