import typing as t
from dataclasses import dataclass

from ulp_memsim.constants import DRAM_BYPASS, DRAM_CACHEABLE, L2SPM, UNMAPPED, KiB, MiB, RegionTag


@dataclass(frozen=True)
class Region:
    base: int
    size: int

    @property
    def end(self) -> int:
        return self.base + self.size

    def __contains__(self, addr: int) -> bool:
        return self.base <= addr < self.end

    def overlaps(self, other: "Region") -> bool:
        return self.base < other.end and other.base < self.end

    def covers(self, other: "Region") -> bool:
        return self.base <= other.base and other.end <= self.end


L2SPM_BYTES = 512 * KiB


@dataclass(frozen=True)
class AddressMap:
    l2spm: Region = Region(0x1C00_0000, L2SPM_BYTES)
    dram: Region = Region(0x8000_0000, 512 * MiB)
    cacheable_window: Region = Region(0x8000_0000, 512 * MiB)

    def classify(self, addr: int) -> RegionTag:
        if addr in self.l2spm:
            return L2SPM
        if addr in self.dram:
            return DRAM_CACHEABLE if addr in self.cacheable_window else DRAM_BYPASS
        return UNMAPPED

    def regions(self) -> t.Dict[str, Region]:
        return {"l2spm": self.l2spm, "dram": self.dram, "cacheable_window": self.cacheable_window}
