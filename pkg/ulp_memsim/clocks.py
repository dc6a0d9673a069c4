"""
Clock domains of the SoC: one configured frequency per domain, each below its ceiling.
"""
import typing as t
from dataclasses import dataclass, replace

from ulp_memsim.constants import CLUSTER, COMPONENT_DOMAINS, HOST_CORE, HOST_DOMAIN
from ulp_memsim.errors import ModelError


@dataclass(frozen=True)
class ClockDomain:
    name: str
    freq_mhz: float
    max_freq_mhz: float


@dataclass(frozen=True)
class Clocks:
    """The four clock domains, keyed by name."""

    domains: t.Tuple[ClockDomain, ...]

    def __getitem__(self, name: str) -> ClockDomain:
        for domain in self.domains:
            if domain.name == name:
                return domain
        raise ModelError("unknown clock domain {name}".format(name=name))

    def freq(self, name: str) -> float:
        return self[name].freq_mhz

    @property
    def soc_mhz(self) -> float:
        return self.freq(HOST_DOMAIN)

    @property
    def core_mhz(self) -> float:
        return self.freq(HOST_CORE)

    @property
    def cluster_mhz(self) -> float:
        return self.freq(CLUSTER)

    def component_mhz(self, component: str) -> float:
        return self.freq(COMPONENT_DOMAINS[component])

    def at_max(self) -> "Clocks":
        """Every domain at its frequency ceiling."""
        return Clocks(tuple(replace(d, freq_mhz=d.max_freq_mhz) for d in self.domains))
