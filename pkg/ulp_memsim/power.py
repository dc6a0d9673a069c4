"""
Implements the component power model, energy accounting, the computation-to-communication ratio and the
HyperRAM-versus-LPDDR energy-efficiency comparison.
"""
import logging
import math
import typing as t
from dataclasses import dataclass
from typing import Optional

from ulp_memsim.clocks import Clocks
from ulp_memsim.constants import COMPONENTS, CVA6, HYPER, LPDDR, MEM_CTRL, NO_BACKEND, PMCA, TOP, BackendKind
from ulp_memsim.errors import ModelError
from ulp_memsim.memory import MemoryBackend
from ulp_memsim.pmca import KernelDescriptor, transfer_cycles


if t.TYPE_CHECKING:  # pragma: no cover
    from ulp_memsim.config import SocConfig
    from ulp_memsim.host import SimResult


logger = logging.getLogger(__name__)

COMPUTE_BOUND_CCR = math.inf
TOTAL_ROW = "total"

# components a host-only trace replay keeps busy
HOST_ACTIVE = frozenset((TOP, CVA6, MEM_CTRL))


@dataclass(frozen=True)
class PowerParams:
    component: str
    leakage_mw: float
    dynamic_uw_per_mhz: float
    max_freq_mhz: float


DEFAULT_POWER_TABLE = (
    PowerParams(TOP, 4.23, 214.7, 450.0),
    PowerParams(CVA6, 4.79, 47.5, 900.0),
    PowerParams(PMCA, 5.78, 206.0, 400.0),
    PowerParams(MEM_CTRL, 0.14, 2.3, 450.0),
)


@dataclass(frozen=True)
class PowerRow:
    component: str
    freq_mhz: float
    leakage_mw: float
    dynamic_uw_per_mhz: float
    power_mw: float


@dataclass(frozen=True)
class KernelAnalysis:
    """
    Roofline-style figures of one kernel invocation. ``t_mem_s`` and the unsuffixed throughput fields refer to the
    HyperRAM backend; the ``_lpddr`` fields and the per-invocation energies are filled by :func:`relative_efficiency`.
    """

    kernel: str
    ccr_hyper: float
    t_compute_s: float
    t_mem_s: float
    exec_s: float
    gops: float
    gops_per_w: Optional[float] = None
    t_mem_lpddr_s: Optional[float] = None
    exec_lpddr_s: Optional[float] = None
    gops_lpddr: Optional[float] = None
    gops_per_w_lpddr: Optional[float] = None
    energy_j: Optional[float] = None
    energy_lpddr_j: Optional[float] = None
    relative_efficiency: Optional[float] = None

    @property
    def compute_bound(self) -> bool:
        return self.ccr_hyper >= 1


def component_power_mw(p: PowerParams, freq_mhz: float) -> float:
    if freq_mhz > p.max_freq_mhz:
        raise ModelError(
            "{component} cannot run at {freq} MHz, ceiling is {max} MHz".format(
                component=p.component, freq=freq_mhz, max=p.max_freq_mhz
            )
        )
    if freq_mhz < 0:
        raise ModelError("frequency cannot be negative")
    return p.leakage_mw + p.dynamic_uw_per_mhz * freq_mhz / 1000


def backend_power_mw(cfg: "SocConfig", backend_kind: BackendKind) -> float:
    if backend_kind == HYPER:
        return cfg.hyper.device_power_mw
    if backend_kind == LPDDR:
        return cfg.ddr.subsystem_power_mw or 0.0
    if backend_kind == NO_BACKEND:
        return 0.0
    raise ModelError("unknown backend kind {kind}".format(kind=backend_kind))


def components_power_mw(power: t.Iterable[PowerParams], active: t.AbstractSet[str], clocks: Clocks) -> float:
    """Active components at their domain frequency; the idle ones leak."""
    return sum(
        component_power_mw(p, clocks.component_mhz(p.component)) if p.component in active else p.leakage_mw
        for p in power
    )


def system_power_mw(cfg: "SocConfig", active: t.AbstractSet[str], clocks: Clocks, backend_kind: BackendKind) -> float:
    return components_power_mw(cfg.power, active, clocks) + backend_power_mw(cfg, backend_kind)


def table_power_report(cfg: "SocConfig") -> t.List[PowerRow]:
    """Every component at its ceiling, followed by a total derived from the rows above it."""
    rows = [
        PowerRow(
            component=p.component,
            freq_mhz=p.max_freq_mhz,
            leakage_mw=p.leakage_mw,
            dynamic_uw_per_mhz=p.dynamic_uw_per_mhz,
            power_mw=component_power_mw(p, p.max_freq_mhz),
        )
        for p in cfg.power
    ]
    rows.append(
        PowerRow(
            component=TOTAL_ROW,
            freq_mhz=max((row.freq_mhz for row in rows), default=0.0),
            leakage_mw=sum(row.leakage_mw for row in rows),
            dynamic_uw_per_mhz=sum(row.dynamic_uw_per_mhz for row in rows),
            power_mw=sum(row.power_mw for row in rows),
        )
    )
    return rows


def _seconds(cycles: float, freq_mhz: float) -> float:
    return cycles / (freq_mhz * 1e6)


def ccr(k: KernelDescriptor, hyper_backend: MemoryBackend, clocks: Clocks, reads_only: bool = False) -> KernelAnalysis:
    """Computation-to-communication ratio of one invocation under full overlap of compute and transfers.

    A kernel that moves no data is reported as compute-bound with an infinite ratio.
    """
    cluster = clocks.cluster_mhz
    t_compute = _seconds(k.total_ops / k.pmca_ops_per_cycle, cluster)
    t_mem = _seconds(transfer_cycles(k, hyper_backend, cluster, reads_only), cluster)
    ratio = t_compute / t_mem if t_mem else COMPUTE_BOUND_CCR
    exec_s = max(t_compute, t_mem)
    return KernelAnalysis(
        kernel=k.name,
        ccr_hyper=ratio,
        t_compute_s=t_compute,
        t_mem_s=t_mem,
        exec_s=exec_s,
        gops=k.total_ops / exec_s / 1e9 if exec_s else 0.0,
    )


def relative_efficiency(
    cfg: "SocConfig",
    k: KernelDescriptor,
    clocks: Clocks,
    hyper_backend: MemoryBackend,
    lpddr_backend: MemoryBackend,
    reads_only: bool = False,
) -> KernelAnalysis:
    """Throughput and GOps/W of one kernel on both backends, with the whole SoC active."""
    analysis = ccr(k, hyper_backend, clocks, reads_only)
    cluster = clocks.cluster_mhz
    t_mem_lpddr = _seconds(transfer_cycles(k, lpddr_backend, cluster, reads_only), cluster)
    exec_lpddr = max(analysis.t_compute_s, t_mem_lpddr)
    gops_lpddr = k.total_ops / exec_lpddr / 1e9 if exec_lpddr else 0.0

    active = frozenset(COMPONENTS)
    p_hyper = system_power_mw(cfg, active, clocks, HYPER)
    p_lpddr = system_power_mw(cfg, active, clocks, LPDDR)
    per_w_hyper = analysis.gops / (p_hyper / 1000)
    per_w_lpddr = gops_lpddr / (p_lpddr / 1000)
    logger.debug("Kernel %s: ccr %.3f, %.3f vs %.3f GOps/W", k.name, analysis.ccr_hyper, per_w_hyper, per_w_lpddr)
    return KernelAnalysis(
        kernel=analysis.kernel,
        ccr_hyper=analysis.ccr_hyper,
        t_compute_s=analysis.t_compute_s,
        t_mem_s=analysis.t_mem_s,
        exec_s=analysis.exec_s,
        gops=analysis.gops,
        gops_per_w=per_w_hyper,
        t_mem_lpddr_s=t_mem_lpddr,
        exec_lpddr_s=exec_lpddr,
        gops_lpddr=gops_lpddr,
        gops_per_w_lpddr=per_w_lpddr,
        energy_j=energy_j(p_hyper, analysis.exec_s),
        energy_lpddr_j=energy_j(p_lpddr, exec_lpddr),
        relative_efficiency=per_w_hyper / per_w_lpddr if per_w_lpddr else None,
    )


def kernel_gops(k: KernelDescriptor, clocks: Clocks) -> float:
    """Peak cluster throughput: calibrated ops per cycle at the cluster frequency."""
    return k.pmca_ops_per_cycle * clocks.cluster_mhz / 1000


def kernel_gops_per_w(k: KernelDescriptor, cfg: "SocConfig", clocks: Optional[Clocks] = None) -> float:
    clocks = clocks or cfg.clocks
    return kernel_gops(k, clocks) / (_component_mw(cfg, PMCA, clocks) / 1000)


def host_gops_per_w(k: KernelDescriptor, cfg: "SocConfig", clocks: Optional[Clocks] = None) -> float:
    clocks = clocks or cfg.clocks
    gops = k.host_ops_per_cycle * clocks.core_mhz / 1000
    return gops / (_component_mw(cfg, CVA6, clocks) / 1000)


def _component_mw(cfg: "SocConfig", component: str, clocks: Clocks) -> float:
    for p in cfg.power:
        if p.component == component:
            return component_power_mw(p, clocks.component_mhz(component))
    raise ModelError("no power entry for component {component}".format(component=component))


def energy_j(power_mw: float, seconds: float) -> float:
    return power_mw / 1000 * seconds


def energy_per_op_j(analysis: KernelAnalysis, power_mw: float, total_ops: int) -> float:
    """Energy of one operation when the kernel's invocation draws ``power_mw`` for ``analysis.exec_s``."""
    return energy_j(power_mw, analysis.exec_s) / total_ops


def run_energy_j(
    cfg: "SocConfig", result: "SimResult", clocks: Optional[Clocks] = None, backend_kind: BackendKind = HYPER
) -> float:
    """Energy of a replayed host trace: host-side components busy for the whole run, the cluster idle."""
    clocks = clocks or cfg.clocks
    return energy_j(system_power_mw(cfg, HOST_ACTIVE, clocks, backend_kind), result.seconds)
