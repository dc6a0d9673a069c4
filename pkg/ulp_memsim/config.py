"""
Loads, validates and serializes the SoC configuration document.

The document is JSON with the top-level keys ``clocks``, ``address_map``, ``llc``, ``hyper``, ``ddr``, ``l1``,
``l2spm_timing``, ``power`` and ``calibration``. Anything left out takes the shipped default, and integers may be
written as ``0x`` strings.
"""
import json
import logging
import typing as t
from dataclasses import asdict, dataclass, replace
from importlib import resources
from pathlib import Path

from ulp_memsim.address_map import L2SPM_BYTES, AddressMap, Region
from ulp_memsim.clocks import ClockDomain, Clocks
from ulp_memsim.constants import CLOCK_DOMAINS, COMPONENT_DOMAINS, COMPONENTS, HYPER, RegionTag
from ulp_memsim.errors import ConfigParseError, ConfigValidationError, MemSimError
from ulp_memsim.host import L1Config
from ulp_memsim.llc import LlcConfig
from ulp_memsim.memory import HYPER_MAX_BUS_MHZ, HYPER_MAX_DEVICE_BYTES, DdrConfig, HyperConfig, ScratchpadTiming
from ulp_memsim.pmca import CalibrationEntry, CalibrationTable, calibration_to_mapping
from ulp_memsim.power import PowerParams, system_power_mw
from ulp_memsim.utils import deep_merge, fmt_number, is_power_of_two, parse_int


logger = logging.getLogger(__name__)

Violations = t.List[t.Tuple[str, str]]


@dataclass(frozen=True)
class SocConfig:
    """The validated, immutable simulation configuration.

    ``lpddr_power_calibrated`` records that the LPDDR subsystem power was derived at load time rather than given.
    """

    clocks: Clocks
    address_map: AddressMap
    llc: LlcConfig
    hyper: HyperConfig
    ddr: DdrConfig
    l1: L1Config
    l2spm_timing: ScratchpadTiming
    power: t.Tuple[PowerParams, ...]
    calibration: CalibrationTable
    lpddr_power_calibrated: bool = False

    def with_overrides(self, overrides: t.Mapping[str, t.Any]) -> "SocConfig":
        """A copy with a partial document merged over this configuration, validated again."""
        return _from_document(deep_merge(config_to_document(self), overrides))


class _Reader:
    """Typed field access that records a violation instead of raising."""

    def __init__(self):
        self.violations: Violations = []

    def section(self, data: t.Any, path: str) -> t.Dict[str, t.Any]:
        if not isinstance(data, dict):
            self.violations.append((path, "must be an object"))
            return {}
        return data

    def integer(self, data: t.Mapping[str, t.Any], path: str, key: str) -> int:
        try:
            return parse_int(data[key])
        except KeyError:
            self.violations.append((f"{path}.{key}", "is required"))
        except MemSimError as err:
            self.violations.append((f"{path}.{key}", str(err)))
        return 0

    def number(self, data: t.Mapping[str, t.Any], path: str, key: str) -> float:
        if key not in data:
            self.violations.append((f"{path}.{key}", "is required"))
            return 0.0
        value = data[key]
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.violations.append((f"{path}.{key}", "number expected, got {value!r}".format(value=value)))
            return 0.0
        return float(value)

    def check(self, ok: bool, path: str, message: str) -> None:
        if not ok:
            self.violations.append((path, message))


def _read_clocks(r: _Reader, data: t.Any) -> Clocks:
    data = r.section(data, "clocks")
    for name in sorted(set(data) - set(CLOCK_DOMAINS)):
        r.check(False, f"clocks.{name}", "unknown clock domain")
    domains = []
    for name in CLOCK_DOMAINS:
        entry = r.section(data.get(name), f"clocks.{name}")
        freq = r.number(entry, f"clocks.{name}", "freq_mhz")
        ceiling = r.number(entry, f"clocks.{name}", "max_freq_mhz")
        r.check(0 < freq <= ceiling, f"clocks.{name}.freq_mhz", "must satisfy 0 < freq_mhz <= max_freq_mhz")
        domains.append(ClockDomain(name, freq, ceiling))
    return Clocks(tuple(domains))


def _read_region(r: _Reader, data: t.Any, path: str) -> Region:
    data = r.section(data, path)
    region = Region(r.integer(data, path, "base"), r.integer(data, path, "size"))
    r.check(is_power_of_two(region.size), f"{path}.size", "must be a power of two")
    r.check(region.size <= 0 or region.base % region.size == 0, f"{path}.base", "must be aligned to the size")
    return region


def _read_address_map(r: _Reader, data: t.Any) -> AddressMap:
    data = r.section(data, "address_map")
    address_map = AddressMap(
        l2spm=_read_region(r, data.get("l2spm"), "address_map.l2spm"),
        dram=_read_region(r, data.get("dram"), "address_map.dram"),
        cacheable_window=_read_region(r, data.get("cacheable_window"), "address_map.cacheable_window"),
    )
    r.check(address_map.l2spm.size == L2SPM_BYTES, "address_map.l2spm.size", "must be 512 KiB")
    r.check(not address_map.l2spm.overlaps(address_map.dram), "address_map.l2spm", "overlaps the dram region")
    r.check(
        address_map.dram.covers(address_map.cacheable_window),
        "address_map.cacheable_window",
        "must lie inside the dram region",
    )
    return address_map


def _read_llc(r: _Reader, data: t.Any) -> LlcConfig:
    data = r.section(data, "llc")
    llc = LlcConfig(**{key: r.integer(data, "llc", key) for key in ("axi_dw_bits", "n_blocks", "n_lines", "n_ways")})
    for key, value in asdict(llc).items():
        r.check(is_power_of_two(value), f"llc.{key}", "must be a power of two")
    r.check(llc.axi_dw_bits >= 8, "llc.axi_dw_bits", "must be at least 8")
    return llc


def _read_hyper(r: _Reader, data: t.Any) -> HyperConfig:
    data = r.section(data, "hyper")
    hyper = HyperConfig(
        n_cs=r.integer(data, "hyper", "n_cs"),
        n_buses=r.integer(data, "hyper", "n_buses"),
        mem_bytes_per_cs=r.integer(data, "hyper", "mem_bytes_per_cs"),
        bus_freq_mhz=r.number(data, "hyper", "bus_freq_mhz"),
        t_init_bus_cycles=r.integer(data, "hyper", "t_init_bus_cycles"),
        device_power_mw=r.number(data, "hyper", "device_power_mw"),
    )
    r.check(hyper.n_cs >= 1, "hyper.n_cs", "must be at least 1")
    r.check(hyper.n_buses in (1, 2), "hyper.n_buses", "must be 1 or 2")
    r.check(0 < hyper.mem_bytes_per_cs <= HYPER_MAX_DEVICE_BYTES, "hyper.mem_bytes_per_cs", "must be in (0, 64 MiB]")
    r.check(0 < hyper.bus_freq_mhz <= HYPER_MAX_BUS_MHZ, "hyper.bus_freq_mhz", "must be in (0, 200] MHz")
    r.check(hyper.t_init_bus_cycles >= 0, "hyper.t_init_bus_cycles", "cannot be negative")
    r.check(hyper.device_power_mw >= 0, "hyper.device_power_mw", "cannot be negative")
    return hyper


def _read_ddr(r: _Reader, data: t.Any) -> DdrConfig:
    data = r.section(data, "ddr")
    power = data.get("subsystem_power_mw")
    ddr = DdrConfig(
        fixed_latency_soc_cycles=r.integer(data, "ddr", "fixed_latency_soc_cycles"),
        bytes_per_soc_cycle=r.integer(data, "ddr", "bytes_per_soc_cycle"),
        subsystem_power_mw=None if power is None else r.number(data, "ddr", "subsystem_power_mw"),
    )
    r.check(ddr.fixed_latency_soc_cycles >= 0, "ddr.fixed_latency_soc_cycles", "cannot be negative")
    r.check(ddr.bytes_per_soc_cycle > 0, "ddr.bytes_per_soc_cycle", "must be positive")
    r.check(power is None or ddr.subsystem_power_mw >= 0, "ddr.subsystem_power_mw", "cannot be negative")
    return ddr


def _read_l1(r: _Reader, data: t.Any) -> L1Config:
    data = r.section(data, "l1")
    l1 = L1Config(**{key: r.integer(data, "l1", key) for key in ("size_bytes", "way_bytes", "line_bytes")})
    for key, value in asdict(l1).items():
        r.check(is_power_of_two(value), f"l1.{key}", "must be a power of two")
    r.check(l1.line_bytes <= l1.way_bytes <= l1.size_bytes, "l1", "needs line_bytes <= way_bytes <= size_bytes")
    return l1


def _read_scratchpad(r: _Reader, data: t.Any) -> ScratchpadTiming:
    data = r.section(data, "l2spm_timing")
    timing = ScratchpadTiming(
        latency_cycles=r.integer(data, "l2spm_timing", "latency_cycles"),
        bytes_per_cycle=r.integer(data, "l2spm_timing", "bytes_per_cycle"),
    )
    r.check(timing.latency_cycles >= 0, "l2spm_timing.latency_cycles", "cannot be negative")
    r.check(timing.bytes_per_cycle > 0, "l2spm_timing.bytes_per_cycle", "must be positive")
    return timing


def _read_power(r: _Reader, data: t.Any) -> t.Tuple[PowerParams, ...]:
    if not isinstance(data, list):
        r.check(False, "power", "must be a list")
        return ()
    rows = []
    for i, entry in enumerate(data):
        path = f"power[{i}]"
        entry = r.section(entry, path)
        component = entry.get("component")
        r.check(component in COMPONENTS, f"{path}.component", "unknown component {name!r}".format(name=component))
        r.check(component not in {row.component for row in rows}, f"{path}.component", "listed twice")
        row = PowerParams(
            component=str(component),
            leakage_mw=r.number(entry, path, "leakage_mw"),
            dynamic_uw_per_mhz=r.number(entry, path, "dynamic_uw_per_mhz"),
            max_freq_mhz=r.number(entry, path, "max_freq_mhz"),
        )
        for key in ("leakage_mw", "dynamic_uw_per_mhz", "max_freq_mhz"):
            r.check(getattr(row, key) >= 0, f"{path}.{key}", "cannot be negative")
        rows.append(row)
    return tuple(rows)


def _read_calibration(r: _Reader, data: t.Any) -> CalibrationTable:
    data = r.section(data, "calibration")
    offload = r.integer(data, "calibration", "offload_fixed_cycles")
    r.check(offload >= 0, "calibration.offload_fixed_cycles", "cannot be negative")
    benchmarks = r.section(data.get("benchmarks", {}), "calibration.benchmarks")
    entries = {}
    for name, entry in benchmarks.items():
        path = f"calibration.benchmarks.{name}"
        entry = r.section(entry, path)
        calibrated = CalibrationEntry(
            host_ops_per_cycle=r.number(entry, path, "host_ops_per_cycle"),
            pmca_ops_per_cycle=r.number(entry, path, "pmca_ops_per_cycle"),
            code_size_bytes=r.integer(entry, path, "code_size_bytes"),
        )
        r.check(calibrated.host_ops_per_cycle > 0, f"{path}.host_ops_per_cycle", "must be positive")
        r.check(calibrated.pmca_ops_per_cycle > 0, f"{path}.pmca_ops_per_cycle", "must be positive")
        r.check(calibrated.code_size_bytes >= 0, f"{path}.code_size_bytes", "cannot be negative")
        entries[name] = calibrated
    return CalibrationTable(entries, offload)


def _from_document(document: t.Mapping[str, t.Any]) -> SocConfig:
    r = _Reader()
    cfg = SocConfig(
        clocks=_read_clocks(r, document.get("clocks")),
        address_map=_read_address_map(r, document.get("address_map")),
        llc=_read_llc(r, document.get("llc")),
        hyper=_read_hyper(r, document.get("hyper")),
        ddr=_read_ddr(r, document.get("ddr")),
        l1=_read_l1(r, document.get("l1")),
        l2spm_timing=_read_scratchpad(r, document.get("l2spm_timing")),
        power=_read_power(r, document.get("power")),
        calibration=_read_calibration(r, document.get("calibration")),
    )
    r.check(
        cfg.address_map.dram.size == cfg.hyper.total_capacity,
        "address_map.dram.size",
        "must equal the HyperRAM capacity ({n} bytes)".format(n=cfg.hyper.total_capacity),
    )
    for i, row in enumerate(cfg.power):
        if row.component not in COMPONENT_DOMAINS:
            continue
        domain = COMPONENT_DOMAINS[row.component]
        r.check(
            cfg.clocks.freq(domain) <= row.max_freq_mhz,
            f"clocks.{domain}.freq_mhz",
            "exceeds power[{i}].max_freq_mhz ({ceiling} MHz) of {component}".format(
                i=i, ceiling=fmt_number(row.max_freq_mhz), component=row.component
            ),
        )
    for name in sorted(set(document) - set(DEFAULT_SECTIONS)):
        r.check(False, name, "unknown configuration key")
    if r.violations:
        raise ConfigValidationError(r.violations)

    if cfg.ddr.subsystem_power_mw is None:
        # the whole SoC on LPDDR defaults to twice its draw on HyperRAM
        power = system_power_mw(cfg, frozenset(COMPONENTS), cfg.clocks, HYPER) + cfg.hyper.device_power_mw
        cfg = replace(cfg, ddr=replace(cfg.ddr, subsystem_power_mw=power), lpddr_power_calibrated=True)
        logger.debug("LPDDR subsystem power calibrated to %.2f mW", power)
    return cfg


DEFAULT_SECTIONS = (
    "clocks",
    "address_map",
    "llc",
    "hyper",
    "ddr",
    "l1",
    "l2spm_timing",
    "power",
    "calibration",
)


def _default_document() -> t.Dict[str, t.Any]:
    text = resources.files("ulp_memsim").joinpath("data/soc_default.json").read_text(encoding="utf-8")
    return json.loads(text)


def _parse(text: str, what: str) -> t.Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigParseError("malformed {what}: {msg}".format(what=what, msg=err.msg), err.lineno, err.colno)


def load_config(text: str) -> SocConfig:
    """Parse and validate a configuration document; every violation is reported at once."""
    document = _parse(text, "configuration")
    if not isinstance(document, dict):
        raise ConfigParseError("configuration must be an object")
    return _from_document(deep_merge(_default_document(), document))


def load_config_file(path: t.Union[str, Path]) -> SocConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as err:
        raise ConfigParseError("cannot read {path}: {err}".format(path=path, err=err.strerror))
    logger.debug("Loading configuration from %s", path)
    return load_config(text)


def default_config() -> SocConfig:
    return load_config("{}")


def classify_address(cfg: SocConfig, addr: int) -> RegionTag:
    return cfg.address_map.classify(addr)


def _hex_region(region: Region) -> t.Dict[str, str]:
    return {"base": hex(region.base), "size": hex(region.size)}


def config_to_document(cfg: SocConfig) -> t.Dict[str, t.Any]:
    ddr = asdict(cfg.ddr)
    if cfg.lpddr_power_calibrated:
        ddr["subsystem_power_mw"] = None
    hyper = asdict(cfg.hyper)
    hyper["mem_bytes_per_cs"] = hex(cfg.hyper.mem_bytes_per_cs)
    return {
        "clocks": {d.name: {"freq_mhz": d.freq_mhz, "max_freq_mhz": d.max_freq_mhz} for d in cfg.clocks.domains},
        "address_map": {name: _hex_region(region) for name, region in cfg.address_map.regions().items()},
        "llc": asdict(cfg.llc),
        "hyper": hyper,
        "ddr": ddr,
        "l1": asdict(cfg.l1),
        "l2spm_timing": asdict(cfg.l2spm_timing),
        "power": [asdict(p) for p in cfg.power],
        "calibration": calibration_to_mapping(cfg.calibration),
    }


def dump_config(cfg: SocConfig) -> str:
    """Canonical text of ``cfg``: sorted keys, two-space indent, trailing newline."""
    return json.dumps(config_to_document(cfg), indent=2, sort_keys=True) + "\n"
