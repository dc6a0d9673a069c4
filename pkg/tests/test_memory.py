import pytest

from ulp_memsim.constants import READ, WRITE, KiB, MiB
from ulp_memsim.errors import AddressError, TransactionError
from ulp_memsim.memory import (
    Burst2D,
    DdrBackend,
    DdrConfig,
    DeviceLocation,
    HyperConfig,
    HyperRamBackend,
    MemTxn,
    ScratchpadBackend,
    ScratchpadTiming,
    bus_bytes,
    ddr_access_cycles,
    dma_expand_2d,
    hyper_access_cycles,
    map_address,
    split_at_devices,
    sustained_bandwidth_gbps,
    unmap_address,
)


@pytest.mark.parametrize(
    "kwargs, match", (
        ({"kind": "fetch", "addr": 0, "len_bytes": 8}, "invalid transaction kind"),
        ({"kind": READ, "addr": 0, "len_bytes": 0}, "len_bytes must be positive"),
        ({"kind": READ, "addr": -8, "len_bytes": 8}, "addr cannot be negative"),
        ({"kind": READ, "addr": 0, "len_bytes": 8, "source": "gpu"}, "unknown transaction source"),
        ({"kind": READ, "addr": 0, "len_bytes": 32, "burst2d": Burst2D(2, 16)}, "stride_bytes cannot be smaller"),
        ({"kind": READ, "addr": 0, "len_bytes": 32, "burst2d": Burst2D(0, 64)}, "count must be at least 1"),
    )
)
def test_mem_txn_rejects_invalid_fields(kwargs, match):
    with pytest.raises(TransactionError, match=match):
        MemTxn(**kwargs)


@pytest.mark.parametrize(
    "n_cs, n_buses, exp_capacity, exp_pins", (
        (4, 2, 512 * MiB, 15),
        (4, 1, 256 * MiB, 15),
        (1, 1, 64 * MiB, 12),
        (8, 2, 1024 * MiB, 19),
    )
)
def test_hyper_topology(n_cs, n_buses, exp_capacity, exp_pins):
    cfg = HyperConfig(n_cs=n_cs, n_buses=n_buses)
    assert cfg.total_capacity == exp_capacity
    assert cfg.pin_count == exp_pins


@pytest.mark.parametrize(
    "addr, exp_location", (
        (0, DeviceLocation(0, 0, 0)),
        (1, DeviceLocation(0, 0, 1)),
        (2, DeviceLocation(1, 0, 0)),
        (3, DeviceLocation(1, 0, 1)),
        (4, DeviceLocation(0, 0, 2)),
        (7, DeviceLocation(1, 0, 3)),
        (128 * MiB, DeviceLocation(0, 1, 0)),
        (512 * MiB - 1, DeviceLocation(1, 3, 64 * MiB - 1)),
    )
)
def test_map_address_dual_bus(dual_bus, addr, exp_location):
    assert map_address(dual_bus, addr) == exp_location


@pytest.mark.parametrize(
    "addr, exp_location", (
        (0, DeviceLocation(0, 0, 0)),
        (64 * MiB - 1, DeviceLocation(0, 0, 64 * MiB - 1)),
        (64 * MiB, DeviceLocation(0, 1, 0)),
        (200 * MiB + 5, DeviceLocation(0, 3, 8 * MiB + 5)),
    )
)
def test_map_address_single_bus(single_bus, addr, exp_location):
    assert map_address(single_bus, addr) == exp_location


@pytest.mark.parametrize("addr", (-1, 512 * MiB))
def test_map_address_out_of_range(dual_bus, addr):
    with pytest.raises(AddressError, match="outside HyperRAM capacity"):
        map_address(dual_bus, addr)


@pytest.mark.parametrize("window_base", (0, 128 * MiB - 2 * KiB, 200 * MiB))
@pytest.mark.parametrize("n_buses", (1, 2))
def test_map_address_is_bijective_over_window(n_buses, window_base):
    cfg = HyperConfig(n_cs=4, n_buses=n_buses)
    window = range(window_base, window_base + 4 * KiB)

    locations = [map_address(cfg, addr) for addr in window]

    assert len(set(locations)) == len(window)
    assert all(loc.device_addr < cfg.mem_bytes_per_cs for loc in locations)
    assert [unmap_address(cfg, loc) for loc in locations] == list(window)


def test_unmap_address_rejects_missing_bus(single_bus):
    with pytest.raises(AddressError, match="device location out of range"):
        unmap_address(single_bus, DeviceLocation(1, 0, 0))


@pytest.mark.parametrize(
    "addr, len_bytes, exp_result", (
        (0, 64, (32, 32)),
        (1, 3, (1, 2)),
        (2, 2, (0, 2)),
        (3, 4, (2, 2)),
        (0, 1, (1, 0)),
    )
)
def test_bus_bytes_follow_16_bit_interleave(dual_bus, addr, len_bytes, exp_result):
    assert bus_bytes(dual_bus, addr, len_bytes) == exp_result


@pytest.mark.parametrize(
    "n_buses, addr, len_bytes, exp_cycles", (
        (1, 0, 64, 39),
        (2, 0, 64, 23),
        (1, 0, 1, 8),
        (2, 1, 3, 8),
        (2, 0, 24 * KiB, 6151),
        (2, 0, 16 * KiB, 4103),
        (1, 0, 4 * KiB, 2055),
        (2, 0, 4 * KiB, 1031),
    )
)
def test_hyper_access_cycles(n_buses, addr, len_bytes, exp_cycles):
    cfg = HyperConfig(n_buses=n_buses, t_init_bus_cycles=7)
    assert hyper_access_cycles(cfg, MemTxn(READ, addr, len_bytes)) == exp_cycles


def test_hyper_access_cycles_rejects_device_crossing(dual_bus):
    with pytest.raises(TransactionError, match="crosses a device boundary"):
        hyper_access_cycles(dual_bus, MemTxn(READ, 128 * MiB - 8, 16))


def test_hyper_access_cycles_times_2d_burst_line_by_line(dual_bus):
    txn = MemTxn(READ, 0, 16, Burst2D(count=4, stride_bytes=64))
    assert hyper_access_cycles(dual_bus, txn) == 4 * (7 + 4)


def test_dual_bus_never_slower_than_single_bus(faker_):
    single, dual = HyperConfig(n_buses=1), HyperConfig(n_buses=2)
    for _ in range(200):
        len_bytes = faker_.pyint(min_value=1, max_value=4 * KiB)
        addr = faker_.pyint(min_value=0, max_value=64 * MiB - len_bytes)
        txn = MemTxn(faker_.random_element((READ, WRITE)), addr, len_bytes)
        assert hyper_access_cycles(dual, txn) <= hyper_access_cycles(single, txn)


@pytest.mark.parametrize(
    "n_buses, exp_gbps", (
        (1, 3.2),
        (2, 6.4),
    )
)
@pytest.mark.parametrize("len_bytes", (4 * KiB, 16 * KiB, 64 * KiB))
def test_sustained_bandwidth_converges_to_peak(n_buses, exp_gbps, len_bytes):
    bandwidth = sustained_bandwidth_gbps(HyperConfig(n_buses=n_buses, bus_freq_mhz=200.0), len_bytes)
    assert bandwidth == pytest.approx(exp_gbps, rel=0.02)
    assert bandwidth <= exp_gbps


@pytest.mark.parametrize("n_buses", (1, 2))
def test_sustained_bandwidth_is_monotone_in_length(n_buses):
    cfg = HyperConfig(n_buses=n_buses)
    bandwidths = [sustained_bandwidth_gbps(cfg, 1 << shift) for shift in range(0, 17)]
    assert bandwidths == sorted(bandwidths)


@pytest.mark.parametrize(
    "latency, bytes_per_cycle, len_bytes, exp_cycles", (
        (10, 8, 64, 18),
        (0, 8, 8, 1),
        (10, 8, 65, 19),
        (10, 8, 16 * KiB, 2058),
    )
)
def test_ddr_access_cycles(latency, bytes_per_cycle, len_bytes, exp_cycles):
    cfg = DdrConfig(fixed_latency_soc_cycles=latency, bytes_per_soc_cycle=bytes_per_cycle)
    assert ddr_access_cycles(cfg, MemTxn(READ, 0, len_bytes)) == exp_cycles


@pytest.mark.parametrize(
    "txn, exp_addrs", (
        (MemTxn(READ, 0, 16, Burst2D(4, 64)), [0, 64, 128, 192]),
        (MemTxn(WRITE, 0x100, 32, Burst2D(3, 32)), [0x100, 0x120, 0x140]),
        (MemTxn(READ, 0x40, 8, Burst2D(1, 8)), [0x40]),
        (MemTxn(READ, 0x40, 8), [0x40]),
    )
)
def test_dma_expand_2d(txn, exp_addrs):
    lines = dma_expand_2d(txn)

    assert [line.addr for line in lines] == exp_addrs
    assert all(line.len_bytes == txn.len_bytes and line.kind == txn.kind for line in lines)
    assert all(line.burst2d is None for line in lines)
    assert sum(line.len_bytes for line in lines) == txn.total_bytes


def test_dma_expand_2d_contiguous_burst_covers_region_once():
    lines = dma_expand_2d(MemTxn(READ, 0x100, 32, Burst2D(3, 32)))

    covered = [addr for line in lines for addr in range(line.addr, line.addr + line.len_bytes)]

    assert covered == list(range(0x100, 0x100 + 96))


@pytest.mark.parametrize(
    "n_buses, addr, len_bytes, exp_pieces", (
        (2, 128 * MiB - 32, 64, [(128 * MiB - 32, 32), (128 * MiB, 32)]),
        (1, 64 * MiB - 8, 16, [(64 * MiB - 8, 8), (64 * MiB, 8)]),
        (2, 0, 64, [(0, 64)]),
    )
)
def test_split_at_devices(n_buses, addr, len_bytes, exp_pieces):
    pieces = split_at_devices(HyperConfig(n_buses=n_buses), MemTxn(WRITE, addr, len_bytes))
    assert [(p.addr, p.len_bytes) for p in pieces] == exp_pieces


def test_hyper_backend_converts_bus_cycles_and_records_traffic(dual_bus):
    backend = HyperRamBackend(dual_bus, soc_freq_mhz=400.0, dram_base=0x8000_0000)

    read = backend.access(MemTxn(READ, 0x8000_0000, 64))
    write = backend.access(MemTxn(WRITE, 0x8000_0040, 8))

    assert read == 46
    assert write == 2 * (7 + 2)
    assert (backend.stats.txns, backend.stats.read_bytes, backend.stats.write_bytes) == (2, 64, 8)
    assert backend.stats.cycles == read + write


def test_hyper_backend_splits_at_device_boundary(dual_bus):
    backend = HyperRamBackend(dual_bus, soc_freq_mhz=400.0, dram_base=0x8000_0000)
    assert backend.cycles_for(MemTxn(READ, 0x8000_0000 + 128 * MiB - 32, 64)) == 2 * 2 * (7 + 8)


def test_hyper_backend_rejects_address_below_dram(dual_bus):
    backend = HyperRamBackend(dual_bus, soc_freq_mhz=400.0, dram_base=0x8000_0000)
    with pytest.raises(AddressError, match="below the dram region"):
        backend.cycles_for(MemTxn(READ, 0x1000, 8))


def test_cycles_for_leaves_statistics_alone(hyper_backend):
    hyper_backend.cycles_for(MemTxn(READ, hyper_backend.dram_base, 64), domain_mhz=900.0)
    assert hyper_backend.stats.txns == 0


def test_backend_transfer_seconds(hyper_backend, lpddr_backend):
    assert hyper_backend.transfer_seconds(32 * KiB, 16 * KiB) == pytest.approx(2 * 8206 / 400e6)
    assert lpddr_backend.transfer_seconds(32 * KiB, 16 * KiB) == pytest.approx(2 * 2058 / 400e6)


def test_ddr_backend_converts_to_other_domain():
    backend = DdrBackend(DdrConfig(), soc_freq_mhz=400.0)
    assert backend.cycles_for(MemTxn(READ, 0, 64)) == 18
    assert backend.cycles_for(MemTxn(READ, 0, 64), domain_mhz=900.0) == 41


def test_scratchpad_backend_timing():
    backend = ScratchpadBackend(ScratchpadTiming(latency_cycles=2, bytes_per_cycle=8), soc_freq_mhz=400.0)
    assert backend.access(MemTxn(READ, 0x1C00_0000, 64)) == 10
    assert backend.device_power_mw == 0.0
