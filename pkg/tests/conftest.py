import pytest
from faker import Faker

from ulp_memsim.config import default_config
from ulp_memsim.memory import DdrBackend, HyperConfig, HyperRamBackend


@pytest.fixture()
def faker_():
    return Faker()


@pytest.fixture(scope="session")
def soc_config():
    return default_config()


@pytest.fixture()
def hyper_backend(soc_config):
    return HyperRamBackend(soc_config.hyper, soc_config.clocks.soc_mhz, soc_config.address_map.dram.base)


@pytest.fixture()
def lpddr_backend(soc_config):
    return DdrBackend(soc_config.ddr, soc_config.clocks.soc_mhz, soc_config.address_map.dram.base)


@pytest.fixture()
def single_bus():
    return HyperConfig(n_cs=4, n_buses=1)


@pytest.fixture()
def dual_bus():
    return HyperConfig(n_cs=4, n_buses=2)
