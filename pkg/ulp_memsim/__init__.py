import logging

from ulp_memsim.config import SocConfig, classify_address, default_config, dump_config, load_config  # noqa
from ulp_memsim.errors import BaseMemSimError, MemSimError  # noqa
from ulp_memsim.harness import Experiment, ResultTable, emit_csv, load_experiment, run_experiment  # noqa
from ulp_memsim.host import TraceRecord, build_memory_system, gen_stride_trace, run_trace  # noqa
from ulp_memsim.pmca import KernelDescriptor, offload_total_cycles, pmca_exec_cycles, speedup_vs_host  # noqa
from ulp_memsim.power import ccr, component_power_mw, relative_efficiency, system_power_mw  # noqa


root_logger = logging.getLogger("ulp_memsim")
if root_logger.level == logging.NOTSET:
    root_logger.setLevel(logging.WARN)
