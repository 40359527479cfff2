"""Python interface to the cgra_dough overlay customization toolkit."""

from ._core import (
    CapExceededError,
    DoughError,
    InfeasibleError,
    InvalidArgument,
    Kernel,
    ParseError,
    SemanticError,
    SimulationError,
    UnschedulableError,
    bram_blocks,
    builtin_kernel,
    customize,
    es_space_size,
    load_kernel,
    parse_kernel,
    run_cli,
    schedule,
    verify,
    zedboard_platform,
)

__all__ = [
    "CapExceededError",
    "DoughError",
    "InfeasibleError",
    "InvalidArgument",
    "Kernel",
    "ParseError",
    "SemanticError",
    "SimulationError",
    "UnschedulableError",
    "bram_blocks",
    "builtin_kernel",
    "customize",
    "es_space_size",
    "load_kernel",
    "parse_kernel",
    "run_cli",
    "schedule",
    "verify",
    "zedboard_platform",
]
