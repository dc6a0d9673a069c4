"""Simulator errors."""
import typing as t


class BaseMemSimError(Exception):
    """Base error for the memory-hierarchy simulator."""


class MemSimError(BaseMemSimError):
    pass


class ConfigParseError(MemSimError):
    """The configuration document is not well formed."""

    def __init__(self, message: str, line: t.Optional[int] = None, column: t.Optional[int] = None):
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"{message}{where}")
        self.line = line
        self.column = column


class ConfigValidationError(MemSimError):
    """One or more configuration invariants are violated."""

    def __init__(self, violations: t.Sequence[t.Tuple[str, str]]):
        self.violations = list(violations)
        lines = "; ".join(f"{path}: {message}" for path, message in self.violations)
        super().__init__(f"invalid configuration: {lines}")


class AddressError(MemSimError):
    def __init__(self, message: str, addr: int):
        super().__init__(f"{message}: {addr:#x}")
        self.addr = addr


class TransactionError(MemSimError):
    pass


class TraceError(MemSimError):
    def __init__(self, message: str, index: int, unit: str = "record"):
        super().__init__(f"{message} ({unit} {index})")
        self.index = index


class ModelError(MemSimError):
    pass


class ExperimentError(MemSimError):
    pass
