import math
import typing as t
from fractions import Fraction

import numpy as np

from ulp_memsim.errors import MemSimError


def is_power_of_two(value: int) -> bool:
    return value > 0 and (value & (value - 1)) == 0


def ceil_div(numerator: int, denominator: int) -> int:
    return -(-numerator // denominator)


def parse_int(value: t.Union[str, int]) -> int:
    """Accept plain integers and ``0x``-prefixed strings."""
    if isinstance(value, bool):
        raise MemSimError("boolean is not an integer: {value}".format(value=value))
    if isinstance(value, int):
        return value
    if isinstance(value, str):
        try:
            return int(value, 0)
        except ValueError:
            raise MemSimError("not an integer: {value!r}".format(value=value))
    raise MemSimError("integer expected, got {type}".format(type=type(value).__name__))


def convert_cycles(cycles: int, src_freq_mhz: float, dst_freq_mhz: float) -> int:
    """Convert a cycle count between clock domains, rounding up.

    :param cycles: number of cycles in the source domain
    :param src_freq_mhz: source domain frequency
    :param dst_freq_mhz: destination domain frequency

    :return: whole destination-domain cycles covering the same time
    """
    return math.ceil(Fraction(cycles) * Fraction(dst_freq_mhz) / Fraction(src_freq_mhz))


def fmt_number(value: t.Union[int, float]) -> str:
    """Render a CSV cell: integers verbatim, floats in positional notation with 6 significant digits."""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return np.format_float_positional(value, precision=6, unique=False, fractional=False, trim="-")
    return str(value)


def deep_merge(base: t.Dict[str, t.Any], override: t.Mapping[str, t.Any]) -> t.Dict[str, t.Any]:
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, t.Mapping) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged
