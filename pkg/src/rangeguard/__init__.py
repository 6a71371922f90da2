"""Range-aware error protection for numeric data in memory."""

from .bitnum import BF16, FP8_E4M3, FP8_E5M2, FP16, FP32, INT8, BitWord, NumFormat, get_format
from .rangemap import MapKind, RangeMap, build_ideal_map, build_lloydmax_map, build_simple_map
from .rs import RsCode, RsStatus
from .schemes import Outcome, SchemeConfig, SchemeKind

__version__ = "0.1.0"

__all__ = [
    "BF16", "FP8_E4M3", "FP8_E5M2", "FP16", "FP32", "INT8", "BitWord", "NumFormat", "get_format",
    "MapKind", "RangeMap", "build_ideal_map", "build_lloydmax_map", "build_simple_map",
    "RsCode", "RsStatus", "Outcome", "SchemeConfig", "SchemeKind",
]
