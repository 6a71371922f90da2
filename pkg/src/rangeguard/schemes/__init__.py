from .base import (
    DATA_BITS,
    DATA_BYTES,
    IMAGE_BITS,
    IMAGE_BYTES,
    Block,
    ConfigError,
    DecodeOutcome,
    Outcome,
    Scheme,
    Stored,
    Unprotected,
    classify_exact,
    data_values,
    values_to_data,
)
from .baseline import BaselineOeccCrc
from .nulling import WeightNulling
from .rangeguard import (
    RangeGuardScheme,
    RgConfig,
    RgKind,
    classify,
    classify_rg,
    rg_decode,
    rg_decode_batch,
    rg_encode,
    rg_encode_batch,
    rid_equivalent,
    rid_symbols,
)
from .registry import Registry, SchemeConfig, SchemeKind, map_tag, map_tag_dispatch
from .secded import SecDed
from .symbol import Ssc8
