"""Weight Nulling: the LSB of every value holds even parity over the value;
values that fail the check are zeroed and the block is reported as DUE."""

from __future__ import annotations

import numpy as np

from ..bitnum import BF16, NumFormat
from .base import DATA_BYTES, Scheme, Stored, data_values, values_to_data, with_redundancy


def _parity(v: np.ndarray) -> np.ndarray:
    return np.bitwise_count(v.astype(np.uint64)).astype(np.int64) & 1


class WeightNulling(Scheme):
    name = "weight_nulling"

    def __init__(self, fmt: NumFormat = BF16):
        self.format = fmt

    def encode(self, data):
        v = data_values(np.asarray(data, dtype=np.uint8), self.format) & ~1
        v |= _parity(v)
        return Stored(with_redundancy(values_to_data(v, self.format), np.zeros(v.shape[0], np.int64)))

    def decode(self, stored):
        v = data_values(stored.image[:, :DATA_BYTES], self.format)
        bad = _parity(v) == 1
        repaired = values_to_data(np.where(bad, 0, v), self.format)
        return repaired, np.any(bad, axis=1)
