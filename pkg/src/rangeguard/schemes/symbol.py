"""Single-symbol correction with RS(34,32) over bytes: 32 data bytes plus the
two parity bytes in the redundancy lane."""

from __future__ import annotations

import numpy as np

from ..rs import rs_code
from .base import DATA_BYTES, Scheme, Stored, redundancy_of, with_redundancy

SSC8 = (34, 32, 8)


class Ssc8(Scheme):
    name = "ssc8"

    def __init__(self):
        self.code = rs_code(*SSC8)

    def encode(self, data):
        data = np.asarray(data, dtype=np.uint8)
        par = self.code.encode_batch(data.astype(np.int64))
        return Stored(with_redundancy(data, par[:, 0] | (par[:, 1] << 8)))

    def decode(self, stored):
        fixed, ok = self.code.decode_batch(stored.image.astype(np.int64))
        return fixed[:, :DATA_BYTES].astype(np.uint8), ~ok


def analytic_detection_rate(n: int = 34, symbol_bits: int = 8, nsym: int = 2) -> float:
    """Fraction of random syndromes not consumed by a single-symbol correction."""
    q = 1 << symbol_bits
    return 1.0 - (1 + n * (q - 1)) / (1 << (symbol_bits * nsym))
