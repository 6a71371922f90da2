"""(272,256) SEC-DED with Hsiao odd-weight columns.

Data bits use weight-3 columns with equal row weights; the 16
check bits (the redundancy lane) use the unit columns.
"""

from __future__ import annotations

import itertools
from functools import lru_cache

import numpy as np

from .base import DATA_BITS, DATA_BYTES, IMAGE_BITS, IMAGE_BYTES, Scheme, Stored, with_redundancy

CHECK_BITS = 16


@lru_cache(maxsize=None)
def hsiao_columns() -> tuple[int, ...]:
    """Syndrome column of every image bit (data first, then check bits).

    Weight-3 columns come in whole orbits under cyclic row rotation; each
    orbit of 16 puts exactly three ones in every row, so 16 orbits give
    row weights of 48 throughout.
    """
    mask = (1 << CHECK_BITS) - 1

    def rot(c, s):
        return ((c << s) | (c >> (CHECK_BITS - s))) & mask

    seen: set[int] = set()
    chosen: list[int] = []
    for rows in itertools.combinations(range(CHECK_BITS), 3):
        c = sum(1 << r for r in rows)
        if c in seen:
            continue
        orbit = [rot(c, s) for s in range(CHECK_BITS)]
        seen.update(orbit)
        if len(set(orbit)) == CHECK_BITS:
            chosen.extend(orbit)
        if len(chosen) == DATA_BITS:
            break
    return tuple(chosen) + tuple(1 << r for r in range(CHECK_BITS))


@lru_cache(maxsize=None)
def _tables():
    cols = hsiao_columns()
    byte_lut = np.zeros((IMAGE_BYTES, 256), dtype=np.int64)
    for b in range(IMAGE_BYTES):
        for bit in range(8):
            hit = (np.arange(256) >> bit) & 1
            byte_lut[b] ^= hit * cols[8 * b + bit]
    locate = np.full(1 << CHECK_BITS, -1, dtype=np.int64)
    for pos, c in enumerate(cols):
        locate[c] = pos
    return byte_lut, locate


def syndromes(image: np.ndarray) -> np.ndarray:
    lut, _ = _tables()
    s = np.zeros(image.shape[0], dtype=np.int64)
    for b in range(image.shape[1]):
        s ^= lut[b][image[:, b]]
    return s


class SecDed(Scheme):
    name = "secded"

    def encode(self, data):
        data = np.asarray(data, dtype=np.uint8)
        lut, _ = _tables()
        check = np.zeros(data.shape[0], dtype=np.int64)
        for b in range(DATA_BYTES):
            check ^= lut[b][data[:, b]]
        return Stored(with_redundancy(data, check))

    def decode(self, stored):
        _, locate = _tables()
        image = stored.image.copy()
        s = syndromes(image)
        pos = locate[s]
        fix = (s != 0) & (pos >= 0)
        rows = np.flatnonzero(fix)
        image[rows, pos[rows] // 8] ^= (1 << (pos[rows] % 8)).astype(np.uint8)
        due = (s != 0) & (pos < 0)
        return image[:, :DATA_BYTES], due


def analytic_detection_rate() -> float:
    """Fraction of uniformly random error patterns flagged as uncorrectable."""
    return 1.0 - (1 + IMAGE_BITS) / (1 << CHECK_BITS)
