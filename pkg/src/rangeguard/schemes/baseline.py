"""HBM3-style baseline: on-die RS(19,17) over 16-bit symbols plus a CRC16 lane.

The 272-bit image is 256 data bits and the CRC16 of the data.  The on-die
code treats the image as 17 little-endian 16-bit symbols; its two parity
symbols are kept outside the fault-exposed image.  Words the on-die decoder
cannot correct are passed through unchanged and left to the CRC.
"""

from __future__ import annotations

import numpy as np

from ..crc import crc16_batch
from ..rs import rs_code
from .base import DATA_BYTES, IMAGE_BYTES, Scheme, Stored, redundancy_of, with_redundancy

OECC = (19, 17, 16)


def _symbols(image: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(image).view("<u2").astype(np.int64)


class BaselineOeccCrc(Scheme):
    name = "baseline"

    def __init__(self):
        self.code = rs_code(*OECC)

    def encode(self, data):
        data = np.asarray(data, dtype=np.uint8)
        image = with_redundancy(data, crc16_batch(data))
        return Stored(image, self.code.encode_batch(_symbols(image)))

    def decode(self, stored):
        word = np.concatenate([_symbols(stored.image), stored.hidden], axis=1)
        fixed, _ = self.code.decode_batch(word)
        image = np.ascontiguousarray(fixed[:, : self.code.k].astype("<u2")).view(np.uint8)
        data = image[:, :DATA_BYTES].copy()
        due = crc16_batch(data) != redundancy_of(image)
        return data, due
