"""CRC-16/CCITT-FALSE (poly 0x1021, init 0xFFFF, no reflection, no final xor)."""

from __future__ import annotations

import numpy as np

POLY = 0x1021
INIT = 0xFFFF


def _make_table() -> list[int]:
    table = []
    for byte in range(256):
        crc = byte << 8
        for _ in range(8):
            crc = ((crc << 1) ^ POLY) if crc & 0x8000 else (crc << 1)
        table.append(crc & 0xFFFF)
    return table


TABLE = _make_table()
_TABLE_NP = np.array(TABLE, dtype=np.int64)


def crc16(data: bytes, crc: int = INIT) -> int:
    for b in data:
        crc = ((crc << 8) & 0xFFFF) ^ TABLE[((crc >> 8) ^ b) & 0xFF]
    return crc


def crc16_batch(rows: np.ndarray) -> np.ndarray:
    """CRC of every row of an ``(N, L)`` uint8 array."""
    rows = np.asarray(rows, dtype=np.int64)
    crc = np.full(rows.shape[0], INIT, dtype=np.int64)
    for col in range(rows.shape[1]):
        crc = ((crc << 8) & 0xFFFF) ^ _TABLE_NP[((crc >> 8) ^ rows[:, col]) & 0xFF]
    return crc
