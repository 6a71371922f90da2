"""Block layout, outcome codes and the batch scheme interface.

A protected block is stored as a 272-bit image: 256 data bits followed by a
16-bit redundancy lane.  Batches are ``(N, 34)`` uint8 arrays; bytes 0-31 are
data, bytes 32-33 the little-endian redundancy word.  Image bit ``b`` is bit
``b % 8`` of byte ``b // 8``.  A value of ``w`` bits occupies image bits
``[i * w, (i + 1) * w)`` (little-endian), so 32-bit region ``r`` is bytes
``4r .. 4r + 3``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from ..bitnum import NumFormat

DATA_BITS = 256
REDUNDANCY_BITS = 16
IMAGE_BITS = DATA_BITS + REDUNDANCY_BITS
DATA_BYTES = DATA_BITS // 8
IMAGE_BYTES = IMAGE_BITS // 8
REGIONS = DATA_BITS // 32


class Outcome(enum.IntEnum):
    NO_ERROR = 0
    CE = 1
    BE = 2
    DUE = 3
    SDC = 4


class ConfigError(ValueError):
    """Raised for scheme configurations that cannot be realised."""


@dataclass
class Block:
    data: bytes
    redundancy: int
    format: NumFormat
    map_tag: int = 0

    def __post_init__(self):
        if len(self.data) != DATA_BYTES:
            raise ValueError(f"block data must be {DATA_BYTES} bytes, got {len(self.data)}")
        if not 0 <= self.redundancy < (1 << REDUNDANCY_BITS):
            raise ValueError("redundancy must fit in 16 bits")
        if not 0 <= self.map_tag < 16:
            raise ValueError("map tag is a 4-bit field")
        if 32 % self.format.total_bits:
            raise ValueError(f"{self.format.name} values do not tile a 32-bit region")

    @property
    def values_per_region(self) -> int:
        return 32 // self.format.total_bits

    def values(self) -> list[int]:
        return [int(v) for v in data_values(np.frombuffer(self.data, np.uint8)[None], self.format)[0]]


@dataclass
class DecodeOutcome:
    kind: Outcome
    repaired: bytes
    substituted_positions: list[int] = field(default_factory=list)


@dataclass
class Stored:
    """Output of a batch encode: the fault-exposed image plus any redundancy
    kept outside it (e.g. on-die parity)."""

    image: np.ndarray
    hidden: np.ndarray | None = None

    def __len__(self):
        return self.image.shape[0]

    def take(self, idx) -> "Stored":
        return Stored(self.image[idx], None if self.hidden is None else self.hidden[idx])


def data_values(data: np.ndarray, fmt: NumFormat) -> np.ndarray:
    """Raw value words of ``(N, 32)`` data as an ``(N, 256 / bits)`` int64 array."""
    data = np.ascontiguousarray(data, dtype=np.uint8)
    dt = {8: "<u1", 16: "<u2", 32: "<u4"}[fmt.total_bits]
    return data.view(dt).astype(np.int64)


def values_to_data(values: np.ndarray, fmt: NumFormat) -> np.ndarray:
    dt = {8: "<u1", 16: "<u2", 32: "<u4"}[fmt.total_bits]
    return np.ascontiguousarray(np.asarray(values).astype(dt)).view(np.uint8)


def redundancy_of(image: np.ndarray) -> np.ndarray:
    return image[:, 32].astype(np.int64) | (image[:, 33].astype(np.int64) << 8)


def with_redundancy(data: np.ndarray, red: np.ndarray) -> np.ndarray:
    red = np.asarray(red, dtype=np.int64)
    image = np.empty((data.shape[0], IMAGE_BYTES), dtype=np.uint8)
    image[:, :DATA_BYTES] = data
    image[:, 32] = red & 0xFF
    image[:, 33] = (red >> 8) & 0xFF
    return image


def classify_exact(golden: np.ndarray, repaired: np.ndarray, due: np.ndarray,
                   injected: np.ndarray) -> np.ndarray:
    same = np.all(golden == repaired, axis=1)
    out = np.where(same, np.where(injected, Outcome.CE, Outcome.NO_ERROR), Outcome.SDC)
    return np.where(due, Outcome.DUE, out).astype(np.int8)


class Scheme:
    """Batch protection scheme over 256-bit blocks."""

    name = "scheme"

    def encode(self, data: np.ndarray) -> Stored:
        raise NotImplementedError

    def decode(self, stored: Stored) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(repaired data (N, 32), due mask (N,))``."""
        raise NotImplementedError

    def golden(self, stored: Stored) -> np.ndarray:
        """The data a clean read must return (after any encode-side rewrite)."""
        return stored.image[:, :DATA_BYTES]

    def classify(self, golden, repaired, due, injected) -> np.ndarray:
        return classify_exact(golden, repaired, due, injected)


class Unprotected(Scheme):
    name = "none"

    def encode(self, data):
        data = np.asarray(data, dtype=np.uint8)
        return Stored(with_redundancy(data, np.zeros(data.shape[0], dtype=np.int64)))

    def decode(self, stored):
        return stored.image[:, :DATA_BYTES].copy(), np.zeros(len(stored), dtype=bool)
