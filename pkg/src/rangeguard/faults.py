"""DRAM fault modes over the 272-bit stored image and the BER fault mixture.

Region policies: ``"data"`` confines SE/DAE/16E/32E faults to the 256 data
bits, ``"image"`` lets them land anywhere in the 272-bit image (the last
32-bit window is then truncated to the 16-bit redundancy lane).  FC always
covers the full image.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .schemes.base import DATA_BITS, IMAGE_BITS, IMAGE_BYTES


class FaultMode(enum.Enum):
    SE = "SE"
    DAE = "DAE"
    E16 = "16E"
    E32 = "32E"
    FC = "FC"

    @property
    def boundary_bits(self) -> int:
        return {"SE": 1, "DAE": 2, "16E": 16, "32E": 32, "FC": IMAGE_BITS}[self.value]

    @classmethod
    def parse(cls, name: str) -> "FaultMode":
        key = name.strip().upper()
        aliases = {"E16": "16E", "E32": "32E"}
        return cls(aliases.get(key, key))


REGIONS = ("data", "image")


@dataclass(frozen=True)
class FaultEvent:
    mode: FaultMode
    start_bit: int
    flip_mask: int  # over the 272-bit image, bit b = image bit b

    @property
    def popcount(self) -> int:
        return bin(self.flip_mask).count("1")

    def mask_bytes(self) -> np.ndarray:
        return np.frombuffer(self.flip_mask.to_bytes(IMAGE_BYTES, "little"), dtype=np.uint8).copy()


def _scope(region: str) -> int:
    if region not in REGIONS:
        raise ValueError(f"region policy must be one of {REGIONS}, got {region!r}")
    return DATA_BITS if region == "data" else IMAGE_BITS


def _set_bits(masks: np.ndarray, bits: np.ndarray, on: np.ndarray | None = None) -> None:
    rows = np.arange(masks.shape[0])
    if on is not None:
        rows, bits = rows[on], bits[on]
    np.bitwise_xor.at(masks, (rows, bits // 8), (1 << (bits % 8)).astype(np.uint8))


def _put_word(masks: np.ndarray, byte_offset: np.ndarray, pattern: np.ndarray, nbytes: int) -> None:
    rows = np.arange(masks.shape[0])
    for i in range(nbytes):
        col = byte_offset + i
        ok = col < IMAGE_BYTES
        masks[rows[ok], col[ok]] ^= ((pattern[ok] >> (8 * i)) & 0xFF).astype(np.uint8)


def inject_batch(mode: FaultMode, n: int, rng: np.random.Generator, region: str = "data",
                 dae_both: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """``n`` independent events: ``(start_bits (n,), masks (n, 34) uint8)``.

    Non-SE modes flip each bit of their window with probability 1/2, except
    DAE with ``dae_both`` which flips both bits.
    """
    mode = FaultMode(mode)
    scope = _scope(region)
    masks = np.zeros((n, IMAGE_BYTES), dtype=np.uint8)
    if mode is FaultMode.SE:
        start = rng.integers(0, scope, n)
        _set_bits(masks, start)
    elif mode is FaultMode.DAE:
        # both bits inside one 16-bit aligned word
        start = rng.integers(0, scope // 16, n) * 16 + rng.integers(0, 15, n)
        if dae_both:
            _set_bits(masks, start)
            _set_bits(masks, start + 1)
        else:
            flips = rng.random((n, 2)) < 0.5
            _set_bits(masks, start, flips[:, 0])
            _set_bits(masks, start + 1, flips[:, 1])
    elif mode is FaultMode.E16:
        start = rng.integers(0, scope // 16, n) * 16
        _put_word(masks, start // 8, rng.integers(0, 1 << 16, n), 2)
    elif mode is FaultMode.E32:
        start = rng.integers(0, -(-scope // 32), n) * 32
        _put_word(masks, start // 8, rng.integers(0, 1 << 32, n), 4)
    else:
        start = np.zeros(n, dtype=np.int64)
        masks[:] = rng.integers(0, 256, (n, IMAGE_BYTES), dtype=np.uint8)
    return start.astype(np.int64), masks


def inject(mode, region: str = "data", rng: np.random.Generator | None = None,
           dae_both: bool = False) -> FaultEvent:
    rng = rng if rng is not None else np.random.default_rng()
    mode = FaultMode(mode)
    start, masks = inject_batch(mode, 1, rng, region, dae_both)
    return FaultEvent(mode, int(start[0]), int.from_bytes(masks[0].tobytes(), "little"))


def inject_double(mode_a, mode_b, rng: np.random.Generator, region: str = "data") -> tuple[FaultEvent, FaultEvent]:
    return inject(mode_a, region, rng), inject(mode_b, region, rng)


def popcount_rows(masks: np.ndarray) -> np.ndarray:
    return np.bitwise_count(masks).sum(axis=1, dtype=np.int64)


# ----------------------------------------------------------------------
# BER mixture

MIXTURE_MODES = (FaultMode.SE, FaultMode.DAE, FaultMode.E16, FaultMode.E32)
FAULT_RATIO = {FaultMode.SE: 0.009, FaultMode.DAE: 0.012, FaultMode.E16: 0.022, FaultMode.E32: 0.050}
EXPECTED_FLIPS = {FaultMode.SE: 1, FaultMode.DAE: 2, FaultMode.E16: 8, FaultMode.E32: 16}
# the fault ratios weighted by expected flips sum to 1.009; dividing by this
# makes the expected flipped-bit fraction exactly the requested BER
RATIO_NORM = sum(FAULT_RATIO[m] * EXPECTED_FLIPS[m] for m in MIXTURE_MODES)
MAX_BER = 1e-2


def mode_rates(ber: float, bits_per_block: int = DATA_BITS) -> dict[FaultMode, float]:
    """Expected events of each mode per block."""
    return {m: FAULT_RATIO[m] * ber / RATIO_NORM * bits_per_block for m in MIXTURE_MODES}


@dataclass
class MixtureFaults:
    """Sparse fault list for a population of blocks, one row per event."""

    block_count: int
    block: np.ndarray
    mode: np.ndarray  # index into MIXTURE_MODES
    start: np.ndarray
    masks: np.ndarray
    u: np.ndarray  # per-event uniform used to thin to lower BERs

    def __len__(self):
        return len(self.block)

    def thin(self, fraction: float) -> "MixtureFaults":
        keep = self.u < fraction
        return MixtureFaults(self.block_count, self.block[keep], self.mode[keep],
                             self.start[keep], self.masks[keep], self.u[keep])

    def combined(self) -> tuple[np.ndarray, np.ndarray]:
        """``(affected block indices, XOR-combined masks)``."""
        if len(self) == 0:
            return np.zeros(0, dtype=np.int64), np.zeros((0, IMAGE_BYTES), dtype=np.uint8)
        order = np.argsort(self.block, kind="stable")
        blocks = self.block[order]
        uniq, first = np.unique(blocks, return_index=True)
        return uniq, np.bitwise_xor.reduceat(self.masks[order], first, axis=0)

    def mode_counts(self) -> dict[str, int]:
        return {m.value: int(np.sum(self.mode == i)) for i, m in enumerate(MIXTURE_MODES)}

    def per_block(self) -> list[list[FaultEvent]]:
        out: list[list[FaultEvent]] = [[] for _ in range(self.block_count)]
        for b, m, s, mk in zip(self.block, self.mode, self.start, self.masks):
            out[int(b)].append(FaultEvent(MIXTURE_MODES[int(m)], int(s), int.from_bytes(mk.tobytes(), "little")))
        return out


def sample_ber_mixture(ber: float, block_count: int, rng: np.random.Generator,
                       region: str = "data") -> MixtureFaults:
    """Poisson number of events of each mode over ``block_count`` blocks.

    DAE events flip both bits; 16E/32E flip each window bit with
    probability 1/2, so their expected flips are 8 and 16.
    """
    if not 0 <= ber <= MAX_BER:
        raise ValueError(f"BER must lie in [0, {MAX_BER}], got {ber}")
    rates = mode_rates(ber, _scope(region))
    parts = []
    for i, m in enumerate(MIXTURE_MODES):
        count = int(rng.poisson(rates[m] * block_count)) if ber > 0 else 0
        block = rng.integers(0, block_count, count)
        start, masks = inject_batch(m, count, rng, region, dae_both=True)
        parts.append((block, np.full(count, i), start, masks))
    block = np.concatenate([p[0] for p in parts]).astype(np.int64)
    return MixtureFaults(
        block_count,
        block,
        np.concatenate([p[1] for p in parts]).astype(np.int64),
        np.concatenate([p[2] for p in parts]).astype(np.int64),
        np.concatenate([p[3] for p in parts]).reshape(-1, IMAGE_BYTES),
        rng.random(len(block)),
    )
