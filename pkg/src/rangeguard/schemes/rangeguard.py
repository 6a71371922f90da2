"""RangeGuard: RS protection of per-value range identifiers.

Each 32-bit data region contributes one RID symbol: the RIDs of the values in
the region concatenated, first value in the most significant bits, zero
padded at the top when they do not fill the symbol.  Only the RS parity over
the eight RID symbols is stored; RIDs are regenerated from the data on read.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from ..rangemap import RangeMap
from ..rs import RsCode, rs_code
from .base import (
    DATA_BYTES,
    REGIONS,
    Block,
    ConfigError,
    DecodeOutcome,
    Outcome,
    Scheme,
    Stored,
    classify_exact,
    data_values,
    redundancy_of,
    values_to_data,
    with_redundancy,
)


class RgKind(enum.Enum):
    SSC8 = "rg8b_ssc"  # RS(10,8) over GF(256)
    DSC4 = "rg4b_dsc"  # RS(12,8) over GF(16)


CODES = {RgKind.SSC8: (10, 8, 8), RgKind.DSC4: (12, 8, 4)}


@dataclass(frozen=True)
class RgConfig:
    kind: RgKind
    range_map: RangeMap

    @property
    def code(self) -> RsCode:
        return rs_code(*CODES[self.kind])

    @property
    def symbol_bits(self) -> int:
        return CODES[self.kind][2]

    @property
    def format(self):
        return self.range_map.format

    @property
    def values_per_region(self) -> int:
        return 32 // self.format.total_bits

    @property
    def rid_bits(self) -> int:
        return self.range_map.rid_bits

    def check(self) -> None:
        if 32 % self.format.total_bits:
            raise ConfigError(f"{self.format.name} values do not tile 32-bit regions")
        used = self.values_per_region * self.rid_bits
        if used > self.symbol_bits:
            raise ConfigError(
                f"{self.values_per_region} x {self.rid_bits}-bit RIDs do not fit a "
                f"{self.symbol_bits}-bit symbol"
            )


def _pack(rids: np.ndarray, cfg: RgConfig) -> np.ndarray:
    """``(N, 8 * vpr)`` RIDs -> ``(N, 8)`` symbols."""
    vpr, w = cfg.values_per_region, cfg.rid_bits
    r = rids.reshape(rids.shape[0], REGIONS, vpr)
    sym = np.zeros((rids.shape[0], REGIONS), dtype=np.int64)
    for j in range(vpr):
        sym |= r[:, :, j] << ((vpr - 1 - j) * w)
    return sym


def _unpack(symbols: np.ndarray, cfg: RgConfig) -> tuple[np.ndarray, np.ndarray]:
    """Symbols -> (RIDs ``(N, 8 * vpr)``, padding bits ``(N, 8)``)."""
    vpr, w = cfg.values_per_region, cfg.rid_bits
    mask = (1 << w) - 1
    parts = [(symbols >> ((vpr - 1 - j) * w)) & mask for j in range(vpr)]
    rids = np.stack(parts, axis=2).reshape(symbols.shape[0], REGIONS * vpr)
    return rids, symbols >> (vpr * w)


def rid_symbols_batch(data: np.ndarray, cfg: RgConfig) -> np.ndarray:
    values = data_values(data, cfg.format)
    return _pack(cfg.range_map.rids(values), cfg)


def _parity_to_lane(parity: np.ndarray, cfg: RgConfig) -> np.ndarray:
    lane = np.zeros(parity.shape[0], dtype=np.int64)
    for j in range(parity.shape[1]):
        lane |= parity[:, j] << (j * cfg.symbol_bits)
    return lane


def _lane_to_parity(lane: np.ndarray, cfg: RgConfig) -> np.ndarray:
    mask = (1 << cfg.symbol_bits) - 1
    return np.stack([(lane >> (j * cfg.symbol_bits)) & mask for j in range(cfg.code.nsym)], axis=1)


def rg_encode_batch(data: np.ndarray, cfg: RgConfig) -> np.ndarray:
    """16-bit redundancy word per block."""
    return _parity_to_lane(cfg.code.encode_batch(rid_symbols_batch(data, cfg)), cfg)


def rg_decode_batch(data: np.ndarray, redundancy: np.ndarray, cfg: RgConfig):
    """Repair ``(N, 32)`` data against stored redundancy.

    Returns ``(repaired, due, substituted)`` where ``substituted`` flags the
    values replaced by a representative.
    """
    data = np.asarray(data, dtype=np.uint8)
    rmap = cfg.range_map
    values = data_values(data, cfg.format)
    old_rids = rmap.rids(values)
    symbols = _pack(old_rids, cfg)
    word = np.concatenate([symbols, _lane_to_parity(np.asarray(redundancy, np.int64), cfg)], axis=1)
    fixed, ok = cfg.code.decode_batch(word)
    new_rids, padding = _unpack(fixed[:, :REGIONS], cfg)
    invalid = np.any(padding != 0, axis=1) | np.any(new_rids >= len(rmap), axis=1)
    due = ~ok | invalid
    substituted = (new_rids != old_rids) & ~due[:, None]
    repaired_values = np.where(substituted, rmap.substitute(values, np.minimum(new_rids, len(rmap) - 1)), values)
    repaired = values_to_data(repaired_values, cfg.format)
    return repaired, due, substituted


def rid_equivalent(golden: np.ndarray, repaired: np.ndarray, cfg: RgConfig) -> np.ndarray:
    rmap = cfg.range_map
    g = rmap.rids(data_values(golden, cfg.format))
    r = rmap.rids(data_values(repaired, cfg.format))
    return np.all(g == r, axis=1)


def classify_rg(golden, repaired, due, injected, cfg: RgConfig) -> np.ndarray:
    out = classify_exact(golden, repaired, due, injected)
    be = (out == Outcome.SDC) & rid_equivalent(golden, repaired, cfg)
    return np.where(be, Outcome.BE, out).astype(np.int8)


class RangeGuardScheme(Scheme):
    def __init__(self, cfg: RgConfig):
        cfg.check()
        self.cfg = cfg
        self.name = cfg.kind.value

    def encode(self, data):
        data = np.asarray(data, dtype=np.uint8)
        return Stored(with_redundancy(data, rg_encode_batch(data, self.cfg)))

    def decode(self, stored):
        repaired, due, _ = rg_decode_batch(stored.image[:, :DATA_BYTES], redundancy_of(stored.image), self.cfg)
        return repaired, due

    def classify(self, golden, repaired, due, injected):
        return classify_rg(golden, repaired, due, injected, self.cfg)


# ----------------------------------------------------------------------
# single-block API


def _as_row(data: bytes) -> np.ndarray:
    if len(data) != DATA_BYTES:
        raise ValueError(f"block data must be {DATA_BYTES} bytes")
    return np.frombuffer(bytes(data), dtype=np.uint8)[None, :]


def rid_symbols(block: Block | bytes, cfg: RgConfig) -> list[int]:
    data = block.data if isinstance(block, Block) else block
    if isinstance(block, Block) and block.format != cfg.format:
        raise ConfigError(f"block format {block.format.name} does not match map {cfg.format.name}")
    cfg.check()
    return [int(s) for s in rid_symbols_batch(_as_row(data), cfg)[0]]


def rg_encode(data: bytes, cfg: RgConfig) -> int:
    cfg.check()
    return int(rg_encode_batch(_as_row(data), cfg)[0])


def rg_decode(data: bytes, redundancy: int, cfg: RgConfig) -> tuple[bytes, bool, list[int]]:
    """Returns ``(repaired bytes, due, substituted value indices)``."""
    cfg.check()
    repaired, due, subst = rg_decode_batch(_as_row(data), np.array([redundancy]), cfg)
    return repaired[0].tobytes(), bool(due[0]), [int(i) for i in np.flatnonzero(subst[0])]


def classify(golden: bytes, repaired: bytes, due: bool, cfg: RgConfig | None = None,
             injected: bool = True, substituted: list[int] | None = None) -> DecodeOutcome:
    g, r = _as_row(golden), _as_row(repaired)
    d, inj = np.array([due]), np.array([injected])
    code = classify_rg(g, r, d, inj, cfg) if cfg is not None else classify_exact(g, r, d, inj)
    return DecodeOutcome(Outcome(int(code[0])), bytes(repaired), list(substituted or []))
