"""Bit-exact numeric formats and the value impact of bit flips."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np


class ValueClass(enum.Enum):
    ZERO = "zero"
    SUBNORMAL = "subnormal"
    NORMAL = "normal"
    INF = "inf"
    NAN = "nan"
    INTEGER = "integer"


@dataclass(frozen=True)
class NumFormat:
    name: str
    total_bits: int
    sign_bits: int
    exp_bits: int
    mantissa_bits: int
    exp_bias: int
    is_float: bool = True
    # OCP E4M3: no infinities, only S.1111.111 is NaN
    finite_top_exponent: bool = False

    def __post_init__(self):
        if self.sign_bits + self.exp_bits + self.mantissa_bits != self.total_bits:
            raise ValueError(f"{self.name}: field widths do not add up to {self.total_bits}")

    @property
    def exp_max(self) -> int:
        return (1 << self.exp_bits) - 1

    @property
    def sign_mask(self) -> int:
        return (1 << (self.total_bits - 1)) if self.sign_bits else 0

    @property
    def magnitude_mask(self) -> int:
        return (1 << (self.total_bits - 1)) - 1

    def exponent_of(self, raw: int) -> int:
        return (raw >> self.mantissa_bits) & self.exp_max

    def exp_bit_position(self, p: int) -> int:
        return self.mantissa_bits + p

    def mantissa_bit_position(self, k: int) -> int:
        """Word bit index of mantissa bit ``k`` (``k = 0`` is the most significant)."""
        return self.mantissa_bits - 1 - k

    @cached_property
    def value_table(self) -> np.ndarray:
        """Decoded value of every raw word (formats of 16 bits or fewer)."""
        if self.total_bits > 16:
            raise ValueError(f"{self.name} is too wide for a lookup table")
        return np.array(
            [decode_value(BitWord(r, self))[0] for r in range(1 << self.total_bits)],
            dtype=np.float64,
        )

    @cached_property
    def max_finite(self) -> float:
        if not self.is_float:
            return float((1 << (self.total_bits - 1)) - 1)
        if self.total_bits <= 16:
            vals = self.value_table
            return float(np.max(vals[np.isfinite(vals)]))
        return float(np.finfo(np.float32).max)

    def __str__(self):
        return self.name


BF16 = NumFormat("bf16", 16, 1, 8, 7, 127)
FP32 = NumFormat("fp32", 32, 1, 8, 23, 127)
FP16 = NumFormat("fp16", 16, 1, 5, 10, 15)
FP8_E4M3 = NumFormat("fp8_e4m3", 8, 1, 4, 3, 7, finite_top_exponent=True)
FP8_E5M2 = NumFormat("fp8_e5m2", 8, 1, 5, 2, 15)
INT8 = NumFormat("int8", 8, 1, 0, 7, 0, is_float=False)

FORMATS = {f.name: f for f in (BF16, FP32, FP16, FP8_E4M3, FP8_E5M2, INT8)}


def get_format(name: str) -> NumFormat:
    try:
        return FORMATS[name.lower()]
    except KeyError:
        raise ValueError(f"unknown format {name!r}; choose from {sorted(FORMATS)}") from None


@dataclass(frozen=True)
class BitWord:
    raw: int
    format: NumFormat

    def __post_init__(self):
        if not 0 <= self.raw < (1 << self.format.total_bits):
            raise ValueError(f"{self.raw:#x} does not fit in {self.format.total_bits} bits")

    @property
    def sign(self) -> int:
        return self.raw >> (self.format.total_bits - 1) if self.format.sign_bits else 0

    @property
    def exponent(self) -> int:
        return self.format.exponent_of(self.raw)

    @property
    def mantissa(self) -> int:
        return self.raw & ((1 << self.format.mantissa_bits) - 1)


def decode_value(w: BitWord) -> tuple[float, ValueClass]:
    fmt = w.format
    if not fmt.is_float:
        raw = w.raw
        if raw & fmt.sign_mask:
            raw -= 1 << fmt.total_bits
        return float(raw), ValueClass.INTEGER
    sign = -1.0 if w.sign else 1.0
    e, m = w.exponent, w.mantissa
    mbits = fmt.mantissa_bits
    if e == fmt.exp_max:
        if fmt.finite_top_exponent:
            if m == (1 << mbits) - 1:
                return math.nan, ValueClass.NAN
        elif m:
            return math.nan, ValueClass.NAN
        else:
            return sign * math.inf, ValueClass.INF
    if e == 0:
        if m == 0:
            return sign * 0.0, ValueClass.ZERO
        return sign * math.ldexp(m, 1 - fmt.exp_bias - mbits), ValueClass.SUBNORMAL
    return sign * math.ldexp((1 << mbits) | m, e - fmt.exp_bias - mbits), ValueClass.NORMAL


def flip_bits(w: BitWord, mask: int) -> BitWord:
    if not 0 <= mask < (1 << w.format.total_bits):
        raise ValueError(f"mask {mask:#x} does not fit {w.format.name}")
    return BitWord(w.raw ^ mask, w.format)


def scale_factor(p: int, polarity: str, exp_bits: int = 8) -> float:
    """Multiplicative change from flipping exponent bit ``p`` (0 = LSB).

    ``polarity`` is ``"0->1"`` (amplify by 2^(2^p)) or ``"1->0"`` (attenuate).
    """
    if not 0 <= p < exp_bits:
        raise ValueError(f"exponent bit {p} out of range for {exp_bits} exponent bits")
    if polarity == "0->1":
        return math.ldexp(1.0, 1 << p)
    if polarity == "1->0":
        return math.ldexp(1.0, -(1 << p))
    raise ValueError(f"polarity must be '0->1' or '1->0', got {polarity!r}")


def mantissa_flip_bound(w: BitWord, k: int) -> float:
    """|x' - x| for flipping mantissa bit ``k``; never more than |x| / 2."""
    fmt = w.format
    value, cls = decode_value(w)
    if cls is not ValueClass.NORMAL:
        raise ValueError(f"mantissa bound needs a normal value, got {cls.value}")
    if not 0 <= k < fmt.mantissa_bits:
        raise ValueError(f"mantissa bit {k} out of range")
    # 2^-(k+1) / (1.m) * |x| reduces to an exact power of two
    return math.ldexp(1.0, w.exponent - fmt.exp_bias - (k + 1))


@dataclass(frozen=True)
class FlipImpact:
    field: str  # "s", "e", "m", or "b" for integer bits
    index: int
    bit: int  # position within the word
    polarity: str  # "0->1", "1->0" or "any"
    kind: str  # "ratio" (x'/x) or "additive" (x' - x)
    log2_factor: int | None  # exponent of the power-of-two factor; None for sign
    factor: float

    @property
    def label(self) -> str:
        return "s" if self.field == "s" else f"{self.field}[{self.index}]"

    @property
    def expression(self) -> str:
        if self.kind == "additive":
            sgn = "+" if self.factor > 0 else "-"
            return f"{sgn}2^{self.log2_factor}"
        if self.field == "s":
            return "x(-1)"
        if self.field == "e":
            sgn = "" if self.polarity == "0->1" else "-"
            return f"x2^({sgn}2^{self.index})"
        return f"x2^{self.log2_factor}"


def flip_impact_table(fmt: NumFormat) -> list[FlipImpact]:
    """Error ratio per (bit, polarity).

    Mantissa rows carry the worst-case ratio deviation magnitude 2^-(k+1).
    Integer formats get additive rows (+-2^p; the sign bit weighs -2^(n-1)).
    """
    rows: list[FlipImpact] = []
    if not fmt.is_float:
        top = fmt.total_bits - 1
        for p in range(top, -1, -1):
            weight = -(1 << p) if p == top else (1 << p)
            for pol, sgn in (("0->1", 1), ("1->0", -1)):
                rows.append(FlipImpact("b", p, p, pol, "additive", p, float(sgn * weight)))
        return rows
    rows.append(FlipImpact("s", 0, fmt.total_bits - 1, "any", "ratio", None, -1.0))
    for p in range(fmt.exp_bits - 1, -1, -1):
        for pol in ("0->1", "1->0"):
            sf = scale_factor(p, pol, fmt.exp_bits)
            rows.append(
                FlipImpact("e", p, fmt.exp_bit_position(p), pol, "ratio",
                           (1 << p) if pol == "0->1" else -(1 << p), sf)
            )
    for k in range(fmt.mantissa_bits):
        rows.append(
            FlipImpact("m", k, fmt.mantissa_bit_position(k), "any", "ratio",
                       -(k + 1), math.ldexp(1.0, -(k + 1)))
        )
    return rows


# ----------------------------------------------------------------------
# array helpers


def raw_dtype(fmt: NumFormat):
    return {8: np.uint8, 16: np.uint16, 32: np.uint32}[fmt.total_bits]


def decode_array(raw: np.ndarray, fmt: NumFormat) -> np.ndarray:
    raw = np.asarray(raw)
    if fmt.total_bits <= 16:
        return fmt.value_table[raw.astype(np.int64)]
    if fmt is FP32 or fmt.name == "fp32":
        return raw.astype(np.uint32).view(np.float32).astype(np.float64)
    raise ValueError(f"no array decoder for {fmt.name}")


def exponent_array(raw: np.ndarray, fmt: NumFormat) -> np.ndarray:
    return (np.asarray(raw).astype(np.int64) >> fmt.mantissa_bits) & fmt.exp_max


def encode_array(values: np.ndarray, fmt: NumFormat) -> np.ndarray:
    """Round values to ``fmt`` (round to nearest, ties to even)."""
    values = np.asarray(values, dtype=np.float64)
    name = fmt.name
    if name == "fp32":
        return values.astype(np.float32).view(np.uint32)
    if name == "fp16":
        with np.errstate(over="ignore"):
            return values.astype(np.float16).view(np.uint16)
    if name == "bf16":
        with np.errstate(over="ignore"):
            u = values.astype(np.float32).view(np.uint32).astype(np.uint64)
        nan = np.isnan(values)
        rounded = (u + 0x7FFF + ((u >> 16) & 1)) >> 16
        rounded = np.where(nan, (u >> 16) | 0x40, rounded)
        return rounded.astype(np.uint16)
    if name == "int8":
        clipped = np.clip(np.rint(values), -128, 127)
        return clipped.astype(np.int8).view(np.uint8)
    if fmt.total_bits == 8:
        return _encode_lut(values, fmt)
    raise ValueError(f"no array encoder for {fmt.name}")


def _encode_lut(values: np.ndarray, fmt: NumFormat) -> np.ndarray:
    table = fmt.value_table
    half = 1 << (fmt.total_bits - 1)
    pos_codes = np.arange(half)
    pos_vals = table[:half]
    finite = np.isfinite(pos_vals)
    codes = pos_codes[finite]
    vals = pos_vals[finite]
    order = np.argsort(vals, kind="stable")
    codes, vals = codes[order], vals[order]
    mag = np.nan_to_num(np.minimum(np.abs(values), vals[-1]))  # saturate
    hi = np.clip(np.searchsorted(vals, mag), 1, len(vals) - 1)
    lo = hi - 1
    dlo = mag - vals[lo]
    dhi = vals[hi] - mag
    pick_hi = (dhi < dlo) | ((dhi == dlo) & (codes[hi] % 2 == 0))
    out = np.where(pick_hi, codes[hi], codes[lo])
    out = np.where(np.signbit(values), out | half, out)
    out = np.where(np.isnan(values), half - 1, out)  # S.111..1 is NaN in both FP8 layouts
    return out.astype(np.uint8)
