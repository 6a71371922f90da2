"""Shortened Reed-Solomon codes over GF(2^m).

Codewords are laid out systematically, data symbols first.  Symbol ``i`` of an
``n``-symbol word is the coefficient of ``x^(n-1-i)``; the generator has the
consecutive roots ``alpha^0 .. alpha^(n-k-1)``.

Two decoding routes are provided.  :meth:`RsCode.decode` is the textbook
syndrome / Berlekamp-Massey / Chien / Forney pipeline on one word.  The batch
routes (:meth:`RsCode.decode_batch`) work on ``(N, n)`` arrays through
precomputed per-position syndrome tables and are what the simulators use.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field as dc_field
from functools import cached_property, lru_cache

import numpy as np

from .gf import GfField, field


class RsStatus(enum.Enum):
    CORRECTED = "corrected"
    UNCORRECTABLE = "uncorrectable"


@dataclass
class RsDecodeResult:
    status: RsStatus
    corrected_word: list[int]
    error_positions: list[int] = dc_field(default_factory=list)
    error_magnitudes: list[int] = dc_field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.status is RsStatus.CORRECTED


class RsCode:
    """RS(n, k) over GF(2^symbol_bits), shortened from length 2^m - 1."""

    def __init__(self, n: int, k: int, symbol_bits: int):
        gf = field(symbol_bits)
        if not 0 < k < n <= gf.order:
            raise ValueError(f"invalid RS({n},{k}) over GF(2^{symbol_bits})")
        self.gf: GfField = gf
        self.n = n
        self.k = k
        self.nsym = n - k
        self.t = self.nsym // 2
        self.full_length = gf.order
        self.symbol_bits = symbol_bits
        # coefficients, highest degree first; monic
        g = [1]
        for j in range(self.nsym):
            root = gf.alpha_pow(j)
            nxt = g + [0]
            for i, c in enumerate(g):
                nxt[i + 1] ^= gf.mul(c, root)
            g = nxt
        self.generator_poly = g

    def __repr__(self):
        return f"RsCode(n={self.n}, k={self.k}, symbol_bits={self.symbol_bits})"

    # ------------------------------------------------------------------
    # scalar reference path

    def _check_symbols(self, symbols, length):
        if len(symbols) != length:
            raise ValueError(f"expected {length} symbols, got {len(symbols)}")
        for s in symbols:
            if not 0 <= s < self.gf.size:
                raise ValueError(f"symbol {s} out of range for GF(2^{self.symbol_bits})")

    def encode(self, data) -> list[int]:
        """Return the ``n - k`` parity symbols for ``k`` data symbols."""
        data = [int(d) for d in data]
        self._check_symbols(data, self.k)
        gf = self.gf
        # remainder of data(x) * x^(n-k) divided by g(x); LFSR form
        rem = [0] * self.nsym
        for d in data:
            fb = d ^ rem[0]
            rem = rem[1:] + [0]
            if fb:
                for i in range(self.nsym):
                    rem[i] ^= gf.mul(fb, self.generator_poly[i + 1])
        return rem

    def codeword(self, data) -> list[int]:
        data = [int(d) for d in data]
        return data + self.encode(data)

    def syndromes(self, word) -> list[int]:
        gf = self.gf
        return [gf.poly_eval(list(word), gf.alpha_pow(j)) for j in range(self.nsym)]

    def decode(self, received) -> RsDecodeResult:
        received = [int(r) for r in received]
        self._check_symbols(received, self.n)
        gf = self.gf
        synd = self.syndromes(received)
        if not any(synd):
            return RsDecodeResult(RsStatus.CORRECTED, received)

        fail = RsDecodeResult(RsStatus.UNCORRECTABLE, received)
        locator, length = _berlekamp_massey(gf, synd)  # lowest degree first
        nerr = len(locator) - 1
        if nerr != length or nerr > self.t:
            return fail

        # Chien search over the full (unshortened) length so that roots in
        # the virtual prefix are seen and rejected.
        p_all = np.arange(self.full_length, dtype=np.int64)
        acc = np.zeros(self.full_length, dtype=np.int64)
        for i, c in enumerate(locator):
            acc ^= gf.mul_const_np(gf.antilog_np[(-p_all * i) % gf.order], c)
        powers = [int(p) for p in np.flatnonzero(acc == 0)]
        if len(powers) != nerr:
            return fail
        if any(p >= self.n for p in powers):
            return fail

        # Forney, first root exponent 0: e = X * Omega(X^-1) / Lambda'(X^-1)
        omega = _poly_mul_low(gf, synd, locator)[: self.nsym]
        deriv = [locator[i] if i % 2 == 1 else 0 for i in range(1, len(locator))]
        corrected = list(received)
        positions, mags = [], []
        for p in powers:
            x = gf.alpha_pow(p)
            x_inv = gf.alpha_pow(-p)
            den = _eval_low(gf, deriv, x_inv)
            if den == 0:
                return fail
            mag = gf.mul(x, gf.div(_eval_low(gf, omega, x_inv), den))
            pos = self.n - 1 - p
            corrected[pos] ^= mag
            positions.append(pos)
            mags.append(mag)
        if any(self.syndromes(corrected)):
            return fail
        order = sorted(range(len(positions)), key=positions.__getitem__)
        return RsDecodeResult(
            RsStatus.CORRECTED,
            corrected,
            [positions[i] for i in order],
            [mags[i] for i in order],
        )

    # ------------------------------------------------------------------
    # batch path

    @cached_property
    def _syndrome_tables(self) -> np.ndarray:
        """``T[i, v]`` = packed syndromes contributed by value ``v`` at position ``i``."""
        gf = self.gf
        m = self.symbol_bits
        vals = np.arange(gf.size, dtype=np.int64)
        tables = np.zeros((self.n, gf.size), dtype=np.int64)
        for i in range(self.n):
            p = self.n - 1 - i
            for j in range(self.nsym):
                tables[i] |= gf.mul_const_np(vals, gf.alpha_pow(j * p)) << (j * m)
        return tables

    @cached_property
    def _parity_tables(self) -> np.ndarray:
        """``P[i, v]`` = packed parity for a unit data word scaled by ``v`` at position ``i``."""
        gf = self.gf
        m = self.symbol_bits
        vals = np.arange(gf.size, dtype=np.int64)
        tables = np.zeros((self.k, gf.size), dtype=np.int64)
        for i in range(self.k):
            unit = [0] * self.k
            unit[i] = 1
            par = self.encode(unit)
            for j, c in enumerate(par):
                if c:
                    tables[i] |= gf.mul_const_np(vals, c) << (j * m)
        return tables

    def encode_batch(self, data: np.ndarray) -> np.ndarray:
        """Parity for ``(N, k)`` data symbols, returned as ``(N, n - k)``."""
        data = np.asarray(data, dtype=np.int64)
        tables = self._parity_tables
        packed = np.zeros(data.shape[0], dtype=np.int64)
        for i in range(self.k):
            packed ^= tables[i][data[:, i]]
        return self._unpack(packed, self.nsym)

    def syndromes_batch(self, words: np.ndarray) -> np.ndarray:
        """Packed syndromes, ``S_j`` in bits ``[j*m, (j+1)*m)``."""
        words = np.asarray(words, dtype=np.int64)
        tables = self._syndrome_tables
        packed = np.zeros(words.shape[0], dtype=np.int64)
        for i in range(self.n):
            packed ^= tables[i][words[:, i]]
        return packed

    def _unpack(self, packed: np.ndarray, count: int) -> np.ndarray:
        mask = self.gf.size - 1
        return np.stack([(packed >> (j * self.symbol_bits)) & mask for j in range(count)], axis=1)

    def decode_batch(self, words: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Decode ``(N, n)`` words; returns ``(corrected words, ok mask)``.

        Uncorrectable words are returned unchanged with ``ok`` False.
        """
        words = np.asarray(words, dtype=np.int64)
        synd = self.syndromes_batch(words)
        if self.nsym * self.symbol_bits <= 16:
            pos, mag, ok = self._lookup_table
            pos = pos[synd]
            mag = mag[synd]
            ok = ok[synd]
        elif self.t == 1:
            pos, mag, ok = self._single_error_closed_form(synd)
            pos = pos[:, None]
            mag = mag[:, None]
        else:  # pragma: no cover - no such code in this package
            raise NotImplementedError("batch decoding needs t == 1 or a 16-bit syndrome")
        out = words.copy()
        rows = np.arange(words.shape[0])
        for c in range(pos.shape[1]):
            hit = ok & (pos[:, c] >= 0)
            out[rows[hit], pos[hit, c]] ^= mag[hit, c]
        return out, ok

    @cached_property
    def _lookup_table(self):
        """Syndrome -> error pattern for every pattern of weight <= t."""
        size = 1 << (self.nsym * self.symbol_bits)
        pos = np.full((size, self.t), -1, dtype=np.int64)
        mag = np.zeros((size, self.t), dtype=np.int64)
        ok = np.zeros(size, dtype=bool)
        ok[0] = True
        tables = self._syndrome_tables
        nz = np.arange(1, self.gf.size)
        for w in range(1, self.t + 1):
            for positions in itertools.combinations(range(self.n), w):
                grids = np.meshgrid(*([nz] * w), indexing="ij")
                mags = [g.ravel() for g in grids]
                s = np.zeros(mags[0].shape[0], dtype=np.int64)
                for p, mg in zip(positions, mags):
                    s ^= tables[p][mg]
                ok[s] = True
                for c, (p, mg) in enumerate(zip(positions, mags)):
                    pos[s, c] = p
                    mag[s, c] = mg
        return pos, mag, ok

    def _single_error_closed_form(self, synd: np.ndarray):
        gf = self.gf
        m = self.symbol_bits
        mask = gf.size - 1
        s0 = synd & mask
        s1 = (synd >> m) & mask
        both = (s0 != 0) & (s1 != 0)
        power = (gf.log_np[s1] - gf.log_np[s0]) % gf.order
        inside = both & (power < self.n)
        ok = (synd == 0) | inside
        pos = np.where(inside, self.n - 1 - power, -1)
        mag = np.where(inside, s0, 0)
        return pos, mag, ok


def _eval_low(gf: GfField, coeffs: list[int], x: int) -> int:
    """Evaluate a lowest-degree-first polynomial."""
    y = 0
    for c in reversed(coeffs):
        y = gf.mul(y, x) ^ c
    return y


def _poly_mul_low(gf: GfField, a: list[int], b: list[int]) -> list[int]:
    out = [0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                out[i + j] ^= gf.mul(x, y)
    return out


def _berlekamp_massey(gf: GfField, synd: list[int]) -> tuple[list[int], int]:
    """Error locator Lambda(x) (lowest degree first) and the LFSR length."""
    lam = [1]
    prev = [1]
    length = 0
    shift = 1
    b = 1
    for r, _ in enumerate(synd):
        d = synd[r]
        for i in range(1, length + 1):
            if i < len(lam):
                d ^= gf.mul(lam[i], synd[r - i])
        if d == 0:
            shift += 1
            continue
        coef = gf.div(d, b)
        update = [0] * shift + [gf.mul(coef, c) for c in prev]
        new = lam + [0] * max(0, len(update) - len(lam))
        for i, c in enumerate(update):
            new[i] ^= c
        if 2 * length <= r:
            prev = lam
            length = r + 1 - length
            b = d
            shift = 1
        else:
            shift += 1
        lam = new
    while len(lam) > 1 and lam[-1] == 0:
        lam.pop()
    return lam, length


@lru_cache(maxsize=None)
def rs_code(n: int, k: int, symbol_bits: int) -> RsCode:
    return RsCode(n, k, symbol_bits)


def rs_encode(code: RsCode, data) -> list[int]:
    return code.encode(data)


def rs_decode(code: RsCode, received) -> RsDecodeResult:
    return code.decode(received)
