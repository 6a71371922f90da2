"""Arithmetic in GF(2^m) for the symbol widths used by the codes in this package.

Elements are plain ints.  Each :class:`GfField` carries discrete log/antilog
tables both as Python lists (scalar paths) and numpy arrays (batch paths).
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

# Conventional primitive polynomials, bit i = coefficient of x^i.
PRIMITIVE_POLYS = {
    4: 0x13,  # x^4 + x + 1
    8: 0x11D,  # x^8 + x^4 + x^3 + x^2 + 1
    16: 0x1100B,  # x^16 + x^12 + x^3 + x + 1
}


class GfField:
    """GF(2^m) with log tables built at construction.

    The generator alpha = x must cycle through every nonzero element; a
    non-primitive polynomial raises ``ValueError``.
    """

    def __init__(self, symbol_bits: int, primitive_poly: int | None = None):
        if symbol_bits not in PRIMITIVE_POLYS:
            raise ValueError(f"unsupported symbol width {symbol_bits}")
        poly = PRIMITIVE_POLYS[symbol_bits] if primitive_poly is None else primitive_poly
        if poly >> symbol_bits != 1:
            raise ValueError(f"polynomial {poly:#x} does not have degree {symbol_bits}")
        self.symbol_bits = symbol_bits
        self.primitive_poly = poly
        self.size = 1 << symbol_bits
        self.order = self.size - 1

        antilog = [0] * (2 * self.order)
        log = [-1] * self.size
        x = 1
        for i in range(self.order):
            if log[x] != -1:
                raise ValueError(f"polynomial {poly:#x} is not primitive")
            antilog[i] = x
            log[x] = i
            x <<= 1
            if x & self.size:
                x ^= poly
        if x != 1:
            raise ValueError(f"polynomial {poly:#x} is not primitive")
        # doubled so that antilog[log a + log b] needs no modulo
        for i in range(self.order, 2 * self.order):
            antilog[i] = antilog[i - self.order]
        self.log = log
        self.antilog = antilog
        self.log_np = np.array(log, dtype=np.int64)
        self.antilog_np = np.array(antilog, dtype=np.int64)

    def __repr__(self):
        return f"GfField(symbol_bits={self.symbol_bits}, primitive_poly={self.primitive_poly:#x})"

    def _check(self, a: int) -> None:
        if not 0 <= a < self.size:
            raise ValueError(f"{a} is not an element of GF(2^{self.symbol_bits})")

    @staticmethod
    def add(a: int, b: int) -> int:
        return a ^ b

    def mul(self, a: int, b: int) -> int:
        if a == 0 or b == 0:
            return 0
        return self.antilog[self.log[a] + self.log[b]]

    def div(self, a: int, b: int) -> int:
        if b == 0:
            raise ZeroDivisionError("division by zero in GF(2^m)")
        if a == 0:
            return 0
        return self.antilog[self.log[a] - self.log[b] + self.order]

    def inv(self, a: int) -> int:
        if a == 0:
            raise ZeroDivisionError("zero has no multiplicative inverse")
        return self.antilog[self.order - self.log[a]]

    def pow(self, a: int, n: int) -> int:
        if a == 0:
            return 1 if n == 0 else 0
        return self.antilog[(self.log[a] * n) % self.order]

    def alpha_pow(self, n: int) -> int:
        return self.antilog[n % self.order]

    def poly_eval(self, coeffs: list[int], x: int) -> int:
        """Horner evaluation; ``coeffs[0]`` is the highest-degree coefficient."""
        y = 0
        for c in coeffs:
            y = self.mul(y, x) ^ c
        return y

    # Batch helpers over int arrays.

    def mul_np(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        a = np.asarray(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64)
        la = self.log_np[a]
        lb = self.log_np[b]
        out = self.antilog_np[np.where((a == 0) | (b == 0), 0, la + lb)]
        return np.where((a == 0) | (b == 0), 0, out)

    def mul_const_np(self, a: np.ndarray, c: int) -> np.ndarray:
        if c == 0:
            return np.zeros_like(a, dtype=np.int64)
        a = np.asarray(a, dtype=np.int64)
        out = self.antilog_np[self.log_np[a] + self.log[c]]
        return np.where(a == 0, 0, out)


def gf_add(a: int, b: int) -> int:
    return a ^ b


def gf_mul(a: int, b: int, symbol_bits: int = 8) -> int:
    return field(symbol_bits).mul(a, b)


def gf_inv(a: int, symbol_bits: int = 8) -> int:
    return field(symbol_bits).inv(a)


def slow_mul(a: int, b: int, poly: int, symbol_bits: int) -> int:
    """Shift-and-add multiply with reduction; independent of the log tables."""
    result = 0
    while b:
        if b & 1:
            result ^= a
        b >>= 1
        a <<= 1
        if a >> symbol_bits:
            a ^= poly
    return result


@lru_cache(maxsize=None)
def field(symbol_bits: int) -> GfField:
    """Shared field instance for a symbol width (fields are immutable)."""
    return GfField(symbol_bits)
