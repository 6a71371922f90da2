"""RangeMaps: partitions of a format's value domain into ranges with representatives.

Three constructions are provided:

* ``build_simple_map``: exact DP over the exponent alphabet under a
  zero-mean Gaussian exponent PMF (magnitude-level ranges, sign carried by
  the stored word).
* ``build_ideal_map``: L1-optimal scalar quantizer for N(0, sigma^2).
* ``build_lloydmax_map``: the same quantizer fit to empirical samples.
"""

from __future__ import annotations

import enum
import json
import math
import warnings
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.special import erf, erfc, ndtr, ndtri

from .bitnum import BF16, BitWord, NumFormat, decode_array, encode_array, get_format

MAP_FILE_VERSION = 1


class MapKind(enum.Enum):
    IDEAL = "ideal"
    SIMPLE_EXPONENT = "simple"
    LLOYD_MAX = "lloydmax"


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class RangeEntry:
    """One range.  ``lo``/``hi`` are exponents (inclusive) for exponent maps and
    value thresholds ``[lo, hi)`` for value maps."""

    lo: float
    hi: float
    rep_bits: int
    rid: int


def _std_normal_mass(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Phi(b) - Phi(a) for 0 <= a <= b, accurate in both tails."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    s = math.sqrt(2.0)
    upper = 0.5 * (erfc(a / s) - erfc(b / s))
    lower = 0.5 * (erf(b / s) - erf(a / s))
    return np.where(a >= 1.0, upper, lower)


@dataclass(frozen=True)
class ExponentPmf:
    probs: np.ndarray
    sigma: float
    bias: int

    def __len__(self):
        return len(self.probs)


def exponent_pmf(sigma: float, fmt: NumFormat = BF16) -> ExponentPmf:
    """Distribution of the stored exponent for values drawn from N(0, sigma^2).

    Mass at zero and below the smallest binade goes to exponent 0; mass at or
    above the top binade goes to the largest exponent.
    """
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    if not fmt.is_float:
        raise ValueError(f"{fmt.name} has no exponent field")
    count = fmt.exp_max + 1
    k = np.arange(count, dtype=np.float64)
    lo = np.exp2(k - fmt.exp_bias) / sigma
    hi = np.exp2(k + 1 - fmt.exp_bias) / sigma
    lo[0] = 0.0
    hi[-1] = np.inf
    probs = 2.0 * _std_normal_mass(lo, hi)
    return ExponentPmf(probs, float(sigma), fmt.exp_bias)


def exponent_scale(fmt: NumFormat) -> np.ndarray:
    """f(e) = 2^(e - bias) for every exponent code."""
    return np.exp2(np.arange(fmt.exp_max + 1, dtype=np.float64) - fmt.exp_bias)


# ----------------------------------------------------------------------
# exponent-domain DP


def interval_costs(weights: np.ndarray, scale: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Cost ``C[i, j]`` of serving exponents ``i..j`` with their best representative.

    The representative is the exponent in ``[i, j]`` minimising
    ``sum w(e) |f(e) - f(rep)|`` (the weighted median); ties go to the lower one.
    """
    weights = np.asarray(weights, dtype=np.float64)
    scale = np.asarray(scale, dtype=np.float64)
    n = len(weights)
    # terms[r, e]: cost of exponent e when represented by r
    terms = weights[None, :] * np.abs(scale[None, :] - scale[:, None])
    cost = np.full((n, n), np.inf)
    rep = np.full((n, n), -1, dtype=np.int64)
    for i in range(n):
        acc = np.zeros(n)
        for j in range(i, n):
            acc += terms[:, j]
            window = acc[i : j + 1]
            r = int(np.argmin(window))
            cost[i, j] = window[r]
            rep[i, j] = i + r
    return cost, rep


def optimal_partition(weights, scale, num_ranges: int):
    """Minimum-cost split of the alphabet into ``num_ranges`` contiguous intervals.

    Returns ``(intervals, representatives, cost)`` with intervals as inclusive
    ``(lo, hi)`` index pairs.  Ties prefer the lowest boundary.
    """
    weights = np.asarray(weights, dtype=np.float64)
    n = len(weights)
    if not 1 <= num_ranges <= n:
        raise ValueError(f"cannot split {n} symbols into {num_ranges} ranges")
    cost, rep = interval_costs(weights, scale)
    best = np.full((num_ranges + 1, n), np.inf)
    start = np.zeros((num_ranges + 1, n), dtype=np.int64)
    best[1] = cost[0]
    for k in range(2, num_ranges + 1):
        prev = np.concatenate(([np.inf], best[k - 1][:-1]))  # prev[i] = best[k-1][i-1]
        total = prev[:, None] + cost  # total[i, j]: last range is i..j
        start[k] = np.argmin(total, axis=0)
        best[k] = total[start[k], np.arange(n)]
    intervals = []
    j = n - 1
    for k in range(num_ranges, 0, -1):
        i = int(start[k][j]) if k > 1 else 0
        intervals.append((i, j))
        j = i - 1
    intervals.reverse()
    reps = [int(rep[i, j]) for i, j in intervals]
    return intervals, reps, float(best[num_ranges][n - 1])


def partition_cost(weights, scale, intervals, reps) -> float:
    """Exact-order cost of a given partition (correctly rounded sum)."""
    terms = []
    for (lo, hi), r in zip(intervals, reps):
        for e in range(lo, hi + 1):
            terms.append(float(weights[e]) * abs(float(scale[e]) - float(scale[r])))
    return math.fsum(terms)


# ----------------------------------------------------------------------
# the map


class RangeMap:
    def __init__(self, fmt: NumFormat, kind: MapKind, entries: list[RangeEntry],
                 sigma: float | None = None, rid_bits: int | None = None):
        if not entries:
            raise ValueError("a RangeMap needs at least one entry")
        minimal = max(1, math.ceil(math.log2(len(entries))))
        rid_bits = minimal if rid_bits is None else rid_bits
        if len(entries) > (1 << rid_bits):
            raise ValueError(f"{len(entries)} ranges do not fit in {rid_bits}-bit RIDs")
        if kind is MapKind.SIMPLE_EXPONENT and not fmt.is_float:
            raise ValueError(f"exponent maps need a float format, got {fmt.name}")
        self.format = fmt
        self.kind = kind
        self.entries = list(entries)
        self.sigma = sigma
        self.rid_bits = rid_bits
        self._validate()

    def _validate(self):
        for want, e in enumerate(self.entries):
            if e.rid != want:
                raise ValueError("RIDs must be 0..K-1 in range order")
        if self.is_exponent_map:
            if self.entries[0].lo != 0 or self.entries[-1].hi != self.format.exp_max:
                raise ValueError("exponent ranges must cover the whole exponent field")
            for a, b in zip(self.entries, self.entries[1:]):
                if b.lo != a.hi + 1:
                    raise ValueError("exponent ranges must be contiguous")
        else:
            if self.entries[0].lo != -math.inf or self.entries[-1].hi != math.inf:
                raise ValueError("value ranges must cover the real line")
            for a, b in zip(self.entries, self.entries[1:]):
                if b.lo != a.hi or not a.lo < a.hi:
                    raise ValueError("value ranges must be contiguous and increasing")
        reps = np.array([e.rep_bits for e in self.entries])
        got = self.rids(reps)
        if not np.array_equal(got, np.arange(len(self.entries))):
            raise ValueError("every representative must fall inside its own range")

    def __len__(self):
        return len(self.entries)

    def __repr__(self):
        return (f"RangeMap({self.format.name}, {self.kind.value}, ranges={len(self)}, "
                f"sigma={self.sigma})")

    @property
    def is_exponent_map(self) -> bool:
        return self.kind is MapKind.SIMPLE_EXPONENT

    @cached_property
    def _exp_lut(self) -> np.ndarray:
        lut = np.empty(self.format.exp_max + 1, dtype=np.int64)
        for e in self.entries:
            lut[int(e.lo) : int(e.hi) + 1] = e.rid
        return lut

    @cached_property
    def _thresholds(self) -> np.ndarray:
        return np.array([e.lo for e in self.entries[1:]], dtype=np.float64)

    @cached_property
    def rep_bits_array(self) -> np.ndarray:
        return np.array([e.rep_bits for e in self.entries], dtype=np.int64)

    def rids(self, raw: np.ndarray) -> np.ndarray:
        """Vectorised RID lookup for raw words of the map's format."""
        raw = np.asarray(raw).astype(np.int64)
        if self.is_exponent_map:
            return self._exp_lut[(raw >> self.format.mantissa_bits) & self.format.exp_max]
        values = decode_array(raw, self.format)
        return np.searchsorted(self._thresholds, values, side="right").astype(np.int64)

    def substitute(self, stored_raw: np.ndarray, rids: np.ndarray) -> np.ndarray:
        """Representative bit patterns for ``rids``; exponent maps keep the stored sign."""
        reps = self.rep_bits_array[np.asarray(rids, dtype=np.int64)]
        if self.is_exponent_map and self.format.sign_bits:
            reps = reps | (np.asarray(stored_raw).astype(np.int64) & self.format.sign_mask)
        return reps

    def value_interval(self, rid: int) -> tuple[float, float]:
        e = self.entry(rid)
        if not self.is_exponent_map:
            return e.lo, e.hi
        bias = self.format.exp_bias
        lo = 0.0 if e.lo == 0 else math.ldexp(1.0, int(e.lo) - bias)
        hi = math.inf if e.hi == self.format.exp_max else math.ldexp(1.0, int(e.hi) + 1 - bias)
        return lo, hi

    def entry(self, rid: int) -> RangeEntry:
        if not 0 <= rid < len(self.entries):
            raise ValueError(f"unknown RID {rid} (map has {len(self.entries)} ranges)")
        return self.entries[rid]

    @cached_property
    def widths(self) -> np.ndarray:
        return np.array([range_width(self, r) for r in range(len(self))])

    def to_json(self) -> dict:
        def bound(x):
            if self.is_exponent_map:
                return int(x)
            return x if math.isfinite(x) else ("inf" if x > 0 else "-inf")

        return {
            "version": MAP_FILE_VERSION,
            "format": self.format.name,
            "kind": self.kind.value,
            "sigma": self.sigma,
            "rid_bits": self.rid_bits,
            "entries": [[bound(e.lo), bound(e.hi), e.rep_bits, e.rid] for e in self.entries],
        }

    @classmethod
    def from_json(cls, obj: dict) -> RangeMap:
        if obj.get("version") != MAP_FILE_VERSION:
            raise ValueError(f"unsupported RangeMap file version {obj.get('version')!r}")
        kind = MapKind(obj["kind"])

        def bound(x):
            if kind is MapKind.SIMPLE_EXPONENT:
                return int(x)
            return float(x)

        entries = [RangeEntry(bound(lo), bound(hi), int(bits), int(rid))
                   for lo, hi, bits, rid in obj["entries"]]
        return cls(get_format(obj["format"]), kind, entries, obj.get("sigma"), obj.get("rid_bits"))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> RangeMap:
        return cls.from_json(json.loads(Path(path).read_text()))


def _exp_rep_bits(fmt: NumFormat, e: int) -> int:
    # exact power of two 2^(e - bias); exponent 0 needs the subnormal encoding
    if e == 0:
        return 1 << (fmt.mantissa_bits - 1)
    return e << fmt.mantissa_bits


def build_simple_map(sigma: float, num_ranges: int, fmt: NumFormat = BF16,
                     rid_bits: int | None = None) -> RangeMap:
    count = fmt.exp_max + 1 if fmt.is_float else 0
    if not 2 <= num_ranges <= count:
        raise ValueError(f"number of ranges must be in [2, {count}], got {num_ranges}")
    pmf = exponent_pmf(sigma, fmt)
    intervals, reps, _ = optimal_partition(pmf.probs, exponent_scale(fmt), num_ranges)
    entries = [RangeEntry(lo, hi, _exp_rep_bits(fmt, r), rid)
               for rid, ((lo, hi), r) in enumerate(zip(intervals, reps))]
    return RangeMap(fmt, MapKind.SIMPLE_EXPONENT, entries, sigma, rid_bits)


def exponent_representatives(rmap: RangeMap) -> list[int]:
    """Representative exponent of every range of an exponent map."""
    return [rmap.format.exponent_of(e.rep_bits) for e in rmap.entries]


# ----------------------------------------------------------------------
# value-domain quantizers


def gaussian_l1_quantizer(num_ranges: int, tol: float = 1e-13, max_iter: int = 100_000):
    """Thresholds and representatives minimising E|X - q(X)| for X ~ N(0, 1).

    Alternates conditional medians (for fixed cells) with midpoint cells
    (for fixed representatives).
    """
    if num_ranges < 2:
        raise ValueError(f"need at least two ranges, got {num_ranges}")
    probs = (np.arange(1, num_ranges) / num_ranges)
    thresholds = ndtri(probs)
    for _ in range(max_iter):
        edges = np.concatenate(([-np.inf], thresholds, [np.inf]))
        cdf = ndtr(edges)
        reps = ndtri(0.5 * (cdf[:-1] + cdf[1:]))
        new = 0.5 * (reps[:-1] + reps[1:])
        if np.max(np.abs(new - thresholds)) < tol:
            return new, reps
        thresholds = new
    raise ConvergenceError(f"quantizer did not converge in {max_iter} iterations")


def gaussian_mae(thresholds, reps) -> float:
    """E|X - q(X)| for X ~ N(0, 1), in closed form."""
    edges = np.concatenate(([-np.inf], np.asarray(thresholds, float), [np.inf]))
    total = 0.0
    phi = lambda x: 0.0 if math.isinf(x) else math.exp(-0.5 * x * x) / math.sqrt(2 * math.pi)
    cdf = lambda x: float(ndtr(x))
    for a, b, r in zip(edges[:-1], edges[1:], reps):
        # integral of |x - r| phi over [a, b), split at r
        lo, hi = a, min(max(r, a), b)
        left = r * (cdf(hi) - cdf(lo)) - (phi(lo) - phi(hi))
        lo, hi = max(min(r, b), a), b
        right = (phi(lo) - phi(hi)) - r * (cdf(hi) - cdf(lo))
        total += left + right
    return total


def _value_map(fmt, kind, thresholds, reps, sigma, rid_bits) -> RangeMap:
    rep_bits = encode_array(np.asarray(reps, dtype=np.float64), fmt)
    edges = [-math.inf] + [float(t) for t in thresholds] + [math.inf]
    entries = [RangeEntry(edges[i], edges[i + 1], int(rep_bits[i]), i) for i in range(len(reps))]
    return RangeMap(fmt, kind, entries, sigma, rid_bits)


def build_ideal_map(sigma: float, num_ranges: int, fmt: NumFormat = BF16,
                    rid_bits: int | None = None) -> RangeMap:
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    thresholds, reps = gaussian_l1_quantizer(num_ranges)
    return _value_map(fmt, MapKind.IDEAL, thresholds * sigma, reps * sigma, sigma, rid_bits)


@dataclass
class LloydMaxResult:
    thresholds: np.ndarray
    representatives: np.ndarray
    costs: list[float]
    degenerate: bool = False


def lloyd_max_l1(samples, num_ranges: int, tol: float = 1e-9, max_iter: int = 100) -> LloydMaxResult:
    """Empirical L1 Lloyd-Max: nearest-representative cells, median updates."""
    x = np.sort(np.asarray(samples, dtype=np.float64).ravel())
    if x.size == 0:
        raise ValueError("no samples")
    distinct = np.unique(x)
    if len(distinct) <= num_ranges:
        if len(distinct) < num_ranges:
            warnings.warn(f"only {len(distinct)} distinct samples for {num_ranges} ranges; "
                          "using one range per distinct value", RuntimeWarning, stacklevel=2)
        reps = distinct
        return LloydMaxResult(0.5 * (reps[:-1] + reps[1:]), reps, [0.0],
                              degenerate=len(distinct) < num_ranges)

    prefix = np.concatenate(([0.0], np.cumsum(x)))
    n = x.size

    def cost_of(thresholds, reps):
        bounds = np.concatenate(([0], np.searchsorted(x, thresholds, side="left"), [n]))
        total = 0.0
        for r, a, b in zip(reps, bounds[:-1], bounds[1:]):
            m = int(np.searchsorted(x[a:b], r)) + a
            total += r * (m - a) - (prefix[m] - prefix[a]) + (prefix[b] - prefix[m]) - r * (b - m)
        return total / n

    reps = np.quantile(x, (np.arange(num_ranges) + 0.5) / num_ranges)
    thresholds = 0.5 * (reps[:-1] + reps[1:])
    costs = [cost_of(thresholds, reps)]
    for _ in range(max_iter):
        bounds = np.concatenate(([0], np.searchsorted(x, thresholds, side="left"), [n]))
        new_reps = reps.copy()
        for c, (a, b) in enumerate(zip(bounds[:-1], bounds[1:])):
            if b > a:
                new_reps[c] = 0.5 * (x[(a + b - 1) // 2] + x[(a + b) // 2])
        new_reps = np.sort(new_reps)
        new_thresholds = 0.5 * (new_reps[:-1] + new_reps[1:])
        costs.append(cost_of(new_thresholds, new_reps))
        reps, thresholds = new_reps, new_thresholds
        if costs[-2] - costs[-1] < tol:
            break
    return LloydMaxResult(thresholds, reps, costs)


def build_lloydmax_map(samples, num_ranges: int, fmt: NumFormat = BF16,
                       rid_bits: int | None = None) -> RangeMap:
    result = lloyd_max_l1(samples, num_ranges)
    reps = result.representatives
    if len(reps) == 1:
        # all samples equal: one range over the whole line
        rep_bits = int(encode_array(reps, fmt)[0])
        entry = RangeEntry(-math.inf, math.inf, rep_bits, 0)
        return RangeMap(fmt, MapKind.LLOYD_MAX, [entry], None, rid_bits)
    sigma = float(np.std(np.asarray(samples, dtype=np.float64)))
    return _value_map(fmt, MapKind.LLOYD_MAX, result.thresholds, reps, sigma, rid_bits)


# ----------------------------------------------------------------------
# lookups


def map_value(rmap: RangeMap, w: BitWord) -> int:
    if w.format != rmap.format:
        raise ValueError(f"word format {w.format.name} does not match map format {rmap.format.name}")
    return int(rmap.rids(np.array([w.raw]))[0])


def representative(rmap: RangeMap, rid: int) -> float:
    bits = rmap.entry(rid).rep_bits
    return float(decode_array(np.array([bits]), rmap.format)[0])


def range_width(rmap: RangeMap, rid: int) -> float:
    """Width of the value interval served by ``rid`` (infinite for open-ended ranges)."""
    lo, hi = rmap.value_interval(rid)
    return hi - lo


def map_mae(rmap: RangeMap, data, model: str = "exponent") -> float:
    """Mean absolute repair error.

    ``data`` is either an :class:`ExponentPmf` (exact weighted sum over the
    exponent alphabet) or an array of sample values.  For samples,
    ``model="exponent"`` measures |f(e) - f(rep)| on each sample's exponent,
    matching the PMF objective; ``model="value"`` measures
    |x - representative| on the actual values (sign preserved for exponent
    maps).
    """
    fmt = rmap.format
    if isinstance(data, ExponentPmf):
        if not rmap.is_exponent_map:
            raise ValueError("an exponent PMF needs an exponent map")
        scale = exponent_scale(fmt)
        reps = exponent_representatives(rmap)
        intervals = [(int(e.lo), int(e.hi)) for e in rmap.entries]
        return partition_cost(data.probs, scale, intervals, reps)
    x = np.asarray(data, dtype=np.float64).ravel()
    raw = encode_array(x, fmt)
    rids = rmap.rids(raw)
    if model == "exponent":
        if not rmap.is_exponent_map:
            raise ValueError("the exponent error model needs an exponent map")
        scale = exponent_scale(fmt)
        e = np.clip(np.floor(np.log2(np.abs(x), where=x != 0, out=np.full_like(x, -np.inf)))
                    + fmt.exp_bias, 0, fmt.exp_max).astype(np.int64)
        rep_e = np.array(exponent_representatives(rmap))[rids]
        return float(np.mean(np.abs(scale[e] - scale[rep_e])))
    if model == "value":
        rep = decode_array(rmap.substitute(raw, rids), fmt)
        return float(np.mean(np.abs(x - rep)))
    raise ValueError(f"unknown error model {model!r}")
