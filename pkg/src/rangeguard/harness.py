"""Monte Carlo coverage experiments, BER sweeps with an MAE proxy, and
analytic cross-checks.

Trials run in fixed-size chunks; chunk ``c`` draws from
``default_rng([seed, c])``, so tallies do not depend on how chunks are spread
over workers.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from math import comb
from pathlib import Path

import numpy as np
from scipy.special import ndtr

from .bitnum import BF16, NumFormat, decode_array, encode_array
from .faults import FaultMode, MixtureFaults, inject_batch, popcount_rows, sample_ber_mixture
from .rangemap import RangeMap
from .rs import RsCode
from .schemes import (
    DATA_BYTES,
    Outcome,
    Scheme,
    SchemeConfig,
    SchemeKind,
    data_values,
    values_to_data,
)
from .schemes.base import IMAGE_BITS, IMAGE_BYTES
from .schemes.rangeguard import rid_symbols_batch

CHUNK = 1 << 16
REPORT_VERSION = 1
Z95 = 1.959963984540054
DISTRIBUTIONS = ("gaussian", "uniform")


def default_workers() -> int:
    return max(1, int(os.environ.get("RANGEGUARD_WORKERS", "1")))


# ----------------------------------------------------------------------
# tallies


def wilson_interval(successes: int, trials: int, z: float = Z95) -> tuple[float, float]:
    if trials == 0:
        return 0.0, 1.0
    p = successes / trials
    denom = 1 + z * z / trials
    centre = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    lo = 0.0 if successes == 0 else max(0.0, centre - half)
    hi = 1.0 if successes == trials else min(1.0, centre + half)
    return lo, hi


@dataclass
class CoverageTally:
    scheme: str
    scenario: str
    counts: np.ndarray = field(default_factory=lambda: np.zeros(len(Outcome), dtype=np.int64))
    seed: int | None = None

    @property
    def trials(self) -> int:
        return int(self.counts.sum())

    def __getitem__(self, outcome: Outcome) -> int:
        return int(self.counts[outcome])

    def add(self, outcomes: np.ndarray) -> None:
        self.counts += np.bincount(outcomes, minlength=len(Outcome))

    def merge(self, other: "CoverageTally") -> "CoverageTally":
        return CoverageTally(self.scheme, self.scenario, self.counts + other.counts, self.seed)

    def fraction(self, *outcomes: Outcome) -> float:
        return sum(self[o] for o in outcomes) / self.trials if self.trials else 0.0

    def ci(self, *outcomes: Outcome) -> tuple[float, float]:
        return wilson_interval(sum(self[o] for o in outcomes), self.trials)

    def percent(self, outcome: Outcome) -> float:
        return 100.0 * self.fraction(outcome)

    def to_json(self) -> dict:
        return {
            "scheme": self.scheme,
            "scenario": self.scenario,
            "seed": self.seed,
            "trials": self.trials,
            "counts": {o.name: self[o] for o in Outcome},
            "percent": {o.name: self.percent(o) for o in Outcome},
            "ci95": {o.name: [100 * x for x in self.ci(o)] for o in Outcome},
        }


# ----------------------------------------------------------------------
# scenarios


@dataclass(frozen=True)
class Scenario:
    modes: tuple[FaultMode, ...]
    region: str = "data"
    dae_both: bool = False
    name: str = ""

    @classmethod
    def parse(cls, text: str, region: str = "data") -> "Scenario":
        modes = tuple(FaultMode.parse(p) for p in text.split("+") if p.strip())
        if not modes:
            raise ValueError(f"empty scenario {text!r}")
        return cls(modes, region, name="+".join(m.value for m in modes))

    @property
    def label(self) -> str:
        return self.name or "+".join(m.value for m in self.modes)


def load_scenarios(path) -> list[tuple[Scenario, int | None]]:
    obj = json.loads(Path(path).read_text())
    if obj.get("version") != 1:
        raise ValueError(f"unsupported scenario file version {obj.get('version')!r}")
    out = []
    for s in obj["scenarios"]:
        modes = s["modes"] if isinstance(s["modes"], list) else s["modes"].split("+")
        sc = Scenario(tuple(FaultMode.parse(m) for m in modes), s.get("region", "data"),
                      bool(s.get("dae_both", False)), s.get("name", ""))
        out.append((sc, s.get("trials")))
    return out


def structural_expectation(kind: SchemeKind, scenario: Scenario) -> tuple[Outcome, ...] | None:
    """Outcomes that must account for 100% of trials, or None if not structural."""
    bounded = {FaultMode.SE, FaultMode.DAE, FaultMode.E16, FaultMode.E32}
    if kind.is_rangeguard and scenario.region == "data" and set(scenario.modes) <= bounded:
        t = 1 if kind is SchemeKind.RG8B_SSC else 2
        if len(scenario.modes) <= t:
            return (Outcome.BE, Outcome.CE)
    if kind is SchemeKind.BASELINE and len(scenario.modes) == 1:
        if scenario.modes[0] in (FaultMode.SE, FaultMode.DAE, FaultMode.E16):
            return (Outcome.CE,)
    return None


# ----------------------------------------------------------------------
# coverage


def block_data(n: int, rng: np.random.Generator, dist: str, sigma: float, fmt: NumFormat) -> np.ndarray:
    if dist == "uniform":
        return rng.integers(0, 256, (n, DATA_BYTES), dtype=np.uint8)
    if dist == "gaussian":
        values = rng.normal(0.0, sigma, (n, 256 // fmt.total_bits))
        return values_to_data(encode_array(values, fmt), fmt)
    raise ValueError(f"unknown value distribution {dist!r}")


def _chunk_rng(seed: int, chunk: int) -> np.random.Generator:
    return np.random.default_rng([seed, chunk])


def _coverage_chunk(args):
    config, scenario, n, seed, chunk, dist, sigma = args
    scheme = config.build()
    rng = _chunk_rng(seed, chunk)
    data = block_data(n, rng, dist, sigma, config.format)
    stored = scheme.encode(data)
    golden = scheme.golden(stored).copy()
    for mode in scenario.modes:
        _, masks = inject_batch(mode, n, rng, scenario.region, scenario.dae_both)
        stored.image ^= masks
    repaired, due = scheme.decode(stored)
    injected = np.full(n, bool(scenario.modes))
    out = scheme.classify(golden, repaired, due, injected)
    return np.bincount(out, minlength=len(Outcome))


def _chunks(trials: int):
    full, rest = divmod(trials, CHUNK)
    sizes = [CHUNK] * full + ([rest] if rest else [])
    return list(enumerate(sizes))


def _run_chunks(fn, jobs, workers):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


def run_coverage(config: SchemeConfig, scenario: Scenario | str, trials: int, seed: int = 0,
                 dist: str = "gaussian", sigma: float | None = None,
                 workers: int | None = None) -> CoverageTally:
    if trials < 1:
        raise ValueError("trials must be at least 1")
    if isinstance(scenario, str):
        scenario = Scenario.parse(scenario)
    if sigma is None:
        sigma = (config.range_map.sigma if config.range_map is not None else None) or 4.0
    jobs = [(config, scenario, n, seed, c, dist, sigma) for c, n in _chunks(trials)]
    tally = CoverageTally(config.kind.value, scenario.label, seed=seed)
    for counts in _run_chunks(_coverage_chunk, jobs, workers or default_workers()):
        tally.counts += counts
    return tally


# ----------------------------------------------------------------------
# bounded-error audit


def value_deviation(golden_raw, repaired_raw, fmt: NumFormat, magnitude: bool) -> np.ndarray:
    g = decode_array(golden_raw, fmt)
    r = decode_array(repaired_raw, fmt)
    if magnitude:
        g, r = np.abs(g), np.abs(r)
    with np.errstate(invalid="ignore"):
        dev = np.abs(r - g)
    return np.where(np.isnan(dev), np.inf, dev)


@dataclass
class AuditResult:
    trials: int = 0
    be: int = 0
    bound_violations: int = 0
    within_t: int = 0
    sdc_within_t: int = 0
    due_within_t: int = 0
    max_ratio: float = 0.0  # largest deviation / range width seen in BE outcomes


def bounded_error_audit(config: SchemeConfig, scenario: Scenario | str, trials: int,
                        seed: int = 0, sigma: float | None = None) -> AuditResult:
    """Check every BE outcome against the range-width bound, and that no SDC or
    DUE occurs when at most ``t`` RID symbols (data or parity) were hit."""
    if isinstance(scenario, str):
        scenario = Scenario.parse(scenario)
    cfg = config.rg_config()
    rmap, fmt, code = cfg.range_map, cfg.format, cfg.code
    sigma = sigma or rmap.sigma or 4.0
    widths = rmap.widths
    scheme = config.build()
    res = AuditResult()
    for c, n in _chunks(trials):
        rng = _chunk_rng(seed, c)
        data = block_data(n, rng, "gaussian", sigma, fmt)
        stored = scheme.encode(data)
        golden = stored.image[:, :DATA_BYTES].copy()
        golden_red = stored.image[:, DATA_BYTES:].copy()
        for mode in scenario.modes:
            _, masks = inject_batch(mode, n, rng, scenario.region, scenario.dae_both)
            stored.image ^= masks
        bad_data = rid_symbols_batch(stored.image[:, :DATA_BYTES], cfg) != rid_symbols_batch(golden, cfg)
        red_new = stored.image[:, 32].astype(np.int64) | (stored.image[:, 33].astype(np.int64) << 8)
        red_old = golden_red[:, 0].astype(np.int64) | (golden_red[:, 1].astype(np.int64) << 8)
        sym_mask = (1 << cfg.symbol_bits) - 1
        bad_par = np.stack([((red_new ^ red_old) >> (j * cfg.symbol_bits)) & sym_mask
                            for j in range(code.nsym)], axis=1) != 0
        hit = bad_data.sum(axis=1) + bad_par.sum(axis=1)
        repaired, due = scheme.decode(stored)
        out = scheme.classify(golden, repaired, due, np.ones(n, dtype=bool))
        res.trials += n
        within = hit <= code.t
        res.within_t += int(within.sum())
        res.sdc_within_t += int(np.sum(within & (out == Outcome.SDC)))
        res.due_within_t += int(np.sum(within & (out == Outcome.DUE)))
        be = out == Outcome.BE
        res.be += int(be.sum())
        if be.any():
            g = data_values(golden[be], fmt)
            r = data_values(repaired[be], fmt)
            dev = value_deviation(g, r, fmt, magnitude=rmap.is_exponent_map)
            w = widths[rmap.rids(g)]
            res.bound_violations += int(np.sum(dev > w))
            with np.errstate(invalid="ignore", divide="ignore"):
                ratio = np.where(np.isinf(w), 0.0, dev / w)
            res.max_ratio = max(res.max_ratio, float(np.max(ratio)))
    return res


# ----------------------------------------------------------------------
# analytic oracles


def correctable_syndromes(code: RsCode) -> int:
    q = code.gf.size
    return sum(comb(code.n, w) * (q - 1) ** w for w in range(code.t + 1))


def analytic_detection_rate(code) -> float:
    """Fraction of uniformly random syndromes that land outside every
    correction sphere (i.e. are flagged), for an RS code or ``"secded"``."""
    if isinstance(code, RsCode):
        return 1.0 - correctable_syndromes(code) / (1 << (code.nsym * code.symbol_bits))
    if code == "secded":
        from .schemes.secded import analytic_detection_rate as secded_rate
        return secded_rate()
    raise TypeError(f"no detection oracle for {code!r}")


def monte_carlo_detection(config: SchemeConfig, trials: int, seed: int = 0,
                          min_weight: int = 3) -> tuple[int, int]:
    """Uniformly random error patterns over the stored image (patterns lighter
    than ``min_weight`` bits are discarded).  Returns ``(detected, trials)``."""
    scheme = config.build()
    detected = total = 0
    for c, n in _chunks(trials):
        rng = _chunk_rng(seed, c)
        data = rng.integers(0, 256, (n, DATA_BYTES), dtype=np.uint8)
        stored = scheme.encode(data)
        masks = rng.integers(0, 256, (n, IMAGE_BYTES), dtype=np.uint8)
        keep = popcount_rows(masks) >= min_weight
        stored = stored.take(keep)
        stored.image ^= masks[keep]
        _, due = scheme.decode(stored)
        detected += int(due.sum())
        total += int(keep.sum())
    return detected, total


def format_pmf(fmt: NumFormat, dist: str, sigma: float) -> np.ndarray:
    """Probability of every raw word when sampling the harness distribution."""
    size = 1 << fmt.total_bits
    if dist == "uniform":
        return np.full(size, 1.0 / size)
    vals = fmt.value_table
    finite = np.flatnonzero(np.isfinite(vals))
    order = finite[np.argsort(vals[finite], kind="stable")]
    v = vals[order]
    # -0.0 and +0.0 share a value; give the mass to +0.0 (rounding keeps the sign of x)
    edges = np.concatenate(([-np.inf], 0.5 * (v[:-1] + v[1:]), [np.inf]))
    mass = ndtr(edges[1:] / sigma) - ndtr(edges[:-1] / sigma)
    pmf = np.zeros(size)
    np.add.at(pmf, order, mass)
    return pmf


def rid_flip_probability(rmap: RangeMap, dist: str = "gaussian", sigma: float = 4.0) -> float:
    """P(one uniformly random bit flip in a value changes its RID)."""
    fmt = rmap.format
    pmf = format_pmf(fmt, dist, sigma)
    words = np.arange(1 << fmt.total_bits)
    rid = rmap.rids(words)
    changed = np.zeros(len(words))
    for b in range(fmt.total_bits):
        changed += rmap.rids(words ^ (1 << b)) != rid
    return float(np.sum(pmf * changed) / fmt.total_bits)


def se_pair_bounded_probability(config: SchemeConfig, dist: str = "gaussian", sigma: float = 4.0) -> float:
    """P(BE or CE) for two independent data-region SE faults.

    Only two faults in different 32-bit regions that both change a RID exceed
    a single-symbol code; regions hold independent values.
    """
    cfg = config.rg_config()
    q = rid_flip_probability(cfg.range_map, dist, sigma)
    if cfg.code.t >= 2:
        return 1.0
    p_diff_region = 1.0 - 32 / 256
    return 1.0 - p_diff_region * q * q


# ----------------------------------------------------------------------
# BER proxy


@dataclass
class ProxyReport:
    ber: float
    scheme: str
    values: int
    mae: float
    max_abs_dev: float
    frac_outside_range: float
    bound_violations: int
    events: int
    faulty_blocks: int
    counts: dict = field(default_factory=dict)
    mode_counts: dict = field(default_factory=dict)

    def row(self) -> dict:
        d = {
            "ber": self.ber,
            "scheme": self.scheme,
            "values": self.values,
            "mae": self.mae,
            "max_abs_dev": self.max_abs_dev,
            "frac_outside_range": self.frac_outside_range,
            "bound_violations": self.bound_violations,
            "events": self.events,
            "faulty_blocks": self.faulty_blocks,
        }
        d.update({o.name: self.counts.get(o.name, 0) for o in Outcome if o is not Outcome.NO_ERROR})
        d.update({f"n_{k}": v for k, v in self.mode_counts.items()})
        return d


def run_ber_proxy(config: SchemeConfig, bers, tensor_values: int, sigma: float, seed: int = 0,
                  reference_map: RangeMap | None = None) -> list[ProxyReport]:
    """Sweep BERs over one Gaussian tensor stored in protected blocks.

    Fault sets are nested across BERs: events are drawn once at the largest
    BER and thinned for smaller ones.
    """
    fmt = config.format
    per_block = 256 // fmt.total_bits
    if tensor_values % per_block:
        raise ValueError(f"tensor size must be a multiple of {per_block} values")
    bers = [float(b) for b in bers]
    rmap = config.range_map or reference_map
    if rmap is None:
        raise ValueError("need a RangeMap (scheme map or reference_map) to judge ranges")
    scheme = config.build()
    nblocks = tensor_values // per_block
    rng = np.random.default_rng([seed, 0])
    data = block_data(nblocks, rng, "gaussian", sigma, fmt)
    stored = scheme.encode(data)
    golden = scheme.golden(stored)
    top = max(bers) if bers else 0.0
    faults = sample_ber_mixture(top, nblocks, np.random.default_rng([seed, 1])) if top > 0 else None
    widths = rmap.widths
    reports = []
    for ber in bers:
        if faults is None or ber == 0:
            sub = MixtureFaults(nblocks, *(np.zeros(0, dtype=np.int64) for _ in range(3)),
                                np.zeros((0, IMAGE_BYTES), dtype=np.uint8), np.zeros(0))
        else:
            sub = faults.thin(ber / top)
        blocks, masks = sub.combined()
        part = stored.take(blocks)
        part.image = part.image ^ masks
        repaired, due = scheme.decode(part)
        g_blocks = golden[blocks]
        out = scheme.classify(g_blocks, repaired, due, np.ones(len(blocks), dtype=bool))
        g = data_values(g_blocks, fmt)
        r = data_values(repaired, fmt)
        dev = value_deviation(g, r, fmt, magnitude=False)
        bound_dev = value_deviation(g, r, fmt, magnitude=rmap.is_exponent_map)
        grid = rmap.rids(g)
        outside = int(np.sum(rmap.rids(r) != grid))
        reports.append(ProxyReport(
            ber=ber,
            scheme=config.kind.value,
            values=tensor_values,
            mae=float(dev.sum() / tensor_values),
            max_abs_dev=float(dev.max()) if dev.size else 0.0,
            frac_outside_range=outside / tensor_values,
            bound_violations=int(np.sum(bound_dev > widths[grid])),
            events=len(sub),
            faulty_blocks=len(blocks),
            counts={o.name: int(np.sum(out == o)) for o in Outcome},
            mode_counts=sub.mode_counts(),
        ))
    return reports


# ----------------------------------------------------------------------
# reports


def _fmt_pct(x: float) -> str:
    return f"{x:.6f}"


def emit_report(tallies: list[CoverageTally]) -> tuple[str, str]:
    """Table-style CSV (rows: scenario x outcome, columns: schemes) and JSON."""
    schemes: list[str] = []
    scenarios: list[str] = []
    cells: dict[tuple[str, str], CoverageTally] = {}
    for t in tallies:
        if t.scheme not in schemes:
            schemes.append(t.scheme)
        if t.scenario not in scenarios:
            scenarios.append(t.scenario)
        key = (t.scenario, t.scheme)
        cells[key] = cells[key].merge(t) if key in cells else t
    buf = io.StringIO()
    buf.write(f"# rangeguard coverage report v{REPORT_VERSION}\n")
    w = csv.writer(buf, lineterminator="\n")
    header = ["scenario", "outcome"]
    for s in schemes:
        header += [s, f"{s}_ci_low", f"{s}_ci_high"]
    w.writerow(header)
    for sc in scenarios:
        for o in Outcome:
            row = [sc, o.name]
            for s in schemes:
                t = cells.get((sc, s))
                if t is None:
                    row += ["", "", ""]
                else:
                    lo, hi = t.ci(o)
                    row += [_fmt_pct(t.percent(o)), _fmt_pct(100 * lo), _fmt_pct(100 * hi)]
            w.writerow(row)
    doc = {
        "version": REPORT_VERSION,
        "kind": "coverage",
        "schemes": schemes,
        "scenarios": scenarios,
        "cells": [cells[(sc, s)].to_json() for sc in scenarios for s in schemes if (sc, s) in cells],
    }
    return buf.getvalue(), json.dumps(doc, indent=2, sort_keys=True) + "\n"


def emit_proxy_report(reports: list[ProxyReport]) -> str:
    buf = io.StringIO()
    buf.write(f"# rangeguard ber-sweep report v{REPORT_VERSION}\n")
    if not reports:
        buf.write("ber,scheme\n")
        return buf.getvalue()
    rows = [r.row() for r in reports]
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()
