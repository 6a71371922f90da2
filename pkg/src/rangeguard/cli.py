"""``rangeguard`` command line.

Exit codes: 0 success, 1 structural invariant violated, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import harness
from .bitnum import FORMATS, decode_array, flip_impact_table, get_format
from .rangemap import (
    MapKind,
    RangeMap,
    build_ideal_map,
    build_lloydmax_map,
    build_simple_map,
    exponent_pmf,
    gaussian_mae,
    map_mae,
)
from .schemes import ConfigError, Outcome, SchemeConfig, SchemeKind, Stored
from .schemes.base import with_redundancy
from .schemes.rangeguard import rg_decode_batch
from .schemes.registry import Registry, map_tag

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE = 0, 1, 2
LLOYD_SAMPLES = 100_000


class UsageError(Exception):
    pass


def _write(text: str, out: str | None) -> None:
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _positive(kind):
    def parse(s):
        v = kind(s)
        if v <= 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {s}")
        return v
    return parse


def _load_map(path: str) -> RangeMap:
    try:
        return RangeMap.load(path)
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(f"cannot load RangeMap {path}: {exc}") from exc


def default_map(kind: SchemeKind, sigma: float, fmt) -> RangeMap:
    """Exponent map with as many ranges as the RID budget allows."""
    symbol_bits = 8 if kind is SchemeKind.RG8B_SSC else 4
    rid_bits = symbol_bits // max(1, 32 // fmt.total_bits)
    ranges = min(1 << rid_bits, fmt.exp_max + 1)
    return build_simple_map(sigma, ranges, fmt, rid_bits)


def _scheme_config(args, sigma: float) -> SchemeConfig:
    kind = SchemeKind(args.scheme)
    fmt = get_format(args.format)
    rmap = _load_map(args.map) if args.map else None
    if rmap is not None:
        fmt = rmap.format
    if kind.is_rangeguard and rmap is None:
        rmap = default_map(kind, sigma, fmt)
    try:
        return SchemeConfig(kind, rmap if kind.is_rangeguard else None, fmt)
    except ConfigError as exc:
        raise UsageError(str(exc)) from exc


# ----------------------------------------------------------------------
# subcommands


def cmd_rangemap_build(args) -> int:
    if args.ranges < 2:
        raise UsageError("--ranges must be at least 2")
    if not args.sigma > 0:
        raise UsageError("--sigma must be positive")
    fmt = get_format(args.format)
    kind = MapKind(args.kind)
    try:
        if kind is MapKind.SIMPLE_EXPONENT:
            rmap = build_simple_map(args.sigma, args.ranges, fmt, args.rid_bits)
            mae = map_mae(rmap, exponent_pmf(args.sigma, fmt))
        elif kind is MapKind.IDEAL:
            rmap = build_ideal_map(args.sigma, args.ranges, fmt, args.rid_bits)
            t = np.array([e.hi for e in rmap.entries[:-1]]) / args.sigma
            reps = _representatives(rmap) / args.sigma
            mae = args.sigma * gaussian_mae(t, reps)
        else:
            if args.samples:
                samples = _read_samples(args.samples)
            else:
                samples = np.random.default_rng(args.seed).normal(0.0, args.sigma, LLOYD_SAMPLES)
            rmap = build_lloydmax_map(samples, args.ranges, fmt, args.rid_bits)
            mae = map_mae(rmap, samples, model="value")
    except (ValueError, ConfigError) as exc:
        raise UsageError(str(exc)) from exc
    if args.out:
        rmap.save(args.out)
    else:
        sys.stdout.write(json.dumps(rmap.to_json(), indent=2) + "\n")
    print(f"MAE {mae:.9g}", file=sys.stderr if not args.out else sys.stdout)
    return EXIT_OK


def _representatives(rmap: RangeMap) -> np.ndarray:
    return decode_array(np.array([e.rep_bits for e in rmap.entries]), rmap.format)


def _read_samples(path: str) -> np.ndarray:
    p = Path(path)
    if not p.exists():
        raise UsageError(f"no such file: {path}")
    if p.suffix == ".npy":
        return np.load(p).ravel()
    return np.loadtxt(p, dtype=np.float64).ravel()


def cmd_analyze_flips(args) -> int:
    fmt = get_format(args.format)
    buf = io.StringIO()
    buf.write(f"# rangeguard flip-impact table v{harness.REPORT_VERSION} format={fmt.name}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["field", "index", "bit", "polarity", "kind", "log2_factor", "factor", "expression"])
    for r in flip_impact_table(fmt):
        w.writerow([r.label, r.index, r.bit, r.polarity, r.kind,
                    "" if r.log2_factor is None else r.log2_factor, repr(r.factor), r.expression])
    _write(buf.getvalue(), args.out)
    return EXIT_OK


def _scenarios(args) -> list[tuple[harness.Scenario, int]]:
    out = []
    for text in args.scenario or []:
        try:
            out.append((harness.Scenario.parse(text, args.region), args.trials))
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    if args.scenario_file:
        try:
            loaded = harness.load_scenarios(args.scenario_file)
        except (OSError, ValueError, KeyError) as exc:
            raise UsageError(f"cannot load scenarios {args.scenario_file}: {exc}") from exc
        out += [(sc, n or args.trials) for sc, n in loaded]
    if not out:
        raise UsageError("give --scenario or --scenario-file")
    return out


def cmd_coverage(args) -> int:
    if args.trials < 1:
        raise UsageError("--trials must be at least 1")
    schemes = args.scheme
    configs = []
    for s in schemes:
        args.scheme = s
        configs.append(_scheme_config(args, args.sigma))
    scenarios = _scenarios(args)
    tallies, violations = [], []
    for sc, trials in scenarios:
        for cfg in configs:
            t = harness.run_coverage(cfg, sc, trials, args.seed, args.dist, args.sigma, args.workers)
            tallies.append(t)
            need = harness.structural_expectation(cfg.kind, sc)
            if need is not None and sum(t[o] for o in need) != t.trials:
                violations.append(f"{cfg.kind.value} {sc.label}")
    text, doc = harness.emit_report(tallies)
    _write(text, args.out)
    if args.json:
        Path(args.json).write_text(doc)
    for v in violations:
        print(f"structural invariant violated: {v}", file=sys.stderr)
    return EXIT_VIOLATION if violations else EXIT_OK


def cmd_ber_sweep(args) -> int:
    try:
        bers = [float(b) for b in args.ber.split(",") if b.strip()]
    except ValueError as exc:
        raise UsageError(f"bad --ber list: {exc}") from exc
    if not bers or any(not 0 <= b <= 1e-2 for b in bers):
        raise UsageError("--ber values must lie in [0, 1e-2]")
    cfg = _scheme_config(args, args.sigma)
    value_bytes = cfg.format.total_bits // 8
    if args.tensor_bytes % 32:
        raise UsageError("--tensor-bytes must be a multiple of 32")
    ref = cfg.range_map or (_load_map(args.map) if args.map else
                            default_map(SchemeKind.RG4B_DSC, args.sigma, cfg.format))
    reports = harness.run_ber_proxy(cfg, bers, args.tensor_bytes // value_bytes, args.sigma,
                                    args.seed, reference_map=ref)
    _write(harness.emit_proxy_report(reports), args.out)
    for r in reports:
        print(f"ber={r.ber:g} events={r.events} modes={r.mode_counts}", file=sys.stderr)
    return EXIT_OK


def _registry(args) -> Registry:
    if not args.config:
        return Registry()
    try:
        return Registry.from_file(args.config)
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(f"cannot load registry {args.config}: {exc}") from exc


def _blocks(raw: bytes) -> np.ndarray:
    pad = (-len(raw)) % 32
    buf = np.frombuffer(raw + bytes(pad), dtype=np.uint8)
    return buf.reshape(-1, 32)


def cmd_codec(args) -> int:
    reg = _registry(args)
    address = int(args.tag_address, 0)
    try:
        cfg = reg.dispatch(address)
    except ConfigError as exc:
        raise UsageError(str(exc)) from exc
    if cfg.kind is SchemeKind.BASELINE:
        raise UsageError("the baseline keeps on-die parity outside the sidecar; not usable in codec")
    src = Path(args.input)
    if not src.exists():
        raise UsageError(f"no such file: {args.input}")
    raw = src.read_bytes()
    data = _blocks(raw)
    scheme = cfg.build()
    if args.action == "encode":
        stored = scheme.encode(data)
        lane = stored.image[:, 32:].copy()
        Path(args.out).write_bytes(lane.tobytes())
        return EXIT_OK

    side = Path(args.redundancy)
    if not side.exists():
        raise UsageError(f"no such file: {args.redundancy}")
    lane = np.frombuffer(side.read_bytes(), dtype=np.uint8)
    if lane.size != 2 * len(data):
        raise UsageError(f"sidecar holds {lane.size // 2} blocks, payload has {len(data)}")
    lane = lane.reshape(-1, 2)
    red = lane[:, 0].astype(np.int64) | (lane[:, 1].astype(np.int64) << 8)
    if cfg.kind.is_rangeguard:
        repaired, due, substituted = rg_decode_batch(data, red, cfg.rg_config())
        changed = substituted.any(axis=1)
        fixed = np.where(due, Outcome.DUE, np.where(changed, Outcome.BE, Outcome.NO_ERROR))
    else:
        repaired, due = scheme.decode(Stored(with_redundancy(data, red)))
        changed = np.any(repaired != data, axis=1)
        fixed = np.where(due, Outcome.DUE, np.where(changed, Outcome.CE, Outcome.NO_ERROR))
    Path(args.out).write_bytes(repaired.tobytes()[: len(raw)])
    buf = io.StringIO()
    buf.write(f"# rangeguard codec report v{harness.REPORT_VERSION} scheme={cfg.kind.value} "
              f"tag={map_tag(address)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["block", "outcome", "substituted"])
    for i, o in enumerate(fixed):
        n = int(substituted[i].sum()) if cfg.kind.is_rangeguard else 0
        w.writerow([i, Outcome(int(o)).name, n])
    _write(buf.getvalue(), args.report)
    return EXIT_VIOLATION if args.fail_on_due and bool(due.any()) else EXIT_OK


# ----------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rangeguard", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    formats = sorted(FORMATS)
    schemes = [k.value for k in SchemeKind]

    b = sub.add_parser("rangemap-build", help="construct a RangeMap")
    b.add_argument("--kind", choices=[k.value for k in MapKind], default="simple")
    b.add_argument("--sigma", type=float, default=1.0)
    b.add_argument("--ranges", type=int, required=True)
    b.add_argument("--format", choices=formats, default="bf16")
    b.add_argument("--rid-bits", type=int)
    b.add_argument("--samples", help="samples for lloydmax (.npy or text); default Gaussian draws")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out")
    b.set_defaults(func=cmd_rangemap_build)

    a = sub.add_parser("analyze-flips", help="bit-flip impact table")
    a.add_argument("--format", choices=formats, default="bf16")
    a.add_argument("--out")
    a.set_defaults(func=cmd_analyze_flips)

    c = sub.add_parser("coverage", help="Monte Carlo fault coverage")
    c.add_argument("--scheme", choices=schemes, action="append", required=True)
    c.add_argument("--map")
    c.add_argument("--format", choices=formats, default="bf16")
    c.add_argument("--scenario", action="append", help='e.g. "SE", "SE+32E"')
    c.add_argument("--scenario-file")
    c.add_argument("--region", choices=["data", "image"], default="data")
    c.add_argument("--trials", type=int, default=1_000_000)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--dist", choices=list(harness.DISTRIBUTIONS), default="gaussian")
    c.add_argument("--sigma", type=_positive(float), default=4.0)
    c.add_argument("--workers", type=_positive(int), default=None)
    c.add_argument("--out")
    c.add_argument("--json")
    c.set_defaults(func=cmd_coverage)

    s = sub.add_parser("ber-sweep", help="MAE proxy across bit error rates")
    s.add_argument("--scheme", choices=schemes, required=True)
    s.add_argument("--map")
    s.add_argument("--format", choices=formats, default="bf16")
    s.add_argument("--ber", required=True, help="comma-separated list")
    s.add_argument("--tensor-bytes", type=_positive(int), default=2_000_000)
    s.add_argument("--sigma", type=_positive(float), default=4.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.set_defaults(func=cmd_ber_sweep)

    k = sub.add_parser("codec", help="protect or repair a raw file with a sidecar")
    k.add_argument("action", choices=["encode", "decode"])
    k.add_argument("--in", dest="input", required=True)
    k.add_argument("--out", required=True, help="sidecar (encode) or repaired payload (decode)")
    k.add_argument("--redundancy", help="sidecar to read when decoding")
    k.add_argument("--tag-address", default="0")
    k.add_argument("--config", help="map-tag registry JSON")
    k.add_argument("--report")
    k.add_argument("--fail-on-due", action="store_true")
    k.set_defaults(func=cmd_codec)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "codec" and args.action == "decode" and not args.redundancy:
        parser.error("codec decode needs --redundancy")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"rangeguard: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
