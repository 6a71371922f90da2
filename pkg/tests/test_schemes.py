import itertools
import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rangeguard.bitnum import BF16, FP32, FP8_E4M3, encode_array
from rangeguard.rangemap import build_ideal_map, build_simple_map
from rangeguard.rs import rs_code
from rangeguard.schemes import (
    Block,
    ConfigError,
    Outcome,
    RgConfig,
    RgKind,
    SchemeConfig,
    SchemeKind,
    Stored,
    classify,
    data_values,
    rg_decode,
    rg_decode_batch,
    rg_encode,
    rid_symbols,
    values_to_data,
)
from rangeguard.schemes.registry import SECDED_CONFIG, Registry, map_tag, map_tag_dispatch
from rangeguard.schemes.secded import analytic_detection_rate, hsiao_columns, syndromes
from rangeguard.schemes.symbol import analytic_detection_rate as ssc_rate

MAP16 = build_simple_map(4.0, 16)
MAP4 = build_simple_map(4.0, 4)
RG8 = RgConfig(RgKind.SSC8, MAP16)
RG4 = RgConfig(RgKind.DSC4, MAP4)

ALL = [
    SchemeConfig(SchemeKind.RG8B_SSC, MAP16),
    SchemeConfig(SchemeKind.RG4B_DSC, MAP4),
    SchemeConfig(SchemeKind.BASELINE),
    SchemeConfig(SchemeKind.SECDED),
    SchemeConfig(SchemeKind.SSC8),
    SchemeConfig(SchemeKind.WEIGHT_NULLING),
    SchemeConfig(SchemeKind.NONE),
]


def gaussian_blocks(rng, n, sigma=4.0):
    return values_to_data(encode_array(rng.normal(0, sigma, (n, 16)), BF16), BF16)


def flip(image, bit):
    out = image.copy()
    out[:, bit // 8] ^= 1 << (bit % 8)
    return out


@pytest.mark.parametrize("cfg", ALL, ids=lambda c: c.kind.value)
def test_clean_roundtrip(cfg, rng):
    scheme = cfg.build()
    data = gaussian_blocks(rng, 500)
    stored = scheme.encode(data)
    golden = scheme.golden(stored)
    repaired, due = scheme.decode(stored)
    assert not due.any()
    assert np.array_equal(repaired, golden)
    out = scheme.classify(golden, repaired, due, np.zeros(500, bool))
    assert (out == Outcome.NO_ERROR).all()
    if cfg.kind is not SchemeKind.WEIGHT_NULLING:
        assert np.array_equal(golden, data)


@pytest.mark.parametrize("kind", [SchemeKind.BASELINE, SchemeKind.SECDED, SchemeKind.SSC8])
def test_exact_codes_correct_every_single_bit(kind, rng):
    scheme = SchemeConfig(kind).build()
    stored = scheme.encode(gaussian_blocks(rng, 1))
    golden = scheme.golden(stored).copy()
    bits = 272 if kind is not SchemeKind.BASELINE else 256
    for bit in range(bits):
        s = Stored(flip(stored.image, bit), stored.hidden)
        repaired, due = scheme.decode(s)
        assert not due[0] and np.array_equal(repaired, golden), bit


@pytest.mark.parametrize("cfg", [RG8, RG4], ids=["8b", "4b"])
def test_rangeguard_single_bit_is_bounded(cfg, rng):
    scheme = SchemeConfig(SchemeKind(cfg.kind.value), cfg.range_map).build()
    data = gaussian_blocks(rng, 64)
    stored = scheme.encode(data)
    for bit in range(272):
        img = flip(stored.image, bit)
        repaired, due = scheme.decode(Stored(img))
        out = scheme.classify(data, repaired, due, np.ones(64, bool))
        assert np.isin(out, [Outcome.CE, Outcome.BE]).all(), bit


def test_rangeguard_substitutes_representative_and_keeps_sign():
    vals = encode_array(np.array([-3.0] + [0.75] * 15), BF16)
    data = values_to_data(vals[None], BF16)[0].tobytes()
    red = rg_encode(data, RG4)
    bad = bytearray(data)
    bad[1] ^= 0x01  # exponent LSB of value 0: -3.0 -> -1.5 (RID 1 -> RID 0)
    repaired, due, subst = rg_decode(bytes(bad), red, RG4)
    assert not due and subst == [0]
    assert data_values(np.frombuffer(repaired, np.uint8)[None], BF16)[0, 0] == 0xC000  # -2.0
    outcome = classify(data, repaired, due, RG4, substituted=subst)
    assert outcome.kind is Outcome.BE and outcome.substituted_positions == [0]


def test_intra_range_error_is_left_alone():
    data = values_to_data(encode_array(np.full((1, 16), 2.5), BF16), BF16)[0].tobytes()
    red = rg_encode(data, RG8)
    bad = bytearray(data)
    bad[0] ^= 0x10  # mantissa bit: stays in [2, 4)
    repaired, due, subst = rg_decode(bytes(bad), red, RG8)
    assert repaired == bytes(bad) and not due and subst == []
    assert classify(data, repaired, due, RG8).kind is Outcome.BE


def test_rid_symbol_packing_first_value_high():
    vals = encode_array(np.array([0.5, 2.0, 4.0, 8.0] * 4), BF16)
    data = values_to_data(vals[None], BF16)[0].tobytes()
    # 4b DSC: two 2-bit RIDs per region in a 4-bit symbol
    assert rid_symbols(data, RG4) == [0b0001, 0b1011] * 4
    # 8b SSC: two 4-bit RIDs per region
    syms = rid_symbols(Block(data, 0, BF16), RG8)
    rid = MAP16.rids(vals)
    assert syms == [int(rid[2 * i] << 4 | rid[2 * i + 1]) for i in range(8)]


def test_rid_bits_that_do_not_fit_are_rejected():
    with pytest.raises(ConfigError):
        RgConfig(RgKind.DSC4, MAP16).check()
    with pytest.raises(ConfigError):
        SchemeConfig(SchemeKind.RG4B_DSC, MAP16)
    with pytest.raises(ConfigError):
        SchemeConfig(SchemeKind.RG8B_SSC)


def test_fp32_and_fp8_layouts():
    fp32_map = build_simple_map(1.0, 256, FP32)
    cfg = RgConfig(RgKind.SSC8, fp32_map)
    cfg.check()
    assert cfg.values_per_region == 1 and cfg.rid_bits == 8
    fp8_map = build_simple_map(1.0, 2, FP8_E4M3)
    RgConfig(RgKind.SSC8, fp8_map).check()
    with pytest.raises(ConfigError):
        RgConfig(RgKind.DSC4, build_simple_map(1.0, 4, FP8_E4M3)).check()


def test_ideal_map_scheme_roundtrip(rng):
    cfg = SchemeConfig(SchemeKind.RG4B_DSC, build_ideal_map(4.0, 4))
    scheme = cfg.build()
    data = gaussian_blocks(rng, 200)
    stored = scheme.encode(data)
    stored.image[:, 1] ^= 0x40  # exponent MSB of value 0
    repaired, due = scheme.decode(stored)
    out = scheme.classify(data, repaired, due, np.ones(200, bool))
    assert np.isin(out, [Outcome.CE, Outcome.BE]).all()


def test_nonzero_padding_after_correction_is_due():
    # FP32 in 4b DSC would not fit, so use an 8b symbol with two 2-bit RIDs: padding is 4 bits
    cfg = RgConfig(RgKind.SSC8, MAP4)
    data = gaussian_blocks(np.random.default_rng(3), 1)
    red = rg_encode(data[0].tobytes(), cfg)
    code = rs_code(10, 8, 8)
    symbols = rid_symbols(data[0].tobytes(), cfg)
    bad_symbols = list(symbols)
    bad_symbols[0] |= 0x80  # a codeword with padding set
    parity = code.encode(bad_symbols)
    lane = parity[0] | (parity[1] << 8)
    _, ok = code.decode_batch(np.array([symbols + parity]))
    _, due, _ = rg_decode_batch(data, np.array([lane]), cfg)
    assert ok[0] and due[0]
    assert red != lane


def test_classify_exact_semantics():
    g = bytes(32)
    assert classify(g, g, False, injected=False).kind is Outcome.NO_ERROR
    assert classify(g, g, False).kind is Outcome.CE
    assert classify(g, b"\x01" + bytes(31), False).kind is Outcome.SDC
    assert classify(g, g, True).kind is Outcome.DUE


# ----------------------------------------------------------------------
# SEC-DED and symbol codes


def test_hsiao_columns_are_distinct_odd_weight():
    cols = hsiao_columns()
    assert len(cols) == 272 and len(set(cols)) == 272
    assert all(bin(c).count("1") % 2 == 1 for c in cols)
    rows = [sum((c >> r) & 1 for c in cols[:256]) for r in range(16)]
    assert rows == [48] * 16


def test_secded_detects_every_double_error(rng):
    scheme = SchemeConfig(SchemeKind.SECDED).build()
    stored = scheme.encode(gaussian_blocks(rng, 1))
    pairs = np.array(list(itertools.combinations(range(272), 2)))
    imgs = np.repeat(stored.image, len(pairs), axis=0)
    rows = np.arange(len(pairs))
    for col in range(2):
        b = pairs[:, col]
        imgs[rows, b // 8] ^= (1 << (b % 8)).astype(np.uint8)
    _, due = scheme.decode(Stored(imgs))
    assert due.all()
    assert syndromes(stored.image).tolist() == [0]


def test_detection_rate_formulas():
    assert analytic_detection_rate() == pytest.approx(1 - 273 / 65536)
    assert ssc_rate() == pytest.approx(1 - (1 + 34 * 255) / 65536)
    assert ssc_rate() == pytest.approx(0.8677, abs=5e-4)


def test_weight_nulling_zeroes_bad_values():
    scheme = SchemeConfig(SchemeKind.WEIGHT_NULLING).build()
    data = values_to_data(encode_array(np.full((1, 16), 1.0), BF16), BF16)
    stored = scheme.encode(data)
    stored.image[0, 3] ^= 0x40  # value 1, exponent MSB
    repaired, due = scheme.decode(stored)
    vals = data_values(repaired, BF16)[0]
    clean = data_values(scheme.encode(data).image[:, :32], BF16)[0]
    assert due[0] and vals[1] == 0
    assert np.array_equal(np.delete(vals, 1), np.delete(clean, 1))


# ----------------------------------------------------------------------
# map tags


def test_map_tag_bits():
    assert map_tag(0) == 0
    assert map_tag(0xB << 54) == 0xB
    assert map_tag((1 << 58) | (3 << 54) | 0xFFFF) == 3
    assert map_tag_dispatch(0x1234) is SECDED_CONFIG


def test_registry_dispatch_and_errors(tmp_path):
    MAP4.save(tmp_path / "m4.json")
    (tmp_path / "reg.json").write_text(json.dumps({
        "version": 1,
        "slots": {"2": {"scheme": "rg4b_dsc", "map": "m4.json"}, "5": {"scheme": "ssc8"}},
    }))
    reg = Registry.from_file(tmp_path / "reg.json")
    assert reg.tags == [2, 5]
    assert reg.dispatch(2 << 54).kind is SchemeKind.RG4B_DSC
    assert reg.dispatch(5 << 54).kind is SchemeKind.SSC8
    assert reg.dispatch(0).kind is SchemeKind.SECDED
    with pytest.raises(ConfigError):
        reg.dispatch(7 << 54)
    with pytest.raises(ConfigError):
        reg.register(0, SchemeConfig(SchemeKind.SSC8))
    with pytest.raises(ConfigError):
        reg.register(16, SchemeConfig(SchemeKind.SSC8))


@given(st.integers(0, (1 << 64) - 1))
def test_map_tag_is_bits_57_to_54(addr):
    assert map_tag(addr) == (addr >> 54) & 0xF
