import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rangeguard.rs import RsCode, RsStatus, rs_code, rs_decode, rs_encode

CODES = [(10, 8, 8), (12, 8, 4), (34, 32, 8), (19, 17, 16)]


def random_word(code, rng):
    data = rng.integers(0, code.gf.size, code.k).tolist()
    return data, code.codeword(data)


@pytest.mark.parametrize("n,k,m", CODES)
def test_generator_roots_are_alpha_powers(n, k, m):
    code = rs_code(n, k, m)
    for i in range(n - k):
        assert code.gf.poly_eval(code.generator_poly, code.gf.alpha_pow(i)) == 0
    assert code.t == (n - k) // 2


@pytest.mark.parametrize("n,k,m", CODES)
def test_codewords_have_zero_syndrome_and_data_first(n, k, m, rng):
    code = rs_code(n, k, m)
    for _ in range(20):
        data, word = random_word(code, rng)
        assert word[:k] == data
        assert not any(code.syndromes(word))
        res = rs_decode(code, word)
        assert res.ok and res.corrected_word == word and res.error_positions == []


@pytest.mark.parametrize("n,k,m", CODES)
def test_corrects_up_to_t(n, k, m, rng):
    code = rs_code(n, k, m)
    for _ in range(60):
        _, word = random_word(code, rng)
        bad = list(word)
        pos = rng.choice(n, code.t, replace=False)
        for p in pos:
            bad[p] ^= int(rng.integers(1, code.gf.size))
        res = code.decode(bad)
        assert res.status is RsStatus.CORRECTED
        assert res.corrected_word == word
        assert sorted(res.error_positions) == sorted(pos.tolist())


@pytest.mark.parametrize("n,k,m", CODES)
def test_beyond_t_never_returns_a_noncodeword(n, k, m, rng):
    code = rs_code(n, k, m)
    for _ in range(60):
        _, word = random_word(code, rng)
        bad = list(word)
        for p in rng.choice(n, code.t + 1, replace=False):
            bad[p] ^= int(rng.integers(1, code.gf.size))
        res = code.decode(bad)
        if res.ok:
            assert not any(code.syndromes(res.corrected_word))
            assert res.corrected_word != word


def _prefix_error_word(code, j, magnitude):
    """Zero codeword plus parity that mimics an error at virtual degree j."""
    full = RsCode(code.full_length, code.full_length - code.nsym, code.symbol_bits)
    data = [0] * full.k
    data[full.full_length - 1 - j] = magnitude
    return [0] * code.k + full.encode(data)


@pytest.mark.parametrize("n,k,m", [(10, 8, 8), (12, 8, 4), (34, 32, 8)])
def test_prefix_roots_are_uncorrectable(n, k, m):
    code = rs_code(n, k, m)
    words = []
    for j in range(n, code.full_length):
        for mag in (1, 2, code.gf.size - 1):
            w = _prefix_error_word(code, j, mag)
            # the syndrome really is a single error at degree j
            s = code.syndromes(w)
            assert s[0] == mag and s[1] == code.gf.mul(mag, code.gf.alpha_pow(j))
            assert code.decode(w).status is RsStatus.UNCORRECTABLE
            words.append(w)
    _, ok = code.decode_batch(np.array(words))
    assert not ok.any()


@pytest.mark.parametrize("n,k,m", CODES)
def test_batch_matches_scalar(n, k, m, rng):
    code = rs_code(n, k, m)
    words = []
    for _ in range(300):
        _, word = random_word(code, rng)
        for p in rng.choice(n, int(rng.integers(0, code.t + 2)), replace=False):
            word[p] ^= int(rng.integers(1, code.gf.size))
        words.append(word)
    arr = np.array(words)
    fixed, ok = code.decode_batch(arr)
    for w, f, o in zip(words, fixed, ok):
        res = code.decode(w)
        assert res.ok == bool(o)
        if res.ok:
            assert res.corrected_word == f.tolist()
    data = arr[:, :k]
    assert code.encode_batch(data).tolist() == [code.encode(d.tolist()) for d in data]


def test_rs_10_8_exhaustive_single_symbol():
    code = rs_code(10, 8, 8)
    data = list(range(1, 9))
    word = data + rs_encode(code, data)
    assert rs_encode(code, [0] * 8) == [0, 0]
    for pos, mag in itertools.product(range(10), range(1, 256)):
        bad = list(word)
        bad[pos] ^= mag
        res = code.decode(bad)
        assert res.ok and res.corrected_word == word
        assert res.error_positions == [pos] and res.error_magnitudes == [mag]


@given(st.lists(st.integers(0, 15), min_size=8, max_size=8), st.integers(0, 11), st.integers(0, 11),
       st.integers(1, 15), st.integers(1, 15))
def test_rs_12_8_double_errors(data, p1, p2, e1, e2):
    code = rs_code(12, 8, 4)
    word = code.codeword(data)
    bad = list(word)
    bad[p1] ^= e1
    bad[p2] ^= e2
    res = code.decode(bad)
    assert res.ok and res.corrected_word == word


def test_invalid_parameters():
    with pytest.raises(ValueError):
        RsCode(300, 298, 8)
    with pytest.raises(ValueError):
        RsCode(10, 10, 8)
    code = rs_code(10, 8, 8)
    with pytest.raises(ValueError):
        code.encode([0] * 7)
    with pytest.raises(ValueError):
        code.encode([256] + [0] * 7)
