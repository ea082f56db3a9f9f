import io

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import runs_naive
from tracelab.bits import (Bits, Partition, RunSeq, as_array, decode_lines, density, encode_lines, from_runs,
                           hamming_distance, read_bits, run_table, runs, write_bits)

bitstrings = st.text(alphabet="01", max_size=200)


@pytest.mark.parametrize("text, first, lengths", [
    ("00110", 0, [2, 2, 1]),
    ("1111111", 1, [7]),
    ("0", 0, [1]),
    ("1010", 1, [1, 1, 1, 1]),
])
def test_runs_examples(text, first, lengths):
    r = runs(text)
    assert r.first_value == first
    assert list(r.lengths) == lengths


def test_runs_empty():
    r = runs("")
    assert len(r) == 0
    assert from_runs(r) == ""


@pytest.mark.parametrize("first, lengths, text", [(0, [2, 2, 1], "00110"), (1, [3], "111")])
def test_from_runs_examples(first, lengths, text):
    assert from_runs(RunSeq(first, lengths)) == text


@given(bitstrings)
def test_runs_matches_naive_scan(x):
    r = runs(x)
    first, lengths = runs_naive(x)
    assert list(r.lengths) == lengths
    if x:
        assert r.first_value == first


@given(bitstrings)
def test_runs_round_trip(x):
    r = runs(x)
    assert from_runs(r).to_text() == x
    assert sum(r.lengths) == len(x)
    assert all(v > 0 for v in r.lengths)


@given(bitstrings)
def test_run_table_consistent(x):
    values, starts, lengths = run_table(x)
    a = as_array(x)
    for v, s, ln in zip(values, starts, lengths):
        assert np.all(a[s:s + ln] == v)
    assert np.all(values[1:] != values[:-1])


def test_from_runs_rejects_nonpositive():
    with pytest.raises(ValueError):
        from_runs(RunSeq(0, [2, 0, 1]))


def test_bits_construction_and_equality():
    b = Bits("0110")
    assert b == Bits([0, 1, 1, 0]) == Bits(np.array([0, 1, 1, 0]))
    assert b == "0110"
    assert b != Bits("011")
    assert len(b) == 4 and b[1] == 1 and b[1:3] == "11"
    assert b + Bits("1") == "01101"
    assert hash(b) == hash(Bits("0110"))
    assert b.count(1) == 2 and b.count(0) == 2
    assert Bits.concat(["01", Bits("10")]) == "0110"
    assert Bits.zeros(3) == "000" and Bits.ones(2) == "11"


def test_bits_is_read_only():
    b = Bits("0101")
    with pytest.raises(ValueError):
        b.array[0] = 1


@pytest.mark.parametrize("bad", ["012", "a", [0, 2], [-1]])
def test_bits_rejects_non_binary(bad):
    with pytest.raises(ValueError):
        Bits(bad)


@pytest.mark.parametrize("a, b, d", [("00100", "00010", 2), ("01", "10", 2), ("0110", "0110", 0)])
def test_hamming_examples(a, b, d):
    assert hamming_distance(a, b) == d


def test_hamming_length_mismatch():
    with pytest.raises(ValueError):
        hamming_distance("01", "011")


@given(bitstrings)
def test_hamming_against_loop(x):
    y = x[::-1]
    assert hamming_distance(x, y) == sum(c != d for c, d in zip(x, y))


@pytest.mark.parametrize("x, v, dens", [("0001", 0, 0.75), ("1111", 1, 1.0), ("01", 0, 0.5)])
def test_density_examples(x, v, dens):
    assert density(x, v) == dens


def test_density_empty_rejected():
    with pytest.raises(ValueError):
        density("", 0)


@given(st.text(alphabet="01", min_size=1, max_size=100))
def test_density_complement(x):
    assert density(x, 0) + density(x, 1) == pytest.approx(1.0)


def test_partition():
    pv = Partition.from_lengths([2, 0, 3])
    assert pv.boundaries == (0, 2, 2, 5)
    assert pv.size == 3 and pv.length == 5
    assert [p.to_text() for p in pv.parts("01101")] == ["01", "", "101"]
    with pytest.raises(ValueError):
        pv.parts("0110")
    with pytest.raises(ValueError):
        Partition((0, 3, 2))
    with pytest.raises(ValueError):
        Partition((1, 3))


@given(st.lists(bitstrings, max_size=8))
def test_codec_round_trip(items):
    text = encode_lines(items)
    assert [b.to_text() for b in decode_lines(text)] == items
    buf = io.StringIO()
    write_bits(buf, items)
    buf.seek(0)
    assert [b.to_text() for b in read_bits(buf)] == items
