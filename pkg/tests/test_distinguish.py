import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from oracles import embedding_count_bruteforce, trace_distribution_bruteforce
from tracelab.bits import Bits
from tracelab.classes import gen_hard_pair
from tracelab.distinguish import (Decision, LikelihoodModel, advantage_estimate, distinct_subsequences,
                                  embedding_count, embedding_counts_batch, ml_decide, trace_likelihood,
                                  traces_to_distinguish, wilson_interval)

small = st.text(alphabet="01", max_size=10)


def test_embedding_count_examples():
    assert embedding_count_bruteforce("1010", "10") == 3
    assert embedding_count("1010", "10") == 3
    assert embedding_count_bruteforce("101", "11") == 1
    assert embedding_count("101", "11") == 1
    assert embedding_count("0110", "") == 1
    assert embedding_count("01", "011") == 0


@given(small, st.text(alphabet="01", max_size=6))
def test_embedding_count_matches_bruteforce(x, t):
    assert embedding_count(x, t) == embedding_count_bruteforce(x, t)


@given(st.text(alphabet="01", min_size=1, max_size=30), st.lists(st.text(alphabet="01", max_size=30), min_size=1,
                                                                  max_size=8))
def test_batch_counts_match_exact(x, traces):
    width = max(1, max(len(t) for t in traces))
    rows = np.zeros((len(traces), width), dtype=np.uint8)
    for i, t in enumerate(traces):
        rows[i, :len(t)] = [int(c) for c in t]
    got = embedding_counts_batch(x, rows, np.array([len(t) for t in traces]))
    assert got.tolist() == [embedding_count(x, t) for t in traces]


def test_batch_count_length_limit():
    with pytest.raises(ValueError):
        embedding_counts_batch("0" * 63, np.zeros((1, 1), dtype=np.uint8), np.array([1]))


def test_large_counts_stay_exact():
    # C(60, 30) overflows nothing in Python ints and fits int64
    x = "0" * 60
    assert embedding_count(x, "0" * 30) == math.comb(60, 30)
    rows = np.zeros((1, 30), dtype=np.uint8)
    assert embedding_counts_batch(x, rows, np.array([30]))[0] == math.comb(60, 30)
    assert embedding_count("0" * 200, "0" * 100) == math.comb(200, 100)


def test_trace_likelihood_examples():
    assert math.exp(trace_likelihood("11", "1", 0.5)) == pytest.approx(0.5)
    assert trace_distribution_bruteforce("11", 0.5)["1"] == pytest.approx(0.5)
    for x in ("0", "0110", "1111011"):
        assert math.exp(trace_likelihood(x, x, 0.3)) == pytest.approx(0.7 ** len(x))
    assert trace_likelihood("0", "1", 0.5) == -math.inf
    assert trace_likelihood("01", "011", 0.5) == -math.inf


@given(st.text(alphabet="01", max_size=8), st.floats(0.05, 0.95))
def test_likelihood_matches_enumeration(x, q):
    dist = trace_distribution_bruteforce(x, q)
    for t, prob in dist.items():
        assert math.exp(trace_likelihood(x, t, q)) == pytest.approx(prob, rel=1e-9)


def test_distinct_subsequences_enumeration():
    for n in range(0, 9):
        for bits in itertools.product("01", repeat=n):
            x = "".join(bits)
            rows, lens = distinct_subsequences(x)
            got = {"".join(str(v) for v in rows[i, :lens[i]]) for i in range(lens.size)}
            want = set(trace_distribution_bruteforce(x, 0.5))
            assert got == want and len(got) == lens.size


@given(st.text(alphabet="01", max_size=12), st.floats(0.05, 0.95))
def test_normalisation(x, q):
    rows, lens = distinct_subsequences(x)
    counts = embedding_counts_batch(x, rows, lens)
    total = sum(int(c) * (1 - q) ** int(k) * q ** (len(x) - int(k)) for c, k in zip(counts, lens))
    assert abs(total - 1.0) < 1e-10


def test_ml_decide_examples():
    m = LikelihoodModel("00", "11", 0.5)
    assert ml_decide(m, ["0"]) is Decision.A
    assert ml_decide(m, ["1", ""]) is Decision.B
    with pytest.raises(ValueError):
        ml_decide(LikelihoodModel("00", "00", 0.5), ["1"])
    same = LikelihoodModel("0110", "0110", 0.5)
    assert ml_decide(same, ["01", "1", "0110"]) is Decision.TIE
    a, b = gen_hard_pair(2)
    strong = LikelihoodModel(a, b, 0.05)
    assert ml_decide(strong, [a]) is Decision.A
    ratio = trace_likelihood(a, a, 0.05) - trace_likelihood(b, a, 0.05)
    assert ratio == math.inf


@given(st.text(alphabet="01", min_size=1, max_size=10), st.text(alphabet="01", min_size=1, max_size=10),
       st.lists(st.text(alphabet="01", max_size=6), min_size=1, max_size=4), st.sampled_from([0.1, 0.5, 0.75]))
def test_ml_decide_matches_log_likelihood(a, b, traces, q):
    m = LikelihoodModel(a, b, q)
    la = sum(trace_likelihood(a, t, q) for t in traces)
    lb = sum(trace_likelihood(b, t, q) for t in traces)
    if la == -math.inf and lb == -math.inf:
        with pytest.raises(ValueError):
            ml_decide(m, traces)
        return
    d = ml_decide(m, traces)
    if abs(la - lb) > 1e-9:
        assert d is (Decision.A if la > lb else Decision.B)


def test_ml_decide_tie_is_exact():
    # counts 2 vs 1 with one extra deleted bit at q=1/2: 2 * (1/2)^3 == 1 * (1/2)^2 exactly
    m = LikelihoodModel("011", "01", 0.5)
    assert embedding_count("011", "01") == 2
    assert ml_decide(m, ["01"]) is Decision.TIE


def test_model_validation():
    with pytest.raises(ValueError):
        LikelihoodModel("", "1", 0.5)
    with pytest.raises(ValueError):
        LikelihoodModel("0", "1", 0.99)
    LikelihoodModel("0", "1", 0.0, allow_degenerate=True)


@pytest.mark.parametrize("k, n", [(50, 100), (0, 10), (10, 10), (1250, 2000), (3, 7)])
def test_wilson_interval_against_scipy(k, n):
    ci = stats.binomtest(k, n).proportion_ci(confidence_level=0.95, method="wilson")
    lo, hi = wilson_interval(k, n)
    assert lo == pytest.approx(ci.low, abs=1e-12) and hi == pytest.approx(ci.high, abs=1e-12)


def test_wilson_interval_rejects_empty():
    with pytest.raises(ValueError):
        wilson_interval(1, 0)


def test_advantage_identical_candidates_is_half():
    x = Bits("0110101")
    r = advantage_estimate(LikelihoodModel(x, x, 0.5), 3, 1000, seed=4)
    assert r.lower <= 0.5 + 0.01 and r.upper >= 0.5 - 0.01
    assert abs(r.success - 0.5) < 4 * 0.5 / math.sqrt(1000)


def test_advantage_monochrome_pair():
    m = LikelihoodModel("0" * 20, "1" * 20, 0.5)
    r = advantage_estimate(m, 1, 1000, seed=1)
    assert r.success > 0.95
    assert traces_to_distinguish(m, trials=500, seed=1).t_star == 1


def test_advantage_hard_pair_single_trace():
    a, b = gen_hard_pair(3)
    r = advantage_estimate(LikelihoodModel(a, b, 0.5), 1, 2000, seed=2)
    assert r.success < 0.75


def test_advantage_deterministic_and_prefix_shared():
    a, b = gen_hard_pair(2)
    m = LikelihoodModel(a, b, 0.5)
    r1 = advantage_estimate(m, 3, 300, seed=9)
    r2 = advantage_estimate(m, 3, 300, seed=9)
    assert r1 == r2
    with pytest.raises(ValueError):
        advantage_estimate(m, 3, 10, seed=9)


def test_traces_to_distinguish_identical_hits_cap():
    x = Bits("0110")
    res = traces_to_distinguish(LikelihoodModel(x, x, 0.5), trials=200, seed=0, t_cap=4)
    assert res.capped and res.t_star is None
    assert sorted(r.t_count for r in res.curve) == [1, 2, 4]
    d = res.to_dict()
    assert d["capped"] and [row[0] for row in d["success_curve"]] == [1, 2, 4]


def test_traces_to_distinguish_bisection_minimal():
    a, b = gen_hard_pair(2)
    m = LikelihoodModel(a, b, 0.5)
    res = traces_to_distinguish(m, trials=500, seed=3)
    t = res.t_star
    assert t is not None and not res.capped
    by_t = {r.t_count: r for r in res.curve}
    assert by_t[t].lower >= 5 / 8
    if t > 1:
        below = by_t.get(t - 1) or advantage_estimate(m, t - 1, 500, 3)
        assert below.lower < 5 / 8


@given(st.text(alphabet="01", max_size=16), st.text(alphabet="01", max_size=16))
def test_embedding_count_bruteforce_up_to_16(x, t):
    if len(t) > len(x):
        t = t[:len(x)]
    assert embedding_count(x, t) == embedding_count_bruteforce(x, t)


def test_relabeling_symmetry_is_exact():
    a, b = gen_hard_pair(2)
    flip = lambda s: Bits.from_array(1 - s.array)  # noqa: E731
    r = advantage_estimate(LikelihoodModel(a, b, 0.5), 4, 600, seed=21)
    rf = advantage_estimate(LikelihoodModel(flip(a), flip(b), 0.5), 4, 600, seed=21)
    assert r.successes == rf.successes


def test_swap_symmetry_statistical():
    a, b = gen_hard_pair(2)
    r = advantage_estimate(LikelihoodModel(a, b, 0.5), 4, 3000, seed=5)
    rs = advantage_estimate(LikelihoodModel(b, a, 0.5), 4, 3000, seed=6)
    sigma = math.sqrt(2 * 0.25 / 3000)
    assert abs(r.success - rs.success) < 4 * sigma
