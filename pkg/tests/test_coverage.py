import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from leofuzz.coverage import (
    CoverageMap,
    ExecutionTrace,
    Outcome,
    classify_input,
    lcs_length,
    outstanding_index,
    seed_coverage,
    seq_cov,
    sequence_priority,
    update_gmaxcov,
)
from leofuzz.graphs import Target, TargetSequence
from oracles import lcs_brute

ET = list("abcgkmd")
TS1, TS2, TS3 = list("abcdfg"), list("abcgh"), list("agik")


def ts(blocks, g_max=0.0):
    return TargetSequence(Target(("x.c", 1), blocks[-1], "f"), list(blocks), g_max_cov=g_max)


def trace(blocks, edges=None):
    blocks = tuple(blocks)
    if edges is None:
        edges = frozenset(zip(blocks, blocks[1:]))
    return ExecutionTrace(blocks, frozenset(edges))


def test_lcs_examples():
    assert lcs_length(ET, TS2) == 4
    assert lcs_length(ET, TS1) == 4
    assert lcs_length(TS1, TS1) == 6
    assert lcs_length(TS1, []) == 0 and lcs_length([], []) == 0


def test_seq_cov_examples():
    assert seq_cov(ET, TS2) == 0.8
    assert seq_cov(ET, TS3) == 0.75
    assert seq_cov(TS1, TS1) == 1.0


def test_priorities_worked_example():
    seqs = [TS1, TS2, TS3]
    assert [sequence_priority(seqs, i, 0.5) for i in range(3)] == [1, 1, 0]


def test_priority_edge_cases():
    assert sequence_priority([TS1], 0) == 0
    same = [TS2] * 4
    assert all(sequence_priority(same, i) == 3 for i in range(4))


def test_gmaxcov_updates():
    s = ts(TS2)
    for c in (0.3, 0.5, 0.4):
        update_gmaxcov(s, c)
    assert s.g_max_cov == 0.5
    assert update_gmaxcov(ts(TS2, 0.5), 0.7).g_max_cov == 0.7
    assert update_gmaxcov(ts(TS2, 0.5), 0.2).g_max_cov == 0.5


def test_ots_is_first_maximum():
    assert outstanding_index([0.667, 0.8, 0.75]) == 1
    assert outstanding_index([0.5, 0.8, 0.8]) == 1
    assert outstanding_index([0.0, 0.0]) == 0
    cov = seed_coverage(ET, [ts(TS1), ts(TS2), ts(TS3)])
    assert cov.ots_index == 1 and cov.best == 0.8


def test_classify_directed_beats_coverage():
    seqs = [ts(TS2, 0.5)]
    out, cov = classify_input(trace(ET), seqs, CoverageMap())
    assert out is Outcome.DIRECTED and cov.per_sequence == (0.8,)


def test_classify_equal_is_not_directed():
    seqs = [ts(TS2, 0.8)]
    assert classify_input(trace(ET), seqs, CoverageMap())[0] is Outcome.COVERAGE_ONLY


def test_classify_neither_and_purity():
    seqs = [ts(TS2, 0.8)]
    t = trace(ET)
    cmap = CoverageMap()
    cmap.update(t.edge_set)
    before = set(cmap.seen_edges)
    assert classify_input(t, seqs, cmap)[0] is Outcome.NEITHER
    assert cmap.seen_edges == before and seqs[0].g_max_cov == 0.8


def test_coverage_map_counts_new_edges():
    m = CoverageMap()
    assert m.update({("a", "b"), ("b", "c")}) == 2
    assert m.update({("a", "b")}) == 0
    assert not m.is_new({("a", "b")}) and m.is_new({("c", "d")})


seqs_ = st.lists(st.sampled_from("abcd"), max_size=10)


@given(seqs_, seqs_)
@settings(max_examples=300)
def test_lcs_matches_enumeration(a, b):
    assert lcs_length(a, b) == lcs_brute(a, b)


@given(seqs_, seqs_, st.sampled_from("abcd"))
@settings(max_examples=300)
def test_lcs_bounds_symmetry_monotone(a, b, x):
    n = lcs_length(a, b)
    assert 0 <= n <= min(len(a), len(b))
    assert n == lcs_length(b, a)
    assert lcs_length(a + [x], b) >= n and lcs_length(a, b + [x]) >= n


@given(st.lists(st.sampled_from("abcdef"), min_size=1, max_size=8), seqs_, seqs_)
def test_seq_cov_in_unit_interval_and_full_when_embedded(target, pre, post):
    assert 0.0 <= seq_cov(pre, target) <= 1.0
    woven = pre + target + post
    assert seq_cov(woven, target) == 1.0


@given(st.lists(st.lists(st.sampled_from("abc"), min_size=1, max_size=6), min_size=1, max_size=6),
       st.floats(0, 1))
def test_priority_bounded(sequences, eps):
    for i in range(len(sequences)):
        assert 0 <= sequence_priority(sequences, i, eps) <= len(sequences) - 1


@pytest.mark.parametrize("eps,expected", [(0.0, [2, 2, 2]), (1.0, [0, 0, 0])])
def test_priority_epsilon_extremes(eps, expected):
    assert [sequence_priority([TS1, TS2, TS3], i, eps) for i in range(3)] == expected
