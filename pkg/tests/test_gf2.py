import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from conftest import all_subspaces, brute_dual, brute_span, gf2_rank
from cosetlab import ParameterError, RandomnessError
from cosetlab.gf2 import (
    CosetParams,
    CosetTriple,
    Subspace,
    as_vector,
    canonical,
    coset_contains,
    coset_gen,
    dual,
    from_bits,
    sample_subspace,
    to_bits,
)
from cosetlab.rng import RandomStream, byte_stream


def test_bit_convention_round_trip():
    assert from_bits((1, 0)) == 2
    assert to_bits(2, 2) == (1, 0)
    for v in range(64):
        assert from_bits(to_bits(v, 6)) == v
    assert as_vector([1, 0, 1], 3) == 0b101


def test_as_vector_rejects_wrong_length():
    with pytest.raises(ParameterError):
        as_vector([1, 0], 3)
    with pytest.raises(ParameterError):
        as_vector(8, 3)


def test_full_rank_in_two_dims():
    for seed in range(5):
        a = sample_subspace(2, 2, byte_stream(seed))
        assert a.basis == (0b10, 0b01)


def test_rank_one_subspaces_uniform():
    counts = {}
    rs = byte_stream(3)
    for _ in range(3000):
        a = sample_subspace(2, 1, rs)
        counts[a.basis] = counts.get(a.basis, 0) + 1
    assert len(counts) == 3
    for c in counts.values():
        assert abs(c - 1000) <= 3 * np.sqrt(3000 * (1 / 3) * (2 / 3))


def test_uniformity_chi_square_n4():
    target = all_subspaces(4, 2)
    rs = byte_stream(11)
    counts = {s: 0 for s in target}
    draws = 35 * 200
    for _ in range(draws):
        a = sample_subspace(4, 2, rs)
        counts[frozenset(a.elements())] += 1
    assert len(target) == 35
    _, p = stats.chisquare(list(counts.values()))
    assert p > 1e-3


def test_sampled_rank_matches_oracle():
    a = sample_subspace(4, 2, byte_stream(42))
    assert a.rank == 2 == gf2_rank(list(a.basis), 4)


def test_rank_above_dimension_rejected():
    with pytest.raises(ParameterError):
        sample_subspace(2, 3, byte_stream(0))


def test_dual_examples():
    assert dual(Subspace.full(5)) == Subspace.zero(5)
    a = Subspace.span(2, [[1, 1]])
    assert dual(a) == a


@given(st.integers(1, 7), st.lists(st.integers(0, 127), max_size=6))
@settings(max_examples=150, deadline=None)
def test_dual_matches_brute_force(n, raw):
    vecs = [v % (1 << n) for v in raw]
    a = Subspace.span(n, vecs)
    elems = brute_span(n, vecs)
    assert set(a.elements()) == elems
    assert set(dual(a).elements()) == brute_dual(n, elems)
    assert a.rank + dual(a).rank == n
    assert dual(dual(a)) == a


@given(st.integers(1, 7), st.lists(st.integers(0, 127), min_size=1, max_size=5), st.data())
@settings(max_examples=150, deadline=None)
def test_rref_canonical_under_scrambling(n, raw, data):
    vecs = [v % (1 << n) for v in raw]
    a = Subspace.span(n, vecs)
    # mix the generators with random invertible combinations
    scr = list(vecs)
    for _ in range(data.draw(st.integers(0, 8))):
        i = data.draw(st.integers(0, len(scr) - 1))
        j = data.draw(st.integers(0, len(scr) - 1))
        if i != j:
            scr[i] ^= scr[j]
    assert Subspace.span(n, scr[::-1]) == a


def test_coset_contains_examples():
    a = Subspace.span(2, [[1, 0]])
    assert coset_contains(a, [0, 1], [1, 1])
    assert not coset_contains(a, [0, 1], [1, 0])
    full = Subspace.full(3)
    assert all(coset_contains(full, 5, v) for v in range(8))
    with pytest.raises(ParameterError):
        coset_contains(a, [0, 1], [1, 0, 1])


def test_canonical_examples():
    assert canonical(Subspace.zero(3), 0b101) == 0b101
    assert canonical(Subspace.span(2, [[1, 1]]), [1, 0]) == 0b01


@given(st.integers(1, 7), st.lists(st.integers(0, 127), max_size=5), st.integers(0, 127), st.data())
@settings(max_examples=200, deadline=None)
def test_canonical_is_lexicographic_min_and_invariant(n, raw, v, data):
    vecs = [x % (1 << n) for x in raw]
    v %= 1 << n
    a = Subspace.span(n, vecs)
    coset = {v ^ x for x in brute_span(n, vecs)}
    assert canonical(a, v) == min(coset)
    w = data.draw(st.sampled_from(sorted(brute_span(n, vecs))))
    assert canonical(a, v ^ w) == canonical(a, v)
    # membership recast as equality of canonical elements
    s = data.draw(st.integers(0, (1 << n) - 1))
    assert coset_contains(a, s, v) == (canonical(a, v) == canonical(a, s))


def test_coset_gen_deterministic_and_ranked():
    p = CosetParams(4, 2, 3)
    t1 = coset_gen(p, byte_stream(7))
    t2 = coset_gen(p, byte_stream(7))
    assert t1 == t2
    assert all(gf2_rank(list(t.space.basis), 4) == 2 for t in t1)


def test_coset_gen_exhaustion():
    with pytest.raises(RandomnessError):
        coset_gen(CosetParams(4, 2, 3), RandomStream(b"x", limit=3))


def test_paper_mode_requires_half_dimension():
    with pytest.raises(ParameterError):
        CosetParams(4, 1, 1, paper_mode=True)
    assert CosetParams.balanced(6, 2).d == 3


def test_triple_json_round_trip():
    for t in coset_gen(CosetParams(6, 3, 4), byte_stream(1)):
        assert CosetTriple.from_json(t.to_json()) == t
