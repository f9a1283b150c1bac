import numpy as np
import pytest

from cosetlab import ResourceError, circuits, pke
from cosetlab import copy_protect as cp
from cosetlab.gf2 import dual
from cosetlab.obf import BOTTOM, pct_input, pmem_input, run, unwrap
from cosetlab.statevec import prepare_coset_state

PARAMS = cp.CpParams(4, 2, 3, id_bits=16)


@pytest.fixture(scope="module")
def pke_inst():
    return cp.cp_pke_setup(PARAMS, np.random.default_rng(31))


@pytest.fixture(scope="module")
def fe_inst():
    return cp.cp_fe_setup(cp.CpParams(4, 2, 2, id_bits=8), 32, np.random.default_rng(32))


def direct_member(triples, us, r):
    """Oracle: membership by brute-force enumeration of each coset."""
    c = len(triples)
    for i, (t, u) in enumerate(zip(triples, us)):
        if (r >> (c - 1 - i)) & 1:
            members = {a ^ t.s_prime for a in dual(t.space).elements()}
        else:
            members = {a ^ t.s for a in t.space.elements()}
        if u not in members:
            return False
    return True


def test_params_cap():
    with pytest.raises(ResourceError):
        cp.CpParams(n=20, d=10)


def test_opmem_against_enumeration(pke_inst, rng):
    for _ in range(40):
        ident = int(rng.integers(0, 1 << 16))
        triples = cp.cosets_for(pke_inst.k1, ident, PARAMS)
        r = int(rng.integers(0, 8))
        us = [int(u) for u in rng.integers(0, 16, size=3)]
        if rng.random() < 0.5:
            us = cp.honest_vectors(triples, r)
        out = unwrap(run(pke_inst.pk.opmem, pmem_input(ident, us, r, 16, 4, 3)))
        assert (out == b"\x01") == direct_member(triples, us, r)
    assert run(pke_inst.pk.opmem, b"\x00") == BOTTOM


def test_distinct_ids_get_distinct_cosets(pke_inst):
    seen = {tuple(t.to_json()["s"] for t in cp.cosets_for(pke_inst.k1, i, PARAMS)) for i in range(64)}
    assert len(seen) > 40


def test_key_states_are_coset_states(pke_inst, rng):
    key = cp.cp_pke_qkeygen(pke_inst, rng)
    triples = cp.cosets_for(pke_inst.k1, key.id, PARAMS)
    for s, t in zip(key.states, triples):
        assert s.allclose(prepare_coset_state(t))


def test_repeated_decryption_keeps_state(pke_inst, rng):
    key = cp.cp_pke_qkeygen(pke_inst, rng)
    cur = key
    for j in range(8):
        m = bytes([j]) * (j + 1)
        out, cur = cp.cp_pke_dec(cur, cp.cp_pke_enc(pke_inst, m, rng), pke_inst, rng)
        assert out == m
        assert cur.max_deviation(key) < 1e-9
    assert cur.fidelity(key) == pytest.approx(1.0)


def test_decrypt_without_public_key(pke_inst, rng):
    key = cp.cp_pke_qkeygen(pke_inst, rng)
    out, _ = cp.cp_pke_dec(key, cp.cp_pke_enc(pke_inst.pk, b"no-pk", rng))
    assert out == b"no-pk"


def test_all_challenges(pke_inst, rng):
    key = cp.cp_pke_qkeygen(pke_inst, rng)
    hits = set()
    for _ in range(60):
        ct = cp.cp_pke_enc(pke_inst, b"r", rng)
        hits.add(ct.r)
        assert cp.cp_pke_dec(key, ct, pke_inst, rng)[0] == b"r"
    assert 0 in hits and len(hits) == 8


def test_top_hybrid(pke_inst, rng):
    key = cp.cp_pke_qkeygen(pke_inst, rng)
    ct = cp.cp_pke_enc(pke_inst, b"m", rng, top_below=key.id + 1)
    assert cp.cp_pke_dec(key, ct, pke_inst, rng)[0] is pke.TOP
    ct = cp.cp_pke_enc(pke_inst, b"m", rng, top_below=key.id)
    assert cp.cp_pke_dec(key, ct, pke_inst, rng)[0] == b"m"


def test_wrong_vectors_give_bottom(pke_inst, rng):
    key = cp.cp_pke_qkeygen(pke_inst, rng)
    triples = cp.cosets_for(pke_inst.k1, key.id, PARAMS)
    ct = cp.cp_pke_enc(pke_inst, b"m", rng)
    us = cp.honest_vectors(triples, ct.r)
    cct = unwrap(run(ct.opct, pct_input(key.id, us, 16, 4)))
    assert pke.decrypt(key.ck, cct) == b"m"
    bad = next(v for v in range(16) if not triples[0].contains((ct.r >> 2) & 1, v))
    assert run(ct.opct, pct_input(key.id, [bad] + us[1:], 16, 4)) == BOTTOM


def test_disturbed_key_goes_joint(pke_inst, rng):
    # register 0 collapsed to a primal member: Hadamard-basis challenges now succeed w.p. 1/4
    from dataclasses import replace

    from cosetlab.statevec import StateVector

    key = cp.cp_pke_qkeygen(pke_inst, rng)
    triples = cp.cosets_for(pke_inst.k1, key.id, PARAMS)
    bad = replace(key, states=(StateVector.basis(4, triples[0].s),) + key.states[1:])
    outs = []
    cur = bad
    while len(outs) < 40:
        ct = cp.cp_pke_enc(pke_inst, b"m", rng)
        if not ct.r >> 2:
            continue
        out, cur = cp.cp_pke_dec(cur, ct, pke_inst, rng)
        outs.append(out)
    assert cur.joint is not None
    assert set(outs) <= {b"m", None}
    assert None in outs


def test_two_copy_break(pke_inst, rng):
    key = cp.cp_pke_qkeygen(pke_inst, rng)
    mat = cp.two_copy_extract(key, key, rng)
    for _ in range(10):
        ct = cp.cp_pke_enc(pke_inst, b"pirated", rng)
        assert cp.classical_decrypt(mat, ct, 16, 4) == b"pirated"


def test_fe_round_trips(fe_inst, rng):
    for f in circuits.small_family(4):
        fk = cp.cp_fe_keygen(fe_inst, f, rng)
        assert cp.CpFunctionalKey.from_bytes(fk.to_bytes()) == fk
        key = cp.cp_fe_qkeygen(fk)
        for m in (0, 5, 15):
            out, succ = cp.cp_fe_dec(key, cp.cp_fe_enc(fe_inst, m, rng), fe_inst, rng)
            assert out == f(m)
            assert succ.max_deviation(key) < 1e-9


def test_fe_pmsk_byte_equality(fe_inst, rng):
    m0, m1 = 3, 12
    pmsk = cp.cp_fe_pmsk(fe_inst, m0, m1)
    for f in circuits.small_family(4):
        ident = int(rng.integers(0, 256))
        got = cp.pmsk_keygen(pmsk, ident, f, fe_inst.lam, fe_inst.q)
        if f(m0) != f(m1):
            assert got is None
        else:
            want = cp.cp_fe_keygen(fe_inst, f, rng, ident=ident)
            assert got.to_bytes() == want.to_bytes()
