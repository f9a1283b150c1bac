import numpy as np
import pytest

from cosetlab import DecodeError, ParameterError, PuncturedPointError, circuits, pke
from cosetlab.ibe_fe import (
    FeKey,
    IbePublicKey,
    IbePuncturedMsk,
    fe_dec,
    fe_enc,
    fe_keygen,
    fe_punc,
    fe_setup,
    ibe_dec,
    ibe_enc,
    ibe_keygen,
    ibe_punc,
    ibe_setup,
)


@pytest.fixture(scope="module")
def ibe():
    return ibe_setup(8, np.random.default_rng(21))


@pytest.fixture(scope="module")
def fe():
    return fe_setup(32, np.random.default_rng(22))


def test_ibe_round_trip(ibe, rng):
    for ident in (0, 5, 255):
        sk = ibe_keygen(ibe.msk, ident)
        ct = ibe_enc(ibe.pk, ident, b"hello", rng)
        assert ibe_dec(sk, ct) == b"hello"
        assert ibe_dec(ibe_keygen(ibe.msk, ident ^ 1), ct) is None
    assert ibe_dec(ibe_keygen(ibe.msk, 3), ibe_enc(ibe.pk, 3, pke.TOP, rng)) is pke.TOP
    assert ibe_dec(b"", None) is None


def test_ibe_strong_puncturing_bytes(ibe):
    pmsk = ibe_punc(ibe.msk, 77)
    assert pmsk.punctured_id == 77
    for ident in range(256):
        if ident == 77:
            with pytest.raises(PuncturedPointError):
                ibe_keygen(pmsk, ident)
        else:
            assert ibe_keygen(pmsk, ident) == ibe_keygen(ibe.msk, ident)
    back = IbePuncturedMsk.from_bytes(pmsk.to_bytes())
    assert ibe_keygen(back, 1) == ibe_keygen(ibe.msk, 1)
    with pytest.raises(DecodeError):
        IbePuncturedMsk.from_bytes(ibe.msk.to_bytes())


def test_ibe_identity_range(ibe, rng):
    with pytest.raises(ParameterError):
        ibe_keygen(ibe.msk, 256)
    with pytest.raises(ParameterError):
        ibe_enc(ibe.pk, -1, b"", rng)
    with pytest.raises(ParameterError):
        ibe_setup(0, rng)


def test_ibe_public_key_serialization(ibe, rng):
    pk = IbePublicKey.from_bytes(ibe.pk.to_bytes())
    assert pk == ibe.pk
    assert ibe_dec(ibe_keygen(ibe.msk, 9), ibe_enc(pk, 9, b"x", rng)) == b"x"
    with pytest.raises(DecodeError):
        IbePublicKey.from_bytes(b"\x02abcd")


def test_fe_whole_family(fe, rng):
    fam = circuits.small_family(4)
    cts = {m: fe_enc(fe.pk, m, rng) for m in range(16)}
    for f in fam:
        key = fe_keygen(fe.msk, f)
        assert key.function == f
        assert FeKey.from_bytes(key.to_bytes()) == key
        for m, ct in cts.items():
            assert fe_dec(key, ct) == f(m)
    assert fe_dec(None, cts[0]) is None


def test_fe_key_is_function_bound(fe, rng):
    fam = circuits.small_family(4)
    k0 = fe_keygen(fe.msk, fam[0])
    forged = FeKey(k0.sk, fam[1].encode(32))
    ct = fe_enc(fe.pk, 3, rng)
    assert fe_dec(forged, ct) is None


def test_fe_puncturing_exact(fe, rng):
    fam = circuits.small_family(4)
    for m0, m1 in [(0, 15), (3, 5), (6, 6)]:
        pmsk = fe_punc(fe.msk, m0, m1)
        for f in fam:
            key = fe_keygen(pmsk, f)
            if f(m0) != f(m1):
                assert key is None
            else:
                assert key == fe_keygen(fe.msk, f)


def test_fe_setup_checks(rng):
    with pytest.raises(ParameterError):
        fe_setup(4, rng)
    with pytest.raises(ParameterError):
        fe_keygen("not a key", circuits.parity(4))
