import numpy as np
import pytest

from cosetlab import DecodeError, IntegrityError, ParameterError, circuits, obf
from cosetlab.gf2 import CosetParams, coset_gen, dual
from cosetlab.obf import ProgramDesc, canonical_coset_cc, cc_obfuscate, cc_simulate, obfuscate, unwrap, wrap
from cosetlab.pprf import prf_eval_bytes, prf_keygen, prf_puncture, punctured_key_size
from cosetlab.rng import byte_stream


def custom(expr, size=None):
    return ProgramDesc.make("Custom", {"expr": expr}, size)


def test_framing():
    assert wrap(b"") == b"\x01"
    assert unwrap(wrap(b"abc")) == b"abc"
    assert unwrap(obf.BOTTOM) is None
    with pytest.raises(DecodeError):
        unwrap(b"\x07")


def test_transparent_and_sealed_agree():
    expr = ["xor", ["in"], ["const", "0f0f"]]
    t, s = obfuscate(custom(expr), "transparent"), obfuscate(custom(expr), "sealed")
    assert len(t.blob) == len(s.blob)
    for x in [b"\x00\x00", b"\xff\x01", b"\x12\x34"]:
        assert t(x) == s(x) == wrap(bytes(a ^ b for a, b in zip(x, b"\x0f\x0f")))
    assert t(b"\x00") == obf.BOTTOM
    assert t.inner.fields == {"expr": expr}
    with pytest.raises(ParameterError):
        s.inner
    assert obf.ObfProgram.from_hex(s.hex()) == s


def test_payload_not_visible_when_sealed():
    s = obfuscate(custom(["const", "deadbeefcafe"]), "sealed")
    assert b"deadbeefcafe" not in s.blob


@pytest.mark.parametrize("mode", obf.MODES)
def test_tamper_detected(mode):
    prog = obfuscate(custom(["in"]), mode)
    for pos in (4, 20, len(prog.blob) - 1):
        bad = bytearray(prog.blob)
        bad[pos] ^= 0x40
        with pytest.raises((IntegrityError, DecodeError)):
            obf.run(obf.ObfProgram(bytes(bad)), b"x")
    with pytest.raises(DecodeError):
        obf.run(obf.ObfProgram(b"XYZ" + prog.blob[3:]), b"x")


def test_equal_declared_size_equal_length():
    a = obfuscate(custom(["in"], 512), "sealed")
    b = obfuscate(custom(["cat", ["in"], ["const", "00" * 100]], 512), "sealed")
    assert a.declared_size == b.declared_size == 512
    assert len(a.blob) == len(b.blob)
    with pytest.raises(ParameterError):
        custom(["const", "00" * 400], 64)
    with pytest.raises(ParameterError):
        obfuscate(custom(["in"]), "opaque")


def test_missing_fields_rejected():
    with pytest.raises(DecodeError):
        obfuscate(ProgramDesc.make("CC", {"f": None}))


def test_padded_size_covers_punctured_key():
    k = prf_keygen(16, 40, 128, np.random.default_rng(1))
    fields = {"expr": ["prf", k.to_bytes().hex(), "blake2", ["in"]]}
    size = obf.padded_size(len(obf.canonical_json(fields)), [(40, 16)])
    pk = prf_puncture(k, [12345])
    hybrid = {"expr": ["if", ["eq", ["in"], ["const", "003039"]], ["const", "ff" * 16],
                       ["prf", pk.to_bytes().hex(), "blake2", ["in"]]]}
    assert len(obf.canonical_json(hybrid)) <= size
    assert punctured_key_size(40, 16) > len(k.to_bytes())


def test_custom_prf_expression():
    k = prf_keygen(16, 16, 64, np.random.default_rng(2))
    prog = obfuscate(custom(["prf", k.to_bytes().hex(), "blake2", ["in"]]), "sealed")
    for x in (0, 1, 999, 65535):
        assert unwrap(prog(x.to_bytes(2, "big"))) == prf_eval_bytes(k, x)
    pk = prf_puncture(k, [7])
    prog = obfuscate(custom(["prf", pk.to_bytes().hex(), "blake2", ["in"]]))
    assert prog((7).to_bytes(2, "big")) == obf.BOTTOM
    with pytest.raises(DecodeError):
        obfuscate(custom(["frob", ["in"]]))(b"a")


def test_expression_ops():
    cases = [
        (["slice", ["in"], 1, 3], b"abcd", b"bc"),
        (["not", ["const", "0f"]], b"", b"\xf0"),
        (["and", ["in"], ["const", "0f"]], b"\x3c", b"\x0c"),
        (["if", ["eq", ["in"], ["const", "01"]], ["const", "aa"], ["const", "bb"]], b"\x01", b"\xaa"),
        (["if", ["eq", ["in"], ["const", "01"]], ["const", "aa"], ["const", "bb"]], b"\x02", b"\xbb"),
        (["cat", ["in"], ["bot"]], b"a", None),
    ]
    for expr, x, want in cases:
        assert unwrap(obfuscate(custom(expr))(x)) == want


def test_cc_exhaustive():
    f = circuits.parity(8)
    fdesc = {"type": "circuit", "circuit": f.encode().hex()}
    prog = cc_obfuscate(fdesc, b"\x01", b"lock-value")
    for x in range(256):
        out = prog(bytes([x]))
        if bin(x).count("1") % 2:
            assert unwrap(out) == b"lock-value"
        else:
            assert out == obf.BOTTOM
    assert prog(b"\x01\x00") == obf.BOTTOM


def test_cc_simulator_matches_size():
    fdesc = {"type": "circuit", "circuit": circuits.parity(8).encode().hex()}
    real = cc_obfuscate(fdesc, b"\x01", b"z" * 16)
    sizes = (len(obf.cc_function_bytes(fdesc)), 1, 16)
    sim = cc_simulate(sizes)
    assert len(sim.blob) == len(real.blob)
    assert all(sim(bytes([x])) == obf.BOTTOM for x in range(256))


def test_canonical_coset_cc():
    triples = coset_gen(CosetParams(5, 2, 3), byte_stream(4, "cc"))
    rng = np.random.default_rng(3)
    for r in range(8):
        prog = canonical_coset_cc(triples, r, b"ok")
        good, bad = [], []
        for i, t in enumerate(triples):
            dual_bit = (r >> (2 - i)) & 1
            space = dual(t.space) if dual_bit else t.space
            off = t.s_prime if dual_bit else t.s
            elems = space.elements()
            good.append(elems[int(rng.integers(len(elems)))] ^ off)
            bad.append(next(v for v in range(32) if not t.contains(dual_bit, v)))
        enc = lambda vs: b"".join(obf.pack_int(v, 5) for v in vs)
        assert unwrap(prog(enc(good))) == b"ok"
        for j in range(3):
            assert prog(enc(good[:j] + [bad[j]] + good[j + 1:])) == obf.BOTTOM
