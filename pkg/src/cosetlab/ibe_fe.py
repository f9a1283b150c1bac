"""IBE with a puncturable master key, and puncturable functional encryption.

IBE: the master key is a GGM key ``K``. The public key is an obfuscated
program mapping ``id`` to the public half of ``PKE.KeyGen(F(K, id))``; the
identity secret key is the private half. Key generation is deterministic, so
a key issued from a punctured master key is byte-identical to the one issued
from the full key.

FE: functions are circuits padded to ``Q`` bytes and double as IBE
identities. A ciphertext is an obfuscated program that, on input ``f``,
returns ``IBE.Enc(pk, f, f(m); F(K', f))``. A punctured FE master key is an
obfuscated program that returns keys only for ``f`` with ``f(m0) == f(m1)``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

from . import DecodeError, ParameterError, PuncturedPointError
from . import circuits, pke
from .circuits import FunctionDesc
from .obf import (
    ObfProgram,
    ProgramDesc,
    expander_name,
    obfuscate,
    pack_int,
    padded_size,
    run,
    unwrap,
)
from .pprf import (
    GgmKey,
    PuncturedKey,
    blake2_expander,
    key_from_bytes,
    prf_eval_bytes,
    prf_keygen,
    prf_puncture,
)
from .rng import random_bytes

SECURITY_BYTES = 16
COIN_BITS = 8 * pke.COIN_BYTES


@dataclass(frozen=True)
class IbePublicKey:
    program: ObfProgram
    id_len: int

    def to_bytes(self) -> bytes:
        return struct.pack(">BI", 1, self.id_len) + self.program.blob

    @classmethod
    def from_bytes(cls, data: bytes) -> "IbePublicKey":
        if len(data) < 5 or data[0] != 1:
            raise DecodeError("malformed IBE public key")
        return cls(ObfProgram(data[5:]), struct.unpack_from(">I", data, 1)[0])


@dataclass(frozen=True)
class IbeInstance:
    pk: IbePublicKey
    msk: GgmKey
    id_len: int


@dataclass(frozen=True)
class IbePuncturedMsk:
    key: PuncturedKey

    @property
    def punctured_id(self) -> int:
        return self.key.punctured_points[0]

    def to_bytes(self) -> bytes:
        return self.key.to_bytes()

    @classmethod
    def from_bytes(cls, data: bytes, expander=blake2_expander) -> "IbePuncturedMsk":
        key = key_from_bytes(data, expander)
        if not isinstance(key, PuncturedKey):
            raise DecodeError("not a punctured key")
        return cls(key)


def _check_id(ident: int, id_len: int) -> int:
    if not isinstance(ident, int) or ident < 0 or ident >> id_len:
        raise ParameterError(f"identity must be an integer of {id_len} bits")
    return ident


def ibe_setup(id_len: int, rng, *, mode: str = "sealed", expander=blake2_expander) -> IbeInstance:
    if id_len < 1:
        raise ParameterError("id_len must be at least 1")
    msk = prf_keygen(SECURITY_BYTES, id_len, COIN_BITS, rng, expander)
    fields = {"K": msk.to_bytes().hex(), "expander": expander_name(expander), "id_bits": id_len}
    size = padded_size(len(ProgramDesc.make("PKeyGen", fields).payload), [(id_len, SECURITY_BYTES)])
    prog = obfuscate(ProgramDesc.make("PKeyGen", fields, size), mode)
    return IbeInstance(IbePublicKey(prog, id_len), msk, id_len)


def ibe_punc(msk: GgmKey, ident: int) -> IbePuncturedMsk:
    return IbePuncturedMsk(prf_puncture(msk, [_check_id(ident, msk.input_len)]))


def ibe_keygen(msk, ident: int) -> bytes:
    """Deterministic identity key from a full or punctured master key."""
    key = msk.key if isinstance(msk, IbePuncturedMsk) else msk
    if not isinstance(key, (GgmKey, PuncturedKey)):
        raise ParameterError("msk must be a PRF key or punctured master key")
    _check_id(ident, key.input_len)
    return pke.keygen(prf_eval_bytes(key, ident))[1]


def ibe_public_for(pk: IbePublicKey, ident: int) -> bytes | None:
    return unwrap(run(pk.program, pack_int(_check_id(ident, pk.id_len), pk.id_len)))


def ibe_enc_coins(pk: IbePublicKey, ident: int, m, coins: bytes) -> bytes | None:
    """Deterministic encryption with explicit coins; ``None`` if no key is issued for ``ident``."""
    ipk = ibe_public_for(pk, ident)
    return None if ipk is None else pke.encrypt(ipk, m, coins)


def ibe_enc(pk: IbePublicKey, ident: int, m, rng) -> bytes | None:
    return ibe_enc_coins(pk, ident, m, random_bytes(rng, pke.COIN_BYTES))


def ibe_dec(sk: bytes, ct: bytes | None):
    """Message bytes, ``pke.TOP``, or ``None`` (bottom)."""
    if ct is None:
        return None
    return pke.decrypt(sk, ct)


# ---------------------------------------------------------------------------
# puncturable functional encryption


@dataclass(frozen=True)
class FeMsk:
    key: GgmKey
    q: int


@dataclass(frozen=True)
class FePuncturedMsk:
    program: ObfProgram
    q: int


@dataclass(frozen=True)
class FeInstance:
    pk: IbePublicKey
    msk: FeMsk

    @property
    def q(self) -> int:
        return self.msk.q


@dataclass(frozen=True)
class FeKey:
    sk: bytes
    f: bytes  # padded circuit encoding

    def to_bytes(self) -> bytes:
        return struct.pack(">BH", 1, len(self.sk)) + self.sk + self.f

    @classmethod
    def from_bytes(cls, data: bytes) -> "FeKey":
        if len(data) < 3 or data[0] != 1:
            raise DecodeError("malformed functional key")
        size = struct.unpack_from(">H", data, 1)[0]
        return cls(data[3:3 + size], data[3 + size:])

    @property
    def function(self) -> FunctionDesc:
        return circuits.decode(self.f)


def fe_setup(q: int, rng, *, mode: str = "sealed", expander=blake2_expander) -> FeInstance:
    if q < 6:
        raise ParameterError("Q must leave room for a circuit header")
    ibe = ibe_setup(8 * q, rng, mode=mode, expander=expander)
    return FeInstance(ibe.pk, FeMsk(ibe.msk, q))


def _encode(f: FunctionDesc, q: int) -> bytes:
    return f.encode(q)  # raises ParameterError on oversize circuits


def fe_keygen(msk, f: FunctionDesc) -> FeKey | None:
    """Functional key, or ``None`` from a punctured key on a differentiating ``f``."""
    if isinstance(msk, FePuncturedMsk):
        out = unwrap(run(msk.program, _encode(f, msk.q)))
        return None if out is None else FeKey.from_bytes(out)
    if not isinstance(msk, FeMsk):
        raise ParameterError("msk must be an FeMsk or FePuncturedMsk")
    fb = _encode(f, msk.q)
    return FeKey(ibe_keygen(msk.key, int.from_bytes(fb, "big")), fb)


def fe_punc(msk: FeMsk, m0: int, m1: int, *, mode: str = "sealed") -> FePuncturedMsk:
    fields = {
        "variant": "fe",
        "imsk": msk.key.to_bytes().hex(),
        "expander": expander_name(msk.key.expander),
        "m0": int(m0),
        "m1": int(m1),
        "q": msk.q,
    }
    size = padded_size(len(ProgramDesc.make("PKey", fields).payload), [(8 * msk.q, SECURITY_BYTES)])
    return FePuncturedMsk(obfuscate(ProgramDesc.make("PKey", fields, size), mode), msk.q)


def fe_enc(pk: IbePublicKey, m: int, rng, *, mode: str = "sealed", expander=blake2_expander) -> ObfProgram:
    q = pk.id_len // 8
    k = prf_keygen(SECURITY_BYTES, 8 * q, COIN_BITS, rng, expander)
    fields = {
        "variant": "fe",
        "cpk": pk.program.hex(),
        "cpk_bits": pk.id_len,
        "K": k.to_bytes().hex(),
        "expander": expander_name(expander),
        "m": int(m),
        "q": q,
    }
    size = padded_size(len(ProgramDesc.make("PCt", fields).payload), [(8 * q, SECURITY_BYTES)])
    return obfuscate(ProgramDesc.make("PCt", fields, size), mode)


def fe_dec(fkey: FeKey | None, ct: ObfProgram) -> int | None:
    if fkey is None:
        return None
    inner = unwrap(run(ct, fkey.f))
    if inner is None:
        return None
    out = ibe_dec(fkey.sk, inner)
    if out is None or out is pke.TOP:
        return None
    return int.from_bytes(out, "big")


__all__ = [
    "FeInstance",
    "FeKey",
    "FeMsk",
    "FePuncturedMsk",
    "IbeInstance",
    "IbePublicKey",
    "IbePuncturedMsk",
    "PuncturedPointError",
    "fe_dec",
    "fe_enc",
    "fe_keygen",
    "fe_punc",
    "fe_setup",
    "ibe_dec",
    "ibe_enc",
    "ibe_enc_coins",
    "ibe_keygen",
    "ibe_punc",
    "ibe_setup",
]
