"""Copy-protected PKE and FE built on coset states.

A quantum key is a tuple of coset states derived from ``F1(K1, id)``, an
IBE identity key and the identity. A ciphertext is an obfuscated program
``PCt`` plus a challenge string ``r``: ``PCt`` accepts an identity and one
vector per coset, checks membership through ``OPMem`` (coset ``A_i + s_i`` when
``r_i = 0``, ``A_i^perp + s'_i`` when ``r_i = 1``) and returns an IBE
encryption of the message under that identity.

Decryption applies H to the registers with ``r_i = 1``, evaluates ``PCt``
coherently on the product state, measures the output and undoes the
Hadamards. For honest inputs ``PCt`` is constant on the support, so the key
comes back unchanged.

For CP-FE the identity is ``id || f`` (``id_bits + 8Q`` bits) and ``PCt``
encrypts ``f(m)``.
"""

from __future__ import annotations

import functools
import hashlib
import json
import struct
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import DecodeError, ParameterError, ResourceError
from . import circuits
from .circuits import FunctionDesc
from .gf2 import CosetParams, CosetTriple, coset_gen
from .ibe_fe import COIN_BITS, SECURITY_BYTES, IbePublicKey, ibe_dec, ibe_keygen, ibe_setup
from .obf import (
    ObfProgram,
    ProgramDesc,
    canonical_json,
    expander_name,
    load_key,
    obfuscate,
    pack_int,
    padded_size,
    pct_input,
    prf_bytes,
    run,
    unwrap,
)
from .pke import TOP
from .pprf import GgmKey, blake2_expander, prf_keygen
from .rng import RandomStream, random_bytes
from .statevec import (
    QUBIT_CAP,
    StateVector,
    coherent_apply_measure,
    coherent_apply_measure_product,
    hadamard_all,
    hadamard_registers,
    measure_computational,
    prepare_coset_state,
)

SEED_BITS = 256  # F1 output: seed of the CosetGen byte stream


@dataclass(frozen=True)
class CpParams:
    n: int = 4
    d: int = 2
    c: int = 3
    id_bits: int = 32
    mode: str = "sealed"
    cap: int = QUBIT_CAP

    def __post_init__(self):
        CosetParams(self.n, self.d, self.c)
        if self.id_bits < 1:
            raise ParameterError("id_bits must be positive")
        if self.n > self.cap:
            raise ResourceError(f"coset dimension {self.n} exceeds simulator cap {self.cap}")

    @property
    def coset_params(self) -> CosetParams:
        return CosetParams(self.n, self.d, self.c)


@functools.lru_cache(maxsize=4096)
def derive_cosets(k1_hex: str, expander: str, ident: int, n: int, d: int, c: int):
    """``CosetGen(F1(K1, id))``; ``None`` if the key is punctured at ``id``."""
    seed = prf_bytes(k1_hex, expander, ident)
    if seed is None:
        return None
    return coset_gen(CosetParams(n, d, c), RandomStream(seed))


def cosets_for(k1: GgmKey, ident: int, params: CpParams) -> tuple[CosetTriple, ...]:
    return derive_cosets(
        k1.to_bytes().hex(), expander_name(k1.expander), ident, params.n, params.d, params.c
    )


def _bit(r: int, i: int, c: int) -> int:
    return (r >> (c - 1 - i)) & 1


def _random_bits(rng, bits: int) -> int:
    nb = (bits + 7) // 8
    return int.from_bytes(random_bytes(rng, nb), "big") >> (8 * nb - bits)


# ---------------------------------------------------------------------------
# data types


@dataclass(frozen=True)
class CpPublicKey:
    cpk: IbePublicKey
    opmem: ObfProgram
    params: CpParams
    id_bits: int  # full identity width (id || f for FE)


@dataclass(frozen=True)
class CpPkeInstance:
    pk: CpPublicKey
    cmsk: GgmKey
    k1: GgmKey

    @property
    def params(self) -> CpParams:
        return self.pk.params


@dataclass(frozen=True)
class QuantumKey:
    """Coset-state key. ``joint`` replaces ``states`` once a decryption entangled them."""

    states: tuple[StateVector, ...]
    ck: bytes
    id: int
    f: bytes | None = None
    joint: StateVector | None = field(default=None, repr=False)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(s.n_qubits for s in self.states)

    def fidelity(self, other: "QuantumKey") -> float:
        if self.joint is not None or other.joint is not None:
            return _joint(self).fidelity(_joint(other))
        return float(np.prod([a.fidelity(b) for a, b in zip(self.states, other.states)]))

    def max_deviation(self, other: "QuantumKey") -> float:
        if self.joint is not None or other.joint is not None:
            return float(np.max(np.abs(_joint(self).amplitudes - _joint(other).amplitudes)))
        return max(
            float(np.max(np.abs(a.amplitudes - b.amplitudes))) for a, b in zip(self.states, other.states)
        )

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "ck": self.ck.hex(),
            "f": None if self.f is None else self.f.hex(),
            "sizes": list(self.sizes),
            "disturbed": self.joint is not None,
        }


def _joint(key: QuantumKey) -> StateVector:
    if key.joint is not None:
        return key.joint
    amps = np.ones(1, dtype=complex)
    for s in key.states:
        amps = np.kron(amps, s.amplitudes)
    return StateVector(sum(key.sizes), amps)


@dataclass(frozen=True)
class CpCiphertext:
    opct: ObfProgram
    r: int
    c: int

    def to_json(self) -> dict:
        return {"r": format(self.r, f"0{self.c}b"), "opct_sha256": hashlib.sha256(self.opct.blob).hexdigest()}


# ---------------------------------------------------------------------------
# shared machinery


def _pmem(k1: GgmKey, params: CpParams, id_bits: int) -> ObfProgram:
    fields = {
        "K1": k1.to_bytes().hex(),
        "expander": expander_name(k1.expander),
        "id_bits": id_bits,
        "n": params.n,
        "d": params.d,
        "c": params.c,
    }
    size = padded_size(len(ProgramDesc.make("PMem", fields).payload), [(id_bits, SECURITY_BYTES)])
    return obfuscate(ProgramDesc.make("PMem", fields, size), params.mode)


def _setup(params: CpParams, id_bits: int, rng, expander):
    k1 = prf_keygen(SECURITY_BYTES, id_bits, SEED_BITS, rng, expander)
    ibe = ibe_setup(id_bits, rng, mode=params.mode, expander=expander)
    return CpPublicKey(ibe.pk, _pmem(k1, params, id_bits), params, id_bits), ibe.msk, k1


def _encrypt(pk: CpPublicKey, variant: str, m_field, rng, extra: dict | None = None) -> CpCiphertext:
    params = pk.params
    r = _random_bits(rng, params.c)
    k2 = prf_keygen(SECURITY_BYTES, pk.id_bits, COIN_BITS, rng, blake2_expander)
    fields = {
        "variant": variant,
        "opmem": pk.opmem.hex(),
        "cpk": pk.cpk.program.hex(),
        "cpk_bits": pk.cpk.id_len,
        "K2": k2.to_bytes().hex(),
        "expander": expander_name(k2.expander),
        "r": r,
        "c": params.c,
        "n": params.n,
        "id_bits": pk.id_bits,
        "m": m_field,
    }
    fields.update(extra or {})
    size = padded_size(len(ProgramDesc.make("PCt", fields).payload), [(pk.id_bits, SECURITY_BYTES)])
    return CpCiphertext(obfuscate(ProgramDesc.make("PCt", fields, size), params.mode), r, params.c)


def _branch_rng(ct: CpCiphertext, rng) -> np.random.Generator:
    if rng is not None:
        return rng
    # deterministic fallback; only consulted when the output is not constant
    return np.random.default_rng(int.from_bytes(hashlib.sha256(ct.opct.blob).digest()[:8], "big"))


def _coherent_decrypt(key: QuantumKey, ct: CpCiphertext, id_bits: int, n: int, rng=None):
    """Returns ``(ibe ciphertext or None, successor key)``."""
    c = ct.c
    if len(key.sizes) != c:
        return None, key
    mask = [bool(_bit(ct.r, i, c)) for i in range(c)]
    gen = _branch_rng(ct, rng)

    def program(us):
        return unwrap(run(ct.opct, pct_input(key.id, us, id_bits, n)))

    if key.joint is None:
        rotated = [hadamard_all(s) if on else s for s, on in zip(key.states, mask)]
        rec = coherent_apply_measure_product(rotated, program, gen)
        if isinstance(rec.post_state, tuple):
            post = tuple(hadamard_all(s) if on else s for s, on in zip(rec.post_state, mask))
            return rec.outcome, replace(key, states=post)
        joint = rec.post_state
    else:
        sizes = key.sizes
        rotated = hadamard_registers(key.joint, sizes, mask)

        def split(x):
            out = []
            for s in reversed(sizes):
                out.append(x & ((1 << s) - 1))
                x >>= s
            return tuple(reversed(out))

        rec = coherent_apply_measure(rotated, lambda x: program(split(x)), gen)
        joint = rec.post_state
    return rec.outcome, replace(key, joint=hadamard_registers(joint, key.sizes, mask))


# ---------------------------------------------------------------------------
# CP-PKE


def cp_pke_setup(params: CpParams = CpParams(), rng=None, *, expander=blake2_expander) -> CpPkeInstance:
    if rng is None:
        raise ParameterError("an explicit rng is required")
    pk, cmsk, k1 = _setup(params, params.id_bits, rng, expander)
    return CpPkeInstance(pk, cmsk, k1)


def _quantum_key(inst, ident: int, ck: bytes, f: bytes | None = None) -> QuantumKey:
    triples = cosets_for(inst.k1, ident, inst.params)
    states = tuple(prepare_coset_state(t, inst.params.cap) for t in triples)
    return QuantumKey(states, ck, ident, f)


def cp_pke_qkeygen(inst: CpPkeInstance, rng) -> QuantumKey:
    ident = _random_bits(rng, inst.params.id_bits)
    return _quantum_key(inst, ident, ibe_keygen(inst.cmsk, ident))


def cp_pke_enc(pk: CpPublicKey | CpPkeInstance, m: bytes, rng, *, top_below: int = 0) -> CpCiphertext:
    """Encrypt ``m``. ``top_below > 0`` builds the hybrid program that encrypts TOP for ids below it."""
    pk = pk.pk if isinstance(pk, CpPkeInstance) else pk
    if not isinstance(m, (bytes, bytearray)):
        raise ParameterError("CP-PKE messages are byte strings")
    extra = {"top_below": int(top_below)} if top_below else None
    return _encrypt(pk, "cp-pke", bytes(m).hex(), rng, extra)


def cp_pke_dec(key: QuantumKey, ct: CpCiphertext, pk: CpPublicKey | CpPkeInstance | None = None, rng=None):
    """Returns ``(message or None, successor key)``; TOP is reported as ``pke.TOP``."""
    id_bits, n = _widths(key, ct, pk)
    cct, succ = _coherent_decrypt(key, ct, id_bits, n, rng)
    return ibe_dec(key.ck, cct), succ


def _widths(key: QuantumKey, ct: CpCiphertext, pk) -> tuple[int, int]:
    if pk is not None:
        pk = pk.pk if isinstance(pk, (CpPkeInstance, CpFeInstance)) else pk
        return pk.id_bits, pk.params.n
    # the key itself fixes the register width; the identity width is read from the opct payload size
    n = key.sizes[0] if key.joint is None else key.sizes[0]
    return _opct_id_bits(ct), n


@functools.lru_cache(maxsize=1024)
def _opct_fields(blob: bytes) -> dict:
    from .obf import _fields

    return _fields(blob)[1]


def _opct_id_bits(ct: CpCiphertext) -> int:
    return _opct_fields(ct.opct.blob)["id_bits"]


# ---------------------------------------------------------------------------
# CP-FE


@dataclass(frozen=True)
class CpFeInstance:
    pk: CpPublicKey
    cmsk: GgmKey
    k1: GgmKey
    q: int

    @property
    def params(self) -> CpParams:
        return self.pk.params

    @property
    def lam(self) -> int:
        return self.params.id_bits


@dataclass(frozen=True)
class CpFunctionalKey:
    """Classical functional key ``(ck, id, f, coset tuple)``."""

    ck: bytes
    id: int
    f: bytes
    triples: tuple[CosetTriple, ...]
    lam: int

    @property
    def identity(self) -> int:
        return (self.id << (8 * len(self.f))) | int.from_bytes(self.f, "big")

    def to_bytes(self) -> bytes:
        cos = canonical_json([t.to_json() for t in self.triples])
        return (
            struct.pack(">BHIH", 1, len(self.ck), self.lam, len(self.f))
            + self.ck
            + pack_int(self.id, self.lam)
            + self.f
            + cos
        )

    @classmethod
    def from_bytes(cls, data: bytes) -> "CpFunctionalKey":
        try:
            version, ck_len, lam, f_len = struct.unpack_from(">BHIH", data)
        except struct.error as exc:
            raise DecodeError("truncated functional key") from exc
        if version != 1:
            raise DecodeError("unsupported functional key version")
        pos = struct.calcsize(">BHIH")
        ck = data[pos:pos + ck_len]
        pos += ck_len
        idb = (lam + 7) // 8
        ident = int.from_bytes(data[pos:pos + idb], "big")
        pos += idb
        f = data[pos:pos + f_len]
        pos += f_len
        triples = tuple(CosetTriple.from_json(t) for t in json.loads(data[pos:]))
        return cls(ck, ident, f, triples, lam)


def cp_fe_setup(params: CpParams = CpParams(), q: int = 32, rng=None, *, expander=blake2_expander) -> CpFeInstance:
    if rng is None:
        raise ParameterError("an explicit rng is required")
    pk, cmsk, k1 = _setup(params, params.id_bits + 8 * q, rng, expander)
    return CpFeInstance(pk, cmsk, k1, q)


def cp_fe_keygen(inst: CpFeInstance, f: FunctionDesc, rng, ident: int | None = None) -> CpFunctionalKey:
    fb = f.encode(inst.q)
    if ident is None:
        ident = _random_bits(rng, inst.lam)
    full = (ident << (8 * inst.q)) | int.from_bytes(fb, "big")
    ck = ibe_keygen(inst.cmsk, full)
    return CpFunctionalKey(ck, ident, fb, cosets_for(inst.k1, full, inst.params), inst.lam)


def cp_fe_qkeygen(fk: CpFunctionalKey, cap: int = QUBIT_CAP) -> QuantumKey:
    states = tuple(prepare_coset_state(t, cap) for t in fk.triples)
    return QuantumKey(states, fk.ck, fk.identity, fk.f)


def cp_fe_enc(pk: CpPublicKey | CpFeInstance, m: int, rng) -> CpCiphertext:
    q = pk.q if isinstance(pk, CpFeInstance) else (pk.id_bits - pk.params.id_bits) // 8
    pk = pk.pk if isinstance(pk, CpFeInstance) else pk
    return _encrypt(pk, "cp-fe", int(m), rng, {"q": q})


def cp_fe_dec(key: QuantumKey, ct: CpCiphertext, pk=None, rng=None):
    """Returns ``(f(m) or None, successor key)``."""
    id_bits, n = _widths(key, ct, pk)
    cct, succ = _coherent_decrypt(key, ct, id_bits, n, rng)
    out = ibe_dec(key.ck, cct)
    if out is None or out is TOP:
        return None, succ
    return int.from_bytes(out, "big"), succ


def cp_fe_pmsk(inst: CpFeInstance, m0: int, m1: int) -> ObfProgram:
    """Punctured master key: issues full functional keys for ``id || f`` iff ``f(m0) == f(m1)``."""
    params = inst.params
    fields = {
        "variant": "cp",
        "imsk": inst.cmsk.to_bytes().hex(),
        "K1": inst.k1.to_bytes().hex(),
        "expander": expander_name(inst.k1.expander),
        "m0": int(m0),
        "m1": int(m1),
        "q": inst.q,
        "lam": inst.lam,
        "n": params.n,
        "d": params.d,
        "c": params.c,
    }
    bits = inst.pk.id_bits
    size = padded_size(
        len(ProgramDesc.make("PKey", fields).payload), [(bits, SECURITY_BYTES), (bits, SECURITY_BYTES)]
    )
    return obfuscate(ProgramDesc.make("PKey", fields, size), params.mode)


def pmsk_keygen(pmsk: ObfProgram, ident: int, f: FunctionDesc, lam: int, q: int) -> CpFunctionalKey | None:
    full = (ident << (8 * q)) | f.identity(q)
    out = unwrap(run(pmsk, pack_int(full, lam + 8 * q)))
    return None if out is None else CpFunctionalKey.from_bytes(out)


# ---------------------------------------------------------------------------
# the two-copy break


@dataclass(frozen=True)
class ClassicalKeyMaterial:
    """Vectors in both cosets of every index, extracted from two copies of one key."""

    id: int
    ck: bytes
    primal: tuple[int, ...]  # u_i in A_i + s_i
    dual: tuple[int, ...]  # w_i in A_i^perp + s'_i
    f: bytes | None = None


def two_copy_extract(key_a: QuantumKey, key_b: QuantumKey, rng) -> ClassicalKeyMaterial:
    """Measure copy A in the computational basis and copy B in the Hadamard basis."""
    if key_a.id != key_b.id or key_a.joint is not None or key_b.joint is not None:
        raise ParameterError("two unentangled copies of the same key are required")
    primal = tuple(measure_computational(s, rng).outcome for s in key_a.states)
    dual_vs = tuple(measure_computational(hadamard_all(s), rng).outcome for s in key_b.states)
    return ClassicalKeyMaterial(key_a.id, key_a.ck, primal, dual_vs, key_a.f)


def classical_decrypt(mat: ClassicalKeyMaterial, ct: CpCiphertext, id_bits: int, n: int):
    us = [mat.dual[i] if _bit(ct.r, i, ct.c) else mat.primal[i] for i in range(ct.c)]
    cct = unwrap(run(ct.opct, pct_input(mat.id, us, id_bits, n)))
    return ibe_dec(mat.ck, cct)


def honest_vectors(triples: Sequence[CosetTriple], r: int) -> list[int]:
    """One canonical member per coset selected by ``r`` (test oracle)."""
    from .gf2 import canonical, dual

    c = len(triples)
    return [
        canonical(dual(t.space), t.s_prime) if _bit(r, i, c) else canonical(t.space, t.s)
        for i, t in enumerate(triples)
    ]
