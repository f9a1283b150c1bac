"""Functional stand-in for program obfuscation.

An obfuscated program is a self-describing blob around an interpreted
program description. Nothing is hidden in a cryptographic sense: the
stand-in only guarantees correct evaluation and that descriptions with equal
``declared_size`` produce equal-length blobs.

Blob layout::

    b"OBF" | u8 version | u8 mode | u32 declared_size
    body:  u8 kind | u32 payload_len | payload | zero padding   (declared_size + 5 bytes)
    tag:   16 bytes, BLAKE2b over header and plain body

In sealed mode the body is XOR-masked with a SHAKE-256 stream keyed by the
tag, so any change to body or tag breaks the tag check on ``run``.

``run`` returns framed bytes: ``BOTTOM`` (``b"\\x00"``) or ``b"\\x01" + value``.
"""

from __future__ import annotations

import functools
import hashlib
import hmac
import json
import struct
from dataclasses import dataclass
from typing import Any

from . import DecodeError, IntegrityError, ParameterError, PuncturedPointError
from . import circuits
from .gf2 import Subspace, canonical, dual
from .pprf import (
    blake2_expander,
    full_key_size,
    key_from_bytes,
    prf_eval_bytes,
    punctured_key_size,
    toy_expander,
)

MAGIC = b"OBF"
VERSION = 1
TAG_BYTES = 16
KINDS = ("PMem", "PCt", "PKeyGen", "PKey", "CC", "Custom")
MODES = ("transparent", "sealed")
BOTTOM = b"\x00"

EXPANDERS = {"blake2": blake2_expander, "toy": toy_expander}
_HEADER = struct.Struct(">3sBBI")


def expander_name(fn) -> str:
    for name, e in EXPANDERS.items():
        if e is fn:
            return name
    raise ParameterError("only registered expanders can be embedded in programs")


def canonical_json(obj: Any) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()


def size_bucket(n: int) -> int:
    """Smallest power of two that is at least ``max(n, 256)``."""
    return max(256, 1 << (max(n, 1) - 1).bit_length())


def wrap(value: bytes) -> bytes:
    return b"\x01" + value


def is_bottom(out: bytes) -> bool:
    return out == BOTTOM


def unwrap(out: bytes) -> bytes | None:
    """Value carried by a framed output, or ``None`` for bottom."""
    if out == BOTTOM:
        return None
    if not out or out[0] != 1:
        raise DecodeError("malformed program output")
    return out[1:]


@dataclass(frozen=True)
class ProgramDesc:
    kind: str
    payload: bytes
    declared_size: int

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown program kind {self.kind!r}")
        if self.declared_size < len(self.payload):
            raise ParameterError(
                f"declared size {self.declared_size} below payload size {len(self.payload)}"
            )
        try:
            json.loads(self.payload)
        except ValueError as exc:
            raise DecodeError(f"payload is not canonical JSON: {exc}") from exc

    @classmethod
    def make(cls, kind: str, fields: dict, declared_size: int | None = None) -> "ProgramDesc":
        payload = canonical_json(fields)
        return cls(kind, payload, size_bucket(len(payload)) if declared_size is None else declared_size)

    @property
    def fields(self) -> dict:
        return json.loads(self.payload)


@dataclass(frozen=True)
class ObfProgram:
    blob: bytes

    @property
    def mode(self) -> str:
        return MODES[_HEADER.unpack_from(self.blob)[2]]

    @property
    def declared_size(self) -> int:
        return _HEADER.unpack_from(self.blob)[3]

    @property
    def inner(self) -> ProgramDesc:
        """The program description; only exposed for transparent programs."""
        if self.mode != "transparent":
            raise ParameterError("sealed programs do not expose their description")
        kind, payload = _open(self.blob)
        return ProgramDesc(kind, payload, self.declared_size)

    def hex(self) -> str:
        return self.blob.hex()

    @classmethod
    def from_hex(cls, text: str) -> "ObfProgram":
        return cls(bytes.fromhex(text))

    def __call__(self, x: bytes) -> bytes:
        return run(self, x)


def _mask(tag: bytes, n: int) -> bytes:
    return hashlib.shake_256(b"obf-mask" + tag).digest(n)


def obfuscate(p: ProgramDesc, mode: str = "transparent") -> ObfProgram:
    if mode not in MODES:
        raise ParameterError(f"unknown mode {mode!r}")
    _validate(p)
    header = _HEADER.pack(MAGIC, VERSION, MODES.index(mode), p.declared_size)
    body = struct.pack(">BI", KINDS.index(p.kind), len(p.payload)) + p.payload
    body += bytes(p.declared_size - len(p.payload))
    tag = hashlib.blake2b(header + body, digest_size=TAG_BYTES).digest()
    if mode == "sealed":
        body = bytes(a ^ b for a, b in zip(body, _mask(tag, len(body))))
    return ObfProgram(header + body + tag)


@functools.lru_cache(maxsize=1024)
def _open(blob: bytes) -> tuple[str, bytes]:
    if len(blob) < _HEADER.size + 5 + TAG_BYTES:
        raise DecodeError("blob too short")
    magic, version, mode, declared = _HEADER.unpack_from(blob)
    if magic != MAGIC or version != VERSION or mode >= len(MODES):
        raise DecodeError("not an obfuscated-program blob")
    header = blob[:_HEADER.size]
    body, tag = blob[_HEADER.size:-TAG_BYTES], blob[-TAG_BYTES:]
    if len(body) != declared + 5:
        raise IntegrityError("blob length does not match declared size")
    if MODES[mode] == "sealed":
        body = bytes(a ^ b for a, b in zip(body, _mask(tag, len(body))))
    want = hashlib.blake2b(header + body, digest_size=TAG_BYTES).digest()
    if not hmac.compare_digest(want, tag):
        raise IntegrityError("integrity tag mismatch")
    kind, size = struct.unpack_from(">BI", body)
    if kind >= len(KINDS) or size > declared:
        raise IntegrityError("corrupt program body")
    return KINDS[kind], body[5:5 + size]


@functools.lru_cache(maxsize=1024)
def _fields(blob: bytes) -> tuple[str, dict]:
    kind, payload = _open(blob)
    return kind, json.loads(payload)


def _validate(p: ProgramDesc) -> None:
    f = p.fields
    need = {
        "PMem": ("K1", "expander", "id_bits", "n", "d", "c"),
        "PCt": ("variant",),
        "PKeyGen": ("K", "expander", "id_bits"),
        "PKey": ("variant", "imsk", "m0", "m1", "q"),
        "CC": ("f", "y", "z"),
        "Custom": ("expr",),
    }[p.kind]
    missing = [k for k in need if k not in f]
    if missing:
        raise DecodeError(f"{p.kind} payload lacks {missing}")


def run(op: ObfProgram, x: bytes) -> bytes:
    """Evaluate the program on input bytes; deterministic."""
    kind, fields = _fields(op.blob)
    return _INTERP[kind](fields, bytes(x))


# ---------------------------------------------------------------------------
# shared helpers


def nbytes(bits: int) -> int:
    return (bits + 7) // 8


def pack_int(v: int, bits: int) -> bytes:
    return int(v).to_bytes(nbytes(bits), "big")


def _split(x: bytes, sizes) -> list[int] | None:
    out, pos = [], 0
    for s in sizes:
        out.append(int.from_bytes(x[pos:pos + s], "big"))
        pos += s
    return out if pos == len(x) else None


@functools.lru_cache(maxsize=256)
def load_key(hex_key: str, expander: str):
    return key_from_bytes(bytes.fromhex(hex_key), EXPANDERS[expander])


@functools.lru_cache(maxsize=8192)
def prf_bytes(hex_key: str, expander: str, x: int) -> bytes | None:
    """PRF evaluation through a serialized key; ``None`` at a punctured point."""
    k = load_key(hex_key, expander)
    try:
        return prf_eval_bytes(k, x)
    except PuncturedPointError:
        return None


def padded_size(payload_len: int, keys=()) -> int:
    """Declared size covering every program in the hybrid family of one kind.

    ``keys`` lists ``(input_len, seed_len)`` for each embedded PRF key; the
    family may swap any of them for a key punctured at one point and add a
    hardcoded point and value, so that growth is budgeted before bucketing.
    """
    extra = sum(2 * (punctured_key_size(i, s) - full_key_size(s)) + 256 for i, s in keys)
    return size_bucket(payload_len + extra)


def pmem_input(ident: int, vectors, r: int, id_bits: int, n: int, c: int) -> bytes:
    return pack_int(ident, id_bits) + b"".join(pack_int(u, n) for u in vectors) + pack_int(r, c)


def pct_input(ident: int, vectors, id_bits: int, n: int) -> bytes:
    return pack_int(ident, id_bits) + b"".join(pack_int(u, n) for u in vectors)


# ---------------------------------------------------------------------------
# interpreters


def _run_pmem(f: dict, x: bytes) -> bytes:
    from .copy_protect import derive_cosets

    n, c, id_bits = f["n"], f["c"], f["id_bits"]
    parts = _split(x, [nbytes(id_bits)] + [nbytes(n)] * c + [nbytes(c)])
    if parts is None or parts[0] >> id_bits or parts[-1] >> c:
        return BOTTOM
    ident, us, r = parts[0], parts[1:-1], parts[-1]
    triples = derive_cosets(f["K1"], f["expander"], ident, n, f["d"], c)
    if triples is None:
        return wrap(b"\x00")
    ok = all(
        0 <= u < (1 << n) and t.contains((r >> (c - 1 - i)) & 1, u)
        for i, (t, u) in enumerate(zip(triples, us))
    )
    return wrap(b"\x01" if ok else b"\x00")


def _ibe_encrypt(f: dict, ident: int, msg, coins: bytes | None) -> bytes:
    from .ibe_fe import IbePublicKey, ibe_enc_coins

    if coins is None:
        return BOTTOM
    cpk = IbePublicKey(ObfProgram.from_hex(f["cpk"]), f["cpk_bits"])
    ct = ibe_enc_coins(cpk, ident, msg, coins)
    return BOTTOM if ct is None else wrap(ct)


def _run_pct(f: dict, x: bytes) -> bytes:
    from .pke import TOP

    if f["variant"] == "fe":
        # puncturable FE ciphertext: input is a padded circuit
        q = f["q"]
        if len(x) != q:
            return BOTTOM
        try:
            fn = circuits.decode(x)
            a = fn(f["m"])
        except (DecodeError, ParameterError):
            return BOTTOM
        ident = int.from_bytes(x, "big")
        coins = prf_bytes(f["K"], f["expander"], ident)
        return _ibe_encrypt(f, ident, pack_int(a, len(fn.outputs)), coins)
    # copy-protected PKE / FE ciphertext
    n, c, id_bits = f["n"], f["c"], f["id_bits"]
    parts = _split(x, [nbytes(id_bits)] + [nbytes(n)] * c)
    if parts is None:
        return BOTTOM
    ident, us = parts[0], parts[1:]
    mem = run(ObfProgram.from_hex(f["opmem"]), pmem_input(ident, us, f["r"], id_bits, n, c))
    if unwrap(mem) != b"\x01":
        return BOTTOM
    if f["variant"] == "cp-fe":
        q = f["q"]
        try:
            fn = circuits.from_identity(ident & ((1 << (8 * q)) - 1), q)
            msg = pack_int(fn(f["m"]), len(fn.outputs))
        except (DecodeError, ParameterError):
            return BOTTOM
    else:
        msg = bytes.fromhex(f["m"])
    if ident < f.get("top_below", 0):
        msg = TOP
    coins = prf_bytes(f["K2"], f["expander"], ident)
    return _ibe_encrypt(f, ident, msg, coins)


def _run_pkeygen(f: dict, x: bytes) -> bytes:
    from .pke import keygen

    id_bits = f["id_bits"]
    if len(x) != nbytes(id_bits):
        return BOTTOM
    ident = int.from_bytes(x, "big")
    if ident >> id_bits:
        return BOTTOM
    coins = prf_bytes(f["K"], f["expander"], ident)
    if coins is None:
        return BOTTOM
    return wrap(keygen(coins)[0])


def _run_pkey(f: dict, x: bytes) -> bytes:
    from . import ibe_fe

    q = f["q"]
    if f["variant"] == "fe":
        if len(x) != q:
            return BOTTOM
        ident = int.from_bytes(x, "big")
        f_id = ident
    else:
        lam = f["lam"]
        if len(x) != nbytes(lam + 8 * q):
            return BOTTOM
        ident = int.from_bytes(x, "big")
        f_id = ident & ((1 << (8 * q)) - 1)
    try:
        fn = circuits.from_identity(f_id, q)
        if fn(f["m0"]) != fn(f["m1"]):
            return BOTTOM
    except (DecodeError, ParameterError):
        return BOTTOM
    msk = load_key(f["imsk"], f["expander"])
    try:
        sk = ibe_fe.ibe_keygen(msk, ident)
    except PuncturedPointError:
        return BOTTOM
    if f["variant"] == "fe":
        return wrap(ibe_fe.FeKey(sk, x).to_bytes())
    from .copy_protect import CpFunctionalKey, derive_cosets

    lam = f["lam"]
    triples = derive_cosets(f["K1"], f["expander"], ident, f["n"], f["d"], f["c"])
    if triples is None:
        return BOTTOM
    key = CpFunctionalKey(sk, ident >> (8 * q), x[-q:], triples, lam)
    return wrap(key.to_bytes())


def _cc_compute(fdesc: dict, x: bytes) -> bytes | None:
    kind = fdesc["type"]
    if kind == "circuit":
        fn = circuits.decode(bytes.fromhex(fdesc["circuit"]))
        m = int.from_bytes(x, "big")
        if m >> fn.n_inputs:
            return None
        return pack_int(fn(m), len(fn.outputs))
    if kind == "canonical":
        n = fdesc["n"]
        spaces = [Subspace.from_hex(n, rows) for rows in fdesc["bases"]]
        us = _split(x, [nbytes(n)] * len(spaces))
        if us is None or any(u >> n for u in us):
            return None
        return b"".join(pack_int(canonical(a, u), n) for a, u in zip(spaces, us))
    if kind == "expr":
        return _eval_expr(fdesc["expr"], x)
    raise DecodeError(f"unknown compute-and-compare function type {kind!r}")


def _run_cc(f: dict, x: bytes) -> bytes:
    if f.get("sim"):
        return BOTTOM
    try:
        fx = _cc_compute(f["f"], x)
    except (DecodeError, ParameterError):
        return BOTTOM
    if fx is None or not hmac.compare_digest(fx, bytes.fromhex(f["y"])):
        return BOTTOM
    return wrap(bytes.fromhex(f["z"]))


def _eval_expr(e, x: bytes) -> bytes | None:
    """Tiny expression language; ``None`` is bottom and propagates."""
    op, args = e[0], e[1:]
    if op == "in":
        return x
    if op == "const":
        return bytes.fromhex(args[0])
    if op == "bot":
        return None
    if op == "slice":
        v = _eval_expr(args[0], x)
        return None if v is None else v[args[1]:args[2]]
    if op == "prf":
        v = _eval_expr(args[2], x)
        return None if v is None else prf_bytes(args[0], args[1], int.from_bytes(v, "big"))
    vals = [_eval_expr(a, x) for a in args]
    if op == "if":
        if vals[0] is None:
            return None
        return vals[1] if any(vals[0]) else vals[2]
    if any(v is None for v in vals):
        return None
    if op == "cat":
        return b"".join(vals)
    if op in ("xor", "and"):
        a, b = vals
        if len(a) != len(b):
            return None
        fn = (lambda s, t: s ^ t) if op == "xor" else (lambda s, t: s & t)
        return bytes(fn(s, t) for s, t in zip(a, b))
    if op == "not":
        return bytes(255 - s for s in vals[0])
    if op == "eq":
        return b"\x01" if vals[0] == vals[1] else b"\x00"
    raise DecodeError(f"unknown expression op {op!r}")


def _run_custom(f: dict, x: bytes) -> bytes:
    v = _eval_expr(f["expr"], x)
    return BOTTOM if v is None else wrap(v)


_INTERP = {
    "PMem": _run_pmem,
    "PCt": _run_pct,
    "PKeyGen": _run_pkeygen,
    "PKey": _run_pkey,
    "CC": _run_cc,
    "Custom": _run_custom,
}


# ---------------------------------------------------------------------------
# compute-and-compare


def _cc_declared_size(f_len: int, y_len: int, z_len: int) -> int:
    # canonical JSON of {"f": f, "y": hex, "z": hex} is f_len + 2(y_len + z_len) + 18
    return size_bucket(f_len + 2 * (y_len + z_len) + 64)


def cc_function_bytes(fdesc: dict) -> bytes:
    return canonical_json(fdesc)


def cc_obfuscate(fdesc: dict, y: bytes, z: bytes, mode: str = "sealed") -> ObfProgram:
    """Program that outputs ``z`` on inputs with ``f(x) == y`` and bottom elsewhere.

    ``fdesc`` is ``{"type": "circuit", "circuit": hex}``,
    ``{"type": "canonical", "n": n, "bases": [[hex rows], ...]}`` or
    ``{"type": "expr", "expr": [...]}``.
    """
    size = _cc_declared_size(len(cc_function_bytes(fdesc)), len(y), len(z))
    desc = ProgramDesc.make("CC", {"f": fdesc, "y": y.hex(), "z": z.hex()}, size)
    return obfuscate(desc, mode)


def cc_simulate(sizes: tuple[int, int, int], mode: str = "sealed") -> ObfProgram:
    """Size-only simulator: outputs bottom everywhere, same declared size as real programs."""
    f_len, y_len, z_len = (int(s) for s in sizes)
    desc = ProgramDesc.make(
        "CC", {"f": None, "sim": True, "y": "", "z": ""}, _cc_declared_size(f_len, y_len, z_len)
    )
    return obfuscate(desc, mode)


def canonical_coset_cc(triples, r: int, z: bytes, mode: str = "sealed") -> ObfProgram:
    """Recast the coset membership check for challenge ``r`` as compute-and-compare.

    ``u_i`` lies in the selected coset iff its canonical element equals that
    of the offset, so ``f(u) = (Can(u_i))_i`` and ``y = (Can(offset_i))_i``.
    """
    c = len(triples)
    n = triples[0].n
    bases, target = [], b""
    for i, t in enumerate(triples):
        space, off = (dual(t.space), t.s_prime) if (r >> (c - 1 - i)) & 1 else (t.space, t.s)
        bases.append(space.to_hex())
        target += pack_int(canonical(space, off), n)
    return cc_obfuscate({"type": "canonical", "n": n, "bases": bases}, target, z, mode)
