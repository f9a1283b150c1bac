"""GGM-tree puncturable PRF with multi-point puncturing.

Inputs are integers of ``input_len`` bits, consumed most significant bit
first. A tree node is addressed by ``(depth, prefix)`` where ``prefix`` holds
the top ``depth`` bits of the inputs below it.

The length-doubling PRG is built from an injectable *expander*
``expander(seed, counter) -> bytes`` returning ``len(seed)`` bytes. Counters
0 and 1 give the left and right children; counters from 2 upward stretch a
leaf seed to ``output_len`` bits.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from . import DecodeError, ParameterError, PuncturedPointError
from .rng import random_bytes

Expander = Callable[[bytes, int], bytes]

FORMAT_VERSION = 1
_TAG_FULL = 0x01
_TAG_PUNCTURED = 0x02


def blake2_expander(seed: bytes, counter: int) -> bytes:
    """Keyed BLAKE2b: the seed is the key, the counter the message."""
    return hashlib.blake2b(counter.to_bytes(8, "big"), key=seed, digest_size=len(seed)).digest()


def toy_expander(seed: bytes, counter: int) -> bytes:
    """Cheap counter-based expander for reproducibility tests. Not a PRG."""
    acc = counter * 0x9E3779B1 & 0xFFFFFFFF
    out = bytearray()
    for i, b in enumerate(seed):
        acc = (acc * 1103515245 + b + i + 12345) & 0xFFFFFFFF
        out.append((acc >> 16) & 0xFF)
    return bytes(out)


def _children(seed: bytes, expander: Expander) -> tuple[bytes, bytes]:
    return expander(seed, 0), expander(seed, 1)


def _stretch(seed: bytes, output_len: int, expander: Expander) -> int:
    nbytes = (output_len + 7) // 8
    out = b""
    counter = 2
    while len(out) < nbytes:
        out += expander(seed, counter)
        counter += 1
    return int.from_bytes(out[:nbytes], "big") >> (8 * nbytes - output_len)


def _descend(seed: bytes, x: int, start: int, input_len: int, expander: Expander) -> bytes:
    for depth in range(start, input_len):
        bit = (x >> (input_len - 1 - depth)) & 1
        seed = expander(seed, bit)
    return seed


def _check_input(x: int, input_len: int) -> int:
    if not isinstance(x, (int, np.integer)) or isinstance(x, bool):
        raise ParameterError("PRF inputs are integers")
    x = int(x)
    if x < 0 or x >> input_len:
        raise ParameterError(f"input {x} does not fit in {input_len} bits")
    return x


@dataclass(frozen=True)
class GgmKey:
    root_seed: bytes
    input_len: int
    output_len: int
    expander: Expander = field(default=blake2_expander, compare=False, repr=False)

    def __post_init__(self):
        if self.input_len < 1:
            raise ParameterError("input_len must be at least 1")
        if self.output_len < 1:
            raise ParameterError("output_len must be at least 1")
        if not self.root_seed:
            raise ParameterError("root seed must be non-empty")

    def to_bytes(self) -> bytes:
        return (
            struct.pack(">BBIIH", FORMAT_VERSION, _TAG_FULL, self.input_len, self.output_len, len(self.root_seed))
            + self.root_seed
        )


@dataclass(frozen=True)
class PuncturedKey:
    punctured_points: tuple[int, ...]
    copath_nodes: tuple[tuple[int, int, bytes], ...]  # (depth, prefix, seed)
    input_len: int
    output_len: int
    expander: Expander = field(default=blake2_expander, compare=False, repr=False)

    def to_bytes(self) -> bytes:
        seed_len = len(self.copath_nodes[0][2]) if self.copath_nodes else 0
        pt_bytes = (self.input_len + 7) // 8
        head = struct.pack(
            ">BBIIHII",
            FORMAT_VERSION,
            _TAG_PUNCTURED,
            self.input_len,
            self.output_len,
            seed_len,
            len(self.punctured_points),
            len(self.copath_nodes),
        )
        body = b"".join(p.to_bytes(pt_bytes, "big") for p in self.punctured_points)
        for depth, prefix, seed in self.copath_nodes:
            body += struct.pack(">I", depth) + prefix.to_bytes(pt_bytes, "big") + seed
        return head + body


def prf_keygen(security_bytes: int, input_len: int, output_len: int, rng, expander: Expander = blake2_expander) -> GgmKey:
    if security_bytes < 1:
        raise ParameterError("security_bytes must be positive")
    return GgmKey(random_bytes(rng, security_bytes), input_len, output_len, expander)


def prf_eval(k: GgmKey, x: int) -> int:
    """F(K, x) as an integer of ``output_len`` bits."""
    x = _check_input(x, k.input_len)
    leaf = _descend(k.root_seed, x, 0, k.input_len, k.expander)
    return _stretch(leaf, k.output_len, k.expander)


def prf_eval_bytes(k, x: int) -> bytes:
    """Evaluation packed big-endian into ``ceil(output_len / 8)`` bytes."""
    value = prf_eval(k, x) if isinstance(k, GgmKey) else eval_punctured(k, x)
    return value.to_bytes((k.output_len + 7) // 8, "big")


def prf_puncture(k: GgmKey, points: Iterable[int]) -> PuncturedKey:
    """Co-path of the punctured set: siblings of its ancestors that cover no punctured point."""
    n = k.input_len
    pts = tuple(sorted({_check_input(p, n) for p in points}))
    if not pts:
        return PuncturedKey((), ((0, 0, k.root_seed),), n, k.output_len, k.expander)
    ancestors = {(d, p >> (n - d)) for p in pts for d in range(n + 1)}
    nodes = []
    # walk down from the root, expanding only ancestors of punctured points
    frontier = [(0, 0, k.root_seed)]
    while frontier:
        depth, prefix, seed = frontier.pop()
        if depth == n:
            continue
        for bit, child in enumerate(_children(seed, k.expander)):
            node = (depth + 1, (prefix << 1) | bit)
            if node in ancestors:
                frontier.append((*node, child))
            else:
                nodes.append((*node, child))
    nodes.sort(key=lambda t: (t[1] << (n - t[0]), t[0]))
    return PuncturedKey(pts, tuple(nodes), n, k.output_len, k.expander)


def eval_punctured(pk: PuncturedKey, x: int) -> int:
    n = pk.input_len
    x = _check_input(x, n)
    if x in pk.punctured_points:
        raise PuncturedPointError(f"key is punctured at {x}")
    for depth, prefix, seed in pk.copath_nodes:
        if x >> (n - depth) == prefix:
            leaf = _descend(seed, x, depth, n, pk.expander)
            return _stretch(leaf, pk.output_len, pk.expander)
    raise PuncturedPointError(f"no co-path node covers {x}")


def full_key_size(seed_len: int) -> int:
    """Serialized length of a full key."""
    return struct.calcsize(">BBIIH") + seed_len


def punctured_key_size(input_len: int, seed_len: int, points: int = 1) -> int:
    """Upper bound on the serialized length of a key punctured at ``points`` inputs."""
    pt = (input_len + 7) // 8
    return struct.calcsize(">BBIIHII") + points * pt + points * input_len * (4 + pt + seed_len)


def key_from_bytes(data: bytes, expander: Expander = blake2_expander) -> GgmKey | PuncturedKey:
    try:
        version, tag, input_len, output_len, seed_len = struct.unpack_from(">BBIIH", data)
        if version != FORMAT_VERSION:
            raise DecodeError(f"unsupported key format version {version}")
        if tag == _TAG_FULL:
            seed = data[12:12 + seed_len]
            if len(seed) != seed_len or len(data) != 12 + seed_len:
                raise DecodeError("truncated PRF key")
            return GgmKey(seed, input_len, output_len, expander)
        if tag != _TAG_PUNCTURED:
            raise DecodeError(f"unknown key tag {tag}")
        _, _, _, _, _, n_pts, n_nodes = struct.unpack_from(">BBIIHII", data)
        pos = struct.calcsize(">BBIIHII")
        pt_bytes = (input_len + 7) // 8
        pts = []
        for _ in range(n_pts):
            pts.append(int.from_bytes(data[pos:pos + pt_bytes], "big"))
            pos += pt_bytes
        nodes = []
        for _ in range(n_nodes):
            (depth,) = struct.unpack_from(">I", data, pos)
            pos += 4
            prefix = int.from_bytes(data[pos:pos + pt_bytes], "big")
            pos += pt_bytes
            seed = data[pos:pos + seed_len]
            pos += seed_len
            nodes.append((depth, prefix, seed))
        if pos != len(data):
            raise DecodeError("trailing or missing bytes in punctured key")
        return PuncturedKey(tuple(pts), tuple(nodes), input_len, output_len, expander)
    except struct.error as exc:
        raise DecodeError(f"malformed PRF key: {exc}") from exc
