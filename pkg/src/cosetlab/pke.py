"""Toy hybrid public-key encryption with deterministic key derivation.

Keys live in the order-``q`` subgroup of ``Z_p^*`` for a 64-bit safe prime
``p = 2q + 1``. Encryption is hashed ElGamal: the shared group element keys a
SHAKE-256 pad and a 16-byte BLAKE2b tag, so decryption under the wrong key is
detected and returns ``None`` (bottom). This is a functional stand-in with
toy security only.

Plaintexts are byte strings. The distinguished symbol ``TOP`` sits outside
the message space and is encoded by a reserved framing byte.
"""

from __future__ import annotations

import hashlib
import hmac

from . import DecodeError, ParameterError

P = 12120525772395267743
Q = (P - 1) // 2
G = 4

VERSION = 1
COIN_BYTES = 16
TAG_BYTES = 16
_ELEM = 8
_FRAME_MSG = 0x00
_FRAME_TOP = 0x01


class _Top:
    """The distinguished symbol outside the message space."""

    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self) -> str:
        return "TOP"


TOP = _Top()


def _exponent(coins: bytes) -> int:
    if len(coins) < COIN_BYTES:
        raise ParameterError(f"need at least {COIN_BYTES} bytes of coins")
    return int.from_bytes(coins, "big") % (Q - 1) + 1


def keygen(coins: bytes) -> tuple[bytes, bytes]:
    """Deterministic ``(pk, sk)`` from the given coins."""
    x = _exponent(coins)
    pk = bytes([VERSION]) + pow(G, x, P).to_bytes(_ELEM, "big")
    sk = bytes([VERSION]) + x.to_bytes(_ELEM, "big")
    return pk, sk


def _parse_elem(blob: bytes, what: str) -> int:
    if len(blob) != 1 + _ELEM or blob[0] != VERSION:
        raise DecodeError(f"malformed {what}")
    return int.from_bytes(blob[1:], "big")


def _pad_and_tag_keys(shared: int, c1: int) -> tuple[bytes, bytes]:
    seed = shared.to_bytes(_ELEM, "big") + c1.to_bytes(_ELEM, "big")
    return hashlib.sha256(b"pad" + seed).digest(), hashlib.sha256(b"tag" + seed).digest()


def _frame(m) -> bytes:
    if m is TOP:
        return bytes([_FRAME_TOP])
    if not isinstance(m, (bytes, bytearray)):
        raise ParameterError("messages are byte strings or TOP")
    return bytes([_FRAME_MSG]) + bytes(m)


def encrypt(pk: bytes, m, coins: bytes) -> bytes:
    h = _parse_elem(pk, "public key")
    y = _exponent(coins)
    c1 = pow(G, y, P)
    pad_key, tag_key = _pad_and_tag_keys(pow(h, y, P), c1)
    body = _frame(m)
    if len(body) > 0xFFFF:
        raise ParameterError("message too long")
    pad = hashlib.shake_256(pad_key).digest(len(body))
    masked = bytes(a ^ b for a, b in zip(body, pad))
    head = bytes([VERSION]) + c1.to_bytes(_ELEM, "big") + len(body).to_bytes(2, "big")
    tag = hashlib.blake2b(head + masked, key=tag_key, digest_size=TAG_BYTES).digest()
    return head + masked + tag


def decrypt(sk: bytes, ct: bytes):
    """Plaintext bytes, ``TOP``, or ``None`` when the tag does not verify."""
    x = _parse_elem(sk, "secret key")
    if len(ct) < 1 + _ELEM + 2 + TAG_BYTES or ct[0] != VERSION:
        return None
    c1 = int.from_bytes(ct[1:1 + _ELEM], "big")
    size = int.from_bytes(ct[1 + _ELEM:3 + _ELEM], "big")
    head, masked, tag = ct[:3 + _ELEM], ct[3 + _ELEM:-TAG_BYTES], ct[-TAG_BYTES:]
    if len(masked) != size or not 0 < c1 < P:
        return None
    pad_key, tag_key = _pad_and_tag_keys(pow(c1, x, P), c1)
    want = hashlib.blake2b(head + masked, key=tag_key, digest_size=TAG_BYTES).digest()
    if not hmac.compare_digest(want, tag):
        return None
    body = bytes(a ^ b for a, b in zip(masked, hashlib.shake_256(pad_key).digest(size)))
    if body[0] == _FRAME_TOP and size == 1:
        return TOP
    if body[0] != _FRAME_MSG:
        return None
    return body[1:]
