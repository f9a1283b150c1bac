"""Deterministic randomness: byte streams and named numpy sub-streams.

Every random choice in the lab is derived from an explicit seed. Two
mechanisms are used:

* :class:`RandomStream`, a SHAKE-256 byte stream with draw counting. This is
  what ``CosetGen`` consumes, so the same PRF output always yields the same
  coset tuple.
* :func:`substream`, which maps ``(seed, *labels)`` to an independent
  :class:`numpy.random.Generator`. Per-trial streams are addressed by label so
  any single trial can be replayed in isolation.
"""

from __future__ import annotations

import hashlib

import numpy as np

from . import ParameterError, RandomnessError


class RandomStream:
    """Byte stream expanded from a seed with SHAKE-256.

    ``limit`` caps the number of bytes that may be drawn; exceeding it raises
    :class:`RandomnessError`. ``RandomStream.fixed(data)`` serves exactly the
    given bytes and nothing more.
    """

    def __init__(self, seed: bytes, limit: int | None = None):
        self._seed = bytes(seed)
        self._limit = limit
        self._fixed: bytes | None = None
        self._buf = b""
        self._pos = 0
        self.draws = 0
        self.bytes_used = 0

    @classmethod
    def fixed(cls, data: bytes) -> "RandomStream":
        stream = cls(b"", limit=len(data))
        stream._fixed = bytes(data)
        return stream

    def _ensure(self, end: int) -> None:
        if self._fixed is not None:
            self._buf = self._fixed
            return
        if end > len(self._buf):
            size = max(2 * len(self._buf), end, 64)
            self._buf = hashlib.shake_256(self._seed).digest(size)

    def read(self, n: int) -> bytes:
        if n < 0:
            raise ParameterError("cannot read a negative number of bytes")
        end = self._pos + n
        if self._limit is not None and end > self._limit:
            raise RandomnessError(
                f"randomness stream exhausted: {end} bytes requested, limit {self._limit}"
            )
        self._ensure(end)
        out = self._buf[self._pos:end]
        self._pos = end
        self.draws += 1
        self.bytes_used = end
        return out

    def bits(self, k: int) -> int:
        """Draw a uniform integer with ``k`` bits (big-endian, top bits kept)."""
        if k == 0:
            self.draws += 1
            return 0
        nbytes = (k + 7) // 8
        value = int.from_bytes(self.read(nbytes), "big")
        return value >> (8 * nbytes - k)


def _label_bytes(label) -> bytes:
    if isinstance(label, bytes):
        return b"b" + label
    if isinstance(label, int):
        return b"i" + str(label).encode()
    return b"s" + str(label).encode()


def derive_seed(seed: int | bytes, *labels) -> bytes:
    """Hash a root seed and a label path into 32 bytes."""
    h = hashlib.sha256(b"cosetlab/substream")
    h.update(_label_bytes(seed))
    for label in labels:
        part = _label_bytes(label)
        h.update(len(part).to_bytes(4, "big"))
        h.update(part)
    return h.digest()


def substream(seed: int | bytes, *labels) -> np.random.Generator:
    """Independent numpy generator for the named sub-stream."""
    words = np.frombuffer(derive_seed(seed, *labels), dtype=np.uint32)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(words.tolist())))


def byte_stream(seed: int | bytes, *labels) -> RandomStream:
    return RandomStream(derive_seed(seed, *labels))


def as_generator(rng) -> np.random.Generator:
    """Accept a Generator, an int seed or None (seed 0 is NOT implied)."""
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, (int, np.integer)):
        return np.random.default_rng(int(rng))
    raise ParameterError("an explicit numpy Generator or integer seed is required")


def random_bytes(rng, n: int) -> bytes:
    """``n`` bytes from a numpy Generator or a :class:`RandomStream`."""
    if isinstance(rng, RandomStream):
        return rng.read(n)
    return as_generator(rng).bytes(n)
