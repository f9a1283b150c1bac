"""Boolean circuits over {XOR, AND, NOT, CONST} with a canonical byte encoding.

Wires ``0 .. n_inputs-1`` carry the input bits, least significant bit of the
message first. Gate ``j`` writes wire ``n_inputs + j``. The output integer has
output ``k`` as bit ``k``.

Encoding (all integers little-endian)::

    u16 n_inputs | u16 n_gates | u16 n_outputs
    n_gates  x (u8 op | u16 a | u16 b)
    n_outputs x u16 wire
    zero padding up to Q bytes

The header fixes the meaningful length, and decoding rejects non-zero
padding, so distinct circuits always get distinct padded encodings. The
padded bytes read as a big-endian integer serve as the circuit's identity.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

from . import DecodeError, ParameterError

XOR, AND, NOT, CONST = 1, 2, 3, 4
_OPS = {XOR: "xor", AND: "and", NOT: "not", CONST: "const"}


@dataclass(frozen=True)
class FunctionDesc:
    n_inputs: int
    gates: tuple[tuple[int, int, int], ...]
    outputs: tuple[int, ...]

    def __post_init__(self):
        if not 0 <= self.n_inputs <= 0xFFFF:
            raise ParameterError("n_inputs out of range")
        for j, (op, a, b) in enumerate(self.gates):
            limit = self.n_inputs + j
            if op not in _OPS:
                raise ParameterError(f"unknown gate op {op}")
            if op == CONST:
                if a not in (0, 1) or b != 0:
                    raise ParameterError("CONST gates take a = 0/1 and b = 0")
            elif op == NOT:
                if not 0 <= a < limit or b != 0:
                    raise ParameterError(f"gate {j} references a later wire")
            elif not (0 <= a < limit and 0 <= b < limit):
                raise ParameterError(f"gate {j} references a later wire")
        wires = self.n_inputs + len(self.gates)
        if not self.outputs or any(not 0 <= w < wires for w in self.outputs):
            raise ParameterError("outputs must name existing wires")

    @property
    def size(self) -> int:
        return 6 + 5 * len(self.gates) + 2 * len(self.outputs)

    def encode(self, q: int | None = None) -> bytes:
        out = struct.pack("<HHH", self.n_inputs, len(self.gates), len(self.outputs))
        for op, a, b in self.gates:
            out += struct.pack("<BHH", op, a, b)
        out += b"".join(struct.pack("<H", w) for w in self.outputs)
        if q is None:
            return out
        if len(out) > q:
            raise ParameterError(f"circuit needs {len(out)} bytes, bound is {q}")
        return out + bytes(q - len(out))

    def identity(self, q: int) -> int:
        return int.from_bytes(self.encode(q), "big")

    def __call__(self, m: int) -> int:
        return evaluate(self, m)


def decode(data: bytes) -> FunctionDesc:
    try:
        n_in, n_gates, n_out = struct.unpack_from("<HHH", data)
        pos = 6
        gates = []
        for _ in range(n_gates):
            gates.append(struct.unpack_from("<BHH", data, pos))
            pos += 5
        outputs = struct.unpack_from(f"<{n_out}H", data, pos)
        pos += 2 * n_out
    except struct.error as exc:
        raise DecodeError(f"truncated circuit: {exc}") from exc
    if any(data[pos:]):
        raise DecodeError("non-zero padding after circuit")
    try:
        return FunctionDesc(n_in, tuple(gates), tuple(outputs))
    except ParameterError as exc:
        raise DecodeError(str(exc)) from exc


def from_identity(ident: int, q: int) -> FunctionDesc:
    if ident < 0 or ident >> (8 * q):
        raise DecodeError("identity does not fit in Q bytes")
    return decode(ident.to_bytes(q, "big"))


def evaluate(f: FunctionDesc, m: int) -> int:
    if m < 0 or m >> f.n_inputs:
        raise ParameterError(f"message {m} does not fit in {f.n_inputs} bits")
    w = [(m >> i) & 1 for i in range(f.n_inputs)]
    for op, a, b in f.gates:
        if op == XOR:
            w.append(w[a] ^ w[b])
        elif op == AND:
            w.append(w[a] & w[b])
        elif op == NOT:
            w.append(w[a] ^ 1)
        else:
            w.append(a)
    return sum(w[o] << k for k, o in enumerate(f.outputs))


def output_bytes(f: FunctionDesc) -> int:
    return (len(f.outputs) + 7) // 8


# small constructors used by tests and games


def constant(value: int, n_inputs: int) -> FunctionDesc:
    return FunctionDesc(n_inputs, ((CONST, value & 1, 0),), (n_inputs,))


def bit(i: int, n_inputs: int) -> FunctionDesc:
    return FunctionDesc(n_inputs, (), (i,))


def negated_bit(i: int, n_inputs: int) -> FunctionDesc:
    return FunctionDesc(n_inputs, ((NOT, i, 0),), (n_inputs,))


def parity(n_inputs: int) -> FunctionDesc:
    if n_inputs < 2:
        return bit(0, n_inputs)
    gates = [(XOR, 0, 1)]
    for i in range(2, n_inputs):
        gates.append((XOR, n_inputs + len(gates) - 1, i))
    return FunctionDesc(n_inputs, tuple(gates), (n_inputs + len(gates) - 1,))


def and_bits(i: int, j: int, n_inputs: int) -> FunctionDesc:
    return FunctionDesc(n_inputs, ((AND, i, j),), (n_inputs,))


def xor_bits(i: int, j: int, n_inputs: int) -> FunctionDesc:
    return FunctionDesc(n_inputs, ((XOR, i, j),), (n_inputs,))


def identity_map(n_inputs: int) -> FunctionDesc:
    return FunctionDesc(n_inputs, (), tuple(range(n_inputs)))


def small_family(n_inputs: int = 4) -> tuple[FunctionDesc, ...]:
    """Eight distinct single-output circuits on ``n_inputs`` bits."""
    return (
        constant(0, n_inputs),
        constant(1, n_inputs),
        parity(n_inputs),
        bit(0, n_inputs),
        bit(n_inputs - 1, n_inputs),
        negated_bit(1, n_inputs),
        and_bits(0, 1, n_inputs),
        xor_bits(1, 2, n_inputs),
    )
