"""Dense statevector simulation of coset states.

Amplitude index ``x`` is the integer form of a vector of F_2^n, so bit 0 of
the vector is the most significant qubit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Hashable, Sequence

import numpy as np

from . import ParameterError, ResourceError
from .gf2 import CosetTriple, dot

QUBIT_CAP = 14
TOL = 1e-9


@dataclass(frozen=True, eq=False)
class StateVector:
    n_qubits: int
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (1 << self.n_qubits,):
            raise ParameterError(
                f"expected {1 << self.n_qubits} amplitudes, got shape {amps.shape}"
            )
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > TOL:
            raise ParameterError(f"state is not normalized (norm {norm})")
        amps = amps.copy()
        amps.flags.writeable = False
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def basis(cls, n: int, x: int) -> "StateVector":
        amps = np.zeros(1 << n, dtype=complex)
        amps[x] = 1.0
        return cls(n, amps)

    def support(self, tol: float = 1e-12) -> np.ndarray:
        return np.flatnonzero(np.abs(self.amplitudes) > tol)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def fidelity(self, other: "StateVector") -> float:
        return float(abs(np.vdot(self.amplitudes, other.amplitudes)) ** 2)

    def allclose(self, other: "StateVector", tol: float = TOL) -> bool:
        return self.n_qubits == other.n_qubits and bool(
            np.max(np.abs(self.amplitudes - other.amplitudes), initial=0.0) <= tol
        )

    def to_json(self) -> list[list[float]]:
        return [[float(a.real), float(a.imag)] for a in self.amplitudes]


@dataclass(frozen=True)
class MeasurementRecord:
    outcome: Any
    probability: float
    post_state: Any


def _check_cap(n: int, cap: int) -> None:
    if n > cap:
        raise ResourceError(f"{n} qubits exceeds simulator cap of {cap}")


def prepare_coset_state(t: CosetTriple, cap: int = QUBIT_CAP) -> StateVector:
    """|A_{s,s'}> = sum_{a in A} (-1)^{<s',a>} |a + s> / sqrt|A|."""
    n = t.n
    _check_cap(n, cap)
    elems = t.space.elements()
    amps = np.zeros(1 << n, dtype=complex)
    scale = 1.0 / np.sqrt(len(elems))
    for a in elems:
        amps[a ^ t.s] = -scale if dot(t.s_prime, a) else scale
    return StateVector(n, amps)


def hadamard_all(psi: StateVector) -> StateVector:
    """Apply H on every qubit via the normalized fast Walsh-Hadamard transform."""
    n = psi.n_qubits
    a = np.array(psi.amplitudes, dtype=complex)
    h = 1
    while h < a.size:
        a = a.reshape(-1, 2, h)
        a = np.stack((a[:, 0] + a[:, 1], a[:, 0] - a[:, 1]), axis=1).reshape(-1)
        h *= 2
    return StateVector(n, a / np.sqrt(float(1 << n)))


def measure_computational(psi: StateVector, rng: np.random.Generator) -> MeasurementRecord:
    p = psi.probabilities()
    p = p / p.sum()
    x = int(rng.choice(p.size, p=p))
    return MeasurementRecord(x, float(p[x]), StateVector.basis(psi.n_qubits, x))


def coherent_apply_measure(
    psi: StateVector, f: Callable[[int], Hashable], rng: np.random.Generator
) -> MeasurementRecord:
    """Evaluate ``f`` into an output register and measure it.

    The post-state is psi restricted to ``f^{-1}(y)`` and renormalized. When
    ``f`` is constant on the support the input state is returned unchanged.
    """
    support = psi.support()
    probs = psi.probabilities()
    branches: dict[Hashable, list[int]] = {}
    for x in support:
        branches.setdefault(f(int(x)), []).append(int(x))
    outcome, prob, post = _pick_branch(branches, lambda xs: float(probs[xs].sum()), rng)
    if len(branches) == 1:
        return MeasurementRecord(outcome, 1.0, psi)
    amps = np.zeros_like(psi.amplitudes)
    amps[post] = psi.amplitudes[post]
    return MeasurementRecord(outcome, prob, StateVector(psi.n_qubits, amps / np.sqrt(prob)))


def _pick_branch(branches: dict, weight: Callable, rng: np.random.Generator):
    keys = list(branches)
    weights = np.array([weight(branches[k]) for k in keys])
    weights = weights / weights.sum()
    i = int(rng.choice(len(keys), p=weights)) if len(keys) > 1 else 0
    return keys[i], float(weights[i]), branches[keys[i]]


def coherent_apply_measure_product(
    states: Sequence[StateVector],
    f: Callable[[tuple[int, ...]], Hashable],
    rng: np.random.Generator,
    cap: int = QUBIT_CAP,
) -> MeasurementRecord:
    """Coherent evaluation of ``f`` on a product of registers, then measurement.

    Evaluation is branchwise over the joint support. If ``f`` is constant
    there, the registers are returned untouched as a tuple of states. Otherwise
    the post-state is in general entangled and is returned as a single joint
    :class:`StateVector` (register 0 most significant); this needs the total
    qubit count to fit under ``cap``.
    """
    supports = [s.support() for s in states]
    grids = np.meshgrid(*supports, indexing="ij")
    combos = np.stack([g.reshape(-1) for g in grids], axis=1)
    amp = np.ones(len(combos), dtype=complex)
    for k, s in enumerate(states):
        amp *= s.amplitudes[combos[:, k]]
    branches: dict[Hashable, list[int]] = {}
    for j, combo in enumerate(combos):
        branches.setdefault(f(tuple(int(x) for x in combo)), []).append(j)
    probs = np.abs(amp) ** 2
    outcome, prob, rows = _pick_branch(branches, lambda js: float(probs[js].sum()), rng)
    if len(branches) == 1:
        return MeasurementRecord(outcome, 1.0, tuple(states))
    total = sum(s.n_qubits for s in states)
    _check_cap(total, cap)
    joint = np.zeros(1 << total, dtype=complex)
    for j in rows:
        idx = 0
        for k, s in enumerate(states):
            idx = (idx << s.n_qubits) | int(combos[j, k])
        joint[idx] = amp[j]
    return MeasurementRecord(outcome, prob, StateVector(total, joint / np.sqrt(prob)))


def hadamard_registers(psi: StateVector, sizes: Sequence[int], mask: Sequence[bool]) -> StateVector:
    """Apply H on every qubit of the registers selected by ``mask``.

    ``psi`` is a joint state over registers of ``sizes`` qubits, register 0
    most significant.
    """
    if sum(sizes) != psi.n_qubits or len(sizes) != len(mask):
        raise ParameterError("register sizes do not match the state")
    a = np.array(psi.amplitudes, dtype=complex).reshape([1 << s for s in sizes])
    for axis, (size, on) in enumerate(zip(sizes, mask)):
        if not on:
            continue
        h = np.ones((1, 1))
        for _ in range(size):
            h = np.kron(h, np.array([[1, 1], [1, -1]]) / np.sqrt(2))
        a = np.moveaxis(np.tensordot(h, a, axes=([1], [axis])), 0, axis)
    return StateVector(psi.n_qubits, a.reshape(-1))
