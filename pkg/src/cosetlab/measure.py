"""Projective, approximate-projective and threshold implementations.

All states are dense density matrices of dimension at most 64. A mixture of
binary projective measurements ``{P_i}`` with weights ``D(i)`` induces the
POVM element ``E = sum_i D(i) P_i``; its projective implementation PI(E) is
the eigen-decomposition of ``E`` with eigenvalues as outcomes.

The approximate implementation API is the alternating-projector estimator on
the extended space ``C^I (x) H``: starting from ``|D> (x) rho`` with
``|D> = sum_i sqrt(D(i)) |i>``, measure ``Pi_acc = sum_i |i><i| (x) P_i`` and
``Pi_D = |D><D| (x) I`` alternately for ``2T`` transitions, report the fraction
of transitions whose outcome bit did not change, then keep alternating until
``Pi_D`` accepts again so the control register can be discarded.

Within each eigenspace of ``E`` (eigenvalue ``p``) the two projectors act on
a two-dimensional Jordan block where every transition keeps its bit with
probability ``p``, independently of the history. :func:`api` samples that
process exactly without building the extended space: it draws a latent
eigenvalue, the transition counts, and applies the induced Kraus operator
``sum_p sqrt(p)^S sqrt(1-p)^D Pi_p`` to ``rho``. :func:`api_dense` runs the
literal alternating projections on the extended space and is kept as an
independent cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import reduce
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import stats

from . import ParameterError, ResourceError, SamplingError

HERM_TOL = 1e-9
PROJ_TOL = 1e-8
CLUSTER_TOL = 1e-7
MAX_DIM = 64
API_CAP = 4096


# ---------------------------------------------------------------------------
# types


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ParameterError("density matrix must be square")
        if m.shape[0] > MAX_DIM * MAX_DIM:
            raise ResourceError(f"dimension {m.shape[0]} too large")
        if np.max(np.abs(m - m.conj().T), initial=0.0) > HERM_TOL:
            raise ParameterError("density matrix is not Hermitian")
        if abs(np.trace(m).real - 1.0) > HERM_TOL:
            raise ParameterError(f"density matrix trace {np.trace(m).real} != 1")
        if np.linalg.eigvalsh(m).min() < -HERM_TOL:
            raise ParameterError("density matrix is not positive semidefinite")
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def pure(cls, psi) -> "DensityMatrix":
        v = np.asarray(psi, dtype=complex)
        v = v / np.linalg.norm(v)
        return cls(np.outer(v, v.conj()))


def _rho(rho) -> np.ndarray:
    return rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)


def _hermitize(m: np.ndarray) -> np.ndarray:
    return (m + m.conj().T) / 2


@dataclass(frozen=True, eq=False)
class BinaryPOVM:
    e1: np.ndarray = field(repr=False)

    def __post_init__(self):
        e = np.array(self.e1, dtype=complex)
        if e.ndim != 2 or e.shape[0] != e.shape[1]:
            raise ParameterError("POVM element must be square")
        if np.max(np.abs(e - e.conj().T), initial=0.0) > HERM_TOL:
            raise ParameterError("POVM element is not Hermitian")
        w = np.linalg.eigvalsh(_hermitize(e))
        if w.min() < -PROJ_TOL or w.max() > 1 + PROJ_TOL:
            raise ParameterError("POVM element must satisfy 0 <= E <= I")
        object.__setattr__(self, "e1", e)

    @property
    def dim(self) -> int:
        return self.e1.shape[0]


@dataclass(frozen=True, eq=False)
class ProjectiveMixture:
    """Binary projective measurements ``P_i`` sampled with weights ``D(i)``."""

    projectors: tuple
    weights: tuple

    def __post_init__(self):
        projs = tuple(np.asarray(p, dtype=complex) for p in self.projectors)
        w = np.asarray(self.weights, dtype=float)
        if not projs or len(projs) != len(w):
            raise ParameterError("need one weight per projector")
        dim = projs[0].shape[0]
        for p in projs:
            if p.shape != (dim, dim):
                raise ParameterError("projector dimensions disagree")
            if np.max(np.abs(p @ p - p)) > PROJ_TOL or np.max(np.abs(p - p.conj().T)) > PROJ_TOL:
                raise ParameterError("mixture element is not an orthogonal projector")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise ParameterError("weights must form a probability distribution")
        object.__setattr__(self, "projectors", projs)
        object.__setattr__(self, "weights", tuple(float(x) for x in w))

    @property
    def dim(self) -> int:
        return self.projectors[0].shape[0]


@dataclass(frozen=True, eq=False)
class PiMeasurement:
    """Projective measurement with real outcomes ``values[k]`` on ``projectors[k]``."""

    values: tuple
    projectors: tuple

    @property
    def dim(self) -> int:
        return self.projectors[0].shape[0]

    def probabilities(self, rho) -> np.ndarray:
        r = _rho(rho)
        p = np.array([np.trace(P @ r).real for P in self.projectors])
        return np.clip(p, 0.0, None)

    def distribution(self, rho) -> dict[float, float]:
        return {v: float(p) for v, p in zip(self.values, self.probabilities(rho))}

    def lift(self, dims: Sequence[int], register: int) -> "PiMeasurement":
        """The same measurement acting on one register of a multipartite space."""
        if dims[register] != self.dim:
            raise ParameterError("register dimension does not match measurement")
        left = int(np.prod(dims[:register], dtype=int))
        right = int(np.prod(dims[register + 1:], dtype=int))
        projs = tuple(np.kron(np.kron(np.eye(left), P), np.eye(right)) for P in self.projectors)
        return PiMeasurement(self.values, projs)


@dataclass(frozen=True)
class MeasureParams:
    epsilon: float
    delta: float
    eta: float = 0.5

    def __post_init__(self):
        if not (0 < self.epsilon <= 1 and 0 < self.delta <= 1):
            raise ParameterError("need 0 < epsilon, delta <= 1")
        if not 0 <= self.eta <= 1:
            raise ParameterError("threshold eta must lie in [0, 1]")

    @property
    def rounds(self) -> int:
        return api_rounds(self.epsilon, self.delta)


def api_rounds(epsilon: float, delta: float) -> int:
    """Alternation rounds T; 2T transitions make each estimate eps/2-accurate w.p. 1-delta/2."""
    return math.ceil(math.log(4.0 / delta) / epsilon**2)


# ---------------------------------------------------------------------------
# exact projective implementation


def mixture_to_povm(m: ProjectiveMixture) -> BinaryPOVM:
    e1 = sum(w * P for w, P in zip(m.weights, m.projectors))
    return BinaryPOVM(_hermitize(e1))


def pi(e: BinaryPOVM | ProjectiveMixture, tol: float = CLUSTER_TOL) -> PiMeasurement:
    """Eigen-decomposition of E_1 with eigenvalues clustered at ``tol``."""
    if isinstance(e, ProjectiveMixture):
        e = mixture_to_povm(e)
    w, v = np.linalg.eigh(_hermitize(e.e1))
    groups: list[list[int]] = []
    for k in range(len(w)):
        if groups and w[k] - w[groups[-1][-1]] <= tol:
            groups[-1].append(k)
        else:
            groups.append([k])
    values, projs = [], []
    for g in groups:
        vecs = v[:, g]
        values.append(float(np.clip(np.mean(w[g]), 0.0, 1.0)))
        projs.append(vecs @ vecs.conj().T)
    return PiMeasurement(tuple(values), tuple(projs))


def _collapse(P: np.ndarray, r: np.ndarray) -> tuple[np.ndarray, float]:
    post = P @ r @ P
    prob = float(np.trace(post).real)
    return _hermitize(post / prob), prob


def apply_projective(m: PiMeasurement, rho, rng: np.random.Generator, outcome: float | None = None):
    """Measure ``m``; returns ``(value, post DensityMatrix, probability)``.

    With ``outcome`` given, that branch is forced (post-selection); a branch
    of zero probability raises :class:`SamplingError`.
    """
    r = _rho(rho)
    probs = m.probabilities(r)
    if outcome is None:
        k = int(rng.choice(len(probs), p=probs / probs.sum()))
    else:
        matches = [k for k, v in enumerate(m.values) if abs(v - outcome) <= CLUSTER_TOL]
        if not matches:
            raise SamplingError(f"{outcome} is not an outcome of this measurement")
        k = matches[0]
    if probs[k] <= 1e-15:
        raise SamplingError(f"outcome {m.values[k]} has zero probability")
    post, prob = _collapse(m.projectors[k], r)
    return m.values[k], DensityMatrix(post), prob


def expected_accept(m: PiMeasurement, rho) -> float:
    """Accept probability of "apply PI, then output 1 w.p. p"."""
    return float(np.dot(m.values, m.probabilities(rho)))


# ---------------------------------------------------------------------------
# approximate projective implementation


@dataclass(frozen=True)
class ApiRecord:
    estimate: float
    same_main: int
    diff_main: int
    same_repair: int
    diff_repair: int


def _kraus_weights(values: np.ndarray, same: int, diff: int) -> np.ndarray:
    with np.errstate(divide="ignore"):
        logp = np.where(values > 0, np.log(np.maximum(values, 1e-300)), -np.inf)
        logq = np.where(values < 1, np.log(np.maximum(1 - values, 1e-300)), -np.inf)
    lw = np.zeros_like(values)
    if same:
        lw = lw + 0.5 * same * logp
    if diff:
        lw = lw + 0.5 * diff * logq
    finite = np.isfinite(lw)
    out = np.zeros_like(values)
    if finite.any():
        out[finite] = np.exp(lw[finite] - lw[finite].max())
    return out


def _sample_api_record(p: float, rounds: int, rng: np.random.Generator) -> ApiRecord:
    transitions = 2 * rounds
    same = int(rng.binomial(transitions, p))
    diff = transitions - same
    s_rep = d_rep = 0
    if diff % 2:
        q = 2 * p * (1 - p)
        r = int(rng.geometric(q))
        stay = r - 1
        twice = int(rng.binomial(stay, (1 - p) ** 2 / ((1 - p) ** 2 + p**2))) if stay else 0
        s_rep = 2 * (stay - twice) + 1
        d_rep = 2 * twice + 1
    return ApiRecord(same / transitions, same, diff, s_rep, d_rep)


def _as_pi(m) -> PiMeasurement:
    if isinstance(m, PiMeasurement):
        return m
    if isinstance(m, ProjectiveMixture):
        return pi(m)
    return pi(m)


def api(
    m: ProjectiveMixture | PiMeasurement,
    params: MeasureParams,
    rho,
    rng: np.random.Generator,
    *,
    dims: Sequence[int] | None = None,
    register: int = 0,
    cap: int = API_CAP,
    detail: bool = False,
):
    """Approximate projective implementation; returns ``(estimate, post)``.

    ``dims``/``register`` apply the measurement to one register of a
    multipartite ``rho``. With ``detail=True`` an :class:`ApiRecord` is
    appended to the result.
    """
    if isinstance(m, ProjectiveMixture) and len(m.weights) * m.dim > cap:
        raise ResourceError(
            f"extended dimension {len(m.weights) * m.dim} exceeds cap {cap}"
        )
    pim = _as_pi(m)
    if dims is not None:
        pim = pim.lift(dims, register)
    r = _rho(rho)
    probs = pim.probabilities(r)
    k = int(rng.choice(len(probs), p=probs / probs.sum()))
    rec = _sample_api_record(pim.values[k], params.rounds, rng)
    weights = _kraus_weights(
        np.array(pim.values), rec.same_main + rec.same_repair, rec.diff_main + rec.diff_repair
    )
    kraus = sum(w * P for w, P in zip(weights, pim.projectors) if w)
    post, _ = _collapse(kraus, r)
    out = (rec.estimate, DensityMatrix(post))
    return out + (rec,) if detail else out


def api_dense(
    m: ProjectiveMixture,
    rounds: int,
    rho,
    rng: np.random.Generator,
    max_repair: int = 100_000,
):
    """Literal alternating measurement on the extended space.

    Returns ``(estimate, post DensityMatrix, ApiRecord)``. Slow; used to
    cross-check :func:`api`.
    """
    dim = m.dim
    n_idx = len(m.weights)
    ctrl = np.sqrt(np.array(m.weights))
    pi_d = np.kron(np.outer(ctrl, ctrl), np.eye(dim))
    pi_acc = sum(
        np.kron(np.diag(np.eye(n_idx)[i]), m.projectors[i]) for i in range(n_idx)
    )
    ident = np.eye(n_idx * dim)
    state = np.kron(np.outer(ctrl, ctrl), _rho(rho))

    def measure(P, st):
        p1 = float(np.trace(P @ st).real)
        bit = int(rng.random() < p1)
        Q = P if bit else ident - P
        nxt = Q @ st @ Q
        return bit, nxt / np.trace(nxt).real

    prev = 1
    same = diff = 0
    for t in range(2 * rounds):
        bit, state = measure(pi_acc if t % 2 == 0 else pi_d, state)
        same += bit == prev
        diff += bit != prev
        prev = bit
    s_rep = d_rep = 0
    steps = 0
    while prev == 0:
        for P in (pi_acc, pi_d):
            bit, state = measure(P, state)
            s_rep += bit == prev
            d_rep += bit != prev
            prev = bit
        steps += 1
        if steps > max_repair:
            raise ResourceError("repair phase did not terminate")
    sys = state.reshape(n_idx, dim, n_idx, dim).trace(axis1=0, axis2=2)
    rec = ApiRecord(same / (2 * rounds), same, diff, s_rep, d_rep)
    return rec.estimate, DensityMatrix(_hermitize(sys)), rec


# ---------------------------------------------------------------------------
# thresholds


def threshold(kind: str, m, params: MeasureParams, rho, rng: np.random.Generator, **kw):
    """TI (``kind="exact"``) or ATI (``"approximate"``); returns ``(bit, post)``."""
    if kind == "exact":
        pim = _as_pi(m)
        if kw.get("dims") is not None:
            pim = pim.lift(kw["dims"], kw.get("register", 0))
        r = _rho(rho)
        P = sum(P for v, P in zip(pim.values, pim.projectors) if v >= params.eta - 1e-12)
        if isinstance(P, int):
            P = np.zeros_like(r)
        p1 = float(np.clip(np.trace(P @ r).real, 0.0, 1.0))
        bit = int(rng.random() < p1)
        Q = P if bit else np.eye(r.shape[0]) - P
        post, _ = _collapse(Q, r)
        return bit, DensityMatrix(post)
    if kind == "approximate":
        est, post = api(m, params, rho, rng, **kw)
        return int(est >= params.eta - 1e-12), post
    raise ParameterError(f"unknown threshold kind {kind!r}")


def ti_accept_probability(m, eta: float, rho) -> float:
    pim = _as_pi(m)
    probs = pim.probabilities(rho)
    return float(sum(p for v, p in zip(pim.values, probs) if v >= eta - 1e-12))


def estimate_tail(p: float, rounds: int, eta: float) -> float:
    """Pr[API estimate >= eta] for an eigenvector with eigenvalue ``p``."""
    t = 2 * rounds
    k = math.ceil(eta * t - 1e-9)
    if k <= 0:
        return 1.0
    if k > t:
        return 0.0
    return float(stats.binom.sf(k - 1, t, p))


def ati_accept_probability(m, params: MeasureParams, eta: float, rho) -> float:
    """Closed-form acceptance probability of ATI at threshold ``eta``."""
    pim = _as_pi(m)
    probs = pim.probabilities(rho)
    return float(sum(p * estimate_tail(v, params.rounds, eta) for v, p in zip(pim.values, probs)))


# ---------------------------------------------------------------------------
# shift distance


def _as_distribution(d) -> dict[float, float]:
    if isinstance(d, Mapping):
        total = float(sum(d.values()))
        return {float(k): float(v) / total for k, v in d.items() if v > 0}
    values, counts = np.unique(np.asarray(list(d), dtype=float), return_counts=True)
    return {float(v): float(c) / counts.sum() for v, c in zip(values, counts)}


def shift_distance(d0, d1, epsilon: float, tol: float = 1e-12) -> float:
    """Smallest delta with Pr_{D0}[a <= x] <= Pr_{D1}[a <= x + eps] + delta for all x >= 0.

    Distributions are mappings value -> probability or iterables of samples.
    Between support points of D0 the left side is constant while the right
    side can only grow, so checking ``x = 0`` and the D0 support suffices.
    """
    p0, p1 = _as_distribution(d0), _as_distribution(d1)
    v1 = np.array(sorted(p1))
    c1 = np.cumsum([p1[v] for v in v1])

    def cdf1(x):
        i = np.searchsorted(v1, x + tol, side="right")
        return float(c1[i - 1]) if i else 0.0

    worst = 0.0
    acc = 0.0
    points = sorted(p0)
    for x in [0.0] + points:
        acc = sum(p0[v] for v in points if v <= x + tol)
        worst = max(worst, acc - cdf1(x + epsilon))
    return max(0.0, worst)


# ---------------------------------------------------------------------------
# random instances


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_density(dim: int, rng: np.random.Generator, rank: int | None = None) -> DensityMatrix:
    rank = dim if rank is None else rank
    g = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    m = g @ g.conj().T
    return DensityMatrix(_hermitize(m / np.trace(m).real))


def random_projector(dim: int, rank: int, rng: np.random.Generator, basis=None) -> np.ndarray:
    u = random_unitary(dim, rng) if basis is None else basis
    cols = rng.permutation(dim)[:rank]
    v = u[:, cols]
    return v @ v.conj().T


def random_mixture(dim: int, size: int, rng: np.random.Generator) -> ProjectiveMixture:
    projs = [random_projector(dim, int(rng.integers(0, dim + 1)), rng) for _ in range(size)]
    w = rng.dirichlet(np.ones(size))
    return ProjectiveMixture(tuple(projs), tuple(w))


def diagonal_mixture(dim: int, size: int, rng: np.random.Generator) -> ProjectiveMixture:
    projs = [np.diag(rng.integers(0, 2, dim).astype(float)) for _ in range(size)]
    w = rng.dirichlet(np.ones(size))
    return ProjectiveMixture(tuple(projs), tuple(w))


def trace_distance(a, b) -> float:
    return float(0.5 * np.abs(np.linalg.eigvalsh(_hermitize(_rho(a) - _rho(b)))).sum())


def partial_trace_first(rho: np.ndarray, d1: int, d2: int) -> np.ndarray:
    return rho.reshape(d1, d2, d1, d2).trace(axis1=0, axis2=2)


def random_kraus(d: int, outcomes: int, rng: np.random.Generator) -> list[np.ndarray]:
    """General measurement with ``outcomes`` Kraus operators from a random isometry."""
    u = random_unitary(d * outcomes, rng)[:, :d]
    return [u[i * d:(i + 1) * d, :] for i in range(outcomes)]
