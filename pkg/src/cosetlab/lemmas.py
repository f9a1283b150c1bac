"""Numerical re-verification of the measurement lemmas on random instances.

Each check returns a *slack*: the amount by which the inequality holds
(negative means violated). The multi-register API/ATI statements are
evaluated in closed form: the API outcome statistics on an eigenvector with
eigenvalue ``q`` are Binomial(2T, q)/2T, and the API Kraus operators commute
with the PI projectors, so every probability in those statements is a
finite sum over joint eigenvalue vectors.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np
from scipy import stats

from . import ParameterError
from . import measure as ml
from .rng import substream

SLACK_FLOOR = -1e-7


@dataclass(frozen=True)
class LemmaResult:
    lemma_id: str
    instances: int
    worst_slack: float
    passed: bool

    def to_json(self) -> dict:
        d = asdict(self)
        d["pass"] = d.pop("passed")
        return d


@dataclass(frozen=True)
class LemmaReport:
    results: tuple

    @property
    def all_pass(self) -> bool:
        return all(r.passed for r in self.results)

    def to_json(self) -> list[dict]:
        return [r.to_json() for r in self.results]

    def __getitem__(self, lemma_id: str) -> LemmaResult:
        for r in self.results:
            if r.lemma_id == lemma_id:
                return r
        raise KeyError(lemma_id)


# ---------------------------------------------------------------------------
# single-instance checks


def check_union_bound(dim: int, rng: np.random.Generator) -> float:
    k = int(rng.integers(2, 4))
    u = ml.random_unitary(dim, rng)
    projs = [ml.random_projector(dim, int(rng.integers(0, dim + 1)), rng, basis=u) for _ in range(k)]
    rho = ml.random_density(dim, rng, rank=int(rng.integers(1, dim + 1))).matrix
    prod = np.linalg.multi_dot(projs) if k > 2 else projs[0] @ projs[1]
    lhs = np.trace((np.eye(dim) - prod) @ rho).real
    rhs = sum(np.trace((np.eye(dim) - P) @ rho).real for P in projs)
    return float(rhs - lhs)


def _random_effect(dim: int, rng: np.random.Generator) -> np.ndarray:
    u = ml.random_unitary(dim, rng)
    w = rng.uniform(0, 1, dim)
    w[rng.integers(0, dim)] = 1.0
    return (u * w) @ u.conj().T


def check_gentle_measurement(dim: int, rng: np.random.Generator) -> float:
    e = _random_effect(dim, rng)
    w, v = np.linalg.eigh(e)
    # bias rho towards the top of E so that small-epsilon cases are covered
    top = v[:, -1]
    mix = rng.uniform(0, 1)
    rho = mix * np.outer(top, top.conj()) + (1 - mix) * ml.random_density(dim, rng).matrix
    accept = np.trace(e @ rho).real
    eps = max(0.0, 1.0 - accept)
    root = (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T
    post = root @ rho @ root / accept
    return float(math.sqrt(eps) - ml.trace_distance(rho, post))


def check_implementation_independence(dim: int, rng: np.random.Generator) -> float:
    d1, d2 = dim, max(2, dim // 2)
    outcomes = int(rng.integers(2, 4))
    rho = ml.random_density(d1 * d2, rng).matrix
    ms = ml.random_kraus(d1, outcomes, rng)
    es = [ml.random_unitary(d1, rng) @ m for m in ms]
    worst = 0.0
    for m, e in zip(ms, es):
        a = np.kron(m, np.eye(d2))
        b = np.kron(e, np.eye(d2))
        ra, rb = a @ rho @ a.conj().T, b @ rho @ b.conj().T
        ta = ml.partial_trace_first(ra, d1, d2) / np.trace(ra).real
        tb = ml.partial_trace_first(rb, d1, d2) / np.trace(rb).real
        worst = max(worst, float(np.max(np.abs(ta - tb))))
    return -worst


def check_simultaneous_projection(dim: int, rng: np.random.Generator) -> float:
    d1, d2 = dim, max(2, dim // 2)
    p1 = ml.random_projector(d1, int(rng.integers(1, d1 + 1)), rng)
    p2 = ml.random_projector(d2, int(rng.integers(1, d2 + 1)), rng)
    joint = np.kron(p1, p2)
    good = joint @ ml.random_density(d1 * d2, rng).matrix @ joint
    good = good / np.trace(good).real
    t = rng.uniform(0, 1) ** 2
    rho = (1 - t) * good + t * ml.random_density(d1 * d2, rng).matrix
    eps = max(0.0, 1.0 - np.trace(joint @ rho).real)
    worst = math.inf
    for m in ml.random_kraus(d1, int(rng.integers(2, 4)), rng):
        a = np.kron(m, np.eye(d2))
        post = a @ rho @ a.conj().T
        prob = np.trace(post).real
        if prob < 1e-9:
            continue
        tau = ml.partial_trace_first(post, d1, d2) / prob
        slack = np.trace(p2 @ tau).real - (1 - math.sqrt(eps) / prob)
        worst = min(worst, float(slack))
    return worst


# ---------------------------------------------------------------------------
# multi-register API / ATI in closed form


def _joint_eigen_weights(pims, dims, rho) -> dict[tuple, float]:
    """Tr[(Pi_q1 x ... x Pi_qk) rho] for every joint eigenvalue vector."""
    lifted = [p.lift(dims, k) for k, p in enumerate(pims)]
    out = {}
    for combo in itertools.product(*[range(len(p.values)) for p in pims]):
        proj = lifted[0].projectors[combo[0]]
        for k in range(1, len(pims)):
            proj = proj @ lifted[k].projectors[combo[k]]
        w = float(np.trace(proj @ rho).real)
        if w > 1e-15:
            out[tuple(pims[k].values[c] for k, c in enumerate(combo))] = w
    return out


def _binom_pmf(q: float, rounds: int) -> np.ndarray:
    return stats.binom.pmf(np.arange(2 * rounds + 1), 2 * rounds, q)


def _random_multi(dim: int, rng: np.random.Generator):
    k = int(rng.integers(1, 4))
    local = max(2, min(dim, int(round(64 ** (1 / k)))))
    while local**k > 64:
        local -= 1
    dims = (local,) * k
    pims = [ml.pi(ml.random_mixture(local, int(rng.integers(1, 4)), rng)) for _ in range(k)]
    rho = ml.random_density(local**k, rng, rank=int(rng.integers(1, 4))).matrix
    params = ml.MeasureParams(float(rng.choice([0.1, 0.2, 0.3])), float(rng.choice([0.05, 0.1, 0.2])))
    etas = rng.uniform(0, 1, k)
    return k, dims, pims, rho, params, etas


def check_multi_api_post(dim: int, rng: np.random.Generator) -> float:
    """Pr[all p'_l <= p_l + 2eps] and Pr[all p'_l >= p_l - 2eps] are >= 1 - 2k delta."""
    k, dims, pims, rho, params, _ = _random_multi(dim, rng)
    rounds, eps = params.rounds, params.epsilon
    est = np.arange(2 * rounds + 1) / (2 * rounds)
    upper = lower = 0.0
    for qs, w in _joint_eigen_weights(pims, dims, rho).items():
        up, lo = w, w
        for q in qs:
            pmf = _binom_pmf(q, rounds)
            up *= pmf[q <= est + 2 * eps + 1e-12].sum()
            lo *= pmf[q >= est - 2 * eps - 1e-12].sum()
        upper += up
        lower += lo
    bound = 1 - 2 * k * params.delta
    return float(min(upper - bound, lower - bound))


def check_multi_api_small(dim: int, rng: np.random.Generator) -> float:
    k, dims, pims, rho, params, etas = _random_multi(dim, rng)
    rounds, eps = params.rounds, params.epsilon
    est = np.arange(2 * rounds + 1) / (2 * rounds)
    p_api = p_api_shift = p_pi = p_pi_shift = 0.0
    for qs, w in _joint_eigen_weights(pims, dims, rho).items():
        a, a_shift = w, w
        for q, eta in zip(qs, etas):
            pmf = _binom_pmf(q, rounds)
            a *= pmf[est <= eta + 1e-12].sum()
            a_shift *= pmf[est <= eta + eps + 1e-12].sum()
        p_api += a
        p_api_shift += a_shift
        p_pi += w * all(q <= eta + 1e-12 for q, eta in zip(qs, etas))
        p_pi_shift += w * all(q <= eta + eps + 1e-12 for q, eta in zip(qs, etas))
    kd = k * params.delta
    return float(min(p_pi_shift - (p_api - kd), p_api_shift - (p_pi - kd)))


def check_multi_ati(dim: int, rng: np.random.Generator) -> float:
    """The four multi-register threshold bullets, worst slack over them."""
    k, dims, pims, rho, params, etas = _random_multi(dim, rng)
    rounds, eps, kd = params.rounds, params.epsilon, k * params.delta
    weights = _joint_eigen_weights(pims, dims, rho)

    def tail(q, eta):
        return ml.estimate_tail(q, rounds, eta)

    def ati(ws, shift):
        return sum(w * np.prod([tail(q, e - shift) for q, e in zip(qs, etas)]) for qs, w in ws.items())

    def ti(ws, shift):
        return sum(w * all(q >= e - shift - 1e-12 for q, e in zip(qs, etas)) for qs, w in ws.items())

    slacks = [ati(weights, eps) - (ti(weights, 0) - kd), ti(weights, eps) - (ati(weights, 0) - kd)]
    accept = ati(weights, 0)
    if accept > 1e-12:
        post = {
            qs: w * np.prod([tail(q, e) for q, e in zip(qs, etas)]) / accept
            for qs, w in weights.items()
        }
        slacks.append(ti(post, 2 * eps) - (1 - 2 * kd))
        slacks.append(ati(post, 3 * eps) - (1 - 3 * kd))
    return float(min(slacks))


def check_ti_sandwich(dim: int, rng: np.random.Generator) -> float:
    m = ml.random_mixture(dim, int(rng.integers(1, 5)), rng)
    rho = ml.random_density(dim, rng, rank=int(rng.integers(1, dim + 1)))
    params = ml.MeasureParams(0.05, 0.05)
    eta = float(rng.uniform(0, 1))
    pim = ml.pi(m)
    lower = ml.ati_accept_probability(pim, params, eta - params.epsilon, rho) - (
        ml.ti_accept_probability(pim, eta, rho) - params.delta
    )
    upper = ml.ti_accept_probability(pim, eta - params.epsilon, rho) - (
        ml.ati_accept_probability(pim, params, eta, rho) - params.delta
    )
    return float(min(lower, upper))


CHECKS: dict[str, Callable[[int, np.random.Generator], float]] = {
    "quantum_union_bound": check_union_bound,
    "gentle_measurement": check_gentle_measurement,
    "implementation_independence": check_implementation_independence,
    "simultaneous_projection": check_simultaneous_projection,
    "threshold_sandwich": check_ti_sandwich,
    "multi_api_post_measurement": check_multi_api_post,
    "multi_api_initial_state": check_multi_api_small,
    "multi_threshold": check_multi_ati,
}


def run_lemma(lemma_id: str, seed: int, dims: int, trials: int) -> LemmaResult:
    check = CHECKS[lemma_id]
    worst = math.inf
    for t in range(trials):
        worst = min(worst, check(dims, substream(seed, "lemma", lemma_id, t)))
    return LemmaResult(lemma_id, trials, float(worst), bool(worst >= SLACK_FLOOR))


def lemma_suite(seed: int, dims: int = 4, trials: int = 200, lemmas=None) -> LemmaReport:
    """Run every lemma check on ``trials`` random instances of dimension ``dims``."""
    if not 2 <= dims <= 8:
        raise ParameterError("lemma dimensions must lie in [2, 8]")
    ids = list(CHECKS) if lemmas is None else list(lemmas)
    return LemmaReport(tuple(run_lemma(i, seed, dims, trials) for i in ids))
