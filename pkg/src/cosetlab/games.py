"""Security games with pluggable adversaries.

Games:

* ``run_moe`` plays the monogamy-of-entanglement game in three variants:
  ``single`` (one coset, challenges fixed to 0 and 1), ``multi`` (``c``
  cosets, independent uniform challenges) and ``coll`` (pseudorandom coset
  tuples indexed by identities, with query phases and the rule that the
  attacked identity may have been queried at most once).
* ``run_antipiracy`` plays the regular anti-piracy game for CP-PKE and CP-FE.
* ``decryptor_test`` builds the decryptor-testing measurement for a
  freeloader register over a finite strategy space and hands it to the
  measurement lab.

Adversaries are plain strategy objects. Every trial draws from its own named
sub-stream, so a single trial can be replayed from ``(seed, game, index)``.
Each trial leaves a JSON trace from which the verdict can be recomputed by
:func:`check_trace`.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np
from scipy import stats

from . import ParameterError, ResourceError
from . import circuits
from . import copy_protect as cp
from . import measure as ml
from .circuits import FunctionDesc
from .gf2 import CosetParams, CosetTriple, canonical, coset_gen, dual
from .ibe_fe import ibe_keygen
from .obf import pmem_input, run, unwrap
from .pke import TOP
from .pprf import prf_keygen
from .rng import RandomStream, random_bytes, substream
from .statevec import hadamard_all, measure_computational, prepare_coset_state

KINDS = ("HonestForwarder", "BasisGuesser", "TwoCopyCloner", "AllGuess", "OracleOmniscient", "Custom")
MOE_VARIANTS = ("single", "multi", "coll")
SCHEMES = ("cp-pke", "cp-fe")


class ProtocolViolation(Exception):
    """Raised by (or on behalf of) a strategy that breaks the game interface."""


@dataclass(frozen=True)
class AdversaryStrategy:
    """A named strategy. ``params`` are strategy knobs (``k``, ``cheat``, ``on_mismatch``, ...)."""

    kind: str
    params: dict = field(default_factory=dict, hash=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown strategy {self.kind!r}; expected one of {KINDS}")

    def get(self, key, default=None):
        return self.params.get(key, default)

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "params": {k: v for k, v in sorted(self.params.items()) if not callable(v)},
        }


@dataclass
class GameReport:
    game_id: str
    trials: int
    wins: int
    voided: int = 0
    per_trial_traces: list | None = None
    params: dict = field(default_factory=dict)

    @property
    def valid(self) -> int:
        return self.trials - self.voided

    @property
    def win_rate(self) -> float:
        return self.wins / self.valid if self.valid else float("nan")

    @property
    def ci95(self) -> tuple[float, float]:
        return exact_ci(self.wins, self.valid)

    def contains(self, p: float) -> bool:
        lo, hi = self.ci95
        return lo <= p <= hi

    def merge(self, other: "GameReport") -> "GameReport":
        if other.game_id != self.game_id:
            raise ParameterError("cannot merge reports of different games")
        traces = None
        if self.per_trial_traces is not None or other.per_trial_traces is not None:
            traces = (self.per_trial_traces or []) + (other.per_trial_traces or [])
        return GameReport(
            self.game_id, self.trials + other.trials, self.wins + other.wins,
            self.voided + other.voided, traces, self.params,
        )

    def to_json(self) -> dict:
        lo, hi = self.ci95
        out = {
            "game_id": self.game_id,
            "params": self.params,
            "trials": self.trials,
            "voided": self.voided,
            "wins": self.wins,
            "win_rate": self.win_rate,
            "ci95": [lo, hi],
        }
        if self.per_trial_traces is not None:
            out["traces"] = self.per_trial_traces
        return out


def exact_ci(wins: int, n: int, level: float = 0.95) -> tuple[float, float]:
    """Clopper-Pearson interval."""
    if n == 0:
        return 0.0, 1.0
    ci = stats.binomtest(wins, n).proportion_ci(level, method="exact")
    return float(ci.low), float(ci.high)


def _seed_of(rng) -> int | bytes:
    if isinstance(rng, (int, np.integer)):
        return int(rng)
    if isinstance(rng, (bytes, bytearray)):
        return bytes(rng)
    if isinstance(rng, np.random.Generator):
        return bytes(rng.bytes(32))
    raise ParameterError("games need an integer seed or a numpy Generator")


def _bits(rng, c: int) -> int:
    return int(rng.integers(0, 1 << c))


def _bit(r: int, i: int, c: int) -> int:
    return (r >> (c - 1 - i)) & 1


def _measure(state, basis: int, rng) -> int:
    return measure_computational(hadamard_all(state) if basis else state, rng).outcome


def _honest_vector(t: CosetTriple, basis: int) -> int:
    return canonical(dual(t.space), t.s_prime) if basis else canonical(t.space, t.s)


def _check_vectors(triples, r: int, vectors) -> bool:
    c = len(triples)
    if vectors is None or len(vectors) != c:
        return False
    return all(v is not None and t.contains(_bit(r, i, c), v) for i, (t, v) in enumerate(zip(triples, vectors)))


def _hexlist(vs) -> list | None:
    return None if vs is None else [None if v is None else format(int(v), "x") for v in vs]


# ---------------------------------------------------------------------------
# monogamy of entanglement


@dataclass(frozen=True)
class MoeParams:
    n: int = 4
    d: int = 2
    c: int = 3
    id_bits: int = 32
    mode: str = "sealed"

    def __post_init__(self):
        CosetParams(self.n, self.d, self.c)


class _Party:
    """One half of a split MoE adversary: ``answer(r, spaces, query) -> vectors``."""

    def __init__(self, fn: Callable):
        self.fn = fn

    def answer(self, r, spaces, query):
        return self.fn(r, spaces, query)


def _measuring_party(states, n, rng, forced=None, on_mismatch="abstain"):
    """Measures every state in the basis its challenge bit asks for, or in ``forced``."""
    c = len(states)
    pre = None
    if forced is not None:
        pre = [_measure(s, _bit(forced, i, c), rng) for i, s in enumerate(states)]

    def fn(r, spaces, query):
        out = []
        for i, s in enumerate(states):
            want = _bit(r, i, c)
            if pre is None:
                out.append(_measure(s, want, rng))
            elif _bit(forced, i, c) == want:
                out.append(pre[i])
            elif on_mismatch == "random":
                out.append(int(rng.integers(0, 1 << n)))
            else:
                out.append(None)
        return out

    return _Party(fn)


def _guessing_party(c, n, rng):
    return _Party(lambda r, spaces, query: [int(rng.integers(0, 1 << n)) for _ in range(c)])


def _knowing_party(triples):
    c = len(triples)
    return _Party(lambda r, spaces, query: [_honest_vector(t, _bit(r, i, c)) for i, t in enumerate(triples)])


def _two_copy_parties(states_a, states_b, rng):
    primal = [_measure(s, 0, rng) for s in states_a]
    dual_v = [_measure(s, 1, rng) for s in states_b]
    c = len(primal)

    def fn(r, spaces, query):
        return [dual_v[i] if _bit(r, i, c) else primal[i] for i in range(c)]

    return _Party(fn), _Party(fn)


def _split_plain(strategy: AdversaryStrategy, view: dict, rng):
    """Strategies for the single and multi variants."""
    kind, states, n, c = strategy.kind, view["states"], view["n"], len(view["states"])
    if kind == "OracleOmniscient":
        return _knowing_party(view["triples"]), _knowing_party(view["triples"])
    if kind == "HonestForwarder":
        return _measuring_party(states, n, rng), _guessing_party(c, n, rng)
    if kind == "AllGuess":
        return _guessing_party(c, n, rng), _guessing_party(c, n, rng)
    if kind == "BasisGuesser":
        guess = _bits(rng, c)
        p = _measuring_party(states, n, rng, forced=guess, on_mismatch=strategy.get("on_mismatch", "abstain"))
        return p, p
    if kind == "TwoCopyCloner":
        if not strategy.get("cheat", False):
            raise ProtocolViolation("TwoCopyCloner needs the harness cheat mode to receive a second copy")
        return _two_copy_parties(states, view["second_copy"], rng)
    return _custom(strategy, view, rng)


def _custom(strategy, view, rng):
    fn = strategy.get("split")
    if not callable(fn):
        raise ParameterError("Custom strategies need a callable 'split' parameter")
    out = fn(view, rng)
    if not isinstance(out, (tuple, list)):
        raise ProtocolViolation("custom strategy returned a malformed split")
    return out


def _moe_plain_trial(variant, strategy, params: MoeParams, rng) -> dict:
    c = 1 if variant == "single" else params.c
    triples = coset_gen(CosetParams(params.n, params.d, c), RandomStream(random_bytes(rng, 32)))
    states = tuple(prepare_coset_state(t) for t in triples)
    view = {"states": states, "n": params.n, "variant": variant}
    if strategy.kind == "OracleOmniscient":
        view["triples"] = triples
    if strategy.get("cheat", False):
        view["second_copy"] = tuple(prepare_coset_state(t) for t in triples)
    p1, p2 = _split_plain(strategy, view, rng)
    if variant == "single":
        r1, r2 = 0, 1
    else:
        r1, r2 = _bits(rng, c), _bits(rng, c)
    spaces = tuple(t.space for t in triples)
    v1 = p1.answer(r1, spaces, None)
    v2 = p2.answer(r2, spaces, None)
    ok1, ok2 = _check_vectors(triples, r1, v1), _check_vectors(triples, r2, v2)
    return {
        "queries": [],
        "challenges": {"r1": format(r1, f"0{c}b"), "r2": format(r2, f"0{c}b")},
        "answers": {"v1": _hexlist(v1), "v2": _hexlist(v2)},
        "secrets": {"triples": [t.to_json() for t in triples]},
        "verdict": {"party1_ok": ok1, "party2_ok": ok2, "win": bool(ok1 and ok2)},
    }


class _CollChallenger:
    def __init__(self, params: MoeParams, rng):
        self.params = params
        self.k = prf_keygen(16, params.id_bits, cp.SEED_BITS, rng)
        cparams = cp.CpParams(params.n, params.d, params.c, params.id_bits, params.mode)
        self.cparams = cparams
        self.opmem = cp._pmem(self.k, cparams, params.id_bits)
        self.ids: list[int] = []
        self.phase2: list[tuple[int, int, bool]] = []
        self.target: int | None = None

    def triples(self, ident: int):
        return cp.cosets_for(self.k, ident, self.cparams)

    def _states(self, ident: int):
        if not 0 <= ident < (1 << self.params.id_bits):
            raise ProtocolViolation(f"identity {ident} outside the identity space")
        return tuple(prepare_coset_state(t) for t in self.triples(ident))

    def query1(self, ident: int):
        states = self._states(ident)
        self.ids.append(int(ident))
        return states

    def query2_for(self, party: int):
        def q(ident: int):
            refused = ident == self.target
            self.phase2.append((party, int(ident), refused))
            return None if refused else self._states(ident)

        return q

    def opmem_check(self, ident: int, vectors, r: int) -> bool:
        if vectors is None or any(v is None for v in vectors):
            return False
        p = self.params
        x = pmem_input(ident, vectors, r, p.id_bits, p.n, p.c)
        return unwrap(run(self.opmem, x)) == b"\x01"


def _split_coll(strategy, ch: _CollChallenger, rng):
    """Returns ``(id*, party1, party2)``."""
    p = ch.params
    kind = strategy.kind
    target = int(strategy.get("target", _bits(rng, p.id_bits)))
    if kind == "TwoCopyCloner":
        a = ch.query1(target)
        b = ch.query1(target)
        return (target, *_two_copy_parties(a, b, rng))
    if kind == "Custom":
        view = {"opmem": ch.opmem, "query": ch.query1, "params": p}
        out = _custom(strategy, view, rng)
        if len(out) != 3:
            raise ProtocolViolation("custom coll strategy must return (id*, party1, party2)")
        return out
    states = ch.query1(target)
    if kind == "OracleOmniscient":
        t = ch.triples(target)
        return target, _knowing_party(t), _knowing_party(t)
    if kind == "HonestForwarder":
        return target, _measuring_party(states, p.n, rng), _guessing_party(p.c, p.n, rng)
    if kind == "AllGuess":
        return target, _guessing_party(p.c, p.n, rng), _guessing_party(p.c, p.n, rng)
    guess = _bits(rng, p.c)
    party = _measuring_party(states, p.n, rng, forced=guess, on_mismatch=strategy.get("on_mismatch", "abstain"))
    return target, party, party


def _moe_coll_trial(strategy, params: MoeParams, rng) -> dict:
    ch = _CollChallenger(params, rng)
    target, p1, p2 = _split_coll(strategy, ch, rng)
    target = int(target)
    if not 0 <= target < (1 << params.id_bits):
        raise ProtocolViolation("id* outside the identity space")
    ch.target = target
    star = ch.triples(target)
    spaces = tuple(t.space for t in star)
    c = params.c
    r1, r2 = _bits(rng, c), _bits(rng, c)
    v1 = p1.answer(r1, spaces, ch.query2_for(1))
    v2 = p2.answer(r2, spaces, ch.query2_for(2))
    ok1, ok2 = _check_vectors(star, r1, v1), _check_vectors(star, r2, v2)
    # the obfuscated membership program must agree with the direct check
    if (ok1, ok2) != (ch.opmem_check(target, v1, r1), ch.opmem_check(target, v2, r2)):
        raise AssertionError("OPMem disagrees with the coset membership oracle")
    unique = ch.ids.count(target) <= 1
    return {
        "queries": {"phase1": ch.ids, "phase2": [list(q) for q in ch.phase2], "id_star": target},
        "challenges": {"r1": format(r1, f"0{c}b"), "r2": format(r2, f"0{c}b")},
        "answers": {"v1": _hexlist(v1), "v2": _hexlist(v2)},
        "secrets": {"triples": [t.to_json() for t in star]},
        "verdict": {
            "party1_ok": ok1,
            "party2_ok": ok2,
            "vectors_ok": bool(ok1 and ok2),
            "unique_id": unique,
            "win": bool(ok1 and ok2 and unique),
        },
    }


def _play(game_id, trial_fn, trials, rng, params_json, trace, start=0) -> GameReport:
    if trials < 1:
        raise ParameterError("trials must be at least 1")
    seed = _seed_of(rng)
    wins = voided = 0
    traces = [] if trace else None
    for t in range(start, start + trials):
        trng = substream(seed, game_id, "trial", t)
        try:
            rec = trial_fn(trng)
        except ProtocolViolation as exc:
            voided += 1
            rec = {"index": t, "voided": True, "reason": str(exc)}
        else:
            rec["index"] = t
            wins += bool(rec["verdict"]["win"])
        if traces is not None:
            traces.append(rec)
    return GameReport(game_id, trials, wins, voided, traces, params_json)


def run_moe(
    variant: str,
    adversary: AdversaryStrategy,
    params: MoeParams = MoeParams(),
    trials: int = 100,
    rng=0,
    *,
    trace: bool = False,
    start: int = 0,
) -> GameReport:
    if variant not in MOE_VARIANTS:
        raise ParameterError(f"unknown MoE variant {variant!r}")
    if variant == "coll":
        fn = lambda g: _moe_coll_trial(adversary, params, g)  # noqa: E731
    else:
        fn = lambda g: _moe_plain_trial(variant, adversary, params, g)  # noqa: E731
    pj = {"variant": variant, "adversary": adversary.to_json(), **_params_json(params)}
    return _play(f"moe-{variant}", fn, trials, rng, pj, trace, start)


def _params_json(params) -> dict:
    return {k: getattr(params, k) for k in params.__dataclass_fields__}


# ---------------------------------------------------------------------------
# anti-piracy


@dataclass(frozen=True)
class AntiPiracyParams:
    n: int = 4
    d: int = 2
    c: int = 3
    id_bits: int = 32
    q: int = 32
    msg_bits: int = 4
    mode: str = "sealed"
    noninteractive: bool = False

    @property
    def cp_params(self) -> cp.CpParams:
        return cp.CpParams(self.n, self.d, self.c, self.id_bits, self.mode)


class Freeloader:
    """A decryptor: ``guess(ct, ctx, rng) -> bit``."""

    label = "freeloader"

    def guess(self, ct, ctx, rng) -> int:
        raise NotImplementedError


class GuessFreeloader(Freeloader):
    label = "guess"

    def guess(self, ct, ctx, rng):
        return int(rng.integers(0, 2))


def _pick(out, m0, m1, rng) -> int:
    if out == m0 and out != m1:
        return 0
    if out == m1 and out != m0:
        return 1
    return int(rng.integers(0, 2))


class KeyFreeloader(Freeloader):
    """Decrypts with a quantum key and compares against the two messages."""

    label = "quantum-key"

    def __init__(self, key: cp.QuantumKey, pk, m0, m1, scheme: str):
        self.key, self.pk, self.m0, self.m1, self.scheme = key, pk, m0, m1, scheme

    def guess(self, ct, ctx, rng):
        if self.scheme == "cp-pke":
            out, self.key = cp.cp_pke_dec(self.key, ct, self.pk, rng)
            return _pick(out, self.m0, self.m1, rng)
        out, self.key = cp.cp_fe_dec(self.key, ct, self.pk, rng)
        f = circuits.decode(self.key.f)
        return _pick(out, f(self.m0), f(self.m1), rng)


class ClassicalFreeloader(Freeloader):
    """Decrypts with vectors from both bases of every coset (two-copy break)."""

    label = "classical-vectors"

    def __init__(self, mat: cp.ClassicalKeyMaterial, pk, m0, m1, scheme: str):
        self.mat, self.pk, self.m0, self.m1, self.scheme = mat, pk, m0, m1, scheme

    def guess(self, ct, ctx, rng):
        out = cp.classical_decrypt(self.mat, ct, self.pk.id_bits, self.pk.params.n)
        if self.scheme == "cp-pke":
            return _pick(out, self.m0, self.m1, rng)
        if out is None or out is TOP:
            return int(rng.integers(0, 2))
        f = circuits.decode(self.mat.f)
        return _pick(int.from_bytes(out, "big"), f(self.m0), f(self.m1), rng)


class BasisFreeloader(Freeloader):
    """Holds vectors measured in a guessed basis; decrypts when the challenge matches."""

    label = "basis-guess"

    def __init__(self, vectors, guess, key, pk, m0, m1, scheme):
        self.vectors, self.g, self.key, self.pk = vectors, guess, key, pk
        self.m0, self.m1, self.scheme = m0, m1, scheme

    def guess(self, ct, ctx, rng):
        if ct.r != self.g:
            return int(rng.integers(0, 2))
        mat = cp.ClassicalKeyMaterial(self.key.id, self.key.ck, tuple(self.vectors), tuple(self.vectors), self.key.f)
        return ClassicalFreeloader(mat, self.pk, self.m0, self.m1, self.scheme).guess(ct, ctx, rng)


class _FeContext:
    """Query Phase 2 access for one FE freeloader."""

    def __init__(self, game: "_AntiPiracyTrial", index: int):
        self.game, self.index = game, index
        self.functions: list[FunctionDesc] = []

    def query(self, f: FunctionDesc, qtype: str = "CLASSICAL"):
        if self.game.params.noninteractive:
            raise ProtocolViolation("query phase 2 is disabled in the non-interactive game")
        self.functions.append(f)
        return self.game.issue(f, qtype)

    @property
    def pmsk(self):
        return self.game.pmsk


class _AntiPiracyTrial:
    def __init__(self, scheme, params: AntiPiracyParams, rng):
        self.scheme, self.params, self.rng = scheme, params, rng
        self.protected: list[int] = []
        self.classical: list[FunctionDesc] = []
        self.log: list[dict] = []
        self.pmsk = None
        if scheme == "cp-pke":
            self.inst = cp.cp_pke_setup(params.cp_params, rng)
        else:
            self.inst = cp.cp_fe_setup(params.cp_params, params.q, rng)

    @property
    def pk(self):
        return self.inst.pk

    def qkeygen(self) -> cp.QuantumKey:
        if self.scheme != "cp-pke":
            raise ProtocolViolation("use issue(f, qtype) for CP-FE")
        key = cp.cp_pke_qkeygen(self.inst, self.rng)
        self.protected.append(key.id)
        self.log.append({"type": "PROTECTED", "id": key.id})
        return key

    def issue(self, f: FunctionDesc, qtype: str):
        if self.scheme != "cp-fe":
            raise ProtocolViolation("functional keys exist only for CP-FE")
        fk = cp.cp_fe_keygen(self.inst, f, self.rng)
        self.log.append({"type": qtype, "f": f.encode().hex(), "id": fk.id})
        if qtype == "CLASSICAL":
            self.classical.append(f)
            return fk
        if qtype == "PROTECTED":
            self.protected.append(fk.identity)
            return cp.cp_fe_qkeygen(fk)
        raise ProtocolViolation(f"unknown query type {qtype!r}")

    def msk(self):
        return self.inst


def _pke_pirate(strategy, game: _AntiPiracyTrial, rng):
    """Returns ``(freeloaders, message pairs)``."""
    kind = strategy.kind
    k = int(strategy.get("k", 1))
    pk = game.inst.pk
    m0, m1 = bytes.fromhex(strategy.get("m0", "00")), bytes.fromhex(strategy.get("m1", "01"))
    if kind == "Custom":
        out = _custom(strategy, {"pk": pk, "qkeygen": game.qkeygen, "params": game.params}, rng)
        if len(out) != 2:
            raise ProtocolViolation("custom pirate must return (freeloaders, messages)")
        return out
    if kind == "AllGuess":
        for _ in range(k):
            game.qkeygen()
        return [GuessFreeloader() for _ in range(k + 1)], [(m0, m1)] * (k + 1)
    if kind == "HonestForwarder":
        keys = [game.qkeygen() for _ in range(k)]
        fl = [KeyFreeloader(key, pk, m0, m1, "cp-pke") for key in keys] + [GuessFreeloader()]
        return fl, [(m0, m1)] * (k + 1)
    if kind == "OracleOmniscient":
        inst = game.msk()
        fl = [_omniscient_pke(inst, rng, m0, m1) for _ in range(k + 1)]
        for _ in range(k):
            game.qkeygen()
        return fl, [(m0, m1)] * (k + 1)
    key = game.qkeygen()
    if kind == "TwoCopyCloner":
        if not strategy.get("cheat", False):
            raise ProtocolViolation("TwoCopyCloner needs the harness cheat mode to duplicate a key")
        mat = cp.two_copy_extract(key, _duplicate(key), rng)
        return [ClassicalFreeloader(mat, pk, m0, m1, "cp-pke") for _ in range(2)], [(m0, m1)] * 2
    # BasisGuesser
    c = game.params.c
    g = _bits(rng, c)
    vecs = [_measure(s, _bit(g, i, c), rng) for i, s in enumerate(key.states)]
    return [BasisFreeloader(vecs, g, key, pk, m0, m1, "cp-pke") for _ in range(2)], [(m0, m1)] * 2


def _duplicate(key: cp.QuantumKey) -> cp.QuantumKey:
    # cheat mode: the harness hands out an exact copy of the quantum state
    return cp.QuantumKey(tuple(key.states), key.ck, key.id, key.f, key.joint)


def _omniscient_pke(inst, rng, m0, m1):
    ident = _bits(rng, inst.params.id_bits)
    triples = cp.cosets_for(inst.k1, ident, inst.params)
    mat = cp.ClassicalKeyMaterial(
        ident,
        ibe_keygen(inst.cmsk, ident),
        tuple(_honest_vector(t, 0) for t in triples),
        tuple(_honest_vector(t, 1) for t in triples),
    )
    return ClassicalFreeloader(mat, inst.pk, m0, m1, "cp-pke")


def _fe_pirate(strategy, game: _AntiPiracyTrial, rng):
    """Returns ``(freeloaders, (m0, m1))``."""
    kind = strategy.kind
    k = int(strategy.get("k", 1))
    nb = game.params.msg_bits
    m0, m1 = int(strategy.get("m0", 0)), int(strategy.get("m1", 1))
    f = strategy.get("f") or circuits.bit(0, nb)
    pk = game.inst.pk
    if kind == "Custom":
        view = {"pk": pk, "issue": game.issue, "params": game.params}
        out = _custom(strategy, view, rng)
        if len(out) != 2:
            raise ProtocolViolation("custom pirate must return (freeloaders, (m0, m1))")
        return out
    if kind == "AllGuess":
        for _ in range(k):
            game.issue(f, "PROTECTED")
        return [GuessFreeloader() for _ in range(k + 1)], (m0, m1)
    if kind == "HonestForwarder":
        keys = [game.issue(f, "PROTECTED") for _ in range(k)]
        return [KeyFreeloader(key, pk, m0, m1, "cp-fe") for key in keys] + [GuessFreeloader()], (m0, m1)
    if kind == "OracleOmniscient":
        fl = []
        for _ in range(k + 1):
            fk = cp.cp_fe_keygen(game.inst, f, rng)
            mat = cp.ClassicalKeyMaterial(
                fk.identity, fk.ck,
                tuple(_honest_vector(t, 0) for t in fk.triples),
                tuple(_honest_vector(t, 1) for t in fk.triples), fk.f,
            )
            fl.append(ClassicalFreeloader(mat, pk, m0, m1, "cp-fe"))
        for _ in range(k):
            game.issue(f, "PROTECTED")
        return fl, (m0, m1)
    key = game.issue(f, "PROTECTED")
    if kind == "TwoCopyCloner":
        if not strategy.get("cheat", False):
            raise ProtocolViolation("TwoCopyCloner needs the harness cheat mode to duplicate a key")
        mat = cp.two_copy_extract(key, _duplicate(key), rng)
        return [ClassicalFreeloader(mat, pk, m0, m1, "cp-fe") for _ in range(2)], (m0, m1)
    c = game.params.c
    g = _bits(rng, c)
    vecs = [_measure(s, _bit(g, i, c), rng) for i, s in enumerate(key.states)]
    return [BasisFreeloader(vecs, g, key, pk, m0, m1, "cp-fe") for _ in range(2)], (m0, m1)


def _antipiracy_trial(scheme, strategy, params: AntiPiracyParams, rng) -> dict:
    game = _AntiPiracyTrial(scheme, params, rng)
    if scheme == "cp-pke":
        freeloaders, messages = _pke_pirate(strategy, game, rng)
    else:
        freeloaders, pair = _fe_pirate(strategy, game, rng)
        messages = [tuple(pair)] * len(freeloaders)
    k = len(game.protected)
    if len(freeloaders) != k + 1 or len(messages) != k + 1:
        raise ProtocolViolation(f"pirate made {k} key queries but returned {len(freeloaders)} freeloaders")
    checks = []
    classical_ok = True
    if scheme == "cp-fe":
        m0, m1 = messages[0]
        classical_ok = all(f(m0) == f(m1) for f in game.classical)
        if params.noninteractive:
            game.pmsk = cp.cp_fe_pmsk(game.inst, m0, m1)
    if classical_ok:
        for ell, (fl, (m0, m1)) in enumerate(zip(freeloaders, messages)):
            b = int(rng.integers(0, 2))
            m = m1 if b else m0
            if scheme == "cp-pke":
                ct = cp.cp_pke_enc(game.inst, m, rng)
                ctx = None
            else:
                ct = cp.cp_fe_enc(game.inst, m, rng)
                ctx = _FeContext(game, ell)
            guess = int(fl.guess(ct, ctx, rng))
            restricted = True
            if ctx is not None:
                restricted = all(f(m0) == f(m1) for f in ctx.functions)
            checks.append({
                "b": b,
                "guess": guess,
                "r": format(ct.r, f"0{ct.c}b"),
                "freeloader": getattr(fl, "label", type(fl).__name__),
                "phase2_ok": restricted,
                "ok": guess == b and restricted,
            })
    win = classical_ok and all(ch["ok"] for ch in checks)
    return {
        "queries": game.log,
        "challenges": [{"b": ch["b"], "r": ch["r"]} for ch in checks],
        "answers": [ch["guess"] for ch in checks],
        "messages": [[_msg_json(a), _msg_json(b)] for a, b in messages],
        "verdict": {"classical_ok": classical_ok, "checks": checks, "win": bool(win)},
    }


def _msg_json(m):
    return m.hex() if isinstance(m, (bytes, bytearray)) else m


def run_antipiracy(
    scheme: str,
    pirate: AdversaryStrategy,
    params: AntiPiracyParams = AntiPiracyParams(),
    trials: int = 100,
    rng=0,
    *,
    trace: bool = False,
    start: int = 0,
) -> GameReport:
    if scheme not in SCHEMES:
        raise ParameterError(f"unknown scheme {scheme!r}")
    fn = lambda g: _antipiracy_trial(scheme, pirate, params, g)  # noqa: E731
    pj = {"scheme": scheme, "adversary": pirate.to_json(), **_params_json(params)}
    return _play(f"antipiracy-{scheme}", fn, trials, rng, pj, trace, start)


# ---------------------------------------------------------------------------
# independent verdict checker


def check_trace(game_id: str, rec: dict) -> bool:
    """Recompute a trial verdict from its logged trace."""
    if rec.get("voided"):
        return False
    if game_id.startswith("moe-"):
        triples = [CosetTriple.from_json(t) for t in rec["secrets"]["triples"]]
        c = len(triples)
        ok = True
        for r_key, v_key in (("r1", "v1"), ("r2", "v2")):
            r = int(rec["challenges"][r_key], 2)
            vs = rec["answers"][v_key]
            if vs is None or len(vs) != c or any(v is None for v in vs):
                ok = False
                continue
            vs = [int(v, 16) for v in vs]
            ok &= all(t.contains(_bit(r, i, c), v) for i, (t, v) in enumerate(zip(triples, vs)))
        if game_id == "moe-coll":
            q = rec["queries"]
            ok &= q["phase1"].count(q["id_star"]) <= 1
        return bool(ok)
    v = rec["verdict"]
    if not v["classical_ok"]:
        return False
    return all(ch["b"] == ch["guess"] and ch["phase2_ok"] for ch in v["checks"])


# ---------------------------------------------------------------------------
# decryptor testing


@dataclass(frozen=True)
class DecryptorRegister:
    """A freeloader as a density matrix over deterministic strategies.

    ``strategies[j](ct) -> bit`` is the answer of basis state ``j``.
    """

    strategies: tuple
    rho: Any

    def __post_init__(self):
        rho = self.rho if isinstance(self.rho, ml.DensityMatrix) else ml.DensityMatrix(np.asarray(self.rho))
        if rho.dim != len(self.strategies):
            raise ParameterError("rho dimension must equal the number of strategies")
        if rho.dim > ml.MAX_DIM:
            raise ResourceError(f"strategy space {rho.dim} exceeds {ml.MAX_DIM}")
        object.__setattr__(self, "rho", rho)


@dataclass(frozen=True)
class CiphertextDistribution:
    """Finite-support ciphertext distribution: ``encrypt(m, coin)`` over ``coins``."""

    encrypt: Callable
    coins: tuple
    weights: tuple | None = None

    def items(self):
        w = self.weights or tuple(1.0 / len(self.coins) for _ in self.coins)
        return zip(self.coins, w)


@dataclass(frozen=True)
class TestOutcome:
    mode: str
    value: float
    post: Any


def decryption_mixture(register: DecryptorRegister, dist: CiphertextDistribution, m0, m1, cap: int = ml.API_CAP):
    """Mixture over ``(b, coin)`` of diagonal projectors onto the strategies that answer ``b``."""
    dim = len(register.strategies)
    if 2 * len(dist.coins) * dim > cap:
        raise ResourceError(f"strategy space x ciphertext support {2 * len(dist.coins) * dim} exceeds cap {cap}")
    projs, weights = [], []
    for coin, w in dist.items():
        for b, m in ((0, m0), (1, m1)):
            ct = dist.encrypt(m, coin)
            diag = [float(int(s(ct)) == b) for s in register.strategies]
            projs.append(np.diag(diag))
            weights.append(0.5 * w)
    return ml.ProjectiveMixture(tuple(projs), tuple(weights))


def decryptor_test(
    register: DecryptorRegister,
    dist: CiphertextDistribution,
    m0,
    m1,
    p: ml.MeasureParams,
    mode: str,
    rng: np.random.Generator,
) -> TestOutcome:
    """PI / API return an estimate, TI / ATI a bit (threshold ``p.eta``)."""
    mix = decryption_mixture(register, dist, m0, m1)
    rho = register.rho
    if mode == "PI":
        value, post, _ = ml.apply_projective(ml.pi(mix), rho, rng)
    elif mode == "API":
        value, post = ml.api(mix, p, rho, rng)
    elif mode == "TI":
        value, post = ml.threshold("exact", mix, p, rho, rng)
    elif mode == "ATI":
        value, post = ml.threshold("approximate", mix, p, rho, rng)
    else:
        raise ParameterError(f"unknown decryptor test mode {mode!r}")
    return TestOutcome(mode, float(value), post)


def trace_digest(report: GameReport) -> str:
    return hashlib.sha256(repr(report.to_json()).encode()).hexdigest()


__all__ = [
    "AdversaryStrategy",
    "AntiPiracyParams",
    "CiphertextDistribution",
    "DecryptorRegister",
    "GameReport",
    "MoeParams",
    "ProtocolViolation",
    "check_trace",
    "decryption_mixture",
    "decryptor_test",
    "exact_ci",
    "run_antipiracy",
    "run_moe",
]
