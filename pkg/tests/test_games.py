import numpy as np
import pytest

from cosetlab import ParameterError
from cosetlab import games
from cosetlab.games import AdversaryStrategy as S
from cosetlab.measure import MeasureParams

SMALL = games.MoeParams(n=4, d=2, c=2, id_bits=16)


def test_exact_ci_matches_closed_form():
    from scipy.stats import beta

    lo, hi = games.exact_ci(7, 20)
    assert lo == pytest.approx(beta.ppf(0.025, 7, 14))
    assert hi == pytest.approx(beta.ppf(0.975, 8, 13))
    assert games.exact_ci(0, 0) == (0.0, 1.0)


def test_unknown_strategy_and_variant():
    with pytest.raises(ParameterError):
        S("Nope")
    with pytest.raises(ParameterError):
        games.run_moe("triple", S("AllGuess"), SMALL, 1)
    with pytest.raises(ParameterError):
        games.run_moe("multi", S("AllGuess"), SMALL, 0)


def test_omniscient_always_wins():
    for variant in games.MOE_VARIANTS:
        rep = games.run_moe(variant, S("OracleOmniscient"), SMALL, 10, 1)
        assert rep.wins == rep.valid == 10


def test_honest_forwarder_single():
    # the guessing half hits a coset of 2^(n-d) vectors out of 2^n
    rep = games.run_moe("single", S("HonestForwarder"), SMALL, 300, 2)
    assert rep.contains(0.25)


def test_basis_guesser_multi():
    for c in (1, 2):
        rep = games.run_moe("multi", S("BasisGuesser"), games.MoeParams(4, 2, c), 300, 3)
        assert rep.contains(4.0 ** -c), rep.to_json()


def test_on_mismatch_random_cannot_lose_more():
    a = games.run_moe("multi", S("BasisGuesser", {"on_mismatch": "random"}), SMALL, 300, 4)
    assert a.win_rate >= 1 / 16 - 0.03


def test_two_copy_cloner_voided_without_cheat():
    rep = games.run_moe("multi", S("TwoCopyCloner"), SMALL, 5, 5, trace=True)
    assert rep.voided == 5 and rep.valid == 0 and rep.wins == 0
    assert all(t["voided"] for t in rep.per_trial_traces)
    cheat = games.run_moe("multi", S("TwoCopyCloner", {"cheat": True}), SMALL, 20, 5)
    assert cheat.wins == 20


def test_coll_duplicate_id_loses():
    rep = games.run_moe("coll", S("TwoCopyCloner"), SMALL, 20, 6, trace=True)
    assert rep.wins == 0
    for t in rep.per_trial_traces:
        assert t["verdict"]["vectors_ok"] and not t["verdict"]["unique_id"]
        assert games.check_trace("moe-coll", t) is False


class Knows:
    def __init__(self, vecs):
        self.vecs = vecs

    def answer(self, r, spaces, query):
        return self.vecs[r]


def test_custom_split():
    def split(view, rng):
        # parties that answer the zero vector: valid only when it lies in the coset
        return Knows({r: [0] * len(view["states"]) for r in range(4)}), Knows({r: [0, 0] for r in range(4)})

    rep = games.run_moe("multi", S("Custom", {"split": split}), SMALL, 30, 7, trace=True)
    for t in rep.per_trial_traces:
        assert games.check_trace("moe-multi", t) == t["verdict"]["win"]
    with pytest.raises(ParameterError):
        games.run_moe("multi", S("Custom"), SMALL, 1, 7)
    bad = S("Custom", {"split": lambda view, rng: None})
    assert games.run_moe("multi", bad, SMALL, 3, 7).voided == 3


def test_traces_recompute_and_determinism():
    for kind in ("HonestForwarder", "AllGuess", "BasisGuesser"):
        a = games.run_moe("multi", S(kind), SMALL, 30, 8, trace=True)
        b = games.run_moe("multi", S(kind), SMALL, 30, 8, trace=True)
        assert games.trace_digest(a) == games.trace_digest(b)
        for t in a.per_trial_traces:
            assert games.check_trace("moe-multi", t) == t["verdict"]["win"]


def test_chunked_runs_merge_to_whole():
    whole = games.run_moe("multi", S("HonestForwarder"), SMALL, 20, 9, trace=True)
    left = games.run_moe("multi", S("HonestForwarder"), SMALL, 8, 9, trace=True)
    right = games.run_moe("multi", S("HonestForwarder"), SMALL, 12, 9, trace=True, start=8)
    merged = left.merge(right)
    assert merged.to_json() == whole.to_json()
    with pytest.raises(ParameterError):
        left.merge(games.run_moe("single", S("AllGuess"), SMALL, 1, 9))


AP = games.AntiPiracyParams(n=4, d=2, c=2, id_bits=16)


def test_antipiracy_pke_strategies():
    hf = games.run_antipiracy("cp-pke", S("HonestForwarder"), AP, 40, 10, trace=True)
    assert 0.2 <= hf.win_rate <= 0.8
    for t in hf.per_trial_traces:
        assert games.check_trace(hf.game_id, t) == t["verdict"]["win"]
    om = games.run_antipiracy("cp-pke", S("OracleOmniscient"), AP, 5, 10)
    assert om.wins == 5
    tc = games.run_antipiracy("cp-pke", S("TwoCopyCloner", {"cheat": True}), AP, 5, 10)
    assert tc.wins == 5
    assert games.run_antipiracy("cp-pke", S("TwoCopyCloner"), AP, 3, 10).voided == 3


def test_antipiracy_allguess_k2():
    rep = games.run_antipiracy("cp-pke", S("AllGuess", {"k": 2}), AP, 200, 11)
    assert rep.contains(1 / 8)


def test_antipiracy_fe():
    rep = games.run_antipiracy("cp-fe", S("HonestForwarder"), AP, 10, 12, trace=True)
    for t in rep.per_trial_traces:
        assert games.check_trace(rep.game_id, t) == t["verdict"]["win"]
    ni = games.AntiPiracyParams(4, 2, 2, 16, noninteractive=True)
    tc = games.run_antipiracy("cp-fe", S("TwoCopyCloner", {"cheat": True}), ni, 3, 12)
    assert tc.wins == 3
    with pytest.raises(ParameterError):
        games.run_antipiracy("cp-xx", S("AllGuess"), AP, 1)


def register(strats, weights):
    return games.DecryptorRegister(tuple(strats), np.diag(weights).astype(complex))


DIST = games.CiphertextDistribution(lambda m, coin: (m, coin), (0, 1))
RIGHT = lambda ct: ct[0]  # noqa: E731
WRONG = lambda ct: 1 - ct[0]  # noqa: E731
COIN = lambda ct: ct[1]  # noqa: E731


@pytest.mark.parametrize("mode", ["PI", "API"])
def test_decryptor_estimates(mode, rng):
    p = MeasureParams(0.1, 0.1)
    assert games.decryptor_test(register([RIGHT, WRONG], [1, 0]), DIST, 0, 1, p, mode, rng).value == pytest.approx(1.0, abs=0.06)
    assert games.decryptor_test(register([COIN, WRONG], [1, 0]), DIST, 0, 1, p, mode, rng).value == pytest.approx(0.5, abs=0.06)
    vals = [games.decryptor_test(register([RIGHT, COIN], [0.5, 0.5]), DIST, 0, 1, p, mode, rng).value
            for _ in range(40)]
    assert all(min(abs(v - 1.0), abs(v - 0.5)) <= 0.06 for v in vals)
    assert 0.6 <= np.mean(vals) <= 0.9


@pytest.mark.parametrize("mode", ["TI", "ATI"])
def test_decryptor_threshold(mode, rng):
    p = MeasureParams(0.05, 0.05, eta=0.7)
    assert games.decryptor_test(register([RIGHT, WRONG], [1, 0]), DIST, 0, 1, p, mode, rng).value == 1.0
    assert games.decryptor_test(register([COIN, WRONG], [1, 0]), DIST, 0, 1, p, mode, rng).value == 0.0


def test_decryptor_checks(rng):
    with pytest.raises(ParameterError):
        register([RIGHT], [0.5, 0.5])
    with pytest.raises(ParameterError):
        games.decryptor_test(register([RIGHT], [1]), DIST, 0, 1, MeasureParams(0.1, 0.1), "XI", rng)
