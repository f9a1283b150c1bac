"""Acceptance criteria at their stated tolerances and time budgets.

Each test prints one ``PASS``/``FAIL`` line; the lines are also repeated in
the pytest terminal summary. Run directly with ``python3 tests/test_acceptance.py``.
"""

import json
import time

import pytest

from cosetlab import cli, games, suites
from cosetlab import copy_protect as cp
from cosetlab.games import AdversaryStrategy as S

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # run as a script outside pytest
    ACCEPTANCE_LINES = []

SEED = 20240601


def record(name: str, ok: bool, elapsed: float, budget: float, detail: str) -> None:
    ok = ok and elapsed <= budget
    line = f"{'PASS' if ok else 'FAIL'} {name}: {detail} ({elapsed:.1f}s of {budget:.0f}s)"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


def test_1_coset_duality():
    rep, dt = timed(lambda: suites.coset_duality(SEED, 500, (2, 4, 6, 8), 1e-9))
    record("1 coset duality", rep["pass"], dt, 10,
           f"500 triples, max error {rep['max_error']:.1e} after the (-1)^<s,s'> sign, "
           f"{rep['raw_max_error']:.1f} without it")


def test_2_copy_protection_round_trips():
    params = cp.CpParams(4, 2, 3)

    def both():
        return suites.cp_pke_roundtrips(SEED, params, 100), suites.cp_fe_roundtrips(SEED, params, 100)

    (pke, fe), dt = timed(both)
    record("2 CP-PKE/CP-FE round trips", pke["pass"] and fe["pass"], dt, 30,
           f"pke {pke['ok']}/100 drift {pke['max_state_drift']:.1e}, "
           f"fe {fe['ok']}/100 drift {fe['max_state_drift']:.1e}")


def test_3_puncturable_primitives():
    def all3():
        return suites.pprf_exhaustive(SEED, 8), suites.ibe_strong_punctured(SEED, 8), suites.fe_punctured_family(SEED)

    (prf, ibe, fe), dt = timed(all3)
    bottoms = sum(r["bottom"] for r in fe["checks"])
    record("3 PPRF/IBE/FE puncturing", prf["pass"] and ibe["pass"] and fe["pass"], dt, 20,
           f"prf mismatches {prf['mismatches']}, ibe byte mismatches {ibe['byte_mismatches']}, "
           f"fe {len(fe['checks'])} keys with {bottoms} bottoms all on differentiating functions")


def test_4_measurement_lab():
    rep, dt = timed(lambda: suites.measurement_lab(SEED, 200, 10_000, 0.05, 0.05, 100))
    record("4 measurement lab", rep["pass"], dt, 300,
           f"PI error {rep['pi_max_error']:.1e}, projectivity {rep['pi_projectivity_error']:.1e}, "
           f"API far {rep['api_far_fraction']:.4f} shift {rep['api_shift_distance']:.4f}, "
           f"sandwich slack {rep['sandwich_worst_slack']:.1e}")


def test_5_core_lemmas():
    rep, dt = timed(lambda: suites.core_lemmas(SEED, 500))
    worst = {r["lemma_id"]: r["worst_slack"] for r in rep["lemmas"]}
    record("5 core lemmas", rep["pass"], dt, 120,
           ", ".join(f"{k} {v:.1e}" for k, v in worst.items()))


def test_6_games():
    ap = games.AntiPiracyParams()
    mp = games.MoeParams()
    t0 = time.perf_counter()
    hf = games.run_antipiracy("cp-pke", S("HonestForwarder"), ap, 2000, SEED)
    ag = games.run_antipiracy("cp-pke", S("AllGuess", {"k": 2}), ap, 2000, SEED)
    bg = {c: games.run_moe("multi", S("BasisGuesser"), games.MoeParams(c=c), 2000, SEED) for c in (1, 2, 3)}
    tc_moe = games.run_moe("multi", S("TwoCopyCloner", {"cheat": True}), mp, 100, SEED)
    tc_ap = games.run_antipiracy("cp-pke", S("TwoCopyCloner", {"cheat": True}), ap, 100, SEED)
    coll = games.run_moe("coll", S("TwoCopyCloner"), mp, 100, SEED, trace=True)
    dt = time.perf_counter() - t0
    coll_forced = sum(
        t["verdict"]["vectors_ok"] and not t["verdict"]["unique_id"] and not t["verdict"]["win"]
        for t in coll.per_trial_traces
    )
    checks = [
        hf.contains(0.5),
        ag.contains(1 / 8),
        all(bg[c].contains(4.0 ** -c) for c in bg),
        tc_moe.win_rate == 1.0 and tc_ap.win_rate == 1.0,
        coll.wins == 0 and coll_forced == 100,
    ]
    fmt = lambda r: f"{r.win_rate:.4f} [{r.ci95[0]:.4f}, {r.ci95[1]:.4f}]"  # noqa: E731
    record("6 games", all(checks), dt, 300,
           f"HF {fmt(hf)}, AllGuess k=2 {fmt(ag)}, "
           + ", ".join(f"BG c={c} {fmt(bg[c])}" for c in bg)
           + f", cloner {tc_moe.win_rate:.1f}/{tc_ap.win_rate:.1f}, coll duplicate-id losses {coll_forced}/100")


def test_7_same_seed_same_report(tmp_path):
    runs = [
        ["correctness", "--scheme", "cp-pke", "--trials", "10"],
        ["moe", "--variant", "multi", "--adversary", "BasisGuesser", "--trials", "50", "--trace"],
        ["antipiracy", "--scheme", "cp-fe", "--adversary", "HonestForwarder", "--trials", "5", "--trace"],
        ["lemmas", "--trials", "20"],
    ]
    t0 = time.perf_counter()
    same = True
    for i, args in enumerate(runs):
        blobs = []
        for j in range(2):
            out = tmp_path / f"r{i}_{j}.json"
            cli.main([*args, "--seed", str(SEED), "-o", str(out)])
            blobs.append(out.read_bytes())
        same &= blobs[0] == blobs[1] and json.loads(blobs[0])["config"]["seed"] == SEED
    record("7 deterministic reports", same, time.perf_counter() - t0, 300,
           f"{len(runs)} commands run twice, byte-identical: {same}")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-s"]))
