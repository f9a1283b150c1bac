"""Correctness and measurement suites shared by the CLI and the acceptance tests.

Every suite takes an explicit seed and returns a JSON-ready dict with a
boolean ``pass`` entry. Wall-clock time is never part of the result.
"""

from __future__ import annotations

import numpy as np

from . import PuncturedPointError, circuits
from . import copy_protect as cp
from . import measure as ml
from .gf2 import CosetParams, CosetTriple, coset_gen, dot, dual
from .ibe_fe import fe_dec, fe_enc, fe_keygen, fe_punc, fe_setup, ibe_keygen, ibe_punc, ibe_setup
from .lemmas import SLACK_FLOOR, check_ti_sandwich, lemma_suite
from .pprf import eval_punctured, prf_eval, prf_keygen, prf_puncture
from .rng import byte_stream, substream
from .statevec import hadamard_all, prepare_coset_state

CORE_LEMMAS = (
    "quantum_union_bound",
    "gentle_measurement",
    "implementation_independence",
    "simultaneous_projection",
)


def coset_duality(seed: int, trials: int = 500, dims=(2, 4, 6, 8), tol: float = 1e-9) -> dict:
    """H^n |A_{s,s'}> against |(A^perp)_{s',s}> amplitude by amplitude.

    The two states agree up to the global sign (-1)^<s,s'>, which is applied
    in closed form before comparing. ``raw_max_error`` omits it.
    """
    worst = raw = 0.0
    for t in range(trials):
        n = dims[t % len(dims)]
        rng = substream(seed, "duality", t)
        d = int(rng.integers(0, n + 1))
        (tr,) = coset_gen(CosetParams(n, d, 1), byte_stream(seed, "duality", t))
        lhs = hadamard_all(prepare_coset_state(tr))
        rhs = prepare_coset_state(CosetTriple(dual(tr.space), tr.s_prime, tr.s))
        sign = -1.0 if dot(tr.s, tr.s_prime) else 1.0
        worst = max(worst, float(np.max(np.abs(lhs.amplitudes - sign * rhs.amplitudes))))
        raw = max(raw, float(np.max(np.abs(lhs.amplitudes - rhs.amplitudes))))
    return {"trials": trials, "max_error": worst, "raw_max_error": raw, "pass": worst <= tol}


def cp_pke_roundtrips(seed: int, params: cp.CpParams = cp.CpParams(), trials: int = 100, tol: float = 1e-9) -> dict:
    rng = substream(seed, "correctness", "cp-pke", "setup")
    inst = cp.cp_pke_setup(params, rng)
    ok = 0
    drift = 0.0
    for t in range(trials):
        trng = substream(seed, "correctness", "cp-pke", t)
        key = cp.cp_pke_qkeygen(inst, trng)
        m = trng.bytes(int(trng.integers(1, 17)))
        ct = cp.cp_pke_enc(inst, m, trng)
        out, succ = cp.cp_pke_dec(key, ct, inst, trng)
        ok += out == m
        drift = max(drift, succ.max_deviation(key))
    return {"scheme": "cp-pke", "trials": trials, "ok": ok, "max_state_drift": drift,
            "pass": ok == trials and drift <= tol}


def cp_fe_roundtrips(
    seed: int, params: cp.CpParams = cp.CpParams(), trials: int = 100, q: int = 32, tol: float = 1e-9
) -> dict:
    rng = substream(seed, "correctness", "cp-fe", "setup")
    inst = cp.cp_fe_setup(params, q, rng)
    family = circuits.small_family(4)
    ok = 0
    drift = 0.0
    for t in range(trials):
        trng = substream(seed, "correctness", "cp-fe", t)
        f = family[t % len(family)]
        key = cp.cp_fe_qkeygen(cp.cp_fe_keygen(inst, f, trng))
        m = int(trng.integers(0, 16))
        ct = cp.cp_fe_enc(inst, m, trng)
        out, succ = cp.cp_fe_dec(key, ct, inst, trng)
        ok += out == f(m)
        drift = max(drift, succ.max_deviation(key))
    return {"scheme": "cp-fe", "trials": trials, "ok": ok, "max_state_drift": drift,
            "pass": ok == trials and drift <= tol}


def pprf_exhaustive(seed: int, input_len: int = 8, keys: int = 4) -> dict:
    """Every non-punctured input agrees with the full key; punctured inputs refuse."""
    mismatches = refused = 0
    for j in range(keys):
        rng = substream(seed, "pprf", j)
        k = prf_keygen(16, input_len, 128, rng)
        points = set(int(x) for x in rng.integers(0, 1 << input_len, size=j + 1))
        pk = prf_puncture(k, points)
        for y in range(1 << input_len):
            if y in points:
                try:
                    eval_punctured(pk, y)
                except PuncturedPointError:
                    refused += 1
                continue
            mismatches += eval_punctured(pk, y) != prf_eval(k, y)
    expected = sum(len(set(int(x) for x in substream(seed, "pprf", j).integers(0, 1 << input_len, size=j + 1)))
                   for j in range(keys))
    return {"input_len": input_len, "keys": keys, "mismatches": mismatches, "refused": refused,
            "pass": mismatches == 0 and refused == expected}


def ibe_strong_punctured(seed: int, id_len: int = 8) -> dict:
    rng = substream(seed, "ibe")
    inst = ibe_setup(id_len, rng)
    target = int(rng.integers(0, 1 << id_len))
    pmsk = ibe_punc(inst.msk, target)
    differ = 0
    for ident in range(1 << id_len):
        if ident != target:
            differ += ibe_keygen(pmsk, ident) != ibe_keygen(inst.msk, ident)
    refused = False
    try:
        ibe_keygen(pmsk, target)
    except PuncturedPointError:
        refused = True
    return {"id_len": id_len, "target": target, "byte_mismatches": differ, "target_refused": refused,
            "pass": differ == 0 and refused}


def fe_punctured_family(seed: int, q: int = 32, pairs: int = 4) -> dict:
    """The punctured FE key refuses exactly the differentiating functions."""
    rng = substream(seed, "fe")
    inst = fe_setup(q, rng)
    family = circuits.small_family(4)
    rows = []
    good = True
    for _ in range(pairs):
        m0, m1 = (int(x) for x in rng.integers(0, 16, size=2))
        pmsk = fe_punc(inst.msk, m0, m1)
        for f in family:
            key = fe_keygen(pmsk, f)
            differentiating = f(m0) != f(m1)
            ok = (key is None) == differentiating
            if key is not None:
                full = fe_keygen(inst.msk, f)
                ct = fe_enc(inst.pk, m0, rng)
                ok = ok and key == full and fe_dec(key, ct) == f(m0)
            good &= ok
            rows.append({"m0": m0, "m1": m1, "f": f.encode().hex(), "bottom": key is None, "ok": ok})
    return {"checks": rows, "pass": good}


def measurement_lab(
    seed: int,
    instances: int = 200,
    api_trials: int = 10_000,
    epsilon: float = 0.05,
    delta: float = 0.05,
    sandwich_instances: int = 100,
) -> dict:
    """PI against Tr[E rho], PI projectivity, API almost-projectivity and shift closeness, TI/ATI sandwich."""
    pi_err = proj_err = 0.0
    for t in range(instances):
        rng = substream(seed, "lab", "pi", t)
        dim = int(rng.integers(2, 9))
        mix = ml.random_mixture(dim, int(rng.integers(1, 5)), rng)
        rho = ml.random_density(dim, rng)
        pim = ml.pi(mix)
        e1 = ml.mixture_to_povm(mix).e1
        pi_err = max(pi_err, abs(ml.expected_accept(pim, rho) - float(np.trace(e1 @ rho.matrix).real)))
        total = sum(pim.projectors)
        proj_err = max(proj_err, float(np.max(np.abs(total - np.eye(dim)))))
        for a, P in enumerate(pim.projectors):
            proj_err = max(proj_err, float(np.max(np.abs(P @ P - P))))
            for Q in pim.projectors[a + 1:]:
                proj_err = max(proj_err, float(np.max(np.abs(P @ Q))))

    rng = substream(seed, "lab", "api")
    dim = 4
    mix = ml.random_mixture(dim, 3, rng)
    rho = ml.random_density(dim, rng)
    pim = ml.pi(mix)
    params = ml.MeasureParams(epsilon, delta)
    first, far = [], 0
    for _ in range(api_trials):
        p1, post = ml.api(pim, params, rho, rng)
        p2, _ = ml.api(pim, params, post, rng)
        first.append(p1)
        far += abs(p1 - p2) > epsilon
    almost = far / api_trials
    pi_dist = pim.distribution(rho)
    shift = max(
        ml.shift_distance(first, pi_dist, epsilon),
        ml.shift_distance(pi_dist, first, epsilon),
    )

    worst = min(
        check_ti_sandwich(4, substream(seed, "lab", "sandwich", t)) for t in range(sandwich_instances)
    )
    return {
        "pi_instances": instances,
        "pi_max_error": pi_err,
        "pi_projectivity_error": proj_err,
        "api_rounds": params.rounds,
        "api_trials": api_trials,
        "api_far_fraction": float(almost),
        "api_shift_distance": float(shift),
        "sandwich_instances": sandwich_instances,
        "sandwich_worst_slack": worst,
        "pass": bool(
            pi_err <= 1e-8 and proj_err <= 1e-10 and almost <= delta and shift <= delta and worst >= SLACK_FLOOR
        ),
    }


def core_lemmas(seed: int, trials: int = 500, dims: int = 4) -> dict:
    rep = lemma_suite(seed, dims=dims, trials=trials, lemmas=CORE_LEMMAS)
    return {"lemmas": rep.to_json(), "pass": rep.all_pass}


CORRECTNESS = {
    "coset": coset_duality,
    "cp-pke": cp_pke_roundtrips,
    "cp-fe": cp_fe_roundtrips,
    "pprf": pprf_exhaustive,
    "ibe": ibe_strong_punctured,
    "fe": fe_punctured_family,
}
