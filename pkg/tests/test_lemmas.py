import numpy as np
import pytest

from cosetlab import ParameterError
from cosetlab import measure as ml
from cosetlab.lemmas import CHECKS, SLACK_FLOOR, check_gentle_measurement, lemma_suite


def test_all_lemmas_hold():
    rep = lemma_suite(seed=3, dims=4, trials=60)
    assert rep.all_pass, rep.to_json()
    assert {r.lemma_id for r in rep.results} == set(CHECKS)


@pytest.mark.parametrize("dims", [2, 3, 6])
def test_other_dimensions(dims):
    assert lemma_suite(seed=dims, dims=dims, trials=25).all_pass


def test_union_bound_commuting_diagonal(rng):
    for _ in range(500):
        p1 = np.diag(rng.integers(0, 2, 4).astype(float))
        p2 = np.diag(rng.integers(0, 2, 4).astype(float))
        rho = ml.random_density(4, rng).matrix
        lhs = np.trace((np.eye(4) - p1 @ p2) @ rho).real
        rhs = np.trace((np.eye(4) - p1) @ rho).real + np.trace((np.eye(4) - p2) @ rho).real
        assert lhs <= rhs + 1e-12


def test_gentle_measurement_exact_accept(rng):
    # Tr[E rho] = 1: the post-measurement state equals rho
    P = ml.random_projector(4, 2, rng)
    v = P @ rng.standard_normal(4)
    rho = np.outer(v, v.conj()) / np.vdot(v, v).real
    post = P @ rho @ P / np.trace(P @ rho).real
    assert ml.trace_distance(rho, post) < 1e-12
    assert check_gentle_measurement(4, rng) >= SLACK_FLOOR


def test_implementation_independence_example(rng):
    d1, d2 = 3, 2
    rho = ml.random_density(d1 * d2, rng).matrix
    for m in ml.random_kraus(d1, 3, rng):
        e = ml.random_unitary(d1, rng) @ m
        a, b = np.kron(m, np.eye(d2)), np.kron(e, np.eye(d2))
        ta = ml.partial_trace_first(a @ rho @ a.conj().T, d1, d2)
        tb = ml.partial_trace_first(b @ rho @ b.conj().T, d1, d2)
        assert np.max(np.abs(ta - tb)) < 1e-8


def test_bad_dimension():
    with pytest.raises(ParameterError):
        lemma_suite(seed=0, dims=1, trials=1)
