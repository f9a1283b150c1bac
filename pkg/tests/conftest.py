import itertools

import numpy as np
import pytest


def brute_span(n, vectors):
    """All elements of the span, by enumerating every subset sum."""
    out = {0}
    for v in vectors:
        out |= {x ^ v for x in out}
    return out


def brute_dual(n, elems):
    return {w for w in range(1 << n) if all(bin(w & a).count("1") % 2 == 0 for a in elems)}


def gf2_rank(rows, n):
    """Rank by numpy Gaussian elimination on a 0/1 matrix."""
    if not rows:
        return 0
    m = np.array([[(r >> (n - 1 - j)) & 1 for j in range(n)] for r in rows], dtype=np.uint8)
    rank = 0
    for col in range(n):
        piv = next((i for i in range(rank, len(m)) if m[i, col]), None)
        if piv is None:
            continue
        m[[rank, piv]] = m[[piv, rank]]
        for i in range(len(m)):
            if i != rank and m[i, col]:
                m[i] ^= m[rank]
        rank += 1
    return rank


def all_subspaces(n, d):
    found = set()
    for rows in itertools.combinations(range(1, 1 << n), d):
        if gf2_rank(list(rows), n) == d:
            found.add(frozenset(brute_span(n, rows)))
    return found


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
