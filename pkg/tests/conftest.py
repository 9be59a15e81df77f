import itertools
import math

import numpy as np
import pytest

from chaingrade import BundleShape

ACCEPTANCE_LOG = []


def record(name, ok, detail=""):
    ACCEPTANCE_LOG.append((name, bool(ok), detail))
    assert ok, f"{name}: {detail}"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LOG:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE_LOG:
        line = f"{'PASS' if ok else 'FAIL'}  {name}"
        if detail:
            line += f"  ({detail})"
        terminalreporter.write_line(line)


def monotone_table(dims, rng, weak=False):
    """Random monotone table: nested cumulative sums of a non-negative array."""
    x = rng.random(dims) + (0.0 if weak else 0.05)
    if weak:
        x[rng.random(dims) < 0.3] = 0.0
    for axis in range(len(dims)):
        x = np.cumsum(x, axis=axis)
    return x


def all_shapes(max_steps, max_factors):
    out = []
    for R in range(1, max_factors + 1):
        for steps in itertools.product(range(1, max_steps + 1), repeat=R):
            if sum(steps) <= max_steps:
                out.append(BundleShape(steps))
    return out


def brute_force_paths(shape):
    """Every maximal chain by filtering all step-label words (no recursion tricks)."""
    K = shape.total_steps
    words = []
    for word in itertools.product(range(shape.R), repeat=K):
        if all(word.count(r) == n for r, n in enumerate(shape.steps)):
            words.append(word)
    return words


def neg_xlogx(d):
    d = np.asarray(d, dtype=float)
    safe = np.where(d > 0, d, 1.0)
    return -(d * np.log(safe))


def direct_rd(F, G):
    """Plain-loop divergence along one chain, for cross-checking."""
    total = 0.0
    for k in range(1, len(F)):
        df, dg = F[k] - F[k - 1], G[k] - G[k - 1]
        if df > 0:
            total -= df * math.log(df / dg)
    return total


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)
