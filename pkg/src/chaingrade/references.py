"""Random feasible alternatives used as reference searches in oracle mode.

A reference search draws feasible points of the same problem and reports
the best objective found.  An optimal solver must never be beaten.
"""
from __future__ import annotations

import math

import numpy as np

from .divergence import rd_bundle_dp, rd_chain
from .lattice import WEAK, BundleShape, GradingFunction
from .solvers import (
    AnchoredProblem,
    LinearConstraintProblem,
    UnconstrainedProblem,
    objective_server_mix,
    ServerMixProblem,
)


def chain_objective(values) -> float:
    values = np.asarray(values, dtype=float)
    return rd_chain(values, np.arange(len(values), dtype=float))


def random_monotone_table(shape: BundleShape, rng: np.random.Generator, m: float = 0.0, M: float = 1.0) -> np.ndarray:
    """Random strictly monotone table on ``shape`` rescaled to run from m to M."""
    t = rng.random(shape.dims) + 1e-3
    for axis in range(shape.R):
        t = np.cumsum(t, axis=axis)
    t = t - t.flat[0]
    return m + (M - m) * t / t.flat[-1]


def anchored_samples(p: AnchoredProblem, rng: np.random.Generator, count: int) -> np.ndarray:
    """Random monotone interpolations through the anchors, shape (count, n+1)."""
    out = np.empty((count, p.n + 1))
    for (k0, v0), (k1, v1) in zip(p.anchors, p.anchors[1:]):
        q = rng.dirichlet(np.ones(k1 - k0), size=count)
        out[:, k0] = v0
        out[:, k0 + 1:k1 + 1] = v0 + (v1 - v0) * np.cumsum(q, axis=1)
    for k, v in p.anchors:
        out[:, k] = v
    return out


def linear_samples(p: LinearConstraintProblem, f_star: np.ndarray, rng: np.random.Generator, count: int) -> np.ndarray:
    """Random feasible increment vectors around ``f_star`` on its support."""
    c = np.asarray(p.coefficients)
    support = np.flatnonzero(f_star > 0)
    A = np.vstack([np.ones(len(support)), c[support]])
    _, sing, vt = np.linalg.svd(A)
    rank = int(np.sum(sing > 1e-12 * sing.max()))
    null = vt[rank:]
    out = np.tile(f_star, (count, 1))
    if null.shape[0] == 0:
        return out
    for row in out:
        d = np.zeros_like(f_star)
        d[support] = rng.standard_normal(null.shape[0]) @ null
        neg = d < 0
        if not np.any(neg):
            continue
        tmax = float(np.min(-f_star[neg] / d[neg]))
        row += rng.uniform(0.0, tmax) * d
    np.maximum(out, 0.0, out=out)
    return out


def reference_search(problem, solution, rng: np.random.Generator, count: int = 1000) -> float:
    """Best objective among ``count`` random feasible points of ``problem``."""
    if isinstance(problem, ServerMixProblem):
        R = len(problem.divergences)
        pts = rng.dirichlet(np.ones(R), size=count)
        return max(objective_server_mix(q / q.sum(), problem) for q in pts)
    if isinstance(problem, AnchoredProblem):
        return max(chain_objective(v) for v in anchored_samples(problem, rng, count))
    if isinstance(problem, LinearConstraintProblem):
        pts = linear_samples(problem, solution.increments, rng, count)
        return max(chain_objective(np.concatenate([[0.0], np.cumsum(f)])) for f in pts)
    if isinstance(problem, UnconstrainedProblem):
        N = GradingFunction.natural(problem.shape)
        best = -math.inf
        for _ in range(count):
            table = random_monotone_table(problem.shape, rng, problem.m, problem.M)
            F = GradingFunction.tabulated(problem.shape, table, WEAK)
            best = max(best, rd_bundle_dp(F, N).value)
        return best
    raise TypeError(f"no reference search for {type(problem).__name__}")
