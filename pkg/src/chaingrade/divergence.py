"""Relative divergence of grading functions on chains and chain bundles.

On a single chain the divergence of F from G is

    D(F||G) = -sum_k dF_k * ln(dF_k / dG_k)

over the chain increments.  On a bundle it is the minimum of that sum over
all maximal chains.  Each term depends on one adjacent pair only, so the
bundle minimum is a shortest path through the lattice DAG; ``rd_bundle_dp``
computes it that way and ``rd_bundle_oracle`` checks it by enumerating every
chain.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import MonotonicityError, ShapeError
from .lattice import (
    BundleShape,
    GradingFunction,
    MaximalChain,
    path_flat_indices,
    standardize,
    step_array,
)

NEG_INF = -math.inf


@dataclass(frozen=True)
class DivergenceResult:
    value: float
    witness: MaximalChain | None = None
    degenerate: bool = False

    @property
    def steps(self) -> list[int] | None:
        """Witness as 1-based chain numbers, e.g. ``[1, 2, 1, 2]``."""
        return None if self.witness is None else [d + 1 for d in self.witness.step_dims]


def edge_terms(dF: np.ndarray, dG: np.ndarray) -> np.ndarray:
    """Elementwise ``-dF * ln(dF / dG)`` with 0 ln 0 = 0 and -inf where dG = 0 < dF."""
    dF = np.asarray(dF, dtype=float)
    dG = np.asarray(dG, dtype=float)
    out = np.zeros(np.broadcast(dF, dG).shape)
    dF, dG = np.broadcast_arrays(dF, dG)
    pos = dF > 0
    singular = pos & (dG <= 0)
    regular = pos & ~singular
    out[regular] = -dF[regular] * np.log(dF[regular] / dG[regular])
    out[singular] = NEG_INF
    return out


def _check_chain_values(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1 or arr.shape[0] < 2:
        raise ShapeError(f"{name} must be a list of at least two values")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must contain finite values")
    if np.any(np.diff(arr) < 0):
        raise MonotonicityError(f"{name} is not non-decreasing")
    return arr


def rd_chain(F_values, G_values) -> float:
    """Divergence of F from G along one chain; -inf when some dG = 0 < dF."""
    F = _check_chain_values(F_values, "F")
    G = _check_chain_values(G_values, "G")
    if F.shape != G.shape:
        raise ShapeError(f"F has {F.shape[0]} values but G has {G.shape[0]}")
    terms = edge_terms(np.diff(F), np.diff(G))
    if np.any(terms == NEG_INF):
        return NEG_INF
    return float(math.fsum(terms))


def _check_pair(F: GradingFunction, G: GradingFunction, shape: BundleShape | None) -> BundleShape:
    shape = F.shape if shape is None else shape
    if F.shape != shape or G.shape != shape:
        raise ShapeError(f"grading functions on {F.shape.steps} and {G.shape.steps} do not match shape {shape.steps}")
    return shape


def _tie_tol(best: float) -> float:
    return 1e-12 * max(1.0, abs(best))


def rd_bundle_dp(F: GradingFunction, G: GradingFunction, shape: BundleShape | None = None) -> DivergenceResult:
    """Minimum divergence over all maximal chains via a DAG shortest path.

    Edge weights may be negative (and -inf), so nodes are relaxed in height
    order.  The cost-to-go from every node to the top is computed first; the
    witness is then rebuilt from the bottom taking the lowest-numbered chain
    among tied moves, which gives the lexicographically smallest minimizer.
    """
    shape = _check_pair(F, G, shape)
    R = shape.R
    dims = shape.dims
    weights = [edge_terms(dF, dG) for dF, dG in zip(F.axis_increments(), G.axis_increments())]

    cost = np.full(dims, math.inf)
    cost[shape.top] = 0.0
    layers = shape.layers()
    for k in range(shape.total_steps - 1, -1, -1):
        nodes = layers[k]
        best = np.full(nodes.shape[0], math.inf)
        for r in range(R):
            ok = nodes[:, r] < shape.steps[r]
            if not np.any(ok):
                continue
            src = nodes[ok]
            dst = src.copy()
            dst[:, r] += 1
            cand = weights[r][tuple(src.T)] + cost[tuple(dst.T)]
            best[ok] = np.minimum(best[ok], cand)
        cost[tuple(nodes.T)] = best

    value = float(cost[shape.bottom])
    cur = list(shape.bottom)
    dims_taken = []
    for _ in range(shape.total_steps):
        target = cost[tuple(cur)]
        chosen = None
        fallback, fallback_val = None, math.inf
        for r in range(R):
            if cur[r] >= shape.steps[r]:
                continue
            nxt = cur.copy()
            nxt[r] += 1
            cand = weights[r][tuple(cur)] + cost[tuple(nxt)]
            if cand == target or (math.isfinite(target) and abs(cand - target) <= _tie_tol(target)):
                chosen = r
                break
            if cand < fallback_val:
                fallback, fallback_val = r, cand
        if chosen is None:
            chosen = fallback
        dims_taken.append(chosen)
        cur[chosen] += 1

    witness = MaximalChain(shape, tuple(dims_taken))
    return DivergenceResult(value, witness, value == NEG_INF)


def chain_divergences(F: GradingFunction, G: GradingFunction, steps: np.ndarray) -> np.ndarray:
    """Divergence along each chain in a (count, K) step array."""
    flat = path_flat_indices(F.shape, steps)
    fv = F.table.reshape(-1)[flat]
    gv = G.table.reshape(-1)[flat]
    terms = edge_terms(np.diff(fv, axis=1), np.diff(gv, axis=1))
    out = terms.sum(axis=1)
    out[np.any(terms == NEG_INF, axis=1)] = NEG_INF
    return out


def rd_bundle_oracle(
    F: GradingFunction,
    G: GradingFunction,
    shape: BundleShape | None = None,
    budget: int | None = None,
) -> DivergenceResult:
    """Minimum divergence by exhaustive enumeration of maximal chains."""
    shape = _check_pair(F, G, shape)
    steps = step_array(shape, budget)
    values = chain_divergences(F, G, steps)
    i = int(np.argmin(values))
    witness = MaximalChain(shape, tuple(int(d) for d in steps[i]))
    # recompute the winner with compensated summation
    value = rd_chain(F.along(witness), G.along(witness))
    return DivergenceResult(value, witness, value == NEG_INF)


def rd_on_chain(F: GradingFunction, G: GradingFunction, chain: MaximalChain) -> float:
    return rd_chain(F.along(chain), G.along(chain))


def disorder_entropy(F: GradingFunction, shape: BundleShape | None = None) -> float:
    """Divergence of the standardized F from the natural height function."""
    Fh = standardize(F, shape)
    return rd_bundle_dp(Fh, GradingFunction.natural(Fh.shape)).value


@dataclass
class IdentityCheck:
    name: str
    c: float
    lhs: float
    rhs: float
    ok: bool


@dataclass
class ScalingReport:
    checks: list[IdentityCheck] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(ch.ok for ch in self.checks)

    @property
    def violations(self) -> list[IdentityCheck]:
        return [ch for ch in self.checks if not ch.ok]


def _close(a: float, b: float, tol: float) -> bool:
    if math.isinf(a) or math.isinf(b):
        return a == b
    return abs(a - b) <= tol


def check_scaling_identities(
    F: GradingFunction,
    G: GradingFunction,
    c: float,
    shape: BundleShape | None = None,
    tol: float = 1e-9,
) -> ScalingReport:
    """Check the shift, joint-scale and scale-against-height identities for one ``c``."""
    if not c > 0:
        raise ValueError("c must be positive")
    shape = _check_pair(F, G, shape)
    N = GradingFunction.natural(shape)
    m, M = F.extremes()
    base = rd_bundle_dp(F, G).value
    base_n = rd_bundle_dp(F, N).value

    report = ScalingReport()
    shifted = rd_bundle_dp(F + c, G + c).value
    report.checks.append(IdentityCheck("shift", c, shifted, base, _close(shifted, base, tol)))
    scaled = rd_bundle_dp(F * c, G * c).value
    report.checks.append(IdentityCheck("joint-scale", c, scaled, c * base, _close(scaled, c * base, tol)))
    scaled_n = rd_bundle_dp(F * c, N).value
    rhs = c * base_n - c * (M - m) * math.log(c)
    report.checks.append(IdentityCheck("scale-vs-height", c, scaled_n, rhs, _close(scaled_n, rhs, tol)))
    return report
