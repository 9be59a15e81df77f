"""Maximum relative divergence solvers.

Every solver returns an :class:`MrdpSolution`.  Grading-function solutions
maximize ``D(F||N)`` against the natural height function; the server-mix
solver returns a probability vector instead.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .divergence import edge_terms, rd_bundle_dp, rd_chain
from .errors import ConvergenceError, DegenerateRangeError, InfeasibleError, ShapeError
from .lattice import SEPARABLE, STRICT, WEAK, BundleShape, GradingFunction

MAX_ITER = 10_000
MEAN_TOL = 1e-12
SUM_TOL = 1e-12
UNDERFLOW = 1e-300


@dataclass(frozen=True)
class AnchoredProblem:
    """Chain ``0..n`` with F pinned at the anchors ``(n_k, M_k)``.

    The last anchor must sit at ``n``.  If no anchor is given at 0, ``F(0) = m``.
    """

    n: int
    anchors: tuple[tuple[int, float], ...]
    m: float = 0.0
    mode: str = STRICT

    def __post_init__(self):
        anchors = tuple((int(k), float(v)) for k, v in self.anchors)
        if not anchors:
            raise ValueError("at least one anchor (at n) is required")
        if anchors[0][0] != 0:
            anchors = ((0, float(self.m)),) + anchors
        object.__setattr__(self, "anchors", anchors)
        object.__setattr__(self, "m", anchors[0][1])
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if anchors[-1][0] != self.n:
            raise ValueError(f"last anchor must be at n = {self.n}, got {anchors[-1][0]}")
        for (k0, v0), (k1, v1) in zip(anchors, anchors[1:]):
            if k1 <= k0:
                raise ValueError(f"anchor positions must be strictly increasing, got {k0} then {k1}")
            if v1 < v0 or (self.mode == STRICT and v1 == v0):
                raise ValueError(
                    f"anchor values must be {'strictly ' if self.mode == STRICT else ''}increasing "
                    f"(monotonicity), got F({k0}) = {v0} and F({k1}) = {v1}"
                )

    @property
    def M(self) -> float:
        return self.anchors[-1][1]


@dataclass(frozen=True)
class LinearConstraintProblem:
    """Increments ``f_1..f_n >= 0`` with ``sum f = M`` and ``sum c_i f_i = mu`` (F(0) = 0)."""

    n: int
    M: float
    coefficients: tuple[float, ...]
    target: float

    def __post_init__(self):
        coeffs = tuple(float(c) for c in self.coefficients)
        object.__setattr__(self, "coefficients", coeffs)
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if len(coeffs) != self.n:
            raise ValueError(f"need {self.n} coefficients, got {len(coeffs)}")
        if not self.M > 0:
            raise ValueError("M must be positive")


@dataclass(frozen=True)
class UnconstrainedProblem:
    """Free grading function on a bundle with fixed extremes."""

    shape: BundleShape
    m: float = 0.0
    M: float = 1.0


@dataclass(frozen=True)
class ServerMixProblem:
    """Per-type divergences ``D_r`` and cost ranges ``(m_r, M_r)``."""

    divergences: tuple[float, ...]
    ranges: tuple[tuple[float, float], ...]

    def __post_init__(self):
        D = tuple(float(d) for d in self.divergences)
        ranges = tuple((float(a), float(b)) for a, b in self.ranges)
        object.__setattr__(self, "divergences", D)
        object.__setattr__(self, "ranges", ranges)
        if len(D) < 1:
            raise ValueError("at least one server type is required")
        if len(D) != len(ranges):
            raise ValueError("divergences and ranges must have the same length")
        for r, (lo, hi) in enumerate(ranges):
            if not hi > lo:
                raise ValueError(f"range {r + 1} must have M_r > m_r, got ({lo}, {hi})")
        if not all(math.isfinite(d) for d in D):
            raise ValueError("divergences must be finite")

    @classmethod
    def from_cost_tables(cls, tables: Sequence[Sequence[float]]) -> ServerMixProblem:
        """Build from per-type cost tables F_r(0..n_r), with D_r = D(F_r || identity)."""
        D, ranges = [], []
        for t in tables:
            t = np.asarray(t, dtype=float)
            D.append(rd_chain(t, np.arange(len(t), dtype=float)))
            ranges.append((t[0], t[-1]))
        return cls(tuple(D), tuple(ranges))

    @property
    def spreads(self) -> np.ndarray:
        return np.array([hi - lo for lo, hi in self.ranges])


@dataclass
class MrdpSolution:
    kind: str
    values: np.ndarray
    objective: float
    gf: GradingFunction | None = None
    multipliers: dict[str, float] = field(default_factory=dict)
    iterations: int = 0
    boundary: bool = False
    factors: list[MrdpSolution] = field(default_factory=list)
    # exact increments where the solver has them; differencing values loses digits on tiny steps
    increments: np.ndarray | None = None

    def __post_init__(self):
        if self.increments is None:
            self.increments = np.diff(self.values)


def _neg_xlogx_sum(f: np.ndarray) -> float:
    return float(math.fsum(edge_terms(f, np.ones_like(f))))


def _mode_for(increments: np.ndarray) -> str:
    return STRICT if np.all(increments > 0) else WEAK


def _chain_values(start: float, increments: np.ndarray) -> np.ndarray:
    return np.concatenate([[start], start + np.cumsum(increments)])


# --------------------------------------------------------------------------
# unconstrained / anchored
# --------------------------------------------------------------------------

def solve_unconstrained(shape: BundleShape, m: float = 0.0, M: float = 1.0) -> MrdpSolution:
    """Linear-in-height optimum ``F = m + N (M - m) / K``."""
    if not M > m:
        raise DegenerateRangeError(f"need M > m, got m = {m}, M = {M}")
    K = shape.total_steps
    spread = M - m
    values = m + np.arange(K + 1) * (spread / K)
    values[-1] = M
    gf = GradingFunction.height_dependent(shape, values)
    objective = spread * math.log(K) - spread * math.log(spread)
    return MrdpSolution("unconstrained", values, objective, gf)


def anchored_objective(p: AnchoredProblem) -> float:
    total = []
    for (k0, v0), (k1, v1) in zip(p.anchors, p.anchors[1:]):
        dM, dn = v1 - v0, k1 - k0
        if dM > 0:
            total.append(dM * math.log(dn) - dM * math.log(dM))
    return math.fsum(total)


def solve_anchored(p: AnchoredProblem) -> MrdpSolution:
    """Piecewise-linear interpolation of the anchors, slope ``dM/dn`` on each block."""
    values = np.empty(p.n + 1)
    for (k0, v0), (k1, v1) in zip(p.anchors, p.anchors[1:]):
        slope = (v1 - v0) / (k1 - k0)
        values[k0:k1] = v0 + slope * np.arange(k1 - k0)
    values[p.n] = p.M
    for k, v in p.anchors:
        values[k] = v
    inc = np.diff(values)
    gf = GradingFunction.height_dependent(BundleShape((p.n,)), values, _mode_for(inc))
    return MrdpSolution("anchored", values, anchored_objective(p), gf, boundary=bool(np.any(inc == 0)))


# --------------------------------------------------------------------------
# one linear constraint
# --------------------------------------------------------------------------

def _logsumexp(x: np.ndarray) -> float:
    top = float(np.max(x))
    return top + math.log(float(np.sum(np.exp(x - top))))


def _weighted_mean(c: np.ndarray, s: float) -> float:
    """Mean of c under weights proportional to exp(s c); increasing in s."""
    x = s * c
    w = np.exp(x - np.max(x))
    return float(np.dot(w, c) / np.sum(w))


def _bisect_increasing(func, target: float, tol: float, start: float = 1.0) -> tuple[float, int]:
    """Solve ``func(x) = target`` for an increasing ``func``; returns (x, iterations)."""
    lo, hi = -start, start
    it = 0
    while func(lo) > target:
        hi = lo
        lo *= 2.0
        it += 1
        if it > MAX_ITER or not math.isfinite(lo):
            raise ConvergenceError("could not bracket the root from below")
    while func(hi) < target:
        lo = hi
        hi *= 2.0
        it += 1
        if it > MAX_ITER or not math.isfinite(hi):
            raise ConvergenceError("could not bracket the root from above")
    while it < MAX_ITER:
        it += 1
        mid = 0.5 * (lo + hi)
        val = func(mid)
        if abs(val - target) <= tol:
            return mid, it
        if mid == lo or mid == hi:
            # bracket exhausted at float resolution; return the better end
            return (lo if abs(func(lo) - target) <= abs(func(hi) - target) else hi), it
        if val < target:
            lo = mid
        else:
            hi = mid
    raise ConvergenceError(f"bisection did not converge in {MAX_ITER} iterations")


def solve_linear_constraint(p: LinearConstraintProblem) -> MrdpSolution:
    """Maximize ``-sum f ln f`` with fixed total and one linear constraint.

    Interior optima have the exponential form ``f_i = a b^{c_i}``; ``b`` is
    found by bisection on ``s = ln b`` so that the ``b^{c}``-weighted mean of
    the coefficients equals ``mu / M``.
    """
    c = np.asarray(p.coefficients)
    t = p.target / p.M
    cmin, cmax = float(c.min()), float(c.max())
    scale = max(1.0, abs(cmin), abs(cmax))
    edge = MEAN_TOL * scale
    if t < cmin - edge or t > cmax + edge:
        raise InfeasibleError(f"infeasible: target outside [min c, max c] (mu/M = {t!r}, c in [{cmin!r}, {cmax!r}])")

    if cmin == cmax:
        f = np.full(p.n, p.M / p.n)
        return _linear_solution(p, f, s=0.0, iterations=0, boundary=False)

    for end, s_limit in ((cmin, -math.inf), (cmax, math.inf)):
        if abs(t - end) <= edge:
            hit = c == end
            f = np.where(hit, p.M / np.count_nonzero(hit), 0.0)
            sol = _linear_solution(p, f, s=s_limit, iterations=0, boundary=True)
            return sol

    s, iterations = _bisect_increasing(lambda s: _weighted_mean(c, s), t, MEAN_TOL * scale)
    x = s * c
    lse = _logsumexp(x)
    f = p.M * np.exp(x - lse)
    return _linear_solution(p, f, s=s, iterations=iterations, boundary=False, log_a=math.log(p.M) - lse)


def _linear_solution(p, f, s, iterations, boundary, log_a=None) -> MrdpSolution:
    values = _chain_values(0.0, f)
    gf = GradingFunction.height_dependent(BundleShape((p.n,)), values, _mode_for(f))
    multipliers = {"b": math.exp(s) if math.isfinite(s) else (0.0 if s < 0 else math.inf), "beta": -s}
    if log_a is None and math.isfinite(s):
        log_a = math.log(p.M) - _logsumexp(s * np.asarray(p.coefficients))
    if log_a is not None:
        multipliers["a"] = math.exp(log_a)
        multipliers["log_a"] = log_a
        multipliers["alpha"] = -1.0 - log_a
    return MrdpSolution("linear", values, _neg_xlogx_sum(f), gf, multipliers, iterations, boundary, increments=f)


def lagrange_residuals_linear(p: LinearConstraintProblem, sol: MrdpSolution) -> np.ndarray:
    """``ln f_i + 1 + alpha + c_i beta`` for every increment of an interior solution."""
    f = sol.increments
    alpha, beta = sol.multipliers["alpha"], sol.multipliers["beta"]
    return np.log(f) + 1.0 + alpha + np.asarray(p.coefficients) * beta


# --------------------------------------------------------------------------
# bundle reductions
# --------------------------------------------------------------------------

def solve_height_dependent(
    shape: BundleShape,
    m: float = 0.0,
    M: float = 1.0,
    constraint: LinearConstraintProblem | None = None,
) -> MrdpSolution:
    """Height-dependent optimum: the problem reduces to the chain ``0..K``."""
    if constraint is None:
        sol = solve_unconstrained(shape, m, M)
        sol.kind = "height"
        return sol
    K = shape.total_steps
    if constraint.n != K:
        raise ShapeError(f"constraint covers {constraint.n} steps, the bundle has K = {K}")
    if not math.isclose(constraint.M, M - m, rel_tol=1e-12, abs_tol=1e-12):
        raise ValueError(f"constraint total {constraint.M} must equal M - m = {M - m}")
    chain = solve_linear_constraint(constraint)
    values = m + chain.values
    values[-1] = M
    gf = GradingFunction.height_dependent(shape, values, _mode_for(chain.increments))
    return MrdpSolution(
        "height", values, chain.objective, gf, chain.multipliers, chain.iterations, chain.boundary,
        increments=chain.increments,
    )


FactorProblem = Union[AnchoredProblem, LinearConstraintProblem, UnconstrainedProblem]


def solve_factor(p: FactorProblem) -> MrdpSolution:
    if isinstance(p, AnchoredProblem):
        return solve_anchored(p)
    if isinstance(p, LinearConstraintProblem):
        return solve_linear_constraint(p)
    if isinstance(p, UnconstrainedProblem):
        if p.shape.R != 1:
            raise ShapeError("separable factors must be single chains")
        return solve_unconstrained(p.shape, p.m, p.M)
    raise TypeError(f"unsupported factor problem {type(p).__name__}")


def solve_separable(problems: Sequence[FactorProblem]) -> MrdpSolution:
    """Solve independent single-chain factors and sum them into one separable GF."""
    if not problems:
        raise ValueError("need at least one factor")
    factors = [solve_factor(p) for p in problems]
    tables = [f.values for f in factors]
    mode = STRICT if all(np.all(np.diff(t) > 0) for t in tables) else WEAK
    gf = GradingFunction.separable(tables, mode=mode)
    objective = math.fsum(f.objective for f in factors)
    iterations = sum(f.iterations for f in factors)
    boundary = any(f.boundary for f in factors)
    values = gf.table.reshape(-1).copy()
    return MrdpSolution("separable", values, objective, gf, {}, iterations, boundary, factors)


def add_linear_overhead(solution: MrdpSolution, a0: float, b0: float) -> MrdpSolution:
    """Add a server component ``a0 + b0 N``: each factor F_r becomes F_r + b0 N_r."""
    if solution.gf is None or solution.gf.variant != SEPARABLE:
        raise TypeError("overhead can only be added to a separable solution")
    if a0 < 0 or b0 < 0:
        raise ValueError("a0 and b0 must be non-negative")
    tables = [t + b0 * np.arange(len(t)) for t in solution.gf.data]
    tables[0] = tables[0] + a0
    mode = STRICT if all(np.all(np.diff(t) > 0) for t in tables) else WEAK
    gf = GradingFunction.separable(tables, mode=mode)
    objective = rd_bundle_dp(gf, GradingFunction.natural(gf.shape)).value
    return MrdpSolution(
        "separable", gf.table.reshape(-1).copy(), objective, gf,
        {"a0": float(a0), "b0": float(b0)}, solution.iterations, solution.boundary, solution.factors,
    )


# --------------------------------------------------------------------------
# server mix
# --------------------------------------------------------------------------

def objective_server_mix(p, problem: ServerMixProblem) -> float:
    p = np.asarray(p, dtype=float)
    if p.shape != (len(problem.divergences),):
        raise ValueError(f"need {len(problem.divergences)} probabilities, got shape {p.shape}")
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
        raise ValueError("p must be a probability vector")
    D = np.array(problem.divergences)
    entropy = edge_terms(p, np.ones_like(p))
    return float(math.fsum(p * D + problem.spreads * entropy))


def _mix_log_p(lam: float, D: np.ndarray, spreads: np.ndarray) -> np.ndarray:
    return -1.0 + (D - lam) / spreads


def solve_server_mix(problem: ServerMixProblem) -> MrdpSolution:
    """Maximize ``sum p_r D_r - (M_r - m_r) p_r ln p_r`` over the simplex.

    Stationarity gives ``p_r = exp(-1 + (D_r - lam) / (M_r - m_r))``; the sum
    is decreasing in ``lam`` so the multiplier is found by bisection.
    """
    D = np.array(problem.divergences)
    spreads = problem.spreads
    R = len(D)
    if R == 1:
        lam = float(D[0] - spreads[0])
        return MrdpSolution("server-mix", np.array([1.0]), float(D[0]), None, {"lambda": lam})
    if np.all(D == D[0]) and np.all(spreads == spreads[0]):
        p = np.full(R, 1.0 / R)
        lam = float(D[0] + spreads[0] * (math.log(R) - 1.0))
        return MrdpSolution("server-mix", p, objective_server_mix(p, problem), None, {"lambda": lam})

    def log_total(lam: float) -> float:
        return _logsumexp(_mix_log_p(lam, D, spreads))

    # p_r >= 1 for every r below lo; p_r <= 1/R for every r above hi
    lo = float(np.min(D - spreads))
    hi = float(np.max(D + spreads * (math.log(R) - 1.0)))
    it = 0
    while True:
        it += 1
        mid = 0.5 * (lo + hi)
        val = log_total(mid)
        if abs(val) < 1.0 and abs(math.expm1(val)) <= SUM_TOL or mid in (lo, hi):
            break
        if it >= MAX_ITER:
            raise ConvergenceError(f"multiplier bisection did not converge in {MAX_ITER} iterations")
        if val > 0:
            lo = mid
        else:
            hi = mid
    lam = mid
    p = np.exp(_mix_log_p(lam, D, spreads))
    boundary = bool(np.any(p < UNDERFLOW))
    p = p / p.sum()
    return MrdpSolution(
        "server-mix", p, objective_server_mix(p, problem), None, {"lambda": lam}, it, boundary,
    )


def server_mix_closed_form(D: Sequence[float], spread: float) -> np.ndarray:
    """Equal-range solution ``p_r = c q^{D_r}`` with ``ln q = 1 / spread``."""
    x = np.asarray(D, dtype=float) / spread
    w = np.exp(x - x.max())
    return w / w.sum()


def lagrange_residuals_server_mix(problem: ServerMixProblem, sol: MrdpSolution) -> np.ndarray:
    """``D_r - (M_r - m_r)(ln p_r + 1) - lambda`` for each type."""
    D = np.array(problem.divergences)
    return D - problem.spreads * (np.log(sol.values) + 1.0) - sol.multipliers["lambda"]
