"""Chain bundles, maximal chains and grading functions.

A chain bundle is the direct product of R finite chains ``0..n_r``, ordered
componentwise.  Elements are addressed by integer index vectors; the actual
element values of the chains never matter for divergence computations, so
they are not modelled.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from functools import cached_property
from itertools import product
from typing import Iterator, Sequence

import numpy as np

from .errors import BudgetExceededError, DegenerateRangeError, MonotonicityError, ShapeError

DEFAULT_ENUM_BUDGET = 10**6
BUDGET_ENV_VAR = "CHAINGRADE_ENUM_BUDGET"

STRICT = "strict"
WEAK = "weak"

IndexVector = tuple[int, ...]


def enumeration_budget() -> int:
    raw = os.environ.get(BUDGET_ENV_VAR)
    if raw is None or raw.strip() == "":
        return DEFAULT_ENUM_BUDGET
    try:
        value = int(raw)
    except ValueError:
        raise ValueError(f"{BUDGET_ENV_VAR} must be an integer, got {raw!r}") from None
    if value < 1:
        raise ValueError(f"{BUDGET_ENV_VAR} must be positive, got {value}")
    return value


@dataclass(frozen=True)
class BundleShape:
    """Direct product of R chains with ``steps[r]`` steps each (``steps[r] + 1`` elements)."""

    steps: tuple[int, ...]

    def __post_init__(self):
        steps = tuple(self.steps)
        if len(steps) == 0:
            raise ShapeError("a bundle needs at least one chain")
        for n in steps:
            if isinstance(n, bool) or int(n) != n or n < 1:
                raise ShapeError(f"chain step counts must be positive integers, got {self.steps!r}")
        object.__setattr__(self, "steps", tuple(int(n) for n in steps))

    @property
    def R(self) -> int:
        return len(self.steps)

    @property
    def total_steps(self) -> int:
        return sum(self.steps)

    K = total_steps

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(n + 1 for n in self.steps)

    @property
    def n_elements(self) -> int:
        return math.prod(self.dims)

    @property
    def bottom(self) -> IndexVector:
        return (0,) * self.R

    @property
    def top(self) -> IndexVector:
        return self.steps

    def chain_count(self) -> int:
        """Number of maximal chains, the multinomial K!/(n_1!...n_R!)."""
        count = math.factorial(self.total_steps)
        for n in self.steps:
            count //= math.factorial(n)
        return count

    def check_index(self, idx: Sequence[int]) -> IndexVector:
        idx = tuple(int(i) for i in idx)
        if len(idx) != self.R:
            raise ShapeError(f"index {idx} has {len(idx)} components, shape has {self.R}")
        for i, n in zip(idx, self.steps):
            if i < 0 or i > n:
                raise ShapeError(f"index {idx} out of range for shape {self.steps}")
        return idx

    def height(self, idx: Sequence[int]) -> int:
        return sum(self.check_index(idx))

    def indices(self) -> Iterator[IndexVector]:
        """All index vectors in row-major order."""
        return product(*(range(d) for d in self.dims))

    def height_grid(self) -> np.ndarray:
        return np.indices(self.dims).sum(axis=0)

    def layers(self) -> list[np.ndarray]:
        """Index vectors grouped by height; ``layers()[k]`` is an (m, R) int array."""
        grid = np.indices(self.dims).reshape(self.R, -1).T
        heights = grid.sum(axis=1)
        return [grid[heights == k] for k in range(self.total_steps + 1)]


def precedes(i: Sequence[int], j: Sequence[int]) -> bool:
    """Componentwise order: i <= j in every coordinate."""
    return all(a <= b for a, b in zip(i, j))


def adjacent(i: Sequence[int], j: Sequence[int]) -> bool:
    return len(i) == len(j) and sum(abs(b - a) for a, b in zip(i, j)) == 1


@dataclass(frozen=True)
class MaximalChain:
    """A saturated bottom-to-top path; ``step_dims[k]`` is the 0-based chain stepped at step k+1."""

    shape: BundleShape
    step_dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.step_dims)
        object.__setattr__(self, "step_dims", dims)
        counts = [0] * self.shape.R
        for d in dims:
            if d < 0 or d >= self.shape.R:
                raise ShapeError(f"step dimension {d} out of range for shape {self.shape.steps}")
            counts[d] += 1
        if tuple(counts) != self.shape.steps:
            raise ShapeError(f"steps {dims} do not form a maximal chain of shape {self.shape.steps}")

    @cached_property
    def path(self) -> tuple[IndexVector, ...]:
        cur = [0] * self.shape.R
        out = [tuple(cur)]
        for d in self.step_dims:
            cur[d] += 1
            out.append(tuple(cur))
        return tuple(out)

    def __len__(self) -> int:
        return len(self.step_dims) + 1


def _lex_step_sequences(counts: tuple[int, ...]) -> Iterator[tuple[int, ...]]:
    if sum(counts) == 0:
        yield ()
        return
    for r, c in enumerate(counts):
        if c:
            rest = counts[:r] + (c - 1,) + counts[r + 1:]
            for tail in _lex_step_sequences(rest):
                yield (r,) + tail


def _check_budget(shape: BundleShape, budget: int | None) -> None:
    cap = enumeration_budget() if budget is None else budget
    count = shape.chain_count()
    if count > cap:
        raise BudgetExceededError(
            f"shape {shape.steps} has {count} maximal chains, above the enumeration budget {cap}"
        )


def enumerate_maximal_chains(shape: BundleShape, budget: int | None = None) -> Iterator[MaximalChain]:
    """Yield every maximal chain once, in lexicographic order of ``step_dims``."""
    _check_budget(shape, budget)
    for dims in _lex_step_sequences(shape.steps):
        yield MaximalChain(shape, dims)


def _step_array(counts: tuple[int, ...]) -> np.ndarray:
    memo: dict[tuple[int, ...], np.ndarray] = {}

    def build(c: tuple[int, ...]) -> np.ndarray:
        if c in memo:
            return memo[c]
        if sum(c) == 0:
            out = np.zeros((1, 0), dtype=np.int8)
        else:
            blocks = []
            for r, cr in enumerate(c):
                if cr:
                    tail = build(c[:r] + (cr - 1,) + c[r + 1:])
                    head = np.full((tail.shape[0], 1), r, dtype=np.int8)
                    blocks.append(np.hstack([head, tail]))
            out = np.vstack(blocks)
        memo[c] = out
        return out

    return build(counts)


def step_array(shape: BundleShape, budget: int | None = None) -> np.ndarray:
    """All maximal chains as a (count, K) array of step dimensions, lexicographically sorted."""
    _check_budget(shape, budget)
    return _step_array(shape.steps)


def path_flat_indices(shape: BundleShape, steps: np.ndarray) -> np.ndarray:
    """Row-major flat indices of every element along each chain, shape (count, K+1)."""
    strides = np.array([math.prod(shape.dims[r + 1:]) for r in range(shape.R)], dtype=np.int64)
    moves = strides[steps.astype(np.int64)]
    out = np.zeros((steps.shape[0], steps.shape[1] + 1), dtype=np.int64)
    np.cumsum(moves, axis=1, out=out[:, 1:])
    return out


# --------------------------------------------------------------------------
# grading functions
# --------------------------------------------------------------------------

TABULATED = "tabulated"
HEIGHT = "height"
SEPARABLE = "separable"
NATURAL = "natural"


def _as_float_array(values, ndim=None) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if ndim is not None and arr.ndim != ndim:
        raise ShapeError(f"expected a {ndim}-dimensional array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("grading function values must be finite")
    arr.flags.writeable = False
    return arr


def _increments_ok(diff: np.ndarray, mode: str) -> bool:
    if diff.size == 0:
        return True
    return bool(np.all(diff > 0)) if mode == STRICT else bool(np.all(diff >= 0))


@dataclass(frozen=True, eq=False)
class GradingFunction:
    """An order-monotone real function on a chain bundle.

    Use the constructors :meth:`tabulated`, :meth:`height_dependent`,
    :meth:`separable` and :meth:`natural` rather than calling this directly.
    Monotonicity is checked on construction according to ``mode``.
    """

    variant: str
    shape: BundleShape
    data: tuple[np.ndarray, ...] = field(default=())
    mode: str = STRICT

    def __post_init__(self):
        if self.mode not in (STRICT, WEAK):
            raise ValueError(f"mode must be 'strict' or 'weak', got {self.mode!r}")
        if not self.is_monotone(self.mode):
            raise MonotonicityError(
                f"{self.variant} grading function is not {'strictly' if self.mode == STRICT else 'weakly'} "
                "increasing along every adjacent step"
            )

    @classmethod
    def tabulated(cls, shape: BundleShape, values, mode: str = STRICT) -> GradingFunction:
        arr = _as_float_array(values)
        if arr.shape != shape.dims:
            if arr.size != shape.n_elements:
                raise ShapeError(f"table of shape {arr.shape} does not match bundle dims {shape.dims}")
            arr = arr.reshape(shape.dims)
        return cls(TABULATED, shape, (arr,), mode)

    @classmethod
    def height_dependent(cls, shape: BundleShape, values, mode: str = STRICT) -> GradingFunction:
        arr = _as_float_array(values, ndim=1)
        if arr.shape[0] != shape.total_steps + 1:
            raise ShapeError(f"height-dependent values need K+1 = {shape.total_steps + 1} entries, got {arr.shape[0]}")
        return cls(HEIGHT, shape, (arr,), mode)

    @classmethod
    def separable(cls, tables, shape: BundleShape | None = None, mode: str = STRICT) -> GradingFunction:
        arrs = tuple(_as_float_array(t, ndim=1) for t in tables)
        inferred = BundleShape(tuple(len(a) - 1 for a in arrs))
        if shape is not None and shape != inferred:
            raise ShapeError(f"factor tables imply shape {inferred.steps}, expected {shape.steps}")
        return cls(SEPARABLE, inferred, arrs, mode)

    @classmethod
    def natural(cls, shape: BundleShape) -> GradingFunction:
        return cls(NATURAL, shape, (), STRICT)

    # -- evaluation --------------------------------------------------------

    def evaluate(self, idx: Sequence[int]) -> float:
        idx = self.shape.check_index(idx)
        if self.variant == NATURAL:
            return float(sum(idx))
        if self.variant == HEIGHT:
            return float(self.data[0][sum(idx)])
        if self.variant == SEPARABLE:
            return float(sum(t[i] for t, i in zip(self.data, idx)))
        return float(self.data[0][idx])

    __call__ = evaluate

    @cached_property
    def table(self) -> np.ndarray:
        """Dense values over all index vectors, shaped ``shape.dims``."""
        if self.variant == TABULATED:
            return self.data[0]
        if self.variant == NATURAL:
            out = self.shape.height_grid().astype(float)
        elif self.variant == HEIGHT:
            out = self.data[0][self.shape.height_grid()]
        else:
            out = np.zeros(self.shape.dims)
            for r, t in enumerate(self.data):
                view = [1] * self.shape.R
                view[r] = len(t)
                out = out + t.reshape(view)
        out.flags.writeable = False
        return out

    def along(self, chain: MaximalChain) -> np.ndarray:
        """Values of F restricted to a maximal chain (K+1 entries)."""
        if chain.shape != self.shape:
            raise ShapeError("chain and grading function live on different shapes")
        flat = path_flat_indices(self.shape, np.array([chain.step_dims], dtype=np.int8))[0]
        return self.table.reshape(-1)[flat]

    def axis_increments(self) -> list[np.ndarray]:
        t = self.table
        return [np.diff(t, axis=r) for r in range(self.shape.R)]

    def is_monotone(self, mode: str = STRICT) -> bool:
        if self.variant == NATURAL:
            return True
        if self.variant in (HEIGHT, SEPARABLE):
            return all(_increments_ok(np.diff(t), mode) for t in self.data)
        return all(_increments_ok(d, mode) for d in self.axis_increments())

    # -- derived functions -------------------------------------------------

    def extremes(self) -> tuple[float, float]:
        return self.evaluate(self.shape.bottom), self.evaluate(self.shape.top)

    def affine(self, scale: float = 1.0, shift: float = 0.0) -> GradingFunction:
        """``scale * F + shift`` in the same variant (scale must be positive)."""
        if not scale > 0:
            raise ValueError("scale must be positive to preserve monotonicity")
        if self.variant == NATURAL:
            if scale == 1.0 and shift == 0.0:
                return self
            values = scale * np.arange(self.shape.total_steps + 1) + shift
            return GradingFunction.height_dependent(self.shape, values, self.mode)
        if self.variant == SEPARABLE:
            tables = [scale * t for t in self.data]
            tables[0] = tables[0] + shift
            return GradingFunction.separable(tables, mode=self.mode)
        return GradingFunction(self.variant, self.shape, (_as_float_array(scale * self.data[0] + shift),), self.mode)

    def __add__(self, other) -> GradingFunction:
        if isinstance(other, (int, float)):
            return self.affine(1.0, float(other))
        return NotImplemented

    __radd__ = __add__

    def __mul__(self, other) -> GradingFunction:
        if isinstance(other, (int, float)):
            return self.affine(float(other), 0.0)
        return NotImplemented

    __rmul__ = __mul__

    def to_tabulated(self) -> GradingFunction:
        return GradingFunction.tabulated(self.shape, self.table, self.mode)


def evaluate(gf: GradingFunction, idx: Sequence[int]) -> float:
    return gf.evaluate(idx)


def extremes(gf: GradingFunction, shape: BundleShape | None = None) -> tuple[float, float]:
    if shape is not None and shape != gf.shape:
        raise ShapeError(f"grading function lives on {gf.shape.steps}, not {shape.steps}")
    return gf.extremes()


def standardize(gf: GradingFunction, shape: BundleShape | None = None) -> GradingFunction:
    """Rescale F to ``(F - m) / (M - m)`` so its range becomes [0, 1]."""
    m, M = extremes(gf, shape)
    if not M > m:
        raise DegenerateRangeError(f"cannot standardize a grading function with M = m = {m}")
    spread = M - m
    if gf.variant == SEPARABLE:
        tables = [(t - t[0]) / spread for t in gf.data]
        return GradingFunction.separable(tables, mode=gf.mode)
    if gf.variant == NATURAL:
        return GradingFunction.height_dependent(gf.shape, np.arange(gf.shape.total_steps + 1) / spread)
    values = (gf.data[0] - m) / spread
    return GradingFunction(gf.variant, gf.shape, (_as_float_array(values),), gf.mode)
