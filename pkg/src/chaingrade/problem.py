"""Problem spec documents: parsing, dispatch and result formatting.

A spec is a JSON object whose ``kind`` selects the computation.  Results are
plain dicts ("result documents") rendered either as JSON with every real
written to 17 significant digits (machine mode) or as an aligned key/value
table (human mode).
"""
from __future__ import annotations

import json
import math
from typing import Annotated, Any, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, TypeAdapter, ValidationError, model_validator

from . import solvers as sv
from .divergence import check_scaling_identities, rd_bundle_dp, rd_bundle_oracle, rd_chain
from .errors import (
    BudgetExceededError,
    ChaingradeError,
    ConvergenceError,
    DegenerateRangeError,
    InfeasibleError,
)
from .lattice import HEIGHT, NATURAL, SEPARABLE, TABULATED, BundleShape, GradingFunction
from .references import reference_search

EXIT_OK = 0
EXIT_NUMERIC = 1
EXIT_INPUT = 2

KINDS = (
    "rd-chain",
    "rd-bundle",
    "solve-unconstrained",
    "solve-anchored",
    "solve-linear",
    "solve-height",
    "solve-separable",
    "solve-server-mix",
    "check-properties",
)


class SpecError(ChaingradeError):
    """Invalid spec document; ``category`` is syntax, schema or semantic."""

    def __init__(self, category: str, message: str, path: str | None = None):
        super().__init__(message)
        self.category = category
        self.message = message
        self.path = path

    def to_dict(self) -> dict:
        return {"category": self.category, "message": self.message, "path": self.path}


# --------------------------------------------------------------------------
# schema
# --------------------------------------------------------------------------

StepCount = Annotated[int, Field(strict=True, ge=1)]
Position = Annotated[int, Field(strict=True, ge=0)]
Real = Annotated[float, Field(allow_inf_nan=False)]
Mode = Literal["strict", "weak"]


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid")


class NaturalGF(_Model):
    variant: Literal["natural"]


class TabulatedGF(_Model):
    variant: Literal["tabulated"]
    values: list[Any]
    mode: Mode = "strict"


class HeightGF(_Model):
    variant: Literal["height"]
    values: list[Real] = Field(min_length=2)
    mode: Mode = "strict"


class SeparableGF(_Model):
    variant: Literal["separable"]
    tables: list[Annotated[list[Real], Field(min_length=2)]] = Field(min_length=1)
    mode: Mode = "strict"


GFPayload = Annotated[Union[NaturalGF, TabulatedGF, HeightGF, SeparableGF], Field(discriminator="variant")]


class Options(_Model):
    oracle: bool = False
    tolerance: Annotated[float, Field(gt=0, allow_inf_nan=False)] = 1e-10
    seed: Annotated[int, Field(strict=True, ge=0, lt=2**64)] = 0


class _Spec(_Model):
    options: Options = Field(default_factory=Options)


class RdChainSpec(_Spec):
    kind: Literal["rd-chain"]
    F: list[Real] = Field(min_length=2)
    G: list[Real] = Field(min_length=2)


class RdBundleSpec(_Spec):
    kind: Literal["rd-bundle"]
    shape: list[StepCount] = Field(min_length=1)
    F: GFPayload
    G: GFPayload = Field(default_factory=lambda: NaturalGF(variant="natural"))


class SolveUnconstrainedSpec(_Spec):
    kind: Literal["solve-unconstrained"]
    shape: list[StepCount] = Field(min_length=1)
    m: Real = 0.0
    M: Real


class SolveAnchoredSpec(_Spec):
    kind: Literal["solve-anchored"]
    n: StepCount
    anchors: list[tuple[Position, Real]] = Field(min_length=1)
    m: Real = 0.0
    mode: Mode = "strict"


class SolveLinearSpec(_Spec):
    kind: Literal["solve-linear"]
    n: StepCount
    M: Real
    coefficients: list[Real] = Field(min_length=1)
    target: Real


class SolveHeightSpec(_Spec):
    kind: Literal["solve-height"]
    shape: list[StepCount] = Field(min_length=1)
    m: Real = 0.0
    M: Real
    coefficients: Optional[list[Real]] = None
    target: Optional[Real] = None

    @model_validator(mode="after")
    def _both_or_neither(self):
        if (self.coefficients is None) != (self.target is None):
            raise ValueError("coefficients and target must be given together")
        return self


class UnconstrainedFactor(_Model):
    kind: Literal["unconstrained"]
    n: StepCount
    m: Real = 0.0
    M: Real


class AnchoredFactor(_Model):
    kind: Literal["anchored"]
    n: StepCount
    anchors: list[tuple[Position, Real]] = Field(min_length=1)
    m: Real = 0.0
    mode: Mode = "strict"


class LinearFactor(_Model):
    kind: Literal["linear"]
    n: StepCount
    M: Real
    coefficients: list[Real] = Field(min_length=1)
    target: Real


Factor = Annotated[Union[UnconstrainedFactor, AnchoredFactor, LinearFactor], Field(discriminator="kind")]


class Overhead(_Model):
    a0: Annotated[float, Field(ge=0, allow_inf_nan=False)]
    b0: Annotated[float, Field(ge=0, allow_inf_nan=False)]


class SolveSeparableSpec(_Spec):
    kind: Literal["solve-separable"]
    factors: list[Factor] = Field(min_length=1)
    overhead: Optional[Overhead] = None


class SolveServerMixSpec(_Spec):
    kind: Literal["solve-server-mix"]
    divergences: Optional[list[Real]] = None
    ranges: Optional[list[tuple[Real, Real]]] = None
    cost_tables: Optional[list[Annotated[list[Real], Field(min_length=2)]]] = None

    @model_validator(mode="after")
    def _one_source(self):
        direct = self.divergences is not None or self.ranges is not None
        if direct and self.cost_tables is not None:
            raise ValueError("give either divergences and ranges, or cost_tables, not both")
        if self.cost_tables is None and (self.divergences is None or self.ranges is None):
            raise ValueError("divergences and ranges are both required when cost_tables is absent")
        return self


class CheckPropertiesSpec(_Spec):
    kind: Literal["check-properties"]
    shape: list[StepCount] = Field(min_length=1)
    F: GFPayload
    G: GFPayload = Field(default_factory=lambda: NaturalGF(variant="natural"))
    c: list[Annotated[float, Field(gt=0, allow_inf_nan=False)]] = Field(default=[0.5, 1.0, 2.0, 10.0], min_length=1)


ProblemSpec = Annotated[
    Union[
        RdChainSpec,
        RdBundleSpec,
        SolveUnconstrainedSpec,
        SolveAnchoredSpec,
        SolveLinearSpec,
        SolveHeightSpec,
        SolveSeparableSpec,
        SolveServerMixSpec,
        CheckPropertiesSpec,
    ],
    Field(discriminator="kind"),
]

_adapter = TypeAdapter(ProblemSpec)


def spec_json_schema() -> dict:
    return _adapter.json_schema()


# --------------------------------------------------------------------------
# building domain objects
# --------------------------------------------------------------------------

def build_gf(payload, shape: BundleShape, path: str) -> GradingFunction:
    try:
        if payload.variant == NATURAL:
            return GradingFunction.natural(shape)
        if payload.variant == HEIGHT:
            return GradingFunction.height_dependent(shape, payload.values, payload.mode)
        if payload.variant == SEPARABLE:
            return GradingFunction.separable(payload.tables, shape, payload.mode)
        try:
            table = np.array(payload.values, dtype=float)
        except (TypeError, ValueError):
            raise SpecError("schema", "tabulated values must be a rectangular nested list of numbers", f"{path}.values")
        if table.shape != shape.dims:
            raise SpecError("schema", f"tabulated values have shape {table.shape}, expected {shape.dims}", f"{path}.values")
        return GradingFunction.tabulated(shape, table, payload.mode)
    except SpecError:
        raise
    except ChaingradeError as exc:
        raise SpecError("semantic", str(exc), path) from None
    except ValueError as exc:
        raise SpecError("semantic", str(exc), path) from None


def gf_payload(gf: GradingFunction) -> dict:
    if gf.variant == NATURAL:
        return {"variant": "natural"}
    if gf.variant == SEPARABLE:
        return {"variant": "separable", "tables": [t.tolist() for t in gf.data], "mode": gf.mode}
    if gf.variant == HEIGHT:
        return {"variant": "height", "values": gf.data[0].tolist(), "mode": gf.mode}
    return {"variant": TABULATED, "values": gf.table.tolist(), "mode": gf.mode}


def _semantic(path: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except (ChaingradeError, ValueError) as exc:
        if isinstance(exc, SpecError):
            raise
        raise SpecError("semantic", str(exc), path) from None


def _factor_problem(f, path: str):
    if f.kind == "unconstrained":
        return _semantic(path, sv.UnconstrainedProblem, BundleShape((f.n,)), f.m, f.M)
    if f.kind == "anchored":
        return _semantic(path, sv.AnchoredProblem, f.n, tuple(f.anchors), f.m, f.mode)
    return _semantic(path, sv.LinearConstraintProblem, f.n, f.M, tuple(f.coefficients), f.target)


def build(spec) -> dict:
    """Domain objects for a validated spec; raises SpecError on semantic problems."""
    kind = spec.kind
    if kind == "rd-chain":
        if len(spec.F) != len(spec.G):
            raise SpecError("semantic", f"F has {len(spec.F)} values but G has {len(spec.G)}", "G")
        for name, vals in (("F", spec.F), ("G", spec.G)):
            if any(b < a for a, b in zip(vals, vals[1:])):
                raise SpecError("semantic", f"{name} violates monotonicity (values must be non-decreasing)", name)
        return {}
    if kind == "solve-anchored":
        return {"problem": _semantic("anchors", sv.AnchoredProblem, spec.n, tuple(spec.anchors), spec.m, spec.mode)}
    if kind == "solve-linear":
        return {"problem": _semantic("coefficients", sv.LinearConstraintProblem, spec.n, spec.M, tuple(spec.coefficients), spec.target)}
    if kind == "solve-separable":
        return {"problems": [_factor_problem(f, f"factors.{i}") for i, f in enumerate(spec.factors)]}
    if kind == "solve-server-mix":
        if spec.cost_tables is not None:
            for i, t in enumerate(spec.cost_tables):
                if any(b <= a for a, b in zip(t, t[1:])):
                    raise SpecError("semantic", "cost table violates monotonicity (must be strictly increasing)", f"cost_tables.{i}")
            return {"problem": _semantic("cost_tables", sv.ServerMixProblem.from_cost_tables, spec.cost_tables)}
        return {"problem": _semantic("ranges", sv.ServerMixProblem, tuple(spec.divergences), tuple(spec.ranges))}

    shape = _semantic("shape", BundleShape, tuple(spec.shape))
    out: dict = {"shape": shape}
    if kind in ("rd-bundle", "check-properties"):
        out["F"] = build_gf(spec.F, shape, "F")
        out["G"] = build_gf(spec.G, shape, "G")
    elif kind in ("solve-unconstrained", "solve-height"):
        if not spec.M > spec.m:
            raise SpecError("semantic", f"degenerate range: need M > m, got m = {spec.m}, M = {spec.M}", "M")
        if kind == "solve-height" and spec.coefficients is not None:
            out["constraint"] = _semantic(
                "coefficients", sv.LinearConstraintProblem,
                shape.total_steps, spec.M - spec.m, tuple(spec.coefficients), spec.target,
            )
    return out


def _location(errors: list) -> tuple[str, str]:
    err = errors[0]
    loc = [str(p) for p in err["loc"]]
    # drop the union-tag segment pydantic inserts for discriminated unions
    if loc and loc[0] in KINDS:
        loc = loc[1:]
    loc = [p for p in loc if p not in ("natural", "tabulated", "height", "separable", "unconstrained", "anchored", "linear")]
    if err["type"] in ("union_tag_invalid", "union_tag_not_found"):
        loc.append(str(err.get("ctx", {}).get("discriminator", "kind")).strip("'"))
    path = ".".join(loc) or "<root>"
    return path, f"{path}: {err['msg']}"


def parse_spec(text: str):
    """Parse and fully validate a spec document."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError("syntax", f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return validate_spec(raw)


def validate_spec(raw: Any):
    if not isinstance(raw, dict):
        raise SpecError("schema", "spec must be a JSON object", "<root>")
    try:
        spec = _adapter.validate_python(raw)
    except ValidationError as exc:
        path, msg = _location(exc.errors())
        raise SpecError("schema", msg, path) from None
    build(spec)
    return spec


# --------------------------------------------------------------------------
# running
# --------------------------------------------------------------------------

def _solution_block(sol: sv.MrdpSolution) -> tuple[dict, dict]:
    result = {"objective": sol.objective, "values": sol.values.tolist(), "boundary": sol.boundary}
    if sol.gf is not None:
        result["gf"] = gf_payload(sol.gf)
    if sol.factors:
        result["factors"] = [{"objective": f.objective, "values": f.values.tolist()} for f in sol.factors]
    diag = {"multipliers": dict(sol.multipliers), "iterations": sol.iterations}
    return result, diag


def _gf_oracle_block(sol: sv.MrdpSolution, ref_best: float | None, tol: float) -> dict:
    gf = sol.gf
    N = GradingFunction.natural(gf.shape)
    dp = rd_bundle_dp(gf, N).value
    block = {"objective": sol.objective, "dp": dp}
    agree = abs(dp - sol.objective) <= tol
    try:
        orc = rd_bundle_oracle(gf, N).value
        block["oracle"] = orc
        block["abs_diff"] = abs(orc - sol.objective)
        agree = agree and block["abs_diff"] <= tol
    except BudgetExceededError:
        block["oracle"] = None
        block["abs_diff"] = abs(dp - sol.objective)
    block["reference_best"] = ref_best
    if ref_best is not None:
        block["reference_dominated"] = ref_best <= sol.objective + tol
        agree = agree and block["reference_dominated"]
    block["agree"] = bool(agree)
    return block


def run_spec(spec, raw: Any = None, samples: int = 1000) -> dict:
    """Dispatch a validated spec; returns a result document."""
    if raw is None:
        raw = spec.model_dump(mode="json")
    doc: dict = {"kind": spec.kind, "status": "ok", "input": raw}
    opts = spec.options
    try:
        objs = build(spec)
        result, diag, oracle = _dispatch(spec, objs, opts, samples)
    except SpecError as exc:
        doc["status"] = "error"
        doc["error"] = exc.to_dict()
        return doc
    except InfeasibleError as exc:
        doc["status"] = "error"
        doc["error"] = {"category": "infeasible", "message": str(exc), "path": None}
        return doc
    except (BudgetExceededError, DegenerateRangeError) as exc:
        doc["status"] = "error"
        doc["error"] = {"category": "semantic", "message": str(exc), "path": None}
        return doc
    except ConvergenceError as exc:
        doc["status"] = "error"
        doc["error"] = {"category": "numerical", "message": str(exc), "path": None}
        return doc
    doc["result"] = result
    if diag:
        doc["diagnostics"] = diag
    if oracle is not None:
        doc["oracle"] = oracle
        if not oracle.get("agree", True):
            doc["status"] = "mismatch"
    if result.get("degenerate"):
        doc["status"] = "degenerate"
    if spec.kind == "check-properties" and not result["all_ok"]:
        doc["status"] = "mismatch"
    return doc


def _dispatch(spec, objs, opts, samples):
    kind = spec.kind
    tol = opts.tolerance
    rng = np.random.default_rng(opts.seed)

    if kind == "rd-chain":
        value = rd_chain(spec.F, spec.G)
        return {"value": value, "degenerate": value == -math.inf}, {}, None

    if kind == "rd-bundle":
        F, G = objs["F"], objs["G"]
        res = rd_bundle_dp(F, G)
        result = {"value": res.value, "degenerate": res.degenerate, "witness": res.steps}
        oracle = None
        if opts.oracle:
            orc = rd_bundle_oracle(F, G)
            diff = 0.0 if orc.value == res.value else abs(orc.value - res.value)
            oracle = {
                "dp": res.value, "oracle": orc.value, "abs_diff": diff,
                "oracle_witness": orc.steps, "agree": bool(diff <= tol),
            }
        return result, {"chains": objs["shape"].chain_count()}, oracle

    if kind == "check-properties":
        checks = []
        for c in spec.c:
            rep = check_scaling_identities(objs["F"], objs["G"], c)
            checks.extend({"name": ch.name, "c": ch.c, "lhs": ch.lhs, "rhs": ch.rhs, "ok": ch.ok} for ch in rep.checks)
        return {"checks": checks, "all_ok": all(ch["ok"] for ch in checks)}, {}, None

    if kind == "solve-unconstrained":
        shape = objs["shape"]
        sol = sv.solve_unconstrained(shape, spec.m, spec.M)
        result, diag = _solution_block(sol)
        oracle = None
        if opts.oracle:
            ref = reference_search(sv.UnconstrainedProblem(shape, spec.m, spec.M), sol, rng, samples)
            oracle = _gf_oracle_block(sol, ref, tol)
        return result, diag, oracle

    if kind == "solve-height":
        shape = objs["shape"]
        constraint = objs.get("constraint")
        sol = sv.solve_height_dependent(shape, spec.m, spec.M, constraint)
        result, diag = _solution_block(sol)
        oracle = None
        if opts.oracle:
            if constraint is None:
                ref = reference_search(sv.UnconstrainedProblem(shape, spec.m, spec.M), sol, rng, samples)
            else:
                ref = reference_search(constraint, sol, rng, samples)
            oracle = _gf_oracle_block(sol, ref, tol)
        return result, diag, oracle

    if kind in ("solve-anchored", "solve-linear"):
        p = objs["problem"]
        sol = sv.solve_anchored(p) if kind == "solve-anchored" else sv.solve_linear_constraint(p)
        result, diag = _solution_block(sol)
        oracle = None
        if opts.oracle:
            oracle = _gf_oracle_block(sol, reference_search(p, sol, rng, samples), tol)
        return result, diag, oracle

    if kind == "solve-separable":
        problems = objs["problems"]
        sol = sv.solve_separable(problems)
        ref = None
        if opts.oracle:
            ref = math.fsum(reference_search(p, f, rng, samples) for p, f in zip(problems, sol.factors))
        if spec.overhead is not None:
            sol = sv.add_linear_overhead(sol, spec.overhead.a0, spec.overhead.b0)
        result, diag = _solution_block(sol)
        oracle = None
        if opts.oracle:
            if spec.overhead is not None:
                # overhead is a post-hoc adjustment, not an optimum; nothing to dominate
                ref = None
            oracle = _gf_oracle_block(sol, ref, tol)
        return result, diag, oracle

    if kind == "solve-server-mix":
        p = objs["problem"]
        sol = sv.solve_server_mix(p)
        result, diag = _solution_block(sol)
        result["divergences"] = list(p.divergences)
        oracle = None
        if opts.oracle:
            ref = reference_search(p, sol, rng, samples)
            oracle = {
                "objective": sol.objective,
                "reference_best": ref,
                "reference_dominated": ref <= sol.objective + tol,
                "agree": bool(ref <= sol.objective + tol),
            }
        return result, diag, oracle

    raise SpecError("schema", f"unknown kind {kind!r}", "kind")


def error_document(exc: SpecError, raw: Any = None) -> dict:
    return {"kind": raw.get("kind") if isinstance(raw, dict) else None, "status": "error", "input": raw, "error": exc.to_dict()}


def exit_code(doc: dict) -> int:
    status = doc.get("status")
    if status == "ok":
        return EXIT_OK
    if status in ("degenerate", "mismatch"):
        return EXIT_NUMERIC
    if doc.get("error", {}).get("category") == "numerical":
        return EXIT_NUMERIC
    return EXIT_INPUT


# --------------------------------------------------------------------------
# formatting
# --------------------------------------------------------------------------

def format_real(x: float) -> str:
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return format(x, ".16e")


def _dump(obj: Any, indent: int) -> str:
    pad = " " * indent
    inner = " " * (indent + 2)
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format_real(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple)) for v in obj):
            return "[" + ", ".join(_dump(v, 0) for v in obj) + "]"
        return "[\n" + ",\n".join(inner + _dump(v, indent + 2) for v in obj) + "\n" + pad + "]"
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(str(k))}: {_dump(v, indent + 2)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _human_value(key: str, v: Any) -> str:
    if isinstance(v, bool) or v is None:
        return str(v).lower() if v is not None else "-"
    if isinstance(v, float):
        if v == -math.inf:
            return "-inf (degenerate)"
        return format(v, ".12g")
    if isinstance(v, list):
        if key.endswith("witness"):
            return "steps: " + " ".join(str(s) for s in v)
        return " ".join(_human_value("", x) if not isinstance(x, list) else "[" + _human_value("", x) + "]" for x in v)
    return str(v)


def _flatten(prefix: str, obj: Any, rows: list):
    if isinstance(obj, dict):
        for k, v in obj.items():
            _flatten(f"{prefix}.{k}" if prefix else str(k), v, rows)
    elif isinstance(obj, list) and obj and all(isinstance(x, dict) for x in obj):
        for i, x in enumerate(obj):
            _flatten(f"{prefix}[{i}]", x, rows)
    else:
        rows.append((prefix, _human_value(prefix, obj)))


def format_result(doc: dict, mode: str = "human") -> str:
    if mode == "machine":
        return _dump(doc, 0) + "\n"
    if mode != "human":
        raise ValueError(f"mode must be 'human' or 'machine', got {mode!r}")
    rows: list = []
    for key in ("kind", "status", "error", "result", "diagnostics", "oracle"):
        if key in doc:
            _flatten(key, doc[key], rows)
    width = max(len(k) for k, _ in rows)
    return "\n".join(f"{k.ljust(width)}  {v}" for k, v in rows) + "\n"
