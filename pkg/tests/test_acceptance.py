"""Exit criteria.  Each test records one PASS/FAIL line shown in the terminal summary."""
import json
import math
import subprocess
import sys

import numpy as np
from chaingrade import (
    AnchoredProblem,
    BundleShape,
    GradingFunction,
    InfeasibleError,
    LinearConstraintProblem,
    ServerMixProblem,
    objective_server_mix,
    rd_bundle_dp,
    rd_bundle_oracle,
    solve_anchored,
    solve_linear_constraint,
    solve_server_mix,
    solve_unconstrained,
)
from chaingrade.corpus import EXAMPLES
from chaingrade.divergence import rd_on_chain
from chaingrade.solvers import lagrange_residuals_linear, lagrange_residuals_server_mix

from conftest import all_shapes, direct_rd, monotone_table, neg_xlogx, record


def test_closed_form_unconstrained():
    worst = 0.0
    for n in range(2, 11):
        for M in (0.5, 1.0, 3.0):
            sol = solve_unconstrained(BundleShape((n,)), 0.0, M)
            expected = M * math.log(n) - M * math.log(M)
            worst = max(worst, abs(sol.objective - expected))
            # the returned function evaluated directly must give the same value
            worst = max(worst, abs(direct_rd(sol.values, range(n + 1)) - expected))
    record("closed-form unconstrained optimum (1e-12)", worst <= 1e-12, f"max err {worst:.2e}")


def _random_anchored(rng):
    n = int(rng.integers(1, 7))
    k = int(rng.integers(0, n))
    inner = sorted(rng.choice(np.arange(1, n), size=k, replace=False).tolist()) if n > 1 else []
    pos = inner + [n]
    vals = np.cumsum(rng.uniform(0.05, 2.0, size=len(pos)))
    return AnchoredProblem(n, tuple(zip(pos, vals.tolist())))


def _interpolations(p, rng, count):
    out = np.empty((count, p.n + 1))
    for (k0, v0), (k1, v1) in zip(p.anchors, p.anchors[1:]):
        w = rng.dirichlet(np.ones(k1 - k0), size=count)
        out[:, k0] = v0
        out[:, k0 + 1:k1 + 1] = v0 + (v1 - v0) * np.cumsum(w, axis=1)
        out[:, k1] = v1
    return out


def test_anchored_dominance():
    rng = np.random.default_rng(2)
    violations = 0
    ties_off_optimum = 0
    for _ in range(50):
        p = _random_anchored(rng)
        sol = solve_anchored(p)
        vals = _interpolations(p, rng, 1000)
        objs = neg_xlogx(np.diff(vals, axis=1)).sum(axis=1)
        violations += int(np.sum(objs > sol.objective + 1e-12))
        off = np.max(np.abs(vals - sol.values), axis=1) > 1e-9
        ties_off_optimum += int(np.sum(off & (objs >= sol.objective)))
    ok = violations == 0 and ties_off_optimum == 0
    record("anchored optimum dominates 50x1000 interpolations", ok,
           f"{violations} beaten, {ties_off_optimum} ties away from optimum")


def test_dp_equals_oracle():
    rng = np.random.default_rng(3)
    shapes = all_shapes(8, 3)
    worst = 0.0
    worst_witness = 0.0
    for i in range(200):
        shape = shapes[i % len(shapes)]
        weak = i % 3 == 0
        F = GradingFunction.tabulated(shape, monotone_table(shape.dims, rng, weak), "weak" if weak else "strict")
        G = GradingFunction.tabulated(shape, monotone_table(shape.dims, rng))
        dp = rd_bundle_dp(F, G)
        orc = rd_bundle_oracle(F, G)
        worst = max(worst, abs(dp.value - orc.value))
        worst_witness = max(worst_witness, abs(rd_on_chain(F, G, dp.witness) - dp.value))
    ok = worst <= 1e-10 and worst_witness <= 1e-10
    record("DP = oracle on 200 pairs, K<=8, R<=3 (1e-10)", ok,
           f"max |dp-oracle| {worst:.2e}, witness err {worst_witness:.2e}")


def _random_sub_shape(rng):
    return BundleShape(tuple(int(x) for x in rng.integers(1, 4, size=int(rng.integers(1, 3)))))


def test_separable_sum_rule():
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(100):
        U, V = _random_sub_shape(rng), _random_sub_shape(rng)
        W = BundleShape(U.steps + V.steps)
        FU, FV, GU, GV = (monotone_table(s.dims, rng) for s in (U, V, U, V))
        expand_u = (slice(None),) * U.R + (None,) * V.R
        expand_v = (None,) * U.R + (slice(None),) * V.R
        F = GradingFunction.tabulated(W, FU[expand_u] + FV[expand_v])
        G = GradingFunction.tabulated(W, GU[expand_u] + GV[expand_v])
        whole = rd_bundle_oracle(F, G).value
        parts = (rd_bundle_oracle(GradingFunction.tabulated(U, FU), GradingFunction.tabulated(U, GU)).value
                 + rd_bundle_oracle(GradingFunction.tabulated(V, FV), GradingFunction.tabulated(V, GV)).value)
        worst = max(worst, abs(whole - parts))
    record("separable bundle divergence = sum of factors, by oracle (1e-9)", worst <= 1e-9, f"max err {worst:.2e}")


def test_geometric_recovery():
    c = tuple(range(1, 11))
    spreads = {}
    uniform_err = None
    for mu in (2.0, 3.0, 5.5, 8.0):
        sol = solve_linear_constraint(LinearConstraintProblem(10, 1.0, c, mu))
        f = sol.increments
        ratios = f[1:] / f[:-1]
        spreads[mu] = float(np.ptp(ratios))
        if mu == 5.5:
            uniform_err = float(np.max(np.abs(ratios - 1.0)))
    ok = max(spreads.values()) <= 1e-9 and uniform_err <= 1e-9
    record("geometric increments for c_i = i (1e-9)", ok,
           f"max ratio spread {max(spreads.values()):.2e}, mu=5.5 |ratio-1| {uniform_err:.2e}")


def test_feasibility_gate():
    c = (1.0, 2.0, 2.0, 4.0)
    M = 2.0
    rejected = 0
    for mu in (M * 0.99, M * 4.01, -3.0, 100.0):
        try:
            solve_linear_constraint(LinearConstraintProblem(4, M, c, mu))
        except InfeasibleError:
            rejected += 1
    low = solve_linear_constraint(LinearConstraintProblem(4, M, c, M * 1.0))
    high = solve_linear_constraint(LinearConstraintProblem(4, M, c, M * 4.0))
    ok = (
        rejected == 4
        and low.boundary and high.boundary
        and np.allclose(low.increments, [2, 0, 0, 0])
        and np.allclose(high.increments, [0, 0, 0, 2])
    )
    record("feasibility gate and boundary limits", ok, f"{rejected}/4 rejected")


def test_linear_transformation_identities():
    rng = np.random.default_rng(5)
    worst = 0.0
    for i in range(50):
        shape = _random_sub_shape(rng)
        F = GradingFunction.tabulated(shape, monotone_table(shape.dims, rng))
        G = GradingFunction.tabulated(shape, monotone_table(shape.dims, rng))
        N = GradingFunction.natural(shape)
        m, M = F.extremes()
        base = rd_bundle_oracle(F, G).value
        base_n = rd_bundle_oracle(F, N).value
        for c in (0.5, 1.0, 2.0, 10.0):
            worst = max(
                worst,
                abs(rd_bundle_oracle(F + c, G + c).value - base),
                abs(rd_bundle_oracle(F * c, G * c).value - c * base),
                abs(rd_bundle_oracle(F * c, N).value - (c * base_n - c * (M - m) * math.log(c))),
            )
    record("shift / scale identities, c in {0.5,1,2,10}, 50 inputs (1e-9)", worst <= 1e-9, f"max err {worst:.2e}")


def test_server_mix():
    rng = np.random.default_rng(6)
    worst_closed = 0.0
    beaten = 0
    for _ in range(20):
        R = int(rng.integers(2, 7))
        D = rng.normal(size=R) * 1.5
        spread = float(rng.uniform(0.2, 4))
        p = ServerMixProblem(tuple(D), tuple((1.0, 1.0 + spread) for _ in range(R)))
        sol = solve_server_mix(p)
        q = math.exp(1.0 / spread)
        closed = np.array([q ** d for d in D])
        closed /= closed.sum()
        worst_closed = max(worst_closed, float(np.max(np.abs(sol.values - closed))))
        for x in rng.dirichlet(np.ones(R), size=1000):
            beaten += objective_server_mix(x, p) > sol.objective + 1e-12
    single = solve_server_mix(ServerMixProblem((0.3,), ((0.0, 1.0),))).values.tolist() == [1.0]
    sym = solve_server_mix(ServerMixProblem((0.8,) * 4, ((0.0, 2.0),) * 4)).values.tolist() == [0.25] * 4
    ok = worst_closed <= 1e-10 and beaten == 0 and single and sym
    record("server mix: closed form (1e-10), dominance, R=1 and symmetric cases", ok,
           f"closed-form err {worst_closed:.2e}, beaten {beaten}, R=1 {single}, symmetric {sym}")


def test_lagrange_residuals():
    rng = np.random.default_rng(7)
    worst_lin = 0.0
    worst_mix = 0.0
    for _ in range(50):
        n = int(rng.integers(2, 11))
        c = rng.normal(size=n) * 2
        M = float(rng.uniform(0.3, 4))
        mu = M * (c.min() + rng.uniform(0.05, 0.95) * (c.max() - c.min()))
        p = LinearConstraintProblem(n, M, tuple(c), mu)
        sol = solve_linear_constraint(p)
        worst_lin = max(worst_lin, float(np.max(np.abs(lagrange_residuals_linear(p, sol)))))
        R = int(rng.integers(2, 7))
        lo = rng.normal(size=R)
        q = ServerMixProblem(tuple(rng.normal(size=R)), tuple(zip(lo, lo + rng.uniform(0.1, 3, size=R))))
        worst_mix = max(worst_mix, float(np.max(np.abs(lagrange_residuals_server_mix(q, solve_server_mix(q))))))
    ok = worst_lin <= 1e-8 and worst_mix <= 1e-8
    record("stationarity residuals of interior solutions (1e-8)", ok,
           f"linear {worst_lin:.2e}, server mix {worst_mix:.2e}")


def _cli(path):
    proc = subprocess.run(
        [sys.executable, "-m", "chaingrade", "run", str(path), "--mode", "machine"],
        capture_output=True,
    )
    return proc.returncode, proc.stdout


def test_cli_determinism_and_round_trip(tmp_path):
    identical = True
    worst = 0.0
    checked = set()
    for name, spec in EXAMPLES.items():
        path = tmp_path / name
        path.write_text(json.dumps(spec))
        code1, out1 = _cli(path)
        code2, out2 = _cli(path)
        identical &= out1 == out2 and code1 == code2
        doc = json.loads(out1)
        gf = doc.get("result", {}).get("gf")
        if gf is None:
            continue
        shape = [len(t) - 1 for t in gf["tables"]] if gf["variant"] == "separable" else doc["input"].get("shape") or [doc["input"]["n"]]
        if gf["variant"] == "separable":
            table = sum(np.array(t).reshape([-1 if j == i else 1 for j in range(len(shape))])
                        for i, t in enumerate(gf["tables"]))
        else:
            table = np.array(gf["values"])[np.indices([s + 1 for s in shape]).sum(axis=0)]
        again = {
            "kind": "rd-bundle",
            "shape": shape,
            "F": {"variant": "tabulated", "values": table.tolist(), "mode": gf["mode"]},
        }
        again_path = tmp_path / ("again-" + name)
        again_path.write_text(json.dumps(again))
        code, out = _cli(again_path)
        value = json.loads(out)["result"]["value"]
        worst = max(worst, abs(value - doc["result"]["objective"]))
        checked.add(name.removesuffix(".json"))
    expected = {"solve-unconstrained", "solve-anchored", "solve-linear-geometric", "solve-height", "solve-separable"}
    ok = identical and worst <= 1e-9 and checked == expected
    record("CLI byte-identical reruns and solver round-trip (1e-9)", ok,
           f"identical {identical}, {len(checked)} re-ingested, max err {worst:.2e}")
