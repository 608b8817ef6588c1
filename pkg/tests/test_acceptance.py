"""Acceptance criteria 1-9, each run at its stated size and tolerance.

Every criterion prints one ``PASS``/``FAIL`` line (also repeated in the
pytest terminal summary). Run ``python tests/test_acceptance.py`` to get the
lines without pytest.
"""

import math
import time
from fractions import Fraction

import numpy as np
import pytest

from aggclust import INF, MAX, SUM, aggregate_cost, brute_force_opt, lp_norm, make_instance
from aggclust.core import reduce_01_generalized
from aggclust.epas import Budgets, median_guess_plan, solve_epas, supplier_guess_plan
from aggclust.fpt import solve_fpt_kt, solve_supplier_fpt_simple
from aggclust.generators import (gen_from_3dm, gen_from_hitting_set, gen_random,
                                 random_covered_hypergraph, random_hitting_set)
from aggclust.median import MedianTrace, Polytope, caratheodory_sample, solve_median_t2
from aggclust.oracle import brute_force_3dm, brute_force_hitting_set
from aggclust.supplier import solve_supplier_t2
from aggclust.treewidth import APPROX, EXACT, solve_treewidth_dp

RESULTS = []


def report(num, name, ok, detail, elapsed, limit):
    ok = ok and elapsed < limit
    line = f"{'PASS' if ok else 'FAIL'} criterion {num} ({name}): {detail}; {elapsed:.1f}s (limit {limit}s)"
    RESULTS.append(line)
    print(line)
    return ok


def frac(x):
    return Fraction(x) if not math.isinf(x) else None


def le_times(a, c, b):
    """a <= c * b in exact rational arithmetic (inf aware)."""
    if math.isinf(b):
        return True
    if math.isinf(a):
        return False
    return Fraction(a) <= Fraction(c) * Fraction(b)


def psi_le_3(psi, alg, opt):
    """Exact Psi(alg) <= 3 Psi(opt) on integer per-scenario costs."""
    a = [Fraction(v) for v in alg]
    b = [Fraction(v) for v in opt]
    if psi.kind == "sum":
        return sum(a) <= 3 * sum(b)
    if psi.kind == "max":
        return max(a) <= 3 * max(b)
    q = int(psi.q)
    return sum(x**q for x in a) <= 3**q * sum(x**q for x in b)


def test_criterion_1_3dm_equivalence():
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    good = 0
    yes = 0
    for _ in range(200):
        k = int(rng.integers(1, 5))
        h = random_covered_hypergraph(k, 12, rng)
        assert len(h.edges) <= 12
        inst = gen_from_3dm(h)
        assert inst.meta["covered"]
        zero = brute_force_opt(inst)[1].aggregate == 0
        match = brute_force_3dm(h) is not None
        good += zero == match
        yes += match
    ok = report(1, "3DM equivalence", good == 200, f"{good}/200 exact ({yes} with a matching)",
                time.perf_counter() - t0, 60)
    assert ok


def test_criterion_2_hitting_set_equivalence():
    rng = np.random.default_rng(202)
    t0 = time.perf_counter()
    good = yes = 0
    for _ in range(200):
        u = int(rng.integers(1, 11))
        m = int(rng.integers(1, 7))
        k = int(rng.integers(1, min(u, 4) + 1))
        h = random_hitting_set(u, m, k, rng)
        zero = brute_force_opt(gen_from_hitting_set(h))[1].aggregate == 0
        hit = brute_force_hitting_set(h) is not None
        good += zero == hit
        yes += hit
    ok = report(2, "hitting-set equivalence", good == 200, f"{good}/200 exact ({yes} hittable)",
                time.perf_counter() - t0, 30)
    assert ok


def test_criterion_3_supplier_t2():
    rng = np.random.default_rng(303)
    t0 = time.perf_counter()
    good = 0
    worst = 0.0
    aggs = [SUM, MAX, lp_norm(2)]
    for i in range(200):
        n = int(rng.integers(4, 17))
        k = int(rng.integers(1, 5))
        shape = ["line", "tree", "random_graph"][i % 3]
        # integer lengths and weights keep every cost an exact integer
        inst = gen_random(n, 2, k, 3000 + i, shape, z=INF, aggregator=aggs[i % 3],
                          weighted=i % 2 == 0, split=i % 4 == 3)
        S, rep = solve_supplier_t2(inst)
        _, opt = brute_force_opt(inst)
        per_ok = all(le_times(a, 3, b) for a, b in zip(rep.per_scenario, opt.per_scenario))
        agg_ok = psi_le_3(inst.aggregator, rep.per_scenario, opt.per_scenario)
        good += per_ok and agg_ok and len(S) <= inst.k
        if opt.aggregate > 0:
            worst = max(worst, rep.aggregate / opt.aggregate)
    ok = report(3, "supplier-t2 3x", good == 200, f"{good}/200 (worst aggregate ratio {worst:.3f})",
                time.perf_counter() - t0, 300)
    assert ok


def test_criterion_4_median_t2():
    rng = np.random.default_rng(404)
    t0 = time.perf_counter()
    good = 0
    worst = 0.0
    failed_checks = set()
    for i in range(200):
        n = int(rng.integers(3, 13))
        k = int(rng.integers(1, 4))
        shape = ["euclidean", "line", "tree", "random_graph"][i % 4]
        inst = gen_random(n, 2, k, 4000 + i, shape, weighted=i % 2 == 1, split=i % 5 == 4)
        trace = MedianTrace()
        S, rep = solve_median_t2(inst, check=False, trace=trace)
        _, opt = brute_force_opt(inst)
        lp = trace.lp_value
        vert_ok = all(np.abs(2 * v[:len(trace.frac.parent)] - np.round(2 * v[:len(trace.frac.parent)])).max() <= 1e-7
                      for v in trace.vertices_P)
        ok_run = (rep.aggregate <= 28 * lp * (1 + 1e-9) + 1e-9
                  and rep.aggregate <= 28 * opt.aggregate * (1 + 1e-9) + 1e-9
                  and lp <= opt.aggregate * (1 + 1e-9) + 1e-9
                  and all(trace.checks.values()) and vert_ok)
        failed_checks |= {name for name, v in trace.checks.items() if not v}
        good += ok_run
        if opt.aggregate > 0:
            worst = max(worst, rep.aggregate / opt.aggregate)
    detail = f"{good}/200 with all intermediate checks (worst ratio to OPT {worst:.3f})"
    if failed_checks:
        detail += f"; failed: {sorted(failed_checks)}"
    ok = report(4, "median-t2 28x", good == 200, detail, time.perf_counter() - t0, 600)
    assert ok


def test_criterion_5_fpt():
    rng = np.random.default_rng(505)
    t0 = time.perf_counter()
    good = 0
    n_sup = 0
    worst = [0.0, 0.0]
    for i in range(200):
        n = int(rng.integers(3, 15))
        k = int(rng.integers(1, 4))
        T = int(rng.integers(1, 4))
        z = [1, INF][i % 2]
        psi = [SUM, MAX][(i // 2) % 2]
        shape = ["euclidean", "line", "tree", "random_graph"][i % 4]
        inst = gen_random(n, T, k, 5000 + i, shape, z=z, aggregator=psi, weighted=i % 3 == 0,
                          split=i % 5 == 4)
        opt = brute_force_opt(inst)[1].aggregate
        agg = solve_fpt_kt(inst, 0.5)[1].aggregate
        ok_run = agg <= 3.5 * opt * (1 + 1e-12)
        if opt > 0:
            worst[0] = max(worst[0], agg / opt)
        if math.isinf(z):
            n_sup += 1
            agg2 = solve_supplier_fpt_simple(inst, 0.5)[1].aggregate
            ok_run = ok_run and agg2 <= 3.5 * opt * (1 + 1e-12)
            if opt > 0:
                worst[1] = max(worst[1], agg2 / opt)
        good += ok_run
    ok = report(5, "fpt 3.5x", good == 200,
                f"{good}/200 (worst fpt {worst[0]:.3f}, fpt-supplier {worst[1]:.3f} on {n_sup})",
                time.perf_counter() - t0, 600)
    assert ok


def test_criterion_6_epas():
    t0 = time.perf_counter()
    eps = 0.2
    budgets = Budgets(restarts=1000)
    rates = []
    cap_ok = True
    for i in range(20):
        shape = "line" if i < 10 else "tree"
        T = 1 + i % 2
        k = 1 + i % 3
        n = 8 + i % 5
        # alternate unit-weight k-supplier and k-median instances
        z = INF if i % 2 == 0 else 1
        inst = gen_random(n, T, k, 6000 + i, shape, z=z)
        opt = brute_force_opt(inst)[1].aggregate
        plan = (supplier_guess_plan if math.isinf(z) else median_guess_plan)(inst, eps)
        hits = 0
        for seed in range(50):
            S, rep, info = solve_epas(inst, eps, seed=seed, budgets=budgets, guess_plan=plan)
            if rep.aggregate <= (1 + eps) * opt * (1 + 1e-12):
                hits += 1
                if info.run is not None:
                    cap_ok &= info.run.max_bucket <= info.bucket_cap
                    cap_ok &= info.run.max_classes <= info.class_cap
        rates.append(hits / 50)
    good = sum(r >= 0.5 for r in rates)
    ok = report(6, "epas (1+eps)", good == 20 and cap_ok,
                f"{good}/20 instances at >= 50% (min rate {min(rates):.2f}); caps respected: {cap_ok}",
                time.perf_counter() - t0, 900)
    assert ok


def test_criterion_7_treewidth():
    rng = np.random.default_rng(707)
    t0 = time.perf_counter()
    exact_good = approx_good = 0
    total = 0
    for i in range(120):
        if i < 100:
            n = int(rng.integers(3, 19))
            T = int(rng.integers(1, 3))
            k = int(rng.integers(1, 4))
            z = [1, 2, INF][i % 3]
            inst = gen_random(n, T, k, 7000 + i, "tree", z=z, weighted=i % 4 == 0,
                              split=i % 5 == 4)
        else:
            n = int(rng.integers(3, 9))
            k = int(rng.integers(1, 4))
            inst = gen_random(n, 1, k, 7000 + i, "two_tree", z=[1, 2, INF][i % 3])
        total += 1
        opt = brute_force_opt(inst)[1].aggregate
        trace = {}
        _, rep = solve_treewidth_dp(inst, mode=EXACT, trace=trace)
        exact_good += rep.aggregate == opt and math.isclose(trace["dp_value"], opt, rel_tol=1e-9)
        _, rep = solve_treewidth_dp(inst, mode=APPROX, eps=0.25)
        approx_good += opt <= rep.aggregate <= 1.25 * opt * (1 + 1e-12)
    ok = report(7, "treewidth DP", exact_good == 120 and approx_good == 120,
                f"exact {exact_good}/120, approx(0.25) {approx_good}/120",
                time.perf_counter() - t0, 600)
    assert ok


def test_criterion_8_cross_solver():
    rng = np.random.default_rng(808)
    t0 = time.perf_counter()
    bad = []
    carath = 0
    runs = 0
    for i in range(60):
        n = int(rng.integers(4, 10))
        k = int(rng.integers(1, 4))
        median_case = i % 2 == 0
        inst = gen_random(n, 2, k, 8000 + i, "tree", z=1 if median_case else INF)
        opt = brute_force_opt(inst)[1].aggregate
        costs = {"fpt": solve_fpt_kt(inst)[1].aggregate,
                 "epas": solve_epas(inst, 0.2, seed=i, budgets=Budgets(restarts=100))[1].aggregate,
                 "treewidth": solve_treewidth_dp(inst)[1].aggregate}
        lp = -INF
        if median_case:
            trace = MedianTrace()
            costs["median-t2"] = solve_median_t2(inst, trace=trace)[1].aggregate
            lp = trace.lp_value
            runs += 1
            carath += all(h <= 2 * s * (1 + 1e-7) + 1e-9 for h, s in zip(trace.W_half, trace.W_seed))
            carath += all(h <= 2 * s * (1 + 1e-7) + 1e-9 for h, s in zip(trace.A_int, trace.A_half))
            if lp > opt * (1 + 1e-9) + 1e-9:
                bad.append((i, "lp", lp, opt))
        else:
            costs["supplier-t2"] = solve_supplier_t2(inst)[1].aggregate
            costs["fpt-supplier"] = solve_supplier_fpt_simple(inst)[1].aggregate
        for name, c in costs.items():
            if c < opt or c < lp * (1 - 1e-9):
                bad.append((i, name, c, opt))
    # Caratheodory sampling on random polytopes
    for i in range(100):
        d = int(rng.integers(2, 7))
        A = rng.integers(-2, 3, size=(3, d)).astype(float)
        p = rng.random(d) * 0.5
        b = A @ p + rng.random(3)
        P = Polytope(A, b, np.zeros((0, d)), np.zeros(0), np.ones(d))
        W1, W2 = rng.random(d), rng.random(d)
        q, _ = caratheodory_sample(P, p, W1, W2)
        carath += W1 @ q <= 2 * (W1 @ p) + 1e-9 and W2 @ q <= 2 * (W2 @ p) + 1e-9
    want = 2 * runs + 100
    ok = report(8, "cross-solver sanity", not bad and carath == want,
                f"{len(bad)} cost violations over 60 instances; sampling bound {carath}/{want}",
                time.perf_counter() - t0, 600)
    assert ok, bad


def test_criterion_9_reduction():
    rng = np.random.default_rng(909)
    t0 = time.perf_counter()
    good = 0
    for i in range(100):
        n = int(rng.integers(2, 9))
        T = int(rng.integers(1, 4))
        k = int(rng.integers(1, min(n, 3) + 1))
        base = gen_random(n, T, k, 9000 + i, ["line", "tree", "euclidean"][i % 3],
                          z=[1, 2, INF][i % 3], aggregator=[SUM, MAX, lp_norm(2)][(i // 3) % 3])
        w = [rng.integers(0, 2, size=n).astype(float) for _ in range(T)]
        inst = make_instance([base.metric(t) for t in range(T)], k, z=base.z,
                             aggregator=base.aggregator, weights=w)
        red = reduce_01_generalized(inst)
        a = brute_force_opt(inst)[1].aggregate
        b = brute_force_opt(red.instance)[1].aggregate
        good += a == b
    ok = report(9, "0/1 reduction", good == 100, f"{good}/100 exact", time.perf_counter() - t0, 60)
    assert ok


if __name__ == "__main__":
    import sys

    fails = 0
    for name, fn in list(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                fn()
            except AssertionError:
                fails += 1
    sys.exit(1 if fails else 0)
