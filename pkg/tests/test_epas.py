import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from aggclust import INF, InstanceError, brute_force_opt, make_instance
from aggclust.epas import (Budgets, compute_radius_bounds, cover_with_radii, epas_kmedian,
                           epas_supplier_unweighted, median_guess_plan, radius_class_cap,
                           solve_epas, supplier_guess_plan)
from aggclust.generators import gen_random

from conftest import tri2


def radius_bound_oracle(inst, t, opt):
    """2 * min r with w(B(v, r)) * r^z >= 3 opt^z, by scanning every candidate r."""
    C = list(inst.clients)
    z = inst.z
    w = inst.weights(t)
    D = inst.metric(t)[np.ix_(C, C)]
    out = []
    for a in range(len(C)):
        cands = set(D[a][np.isfinite(D[a])].tolist())
        for W in np.cumsum(np.sort(w)):  # any achievable prefix weight, plus every ball weight
            cands.add((3 * opt**z / W) ** (1 / z))
        for r in D[a]:
            Wb = w[D[a] <= r].sum()
            if Wb > 0:
                cands.add((3 * opt**z / Wb) ** (1 / z))
        ok = [r for r in cands if w[D[a] <= r].sum() * r**z >= 3 * opt**z * (1 - 1e-12)]
        out.append(2 * min(ok))
    return np.array(out)


def test_radius_bound_zinf():
    m = np.array([[0, 1], [1, 0.0]])
    inst = make_instance([m], 1, z=INF, weights=[[2.0, 1.0]])
    assert compute_radius_bounds(inst, 0, 6)[0] == 3


def test_radius_bound_single_heavy_client():
    m = np.zeros((1, 1))
    inst = make_instance([m], 1, weights=[[4.0]])
    assert compute_radius_bounds(inst, 0, 2)[0] == pytest.approx(2 * 3 * 2 / 4)
    assert compute_radius_bounds(inst, 0, 2) == pytest.approx(radius_bound_oracle(inst, 0, 2))


def test_radius_bound_uniform_metric():
    m = np.ones((9, 9)) - np.eye(9)
    inst = make_instance([m], 2)
    got = compute_radius_bounds(inst, 0, 2.0)
    assert got == pytest.approx(radius_bound_oracle(inst, 0, 2.0))
    # B(v, 1) holds all 9 clients, 9 * 1 >= 6; below 1 only v itself: r = 6 is not < 1
    assert got[0] == 2


@given(st.integers(0, 10_000), st.sampled_from([1, 2]), st.floats(0.1, 50))
def test_radius_bound_matches_scan(seed, z, opt):
    inst = gen_random(7, 1, 2, seed, "tree", z=z, weighted=True)
    assert compute_radius_bounds(inst, 0, opt) == pytest.approx(radius_bound_oracle(inst, 0, opt))


def test_radius_bound_zero_weights():
    inst = make_instance([np.zeros((2, 2))], 1, weights=[[0.0, 0.0]])
    with pytest.raises(InstanceError):
        compute_radius_bounds(inst, 0, 1.0)


def test_all_open_immediate_success():
    inst = gen_random(6, 2, 6, 0, "line", z=INF)
    S, rep, info = epas_supplier_unweighted(inst, 0.2, seed=0)
    assert info.certified and info.run.iterations == 0 and rep.aggregate == 0


def test_uniform_metric_immediate_success():
    m = np.ones((6, 6)) - np.eye(6)
    inst = make_instance([m, m], 2, z=INF)
    plan = [((1.0, 1.0), [0, 1])]
    S, rep, info = epas_supplier_unweighted(inst, 0.2, seed=3, guess_plan=plan)
    assert info.certified and info.run.iterations == 0


def test_supplier_preconditions():
    with pytest.raises(InstanceError):
        epas_supplier_unweighted(tri2())
    inst = gen_random(5, 1, 1, 0, "line", z=INF, weighted=True)
    with pytest.raises(InstanceError):
        epas_supplier_unweighted(inst)


def test_zero_cost_median():
    m = np.array([[0, 0, 5], [0, 0, 5], [5, 5, 0.0]])
    inst = make_instance([m, 2 * m], 2)
    S, rep, info = epas_kmedian(inst, 0.2, seed=0)
    assert rep.aggregate == 0 and info.certified


def test_tri2_median():
    inst = tri2()
    hits = 0
    for seed in range(20):
        _, rep, _ = epas_kmedian(inst, 0.2, seed=seed, budgets=Budgets(restarts=1000))
        hits += rep.aggregate <= 1.2 * 5
    assert hits >= 10


def test_t1_single_metric():
    inst = gen_random(8, 1, 2, 3, "line")
    opt = brute_force_opt(inst)[1].aggregate
    S, rep, info = solve_epas(inst, 0.2, seed=1)
    assert info.certified
    assert rep.aggregate <= 1.2 * opt * (1 + 1e-12)
    assert {key[1] for key in _bucket_keys(info.run)} <= {0}


def _bucket_keys(run):
    return {(i, t) for i, t, *_ in run.insertions}


def test_determinism():
    inst = gen_random(8, 2, 2, 5, "line")
    a = solve_epas(inst, 0.2, seed=11)
    b = solve_epas(inst, 0.2, seed=11)
    assert a[0] == b[0] and a[2].restarts == b[2].restarts


def check_run_log(inst, run, eps_l, median):
    """Scatter property and center validity, replayed from the insertion log."""
    F = list(inst.facilities)
    C = list(inst.clients)
    entries = {}
    for i, t, v, r, before, after, dist_before in run.insertions:
        d = inst.metric(t)
        prev = entries.setdefault(i, [])
        # the center in force covered every earlier request of its slot
        for t2, v2, r2 in prev:
            assert inst.metric(t2)[C[v2], F[before]] <= r2 * (1 + 1e-9)
        assert dist_before == d[C[v], F[before]]
        if median and not math.isinf(inst.z):
            assert dist_before >= (1 + eps_l / 3) * r * (1 - 1e-12) and dist_before > r
        else:
            assert dist_before > (1 + eps_l) * r
        prev.append((t, v, r))
        if after is not None:
            for t2, v2, r2 in prev:
                assert inst.metric(t2)[C[v2], F[after]] <= r2 * (1 + 1e-9)
    per_bucket = {}
    for i, t, v, r, *_ in run.insertions:
        per_bucket.setdefault((i, t), []).append(r)
    return per_bucket


def test_bucket_logs():
    seen = 0
    for seed in range(12):
        z = INF if seed % 2 else 1
        inst = gen_random(10, 2, 2, seed, "line" if seed % 3 else "tree", z=z)
        S, rep, info = solve_epas(inst, 0.2, seed=seed)
        if info.run is None:
            continue
        seen += 1
        buckets = check_run_log(inst, info.run, info.loop_eps, median=not math.isinf(z))
        assert all(len(v) <= info.bucket_cap for v in buckets.values())
        assert info.run.max_classes <= info.class_cap
    assert seen >= 8


def test_class_cap_formula():
    assert radius_class_cap(0.2) == math.ceil(2 / 0.2 * math.log(5))
    assert radius_class_cap(0.9) == math.ceil(2 / 0.9)


def test_injected_true_guess_supplier():
    for seed in range(5):
        inst = gen_random(9, 2, 2, seed, "line", z=INF)
        _, opt = brute_force_opt(inst)
        plan = [(tuple(opt.per_scenario), [0, 1])]
        S, rep, info = epas_supplier_unweighted(inst, 0.2, seed=seed, guess_plan=plan,
                                                budgets=Budgets(restarts=200, first_pass=200))
        assert info.certified


def test_injected_true_guess_median():
    for seed in range(5):
        inst = gen_random(8, 2, 2, seed, "tree")
        _, opt = brute_force_opt(inst)
        g = tuple(opt.per_scenario)
        radii = [compute_radius_bounds(inst, t, g[t]) for t in range(2)]
        X0 = cover_with_radii(inst, radii)
        assert X0 is not None
        S, rep, info = epas_kmedian(inst, 0.2, seed=seed, guess_plan=[(g, X0)],
                                    budgets=Budgets(restarts=200, first_pass=200))
        assert info.certified


def test_cover_with_radii_bound():
    for seed in range(10):
        inst = gen_random(9, 2, 2, seed, "euclidean")
        _, opt = brute_force_opt(inst)
        radii = [compute_radius_bounds(inst, t, opt.per_scenario[t]) for t in range(2)]
        X = cover_with_radii(inst, radii)
        assert X is not None
        for t in range(2):
            d = inst.metric(t)[np.ix_(list(inst.clients), [inst.facilities[x] for x in X])]
            assert (d.min(axis=1) <= 3 * radii[t] * (1 + 1e-9)).all()


def test_plans_are_ascending():
    inst = gen_random(8, 2, 2, 1, "line", z=INF)
    plan = supplier_guess_plan(inst, 0.2)
    psi = [sum(g) for g, _ in plan]
    assert psi == sorted(psi)
    inst = gen_random(8, 2, 2, 1, "line")
    plan = median_guess_plan(inst, 0.2)
    psi = [sum(g) for g, _ in plan]
    assert psi == sorted(psi) and plan


def test_no_certificate_flag():
    inst = gen_random(10, 2, 3, 2, "line")
    S, rep, info = epas_kmedian(inst, 0.2, seed=0, budgets=Budgets(restarts=1, iter_cap=1))
    if not info.certified:
        assert "no certificate" in info.notes[0]
    assert len(S) <= 3
