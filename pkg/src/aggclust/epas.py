"""Randomized (1+eps)-approximation by scatter-bucket local search.

Fix a guess g_t of each scenario's cost. Keep k centers, one per slot, and
for every (slot, scenario) a bucket of (client, radius) requests; a slot's
center is always the lowest-index facility meeting all requests of its
buckets. While some scenario is too expensive, take a witness client that is
badly served, throw it into a random slot's bucket with a radius it must be
served within, and recompute that slot's center. If no facility can meet a
slot's requests the run fails and restarts. On metrics where long scatter
sequences cannot exist, a lucky sequence of slot choices ends in a
solution within (1+eps) of the guess, which happens with constant
probability per restart.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import INF, AggregateInstance, InstanceError, aggregate_cost
from .fpt import _slot_assignments, plesnik_cluster
from .metric import bucket_value
from .simplex import linprog
from .supplier import radius_guesses

BUCKET_CAP = 64
CLASS_CONST = 2.0
WITNESS_CONST = 10.0  # A_t keeps clients with d(v, X) >= eps * u(v) / (WITNESS_CONST * k)


@dataclass
class Budgets:
    restarts: int = 1000  # total scatter runs per call, shared by all guesses
    first_pass: int = 8  # runs per guess before moving to the next larger guess
    bucket_cap: int = BUCKET_CAP
    iter_cap: int | None = None  # default k * T * bucket_cap * class_cap
    class_const: float = CLASS_CONST


def radius_class_cap(eps: float, c: float = CLASS_CONST) -> int:
    return max(1, math.ceil(c / eps * max(1.0, math.log(1 / eps))))


@dataclass
class ScatterRun:
    success: bool
    centers: list  # facility positions, one per slot
    iterations: int
    insertions: list  # (slot, t, client_pos, radius, center_before, center_after, dist_before)
    max_bucket: int
    max_classes: int
    reason: str = ""


@dataclass
class EpasInfo:
    certified: bool
    guess: tuple | None
    guesses_tried: int
    restarts: int
    run: ScatterRun | None
    bucket_cap: int
    class_cap: int
    loop_eps: float
    notes: list = field(default_factory=list)


def compute_radius_bounds(inst: AggregateInstance, t: int, opt_t: float) -> np.ndarray:
    """Per-client upper bounds on the distance to an optimal center set.

    z = inf: opt_t / w(v). Finite z: twice the smallest r with
    w(B(v, r)) * r^z >= 3 opt_t^z, minimized exactly over the intervals
    between consecutive client distances. Zero-weight clients get inf.
    """
    w = inst.weights(t)
    if not (w > 0).any():
        raise InstanceError(f"scenario {t} has all-zero weights")
    C = list(inst.clients)
    z = inst.z
    if math.isinf(z):
        with np.errstate(divide="ignore"):
            return np.where(w > 0, opt_t / np.where(w > 0, w, 1), INF)
    D = inst.metric(t)[np.ix_(C, C)]
    need = 3.0 * opt_t**z
    u = np.full(len(C), INF)
    for a in range(len(C)):
        if w[a] <= 0:
            continue
        order = np.argsort(D[a], kind="stable")
        ds, ws = D[a][order], np.cumsum(w[order])
        best = INF
        for i in range(len(ds)):
            if math.isinf(ds[i]):
                break
            if i + 1 < len(ds) and ds[i + 1] == ds[i]:
                continue  # ball weight only jumps after the last tie
            r = max(ds[i], (need / ws[i]) ** (1 / z)) if need > 0 else ds[i]
            hi = ds[i + 1] if i + 1 < len(ds) else INF
            if r < hi or (r == ds[i]):
                best = min(best, r)
                break  # intervals are scanned left to right; first hit is minimal
        u[a] = 2 * best
    return u


def _scenario_lower_bound(inst: AggregateInstance, t: int) -> float:
    """LP lower bound on the single-scenario cost (exact trivial bound for z = inf)."""
    w = inst.weights(t)
    act = [c for c, wc in zip(inst.clients, w) if wc > 0]
    wa = w[w > 0]
    if not act:
        return 0.0
    F = list(inst.facilities)
    D = inst.metric(t)[np.ix_(act, F)]
    if math.isinf(inst.z):
        return float((wa[:, None] * D).min(axis=1).max())
    if np.isinf(D.min(axis=1)).any():
        return INF
    nC, nF = D.shape
    z = inst.z
    # variables: y (nF), x (nC * nF)
    nv = nF + nC * nF
    c = np.zeros(nv)
    cost = wa[:, None] * np.where(np.isinf(D), 0.0, D) ** z
    c[nF:] = cost.ravel()
    upper = [1.0] * nF + [0.0 if math.isinf(d) else 1.0 for d in D.ravel()]
    A_eq = np.zeros((nC, nv))
    for j in range(nC):
        A_eq[j, nF + j * nF: nF + (j + 1) * nF] = 1
    A_ub = np.zeros((nC * nF + 1, nv))
    for j in range(nC):
        for f in range(nF):
            A_ub[j * nF + f, nF + j * nF + f] = 1
            A_ub[j * nF + f, f] = -1
    A_ub[-1, :nF] = 1
    b_ub = np.zeros(nC * nF + 1)
    b_ub[-1] = inst.k
    res = linprog(c, A_ub, b_ub, A_eq, np.ones(nC), upper)
    if res.status != "optimal":
        return 0.0
    return max(0.0, float(res.value)) ** (1 / z)


def _greedy_upper(inst: AggregateInstance) -> float:
    F = sorted(inst.facilities)
    S = []
    for _ in range(min(inst.k, len(F))):
        best = min((aggregate_cost(inst, S + [f]).aggregate, f) for f in F if f not in S)
        S.append(best[1])
    return aggregate_cost(inst, S).aggregate


def cover_with_radii(inst: AggregateInstance, radii) -> list | None:
    """Center positions with d_t(v, X) <= 3 r_t(v) for every scenario, or None.

    Clusters every scenario greedily with the given per-client radii, then
    packs the clusters into k slots so that every slot's balls intersect.
    """
    F = list(inst.facilities)
    balls = []
    for t in range(inst.T):
        w = inst.weights(t)
        act = [(c, r) for c, wc, r in zip(inst.clients, w, radii[t]) if wc > 0 and not math.isinf(r)]
        if not act:
            balls.append([])
            continue
        m = inst.metric(t)
        pc = plesnik_cluster(m, [c for c, _ in act], [r for _, r in act])
        if len(pc.centers) > inst.k:
            return None
        bs = []
        for h in pc.centers:
            bits = [i for i, f in enumerate(F) if m[h, f] <= pc.radii[h] * (1 + 1e-12)]
            if not bits:
                return None
            bs.append(sum(1 << i for i in bits))
        balls.append(bs)
    for masks in _slot_assignments(balls, inst.k):
        X = [(mk & -mk).bit_length() - 1 for mk in masks]
        return _pad(X, inst.k, len(F))
    return None


def _pad(X, k, nF):
    X = list(X)
    for f in range(nF):
        if len(X) >= min(k, nF):
            break
        if f not in X:
            X.append(f)
    return X


@dataclass
class _Context:
    D: list  # per t: active clients x facilities
    w: list
    u: list
    g: tuple
    z: float
    k: int
    nF: int
    median: bool


def _scenario_costs(ctx, X):
    out, dists = [], []
    for D, w in zip(ctx.D, ctx.w):
        d = D[:, X].min(axis=1) if len(w) else np.zeros(0)
        dists.append(d)
        if not len(w):
            out.append(0.0)
        elif math.isinf(ctx.z):
            out.append(float((w * d).max()))
        else:
            with np.errstate(invalid="ignore"):
                out.append(float((w * d**ctx.z).sum()) ** (1 / ctx.z))
    return out, dists


def _scatter_run(ctx: _Context, X0, rng, eps_l, bucket_cap, class_cap, iter_cap) -> ScatterRun:
    k, T = ctx.k, len(ctx.D)
    X = list(X0)
    k = len(X)
    feasible = [np.ones(ctx.nF, dtype=bool) for _ in range(k)]
    buckets = {}
    classes = {}
    log = []
    base = math.log1p(eps_l)
    it = 0
    while True:
        costs, dists = _scenario_costs(ctx, X)
        # pick the witness
        if ctx.median:
            bad = [(costs[t] / ctx.g[t] if ctx.g[t] > 0 else INF, -t) for t in range(T)
                   if costs[t] > (1 + eps_l) * ctx.g[t] * (1 + 1e-12)]
            if not bad:
                return ScatterRun(True, X, it, log, _mx(buckets), _mx(classes))
            t = -max(bad)[1]
            d, w, u = dists[t], ctx.w[t], ctx.u[t]
            score = w * (d if math.isinf(ctx.z) else d**ctx.z)
            A = (d >= eps_l * u / (WITNESS_CONST * k)) & (score > 0)
            if not A.any():
                A = score > 0
            p = np.where(A, score, 0.0)
            if np.isinf(p).any():
                p = np.isinf(p).astype(float)
            v = int(rng.choice(len(p), p=p / p.sum()))
        else:
            best = None
            for t in range(T):
                if not len(ctx.w[t]):
                    continue
                viol = ctx.w[t] * dists[t] - (1 + eps_l) * ctx.g[t] * (1 + 1e-12)
                j = int(np.argmax(viol))
                if viol[j] > 0:
                    ratio = ctx.w[t][j] * dists[t][j] / ctx.g[t] if ctx.g[t] > 0 else INF
                    if best is None or ratio > best[0]:
                        best = (ratio, t, j)
            if best is None:
                return ScatterRun(True, X, it, log, _mx(buckets), _mx(classes))
            _, t, v = best
        if it >= iter_cap:
            return ScatterRun(False, X, it, log, _mx(buckets), _mx(classes), "iteration cap")
        it += 1
        dv = float(dists[t][v])
        if ctx.median and not math.isinf(ctx.z):
            r = dv / (1 + eps_l / 3)
        else:
            r = float(ctx.u[t][v])
        i = int(rng.integers(k))
        key = (i, t)
        buckets[key] = buckets.get(key, 0) + 1
        cls = classes.setdefault(key, set())
        cls.add(math.floor(math.log(r) / base) if r > 0 else -math.inf)
        before = X[i]
        feasible[i] &= ctx.D[t][v] <= r * (1 + 1e-12)
        hits = np.flatnonzero(feasible[i])
        after = int(hits[0]) if len(hits) else None
        log.append((i, t, v, r, before, after, float(ctx.D[t][v, before])))
        if buckets[key] > bucket_cap:
            return ScatterRun(False, X, it, log, _mx(buckets), _mx(classes), "bucket cap")
        if len(cls) > class_cap:
            return ScatterRun(False, X, it, log, _mx(buckets), _mx(classes), "radius classes")
        if after is None:
            return ScatterRun(False, X, it, log, _mx(buckets), _mx(classes), "no center")
        X[i] = after


def _mx(d):
    return max((len(v) if isinstance(v, set) else v for v in d.values()), default=0)


def _context(inst, g, median):
    D, w, u = [], [], []
    F = list(inst.facilities)
    for t in range(inst.T):
        wt = inst.weights(t)
        act = [c for c, wc in zip(inst.clients, wt) if wc > 0]
        D.append(inst.metric(t)[np.ix_(act, F)])
        w.append(wt[wt > 0])
        if act and not math.isinf(g[t]):
            u.append(compute_radius_bounds(inst, t, g[t])[wt > 0])
        else:
            u.append(np.full(len(act), INF))
    return _Context(D, w, u, tuple(g), inst.z, inst.k, len(F), median)


def _ordered_tuples(inst, per_t):
    grids = np.meshgrid(*[np.arange(len(v)) for v in per_t], indexing="ij")
    idx = np.stack([g.ravel() for g in grids], axis=1)
    tuples = [tuple(per_t[t][i] for t, i in enumerate(row)) for row in idx]
    psi = [inst.aggregator(g) for g in tuples]
    order = sorted(range(len(tuples)), key=lambda a: (psi[a], tuples[a]))
    return [tuples[a] for a in order]


def supplier_guess_plan(inst: AggregateInstance, eps: float, max_tuples: int = 200000):
    """Guess tuples (ascending aggregate) that pass the necessary cover test,
    each with its starting centers (lowest-index facilities)."""
    e = eps / 3
    per_t = [sorted({bucket_value(v, e) for v in radius_guesses(inst, t)}) for t in range(inst.T)]
    if math.prod(len(v) for v in per_t) > max_tuples:
        raise InstanceError("too many guess tuples for epas; raise max_tuples")
    X0 = _pad([], inst.k, len(inst.facilities))
    plan = []
    for g in _ordered_tuples(inst, per_t):
        radii = []
        for t in range(inst.T):
            w = inst.weights(t)
            with np.errstate(divide="ignore"):
                radii.append(np.where(w > 0, g[t] / np.where(w > 0, w, 1), INF))
        if cover_with_radii(inst, radii) is not None:
            plan.append((g, X0))
    return plan


def median_guess_plan(inst: AggregateInstance, eps: float, max_tuples: int = 200000):
    """Per-scenario geometric grids from an LP lower bound up to what the
    greedy solution allows, combined in ascending aggregate; a tuple is kept
    when the radius bounds it implies admit a cover, which also gives the
    starting centers."""
    rho = 1 + eps / 5
    U = _greedy_upper(inst)
    e_vec = [inst.aggregator([1.0 if s == t else 0.0 for s in range(inst.T)]) for t in range(inst.T)]
    per_t = []
    for t in range(inst.T):
        lb = _scenario_lower_bound(inst, t)
        hi = U / e_vec[t] if e_vec[t] > 0 else U
        if math.isinf(lb) or math.isinf(hi):
            per_t.append([INF])
            continue
        vals = [0.0] if lb <= 0 else []
        start = lb
        if start <= 0:
            w = inst.weights(t)
            D = inst.metric(t)[np.ix_(list(inst.clients), list(inst.facilities))][w > 0]
            wd = (w[w > 0][:, None] * D ** (1 if math.isinf(inst.z) else inst.z))
            pos = wd[(wd > 0) & np.isfinite(wd)]
            if not len(pos):
                per_t.append(vals)
                continue
            start = float(pos.min()) ** (1 if math.isinf(inst.z) else 1 / inst.z)
        v = start
        while True:
            vals.append(v)
            if v >= hi:
                break
            v *= rho
        per_t.append(vals)
    if math.prod(len(v) for v in per_t) > max_tuples:
        raise InstanceError("too many guess tuples for epas; raise max_tuples")
    plan = []
    for g in _ordered_tuples(inst, per_t):
        radii = []
        for t in range(inst.T):
            if math.isinf(g[t]) or not (inst.weights(t) > 0).any():
                radii.append(np.full(len(inst.clients), INF))
            else:
                radii.append(compute_radius_bounds(inst, t, g[t]))
        X0 = cover_with_radii(inst, radii)
        if X0 is not None:
            plan.append((g, X0))
    return plan


def _epas(inst, eps, seed, budgets, plan, median, loop_eps):
    """Spend ``budgets.restarts`` scatter runs over the ascending guess plan.

    First pass: every guess gets ``first_pass`` restarts until one succeeds.
    Then the remaining budget goes, in rounds of doubling allowance, to the
    cheaper guesses below the best success (nearest first), since a success
    there certifies a better bound.
    """
    budgets = budgets or Budgets()
    class_cap = radius_class_cap(eps, budgets.class_const)
    k = min(inst.k, len(inst.facilities))
    iter_cap = budgets.iter_cap or k * inst.T * budgets.bucket_cap * class_cap
    F = list(inst.facilities)
    state = {"key": None, "S": None, "left": budgets.restarts, "restarts": 0}
    used = [0] * len(plan)
    ctxs = {}

    def attempt(gi, count):
        if gi not in ctxs:
            ctxs[gi] = _context(inst, plan[gi][0], median)
        for _ in range(count):
            if state["left"] <= 0:
                return None
            rng = np.random.default_rng([seed, gi, used[gi]])
            used[gi] += 1
            state["left"] -= 1
            state["restarts"] += 1
            run = _scatter_run(ctxs[gi], plan[gi][1], rng, loop_eps, budgets.bucket_cap,
                               class_cap, iter_cap)
            S = tuple(sorted({F[x] for x in run.centers}))
            key = (aggregate_cost(inst, S).aggregate, S)
            if state["key"] is None or key < state["key"]:
                state["key"], state["S"] = key, S
            if run.success:
                return run
        return None

    found, found_gi = None, None
    for gi in range(len(plan)):
        if state["left"] <= 0:
            break
        run = attempt(gi, budgets.first_pass)
        if run is not None:
            found, found_gi = run, gi
            break
    if found is not None:
        allowance = budgets.first_pass
        while state["left"] > 0 and found_gi > 0:
            allowance *= 2
            improved = False
            for gi in range(found_gi - 1, -1, -1):
                if state["left"] <= 0:
                    break
                extra = allowance - used[gi]
                if extra <= 0:
                    continue
                run = attempt(gi, extra)
                if run is not None:
                    found, found_gi, improved = run, gi, True
                    break
            if not improved and all(used[gi] >= budgets.restarts for gi in range(found_gi)):
                break
    tried = sum(1 for u in used if u)
    if found is not None:
        S = tuple(sorted({F[x] for x in found.centers}))
        info = EpasInfo(True, plan[found_gi][0], tried, state["restarts"], found,
                        budgets.bucket_cap, class_cap, loop_eps)
        return S, aggregate_cost(inst, S), info
    S = state["S"] or tuple(sorted(F[x] for x in _pad([], inst.k, len(F))))
    info = EpasInfo(False, None, tried, state["restarts"], None, budgets.bucket_cap, class_cap,
                    loop_eps, ["no certificate: budgets exhausted"])
    return S, aggregate_cost(inst, S), info


def epas_supplier_unweighted(inst: AggregateInstance, eps: float = 0.2, seed: int = 0,
                             budgets: Budgets | None = None, guess_plan=None):
    """Return ``(S, CostReport, EpasInfo)``; certified runs are within
    (1 + eps/2)(1 + eps/3) <= 1 + eps of the aggregate optimum."""
    if not math.isinf(inst.z):
        raise InstanceError("epas supplier needs z = inf")
    for t in range(inst.T):
        w = inst.weights(t)
        if not np.all(w == 1):
            raise InstanceError("epas supplier needs unit weights")
    if guess_plan is None:
        guess_plan = supplier_guess_plan(inst, eps)
    return _epas(inst, eps, seed, budgets, guess_plan, median=False, loop_eps=eps / 2)


def epas_kmedian(inst: AggregateInstance, eps: float = 0.2, seed: int = 0,
                 budgets: Budgets | None = None, guess_plan=None):
    """Return ``(S, CostReport, EpasInfo)``; certified runs are within
    (1 + eps/2)(1 + eps/5) <= 1 + eps of the aggregate optimum."""
    if guess_plan is None:
        guess_plan = median_guess_plan(inst, eps)
    return _epas(inst, eps, seed, budgets, guess_plan, median=True, loop_eps=eps / 2)


def solve_epas(inst: AggregateInstance, eps: float = 0.2, seed: int = 0,
               budgets: Budgets | None = None, guess_plan=None):
    """Dispatch: unit-weight z = inf goes to the supplier variant, everything else to k-median."""
    unit = all(np.all(inst.weights(t) == 1) for t in range(inst.T))
    if math.isinf(inst.z) and unit:
        return epas_supplier_unweighted(inst, eps, seed, budgets, guess_plan)
    return epas_kmedian(inst, eps, seed, budgets, guess_plan)
