"""(3+eps)-approximation parameterized by k and T, plus a k-supplier variant.

Each optimal center o_i is pinned down, in every scenario t, by a leader
client and a radius: the ball around the leader contains o_i. Intersecting
those balls over all scenarios gives a facility set F_i, and any member of
F_i serves the cluster about as well as o_i does (within 3+eps).

Guesses for different slots are independent, so rather than enumerating all
(leader, radius) tuples per slot we compute the set of facilities that can be
the lowest-index member of some guessed F_i, then try every k-subset of that
set. This reaches exactly the solutions the full enumeration would reach.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations, product

import numpy as np

from .core import INF, AggregateInstance, InstanceError, aggregate_cost
from .metric import bucket_value
from .oracle import batch_aggregate, batch_costs, best_of
from .supplier import radius_guesses

IDENTITY, SAMPLED = "identity", "sampled"
DEFAULT_MAX_GUESSES = 2_000_000


@dataclass
class CoresetScenario:
    clients: list  # point indices
    weights: np.ndarray
    mode: str
    verified: bool | None = None  # None: not checked (too many subsets)
    attempts: int = 0


@dataclass
class PlesnikClustering:
    centers: list
    clusters: dict  # center -> sorted members
    radii: dict  # client -> radius

    def separated(self, m) -> bool:
        c = self.centers
        return all(m[a, b] > self.radii[a] + self.radii[b]
                   for i, a in enumerate(c) for b in c[i + 1:])


def _cost_powered(D, w, z):
    """Per-candidate z-th power cost from a clients x candidates distance matrix."""
    if math.isinf(z):
        return (w[:, None] * D).max(axis=0)
    return (w[:, None] * D**z).sum(axis=0)


def _verify_coreset(inst, t, clients, weights, eps, cap):
    F = list(inst.facilities)
    k = min(inst.k, len(F))
    total = sum(math.comb(len(F), s) for s in range(1, k + 1))
    if total > cap:
        return None
    m = inst.metric(t)
    w = inst.weights(t)
    pos = w > 0
    Dfull = m[np.ix_(list(inst.clients), F)][pos]
    wfull = w[pos]
    Dcore = m[np.ix_(clients, F)]
    z = inst.z
    for s in range(1, k + 1):
        combos = np.array(list(combinations(range(len(F)), s)), dtype=int)
        true = _cost_powered(Dfull[:, combos].min(axis=2), wfull, z) if len(wfull) else 0.0
        core = _cost_powered(Dcore[:, combos].min(axis=2), weights, z) if len(clients) else 0.0
        true, core = np.broadcast_to(true, len(combos)), np.broadcast_to(core, len(combos))
        true, core = true ** (1 / z), core ** (1 / z)
        fin = np.isfinite(true)
        if np.any(np.isfinite(core) != fin):
            return False
        if np.any(np.abs(core[fin] - true[fin]) > eps * true[fin] + 1e-9):
            return False
    return True


def build_coreset(inst: AggregateInstance, t: int, eps: float, mode: str = IDENTITY, *,
                  seed: int = 0, size: int | None = None, attempts: int = 20,
                  verify_cap: int = 20000) -> CoresetScenario:
    """Weighted client subset standing in for scenario ``t``.

    SAMPLED draws clients with probability proportional to a sensitivity
    bound taken from a D^z-seeded rough solution, reweights by inverse
    probability, and checks the (1 +- eps) guarantee on every center set of
    size at most k when that is cheap enough. Failed checks resample with a
    larger sample; after ``attempts`` failures the identity coreset is used.
    z = inf always gets the identity coreset (a max is not preserved by sampling).
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    w = inst.weights(t)
    clients = [c for c, wc in zip(inst.clients, w) if wc > 0]
    weights = np.array([wc for wc in w if wc > 0], dtype=float)
    if mode == IDENTITY or math.isinf(inst.z) or not clients:
        return CoresetScenario(clients, weights, IDENTITY, True)
    if mode != SAMPLED:
        raise ValueError(f"unknown coreset mode {mode!r}")
    rng = np.random.default_rng(seed)
    m = inst.metric(t)
    F = list(inst.facilities)
    z = inst.z
    D = m[np.ix_(clients, F)]
    # rough solution: D^z seeding over facilities
    A = [int(np.argmin((weights[:, None] * D**z).sum(axis=0)))]
    while len(A) < min(inst.k, len(F)):
        near = D[:, A].min(axis=1)
        score = np.array([(weights * np.minimum(near, D[:, f]) ** z).sum() for f in range(len(F))])
        gain = (weights * near**z).sum() - score
        if not np.isfinite(gain).any() or np.nanmax(np.where(np.isfinite(gain), gain, -1)) <= 0:
            break
        p = np.where(np.isfinite(gain) & (gain > 0), gain, 0)
        A.append(int(rng.choice(len(F), p=p / p.sum())))
    dA = D[:, A].min(axis=1)
    owner = D[:, A].argmin(axis=1)
    cost = (weights * dA**z)
    total = cost.sum()
    cluster_mass = np.bincount(owner, weights=weights, minlength=len(A))
    sens = weights / cluster_mass[owner]
    if np.isfinite(total) and total > 0:
        sens = sens + cost / total
    prob = sens / sens.sum()
    if size is None:
        size = max(len(clients), math.ceil(inst.k * math.log(inst.n + 1) / eps**2))
    for attempt in range(1, attempts + 1):
        draws = rng.choice(len(clients), size=size, p=prob)
        acc = np.zeros(len(clients))
        np.add.at(acc, draws, weights[draws] / (size * prob[draws]))
        keep = np.nonzero(acc > 0)[0]
        core_c = [clients[i] for i in keep]
        core_w = acc[keep]
        ok = _verify_coreset(inst, t, core_c, core_w, eps, verify_cap)
        if ok is None or ok:
            return CoresetScenario(core_c, core_w, SAMPLED, ok, attempt)
        size *= 2
    return CoresetScenario(clients, weights, IDENTITY, True, attempts)


def _reachable_picks(families, nF):
    """Facilities that are the lowest member of some intersection, one ball per scenario.

    ``families[t][f]`` lists the smallest guessed balls (bitmasks) containing
    facility position ``f`` in scenario t, or ``None`` when the scenario has no
    leaders (its only ball is all of F). Using the smallest ball containing f
    loses nothing: shrinking a ball can only drop members below f.
    """
    picks = []
    for f in range(nF):
        below = (1 << f) - 1
        cur = {below}
        for fam in families:
            if fam is None:
                continue
            cur = {c & b for c in cur for b in fam[f]}
            if 0 in cur:
                break
        if 0 in cur:
            picks.append(f)
    return picks


def solve_fpt_kt(inst: AggregateInstance, eps: float = 0.5, *, coreset: str = IDENTITY,
                 radii: str = "bucketed", max_guesses: int = DEFAULT_MAX_GUESSES,
                 seed: int = 0, trace: dict | None = None):
    """Return ``(S, CostReport)`` with aggregate at most (3 + eps) OPT.

    ``radii="exact"`` uses exact leader-facility distances as radii (no eps
    loss); ``"bucketed"`` rounds them to powers of 1 + eps/4 and inflates the
    balls by the same factor.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if coreset == SAMPLED:
        e_rad, e_core = eps / 8, eps / 16
    else:
        e_rad, e_core = eps / 4, eps / 4
    F = list(inst.facilities)
    nF = len(F)
    families = []
    n_leaders = []
    for t in range(inst.T):
        cs = build_coreset(inst, t, e_core, coreset, seed=seed + t)
        n_leaders.append(len(cs.clients))
        if not cs.clients:
            families.append(None)
            continue
        D = inst.metric(t)[np.ix_(cs.clients, F)]
        fam = [[] for _ in range(nF)]
        for row in D:
            if radii == "exact":
                R = row
                reach = row
            elif radii == "bucketed":
                R = np.array([bucket_value(v, e_rad) for v in row])
                reach = row / (1 + e_rad)  # d <= R (1+e)  <=>  d / (1+e) <= R
            else:
                raise ValueError(f"unknown radii mode {radii!r}")
            for f in range(nF):
                if math.isinf(R[f]):
                    continue
                bits = np.nonzero(reach <= R[f] * (1 + 1e-12))[0]
                fam[f].append(sum(1 << int(b) for b in bits))
        for f in range(nF):
            fam[f] = sorted(set(fam[f]))
        families.append(fam)
    picks = _reachable_picks(families, nF)
    if not picks:
        raise InstanceError("radius guesses exhausted")
    size = min(inst.k, len(picks))
    n_sets = math.comb(len(picks), size)
    if n_sets > max_guesses:
        raise InstanceError(f"{n_sets} candidate center sets exceed max_guesses={max_guesses}; "
                            "use the epas or treewidth solver for this size")
    best_val, best = INF, None
    it = combinations(picks, size)
    while True:
        chunk = [c for _, c in zip(range(20000), it)]
        if not chunk:
            break
        agg = batch_aggregate(inst, batch_costs(inst, np.array(chunk, dtype=int)))
        i = int(np.argmin(agg))
        if best is None or agg[i] < best_val:
            best_val, best = agg[i], tuple(sorted(F[j] for j in chunk[i]))
    if trace is not None:
        trace.update(picks=[F[p] for p in picks], center_sets=n_sets, leaders=n_leaders,
                     eps_radius=e_rad, eps_coreset=e_core)
    return best, aggregate_cost(inst, best)


def plesnik_cluster(m, clients, radii) -> PlesnikClustering:
    """Greedy clustering by ascending radius (ties by index).

    The uncovered client of smallest radius becomes a center h and takes every
    uncovered v with d(h, v) <= r(h) + r(v).
    """
    m = np.asarray(m, dtype=float)
    rad = {int(c): float(r) for c, r in zip(clients, radii)}
    order = sorted(rad, key=lambda c: (rad[c], c))
    covered = set()
    centers, clusters = [], {}
    for h in order:
        if h in covered:
            continue
        centers.append(h)
        members = [v for v in order if v not in covered and m[h, v] <= rad[h] + rad[v]]
        covered.update(members)
        clusters[h] = sorted(members)
    return PlesnikClustering(centers, clusters, rad)


@dataclass
class _ScenarioGuess:
    value: float
    balls: list = field(default_factory=list)  # bitmask per cluster


def _scenario_guesses(inst, t, e):
    """Bucketed guesses for scenario t whose clustering is not obviously infeasible."""
    F = list(inst.facilities)
    w = inst.weights(t)
    active = [c for c, wc in zip(inst.clients, w) if wc > 0]
    wa = [wc for wc in w if wc > 0]
    m = inst.metric(t)
    out = []
    for g in sorted({bucket_value(v, e) for v in radius_guesses(inst, t)}):
        if math.isinf(g) or not active:
            out.append(_ScenarioGuess(g, []))
            continue
        pc = plesnik_cluster(m, active, [g / x for x in wa])
        if len(pc.centers) > inst.k:
            continue
        balls = []
        for h in pc.centers:
            bits = [i for i, f in enumerate(F) if m[h, f] <= pc.radii[h] * (1 + 1e-12)]
            balls.append(sum(1 << i for i in bits))
        if all(balls):
            out.append(_ScenarioGuess(g, balls))
    return out


def _slot_assignments(balls, k):
    """All ways to put every cluster into at most k slots (one cluster per scenario
    per slot) with nonempty ball intersections; yields the slot masks."""
    items = [(t, b) for t, bs in enumerate(balls) for b in bs]
    slots = []  # [mask, scenarios used]

    def rec(i):
        if i == len(items):
            yield [s[0] for s in slots]
            return
        t, b = items[i]
        for s in slots:
            if t in s[1]:
                continue
            inter = s[0] & b
            if inter:
                old = s[0]
                s[0] = inter
                s[1].add(t)
                yield from rec(i + 1)
                s[0] = old
                s[1].discard(t)
        if len(slots) < k:
            slots.append([b, {t}])
            yield from rec(i + 1)
            slots.pop()

    yield from rec(0)


def solve_supplier_fpt_simple(inst: AggregateInstance, eps: float = 0.5, *,
                              max_guesses: int = DEFAULT_MAX_GUESSES,
                              band: float | None = None, trace: dict | None = None):
    """k-supplier (z = inf) without coresets; every client ends within 3 (1+eps/4)
    of its guessed radius, so the aggregate is at most (3 + eps) OPT.

    Guess tuples are tried in ascending aggregate of the guesses. The first
    feasible tuple already certifies the bound; tuples within a factor
    ``band`` (default 1 + eps/4) of it are also evaluated and the cheapest
    center set wins.
    """
    if not math.isinf(inst.z):
        raise InstanceError("fpt-supplier needs z = inf")
    e = eps / 4
    band = 1 + e if band is None else band
    F = list(inst.facilities)
    guesses = [_scenario_guesses(inst, t, e) for t in range(inst.T)]
    n_tuples = math.prod(len(g) for g in guesses)
    if n_tuples > max_guesses:
        raise InstanceError(f"{n_tuples} guess tuples exceed max_guesses={max_guesses}; "
                            "use the epas or treewidth solver for this size")
    if n_tuples == 0:
        raise InstanceError("radius guesses exhausted")
    vals = [np.array([g.value for g in gs]) for gs in guesses]
    grid = np.array(list(product(*[range(len(v)) for v in vals])), dtype=int)
    psi = np.array([inst.aggregator([vals[t][i] for t, i in enumerate(row)]) for row in grid])
    order = np.lexsort((np.arange(len(grid)), psi))
    candidates = set()
    first = None
    tried = 0
    for idx in order:
        if first is not None and psi[idx] > band * first:
            break
        tried += 1
        balls = [guesses[t][i].balls for t, i in enumerate(grid[idx])]
        found = False
        for masks in _slot_assignments(balls, inst.k):
            found = True
            S = tuple(sorted(F[(mk & -mk).bit_length() - 1] for mk in masks))
            candidates.add(S or (min(F),))
        if found and first is None:
            first = psi[idx]
    if not candidates:
        raise InstanceError("radius guesses exhausted")
    best, _ = best_of(inst, candidates)
    if trace is not None:
        trace.update(tuples=n_tuples, tried=tried, certified=float(first),
                     candidates=len(candidates))
    return best, aggregate_cost(inst, best)
