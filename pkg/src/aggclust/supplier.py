"""3-approximation for aggregate k-supplier with two scenarios (z = inf).

For a guessed pair of per-scenario radii, greedy filtering picks well
separated representatives in each scenario. Their facility balls are
disjoint, so "hit every ball" becomes: leave out at most |ball| - 1
facilities of each ball, in both scenarios at once. That is a common
independent set of two partition matroids, found with a max flow; the
complement is the solution.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .core import INF, AggregateInstance, InstanceError, aggregate_cost
from .metric import bucket_value


@dataclass
class RepSet:
    reps: list
    children: dict
    radius: dict  # rep -> ball radius
    balls: dict  # rep -> frozenset of facilities
    disjoint: bool
    covered: dict = field(default_factory=dict)  # client -> its rep


def hs_filter(m, clients, facilities, r) -> RepSet:
    """Greedy filtering.

    ``r`` is a scalar radius or a sequence of per-client radii aligned with
    ``clients``. With a scalar, clients are scanned in ascending index and a
    representative absorbs every uncovered client within ``2r``. With
    per-client radii, clients are scanned by ascending radius (then index) and
    ``j`` absorbs ``v`` when ``d(j, v) <= r(j) + r(v)``; this reduces to the
    scalar rule for uniform radii.
    """
    m = np.asarray(m, dtype=float)
    clients = list(clients)
    facilities = list(facilities)
    if np.isscalar(r):
        rad = {c: float(r) for c in clients}
        order = sorted(clients)
    else:
        rad = {c: float(x) for c, x in zip(clients, r)}
        order = sorted(clients, key=lambda c: (rad[c], c))
    covered = {}
    reps, children = [], {}
    for j in order:
        if j in covered:
            continue
        reps.append(j)
        kids = [v for v in order if v not in covered and m[j, v] <= rad[j] + rad[v]]
        for v in kids:
            covered[v] = j
        children[j] = sorted(kids)
    fac = np.array(facilities)
    balls = {j: frozenset(int(f) for f in fac[m[j, fac] <= rad[j]]) for j in reps}
    seen = set()
    disjoint = True
    for j in reps:
        if balls[j] & seen:
            disjoint = False
        seen |= balls[j]
    return RepSet(reps, children, {j: rad[j] for j in reps}, balls, disjoint, covered)


def max_flow(cap, s, t):
    """Edmonds-Karp on a dense integer capacity matrix (list of lists).

    Returns the flow value and the flow matrix.
    """
    n = len(cap)
    flow = [[0] * n for _ in range(n)]
    total = 0
    while True:
        parent = [-1] * n
        parent[s] = s
        q = deque([s])
        while q and parent[t] < 0:
            u = q.popleft()
            for v in range(n):
                if parent[v] < 0 and cap[u][v] - flow[u][v] > 0:
                    parent[v] = u
                    q.append(v)
        if parent[t] < 0:
            return total, flow
        aug, v = math.inf, t
        while v != s:
            u = parent[v]
            aug = min(aug, cap[u][v] - flow[u][v])
            v = u
        v = t
        while v != s:
            u = parent[v]
            flow[u][v] += aug
            flow[v][u] -= aug
            v = u
        total += aug


def partition_matroid_intersection(ground, parts_a, budgets_a, parts_b, budgets_b) -> set:
    """Largest S with |S & P| <= budget(P) for every part of both partitions.

    Both part lists must partition ``ground``. Elements that behave alike (same
    A-part and B-part) are grouped, so the network is source -> A-parts ->
    B-parts -> sink with group sizes as middle capacities.
    """
    ground = sorted(ground)
    if not ground:
        return set()
    where_a = {e: i for i, P in enumerate(parts_a) for e in P}
    where_b = {e: i for i, P in enumerate(parts_b) for e in P}
    if set(where_a) != set(ground) or set(where_b) != set(ground):
        raise ValueError("parts must cover the ground set")
    na, nb = len(parts_a), len(parts_b)
    s, t = 0, 1 + na + nb
    cap = [[0] * (t + 1) for _ in range(t + 1)]
    groups = {}
    for e in ground:
        groups.setdefault((where_a[e], where_b[e]), []).append(e)
    for i, b in enumerate(budgets_a):
        cap[s][1 + i] = max(0, int(b))
    for j, b in enumerate(budgets_b):
        cap[1 + na + j][t] = max(0, int(b))
    for (i, j), members in groups.items():
        cap[1 + i][1 + na + j] = len(members)
    _, flow = max_flow(cap, s, t)
    chosen = set()
    for (i, j), members in groups.items():
        chosen.update(members[:flow[1 + i][1 + na + j]])
    return chosen


def radius_guesses(inst: AggregateInstance, t: int, eps=None) -> list:
    """Sorted guesses for the scenario-t optimum, starting at the trivial lower bound.

    ``[inf]`` means some client is unreachable and the scenario cannot constrain anything.
    """
    C, F = list(inst.clients), list(inst.facilities)
    w = inst.weights(t)
    pos = w > 0
    if not pos.any():
        return [0.0]
    D = inst.metric(t)[np.ix_(C, F)][pos] * w[pos][:, None]
    lb = D.min(axis=1).max()
    if math.isinf(lb):
        return [INF]
    vals = {float(v) for v in np.unique(D[np.isfinite(D)]) if v >= lb}
    if eps:
        vals = {bucket_value(v, eps) for v in vals}
    return sorted(vals)


def scenario_partition(inst: AggregateInstance, t: int, guess: float):
    """Ball parts with budget |ball|-1 plus the leftover part at full budget.

    Returns ``(parts, budgets, repset)`` or ``None`` when the guess is
    certainly too small (overlapping or empty balls).
    """
    F = list(inst.facilities)
    if math.isinf(guess):
        return [list(F)], [len(F)], None
    w = inst.weights(t)
    active = [c for c, wc in zip(inst.clients, w) if wc > 0]
    if not active:
        return [list(F)], [len(F)], None
    radii = [guess / wc for wc in w if wc > 0]
    rs = hs_filter(inst.metric(t), active, F, radii)
    if not rs.disjoint or any(not rs.balls[j] for j in rs.reps):
        return None
    parts = [sorted(rs.balls[j]) for j in rs.reps]
    budgets = [len(p) - 1 for p in parts]
    used = set().union(*rs.balls.values())
    rest = [f for f in F if f not in used]
    if rest:
        parts.append(rest)
        budgets.append(len(rest))
    return parts, budgets, rs


def cover_two_scenarios(inst: AggregateInstance, part1, part2):
    """ALG = F minus a max common independent set of the two budgeted partitions."""
    F = list(inst.facilities)
    S = partition_matroid_intersection(F, part1[0], part1[1], part2[0], part2[1])
    return tuple(sorted(f for f in F if f not in S))


def solve_supplier_t2(inst: AggregateInstance, eps: float | None = None,
                      search: str = "exhaustive", trace: dict | None = None):
    """Return ``(S, CostReport)``.

    ``search="exhaustive"`` evaluates every guess pair. ``search="pareto"``
    keeps, for each first-scenario guess, only the smallest feasible second
    guess; any feasible pair (a, b) certifies per-scenario costs at most
    (3a, 3b), so this keeps the guarantee while skipping dominated pairs.
    ``eps`` switches on bucketed guesses (costs an extra 1+eps factor).
    """
    if inst.T != 2:
        raise InstanceError("supplier-t2 needs exactly two scenarios")
    if not math.isinf(inst.z):
        raise InstanceError("supplier-t2 needs z = inf")
    vals = [radius_guesses(inst, t, eps) for t in range(2)]
    parts = [{g: scenario_partition(inst, t, g) for g in vals[t]} for t in range(2)]
    best_key, best = None, None
    seen = {}
    feasible_pairs = 0
    for g1 in vals[0]:
        p1 = parts[0][g1]
        if p1 is None:
            continue
        for g2 in vals[1]:
            p2 = parts[1][g2]
            if p2 is None:
                continue
            alg = cover_two_scenarios(inst, p1, p2)
            if len(alg) > inst.k:
                continue
            feasible_pairs += 1
            if not alg:
                alg = (min(inst.facilities),)
            if alg not in seen:
                seen[alg] = aggregate_cost(inst, alg)
            key = (seen[alg].aggregate, alg)
            if best_key is None or key < best_key:
                best_key, best = key, alg
            if search == "pareto":
                break
    if best is None:
        # only reachable when every guess is infeasible, which the largest
        # guess rules out; kept as a guard
        raise InstanceError("no feasible guess pair")
    if trace is not None:
        trace.update(feasible_pairs=feasible_pairs, candidates=[len(v) for v in vals])
    return best, seen[best]
