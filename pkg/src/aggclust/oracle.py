"""Exhaustive solvers used as ground truth.

These stay deliberately naive; every clever solver is checked against them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .core import INF, AggregateInstance, CostReport, aggregate_cost

DEFAULT_CAP = 2_000_000


class OracleTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class Hypergraph3D:
    """3-partite hypergraph with parts {0..k-1} each; edges are (a, b, c) triples."""

    k: int
    edges: tuple

    def __post_init__(self):
        object.__setattr__(self, "edges", tuple(tuple(int(x) for x in e) for e in self.edges))
        for e in self.edges:
            if len(e) != 3 or not all(0 <= x < self.k for x in e):
                raise ValueError(f"edge {e} does not pick one vertex per part")

    def covered(self) -> bool:
        return all({e[p] for e in self.edges} == set(range(self.k)) for p in range(3))


@dataclass(frozen=True)
class HittingSetInstance:
    universe: int  # elements are 0..universe-1
    sets: tuple
    k: int

    def __post_init__(self):
        object.__setattr__(self, "sets", tuple(frozenset(s) for s in self.sets))
        for s in self.sets:
            if not s or not all(0 <= x < self.universe for x in s):
                raise ValueError(f"set {sorted(s)} is empty or leaves the universe")


def batch_costs(inst: AggregateInstance, combos: np.ndarray) -> np.ndarray:
    """Per-scenario costs for a batch of center tuples, shape (len(combos), T).

    ``combos`` holds positions into ``inst.facilities``.
    """
    out = np.empty((len(combos), inst.T))
    z = inst.z
    for t in range(inst.T):
        D = inst.metric(t)[np.ix_(inst.clients, inst.facilities)]
        w = inst.weights(t)
        pos = w > 0
        D, w = D[pos], w[pos]
        if len(w) == 0:
            out[:, t] = 0.0
            continue
        dist = D[:, combos].min(axis=2)  # clients x batch
        if math.isinf(z):
            out[:, t] = (w[:, None] * dist).max(axis=0)
        elif z == 1:
            out[:, t] = (w[:, None] * dist).sum(axis=0)
        else:
            with np.errstate(over="ignore"):
                out[:, t] = ((w[:, None] * dist**z).sum(axis=0)) ** (1.0 / z)
    return out


def batch_aggregate(inst: AggregateInstance, per: np.ndarray) -> np.ndarray:
    if inst.aggregator.kind == "sum":
        return np.where(np.isinf(per).any(axis=1), INF, per.sum(axis=1))
    if inst.aggregator.kind == "max":
        return per.max(axis=1)
    return np.array([inst.aggregator(row) for row in per])


def best_of(inst: AggregateInstance, candidates):
    """Cheapest candidate center tuple (each given as sorted point indices).

    Ties go to the lexicographically smallest tuple. Returns ``(S, aggregate)``.
    """
    best_val, best = INF, None
    cands = sorted(set(tuple(sorted(c)) for c in candidates))
    for size in sorted({len(c) for c in cands}):
        group = [c for c in cands if len(c) == size]
        pos = {f: i for i, f in enumerate(inst.facilities)}
        combos = np.array([[pos[f] for f in c] for c in group], dtype=int)
        agg = batch_aggregate(inst, batch_costs(inst, combos))
        for c, a in zip(group, agg):
            if best is None or (a, c) < (best_val, best):
                best_val, best = a, c
    return best, best_val


def brute_force_opt(inst: AggregateInstance, cap: int = DEFAULT_CAP, batch: int = 20000):
    """Best k-subset of facilities, lexicographically smallest among ties.

    Returns ``(S, CostReport)`` with ``S`` a sorted tuple of point indices.
    """
    fac = sorted(inst.facilities)
    k = min(inst.k, len(fac))
    if math.comb(len(fac), k) > cap:
        raise OracleTooLarge("instance too large for oracle")
    best_val, best = INF, None
    it = combinations(range(len(fac)), k)
    while True:
        chunk = [c for _, c in zip(range(batch), it)]
        if not chunk:
            break
        combos = np.array(chunk, dtype=int)
        agg = batch_aggregate(inst, batch_costs(inst, combos))
        i = int(np.argmin(agg))  # first minimum = lexicographically smallest
        if best is None or agg[i] < best_val:
            best_val, best = agg[i], tuple(fac[j] for j in chunk[i])
    # recompute with the reference cost function so reports are consistent
    return best, aggregate_cost(inst, best)


def all_costs(inst: AggregateInstance, cap: int = DEFAULT_CAP) -> dict:
    """Aggregate cost of every k-subset (for small tests)."""
    fac = sorted(inst.facilities)
    if math.comb(len(fac), inst.k) > cap:
        raise OracleTooLarge("instance too large for oracle")
    return {S: aggregate_cost(inst, S).aggregate for S in combinations(fac, inst.k)}


def brute_force_3dm(h: Hypergraph3D, cap: int = 20):
    """A perfect matching as a tuple of edge indices, or ``None``."""
    if len(h.edges) > cap:
        raise OracleTooLarge("hypergraph too large for oracle")
    for combo in combinations(range(len(h.edges)), h.k):
        used = [set(), set(), set()]
        ok = True
        for e in combo:
            for p in range(3):
                v = h.edges[e][p]
                if v in used[p]:
                    ok = False
                    break
                used[p].add(v)
            if not ok:
                break
        if ok:
            return combo
    return None


def brute_force_hitting_set(h: HittingSetInstance, cap: int = DEFAULT_CAP):
    """Lexicographically first hitting set of size at most k, or ``None``."""
    k = min(h.k, h.universe)
    if math.comb(h.universe, k) > cap:
        raise OracleTooLarge("hitting set instance too large for oracle")
    for size in range(0, k + 1):
        for combo in combinations(range(h.universe), size):
            chosen = set(combo)
            if all(s & chosen for s in h.sets):
                return frozenset(combo)
    return None


def is_lower_bound(inst: AggregateInstance, report: CostReport) -> bool:
    return report.aggregate >= brute_force_opt(inst)[1].aggregate
