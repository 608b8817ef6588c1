"""Instances, solutions and cost evaluation for aggregate clustering.

A single set of at most ``k`` centers is shared by ``T`` scenarios. Each
scenario has its own metric and client weights; the per-scenario
``(k, z)``-costs are combined by a monotone, homogeneous aggregator.

Infinity is ``math.inf``. The only arithmetic hazard is ``0 * inf``, which
the cost functions treat as 0 (a weight-0 client never pays anything).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

INF = math.inf


class InstanceError(ValueError):
    """Malformed instance or violated precondition."""


@dataclass(frozen=True)
class Aggregator:
    kind: str = "sum"  # "sum" | "max" | "lp"
    q: float = 2.0

    def __post_init__(self):
        if self.kind not in ("sum", "max", "lp"):
            raise InstanceError(f"unknown aggregator {self.kind!r}")
        if self.kind == "lp" and not self.q >= 1:
            raise InstanceError("lp aggregator needs q >= 1")

    def __call__(self, values: Iterable[float]) -> float:
        vals = [float(v) for v in values]
        if not vals:
            return 0.0
        if any(math.isinf(v) for v in vals):
            return INF
        if self.kind == "sum":
            return math.fsum(vals)
        if self.kind == "max":
            return max(vals)
        top = max(vals)
        if top == 0:
            return 0.0
        # scale by the maximum to keep powers in range
        return top * math.fsum((v / top) ** self.q for v in vals) ** (1.0 / self.q)

    def to_json(self) -> dict:
        if self.kind == "lp":
            return {"type": "lp", "q": self.q}
        return {"type": self.kind}

    def __str__(self):
        return f"lp{self.q:g}" if self.kind == "lp" else self.kind


SUM = Aggregator("sum")
MAX = Aggregator("max")


def lp_norm(q: float) -> Aggregator:
    return Aggregator("lp", float(q))


@dataclass(frozen=True)
class Scenario:
    """One metric over all points plus weights aligned with the client list."""

    metric: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "metric", np.asarray(self.metric, dtype=float))
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float))


@dataclass(frozen=True)
class BaseGraph:
    """Edge set shared by all scenarios, with per-scenario edge lengths.

    ``lengths[t][e]`` is the length of ``edges[e]`` in scenario ``t``.
    """

    n: int
    edges: tuple
    lengths: tuple

    def networkx(self, t: int = 0):
        import networkx as nx

        g = nx.Graph()
        g.add_nodes_from(range(self.n))
        for (u, v), w in zip(self.edges, self.lengths[t]):
            g.add_edge(u, v, weight=w)
        return g


@dataclass(frozen=True)
class AggregateInstance:
    points: tuple
    facilities: tuple
    clients: tuple
    k: int
    z: float  # positive integer or INF
    aggregator: Aggregator
    scenarios: tuple
    name: str = ""
    base_graph: BaseGraph | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))
        object.__setattr__(self, "facilities", tuple(int(f) for f in self.facilities))
        object.__setattr__(self, "clients", tuple(int(c) for c in self.clients))
        object.__setattr__(self, "scenarios", tuple(self.scenarios))

    @property
    def n(self) -> int:
        return len(self.points)

    @property
    def T(self) -> int:
        return len(self.scenarios)

    def metric(self, t: int) -> np.ndarray:
        return self.scenarios[t].metric

    def weights(self, t: int) -> np.ndarray:
        return self.scenarios[t].weights

    def labels(self, S: Iterable[int]) -> list:
        return [self.points[i] for i in S]

    def replace(self, **changes) -> "AggregateInstance":
        from dataclasses import replace

        return replace(self, **changes)


@dataclass(frozen=True)
class CostReport:
    per_scenario: tuple
    aggregate: float


def as_solution(inst: AggregateInstance, S: Iterable[int]) -> tuple:
    """Normalize a center set to a sorted tuple, checking the solution invariant."""
    S = tuple(sorted(set(int(s) for s in S)))
    if not S:
        raise InstanceError("no centers")
    if len(S) > inst.k:
        raise InstanceError(f"{len(S)} centers exceed k={inst.k}")
    fac = set(inst.facilities)
    bad = [s for s in S if s not in fac]
    if bad:
        raise InstanceError(f"centers {bad} are not facilities")
    return S


def weighted_distances(inst: AggregateInstance, t: int, S: Sequence[int]) -> np.ndarray:
    """w_t(j) * d_t(j, S) per client, with 0 * inf = 0."""
    d = inst.metric(t)[np.ix_(inst.clients, list(S))].min(axis=1)
    w = inst.weights(t)
    out = np.zeros(len(d))
    pos = w > 0
    out[pos] = w[pos] * d[pos]
    return out


def cost_from_distances(dist: np.ndarray, weights: np.ndarray, z: float) -> float:
    """(k,z)-cost of a client distance vector; zero-weight clients are skipped."""
    pos = weights > 0
    d, w = dist[pos], weights[pos]
    if len(d) == 0:
        return 0.0
    if math.isinf(z):
        return float((w * d).max())
    if np.isinf(d).any():
        return INF
    if z == 1:
        return math.fsum(w * d)
    return math.fsum(w * d**z) ** (1.0 / z)


def scenario_cost(inst: AggregateInstance, t: int, S: Iterable[int]) -> float:
    S = list(S)
    if not S:
        raise InstanceError("no centers")
    d = inst.metric(t)[np.ix_(inst.clients, S)].min(axis=1)
    return cost_from_distances(d, inst.weights(t), inst.z)


def aggregate_cost(inst: AggregateInstance, S: Iterable[int]) -> CostReport:
    S = list(S)
    per = tuple(scenario_cost(inst, t, S) for t in range(inst.T))
    return CostReport(per, inst.aggregator(per))


def cost_key(report: CostReport, S: Sequence[int]):
    """Sort key implementing 'lowest cost, then lexicographically smallest set'."""
    return (report.aggregate, tuple(sorted(S)))


def validate_instance(inst: AggregateInstance) -> list[str]:
    """Return all violated preconditions as human-readable strings (empty if fine)."""
    from .metric import metric_axiom_errors, validate_metric

    errs = []
    n = inst.n
    for name, idx in (("facility", inst.facilities), ("client", inst.clients)):
        for i in idx:
            if not 0 <= i < n:
                errs.append(f"{name} index {i} out of range")
    if not inst.facilities:
        errs.append("no facilities")
    if not inst.clients:
        errs.append("no clients")
    if len(set(inst.facilities)) != len(inst.facilities):
        errs.append("duplicate facility indices")
    if inst.k < 1:
        errs.append("k must be at least 1")
    if inst.k > len(set(inst.facilities)):
        errs.append("k exceeds facility count")
    z = inst.z
    if not (math.isinf(z) or (float(z).is_integer() and z >= 1)):
        errs.append(f"z must be a positive integer or inf, got {z}")
    if inst.T < 1:
        errs.append("no scenarios")
    for t, sc in enumerate(inst.scenarios):
        m = sc.metric
        if m.shape != (n, n):
            errs.append(f"scenario {t}: metric shape {m.shape} != ({n}, {n})")
            continue
        if sc.weights.shape != (len(inst.clients),):
            errs.append(f"scenario {t}: {len(sc.weights)} weights for {len(inst.clients)} clients")
        elif (sc.weights < 0).any() or np.isnan(sc.weights).any():
            errs.append(f"scenario {t}: negative or NaN weight")
        errs.extend(f"scenario {t}: {e}" for e in metric_axiom_errors(m))
        bad = validate_metric(m)
        if bad is not None:
            a, b, c = (inst.points[i] for i in bad)
            errs.append(f"scenario {t}: triangle inequality fails on ({a}, {b}, {c})")
    return errs


def check_instance(inst: AggregateInstance) -> AggregateInstance:
    errs = validate_instance(inst)
    if errs:
        raise InstanceError("; ".join(errs))
    return inst


def make_instance(metrics, k, *, z=1, aggregator=SUM, weights=None, facilities=None,
                  clients=None, points=None, name="", base_graph=None, meta=None):
    """Convenience constructor: defaults to F = C = all points and unit weights."""
    metrics = [np.asarray(m, dtype=float) for m in metrics]
    n = metrics[0].shape[0]
    points = tuple(points) if points is not None else tuple(str(i) for i in range(n))
    facilities = tuple(range(n)) if facilities is None else tuple(facilities)
    clients = tuple(range(n)) if clients is None else tuple(clients)
    if weights is None:
        weights = [np.ones(len(clients)) for _ in metrics]
    scen = tuple(Scenario(m, w) for m, w in zip(metrics, weights))
    return AggregateInstance(points, facilities, clients, int(k), z, aggregator, scen,
                             name=name, base_graph=base_graph, meta=dict(meta or {}))


@dataclass(frozen=True)
class Reduction:
    """Output of the 0/1-weight reduction.

    ``origin[p]`` is the input point a new point was copied from (``None`` for
    the extra facility and its anchor client).
    """

    instance: AggregateInstance
    extra_facility: int
    origin: tuple

    def project(self, S: Iterable[int]) -> tuple:
        """Map a solution of the reduced instance back to input facilities."""
        return tuple(sorted({self.origin[s] for s in S if self.origin[s] is not None}))


def reduce_01_generalized(inst: AggregateInstance) -> Reduction:
    """Turn a 0/1-weighted instance into an unweighted one with k+1 centers.

    Clients and facilities are copied into disjoint point sets. In scenario
    ``t`` the active points are the weight-1 clients and every facility copy;
    the inactive points are the weight-0 clients, the new facility and an
    anchor client co-located with it. Active pairs keep their distance,
    inactive pairs are at distance 0 and mixed pairs are at infinity. The
    anchor client is inactive in every scenario and forces the new facility
    into any finite-cost solution.
    """
    for t in range(inst.T):
        w = inst.weights(t)
        if not np.isin(w, (0.0, 1.0)).all():
            raise InstanceError("weights must be 0/1")
    nc, nf = len(inst.clients), len(inst.facilities)
    origin = list(inst.clients) + list(inst.facilities) + [None, None]
    n2 = nc + nf + 2
    extra, anchor = nc + nf, nc + nf + 1
    points = ([f"c:{inst.points[c]}" for c in inst.clients]
              + [f"f:{inst.points[f]}" for f in inst.facilities] + ["extra", "anchor"])
    metrics = []
    for t in range(inst.T):
        w = inst.weights(t)
        active = np.array([w[j] == 1 for j in range(nc)] + [True] * nf + [False, False])
        src = np.array(origin[:-2] + [0, 0])
        m = inst.metric(t)[np.ix_(src, src)].copy()
        mixed = active[:, None] != active[None, :]
        both_off = ~active[:, None] & ~active[None, :]
        m[mixed] = INF
        m[both_off] = 0.0
        metrics.append(m)
    new = make_instance(
        metrics, inst.k + 1, z=inst.z, aggregator=inst.aggregator,
        facilities=list(range(nc, nc + nf)) + [extra],
        clients=list(range(nc)) + [anchor], points=points,
        name=(inst.name + "-01") if inst.name else "reduced-01",
    )
    assert new.n == n2
    return Reduction(new, extra, tuple(origin))


def all_weights_01(inst: AggregateInstance) -> bool:
    return all(np.isin(inst.weights(t), (0.0, 1.0)).all() for t in range(inst.T))
