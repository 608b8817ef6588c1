"""Instance generators: the two hardness reductions plus random test fodder."""

from __future__ import annotations

import warnings

import numpy as np

from .core import INF, SUM, AggregateInstance, BaseGraph, make_instance
from .metric import apsp
from .oracle import HittingSetInstance, Hypergraph3D

SHAPES = ("euclidean", "random_graph", "tree", "line", "two_tree")


def gen_from_3dm(h: Hypergraph3D) -> AggregateInstance:
    """One point per hyperedge; in scenario t two edges are at distance 0 iff
    they share their part-t vertex, else at infinity. k = part size."""
    E = h.edges
    m = len(E)
    metrics = []
    for t in range(3):
        part = np.array([e[t] for e in E])
        d = np.where(part[:, None] == part[None, :], 0.0, INF)
        metrics.append(d)
    covered = h.covered()
    if not covered:
        warnings.warn("hypergraph leaves a vertex uncovered; the 0-cost equivalence may fail",
                      stacklevel=2)
    return make_instance(metrics, h.k, z=1, aggregator=SUM,
                         points=[f"e{i}" for i in range(m)], name=f"3dm-k{h.k}-m{m}",
                         meta={"covered": covered, "source": "3dm"})


def gen_from_hitting_set(h: HittingSetInstance) -> AggregateInstance:
    """Star with root 0 and leaves 1..|U|. Scenario t gives edge (root, v) length 0
    iff v is in the t-th set, else infinity. F = leaves, C = {root}."""
    n = h.universe + 1
    edges = tuple((0, v + 1) for v in range(h.universe))
    lengths = tuple(tuple(0.0 if v in X else INF for v in range(h.universe)) for X in h.sets)
    g = BaseGraph(n, edges, lengths)
    metrics = [apsp(g, t) for t in range(len(h.sets))]
    return make_instance(metrics, h.k, z=1, aggregator=SUM,
                         facilities=range(1, n), clients=[0],
                         points=["r"] + [f"v{v}" for v in range(h.universe)],
                         name=f"hs-u{h.universe}-m{len(h.sets)}", base_graph=g,
                         meta={"source": "hitting-set"})


def random_hypergraph(k: int, max_edges: int, rng, plant=None) -> Hypergraph3D:
    """Plant a perfect matching with probability 1/2, then add noise edges."""
    if plant is None:
        plant = rng.random() < 0.5
    edges = set()
    if plant:
        p2, p3 = rng.permutation(k), rng.permutation(k)
        edges |= {(a, int(p2[a]), int(p3[a])) for a in range(k)}
    target = int(rng.integers(max(k, len(edges)), max_edges + 1))
    tries = 0
    while len(edges) < target and tries < 50 * max_edges:
        edges.add(tuple(int(x) for x in rng.integers(0, k, size=3)))
        tries += 1
    return Hypergraph3D(k, tuple(sorted(edges)))


def random_covered_hypergraph(k: int, max_edges: int, rng) -> Hypergraph3D:
    while True:
        h = random_hypergraph(k, max_edges, rng)
        if h.covered():
            return h


def random_hitting_set(universe: int, m: int, k: int, rng) -> HittingSetInstance:
    sets = []
    for _ in range(m):
        size = int(rng.integers(1, min(universe, 4) + 1))
        sets.append(frozenset(int(x) for x in rng.choice(universe, size=size, replace=False)))
    return HittingSetInstance(universe, tuple(sets), k)


def _random_tree_edges(n, rng):
    return [(int(rng.integers(0, v)), v) for v in range(1, n)]


def _two_tree_edges(n, rng):
    """A random 2-tree (treewidth exactly 2 when n >= 3)."""
    if n < 3:
        return _random_tree_edges(n, rng)
    edges = [(0, 1), (0, 2), (1, 2)]
    for v in range(3, n):
        a, b = edges[int(rng.integers(0, len(edges)))]
        edges += [(a, v), (b, v)]
    return edges


def _connected_graph_edges(n, rng, p=0.3):
    edges = set(_random_tree_edges(n, rng))
    for u in range(n):
        for v in range(u + 1, n):
            if (u, v) not in edges and rng.random() < p:
                edges.add((u, v))
    return sorted(edges)


def gen_random(n: int, T: int, k: int, seed: int, shape: str = "tree", *, z=1,
               aggregator=SUM, weighted: bool = False, split: bool = False,
               max_length: int = 20) -> AggregateInstance:
    """Random instance; identical output for identical arguments.

    Shapes: ``euclidean`` (T independent planar embeddings), ``line``
    (T independent integer positions on a line), ``tree`` (one random tree,
    T integer length functions), ``random_graph`` (connected graph),
    ``two_tree`` (random 2-tree). Graph shapes keep their base graph.
    ``split`` draws F and C as random (possibly overlapping) subsets;
    ``weighted`` draws integer weights 1..3.
    """
    shape = shape.lower().replace("-", "_")
    aliases = {"euclidean_embed": "euclidean", "tree": "tree"}
    shape = aliases.get(shape, shape)
    if shape not in SHAPES:
        raise ValueError(f"unknown shape {shape!r}")
    rng = np.random.default_rng(seed)
    base = None
    if shape == "euclidean":
        metrics = []
        for _ in range(T):
            pts = rng.random((n, 2)) * 100
            metrics.append(np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1)))
    elif shape == "line":
        metrics = []
        for _ in range(T):
            x = rng.integers(0, 100, size=n).astype(float)
            metrics.append(np.abs(x[:, None] - x[None, :]))
    else:
        make = {"tree": _random_tree_edges, "two_tree": _two_tree_edges,
                "random_graph": _connected_graph_edges}[shape]
        edges = tuple(make(n, rng))
        lengths = tuple(tuple(float(x) for x in rng.integers(1, max_length + 1, size=len(edges)))
                        for _ in range(T))
        base = BaseGraph(n, edges, lengths)
        metrics = [apsp(base, t) for t in range(T)]
    facilities = clients = None
    if split:
        nf = int(rng.integers(max(k, 2), n + 1))
        facilities = sorted(int(x) for x in rng.choice(n, size=nf, replace=False))
        nc = int(rng.integers(1, n + 1))
        clients = sorted(int(x) for x in rng.choice(n, size=nc, replace=False))
    nclients = n if clients is None else len(clients)
    weights = None
    if weighted:
        weights = [rng.integers(1, 4, size=nclients).astype(float) for _ in range(T)]
    return make_instance(metrics, k, z=z, aggregator=aggregator, weights=weights,
                         facilities=facilities, clients=clients,
                         name=f"{shape}-n{n}-T{T}-k{k}-s{seed}", base_graph=base,
                         meta={"seed": seed, "shape": shape})
