"""Dynamic program over a tree decomposition for sum-aggregate (k,z)-clustering.

All scenarios share one base graph, so a bag X separates its subtree from the
rest in every scenario at once. For a bag we track, per scenario and bag
vertex x,

* the inner distance i_x = d(x, S ∩ subtree), fixed exactly by the subtree's
  centers, and
* the outer distance o_x = d(x, S outside the subtree), an assumption handed
  down by the parent.

Any client v below the bag then pays min(d(v, S_in), min_x d(v, x) + o_x).
Facilities and clients with positive weight are moved into private leaf bags
through zero-length connector edges, so every one is charged exactly once.

Inner vectors realizable by some center set are built bottom-up; values are
computed top-down, memoized on (bag, budget, outer vector). For T >= 2 with
z != 1 the sum of per-scenario roots does not split over subtrees, so values
are Pareto fronts of per-scenario powered costs; otherwise they are scalars.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import INF, AggregateInstance, BaseGraph, InstanceError, aggregate_cost
from .metric import bucket_value

EXACT, APPROX = "exact", "approx"
AUTO = "auto"
DEFAULT_STATE_CAP = 2_000_000


class DecompositionError(ValueError):
    pass


@dataclass
class TreeDecomposition:
    bags: list  # list of tuples of vertices
    edges: list  # pairs of bag indices
    root: int = 0

    def __post_init__(self):
        self.bags = [tuple(sorted(int(v) for v in b)) for b in self.bags]
        self.edges = [(int(a), int(b)) for a, b in self.edges]

    @property
    def width(self) -> int:
        return max((len(b) for b in self.bags), default=0) - 1

    def to_dict(self) -> dict:
        return {"bags": [list(b) for b in self.bags], "edges": [list(e) for e in self.edges],
                "root": self.root}

    @classmethod
    def from_dict(cls, d: dict) -> "TreeDecomposition":
        return cls(d["bags"], d.get("edges", []), d.get("root", 0))


@dataclass
class NiceBinaryTD:
    bags: list  # tuples of augmented vertices
    children: list  # per bag, at most two child bags
    root: int
    original: dict  # augmented vertex -> original vertex
    duplicate: dict  # original vertex -> its leaf duplicate
    leaf_of: dict  # duplicate -> leaf bag
    depth: int
    width: int
    connector: float = 0.0

    def parent_map(self) -> dict:
        return {c: b for b, cs in enumerate(self.children) for c in cs}


def validate_decomposition(td: TreeDecomposition, n: int, edges) -> list[str]:
    """Violations of the tree decomposition axioms, each naming the axiom."""
    errs = []
    nb = len(td.bags)
    if nb == 0:
        return ["tree axiom: no bags"]
    adj = {b: set() for b in range(nb)}
    for a, b in td.edges:
        if not (0 <= a < nb and 0 <= b < nb) or a == b:
            errs.append(f"tree axiom: bad tree edge ({a}, {b})")
            continue
        adj[a].add(b)
        adj[b].add(a)
    seen, stack = {0}, [0]
    while stack:
        u = stack.pop()
        for v in adj[u] - seen:
            seen.add(v)
            stack.append(v)
    if len(seen) != nb or len(set(map(frozenset, td.edges))) != nb - 1:
        errs.append("tree axiom: bags do not form a tree")
    covered = set().union(*map(set, td.bags))
    missing = sorted(set(range(n)) - covered)
    if missing:
        errs.append(f"vertex coverage axiom: vertices {missing} in no bag")
    for u, v in edges:
        if not any(u in b and v in b for b in td.bags):
            errs.append(f"edge coverage axiom: edge ({u}, {v}) in no bag")
    for v in sorted(covered):
        holders = {i for i, b in enumerate(td.bags) if v in b}
        start = next(iter(holders))
        comp, stack = {start}, [start]
        while stack:
            u = stack.pop()
            for w in adj[u] & holders - comp:
                comp.add(w)
                stack.append(w)
        if comp != holders:
            errs.append(f"connectivity axiom: bags holding vertex {v} are not connected")
    return errs


def auto_decomposition(graph: BaseGraph) -> TreeDecomposition:
    """Natural width-1 decomposition for forests, min-degree heuristic otherwise."""
    import networkx as nx

    g = nx.Graph()
    g.add_nodes_from(range(graph.n))
    g.add_edges_from(graph.edges)
    if nx.is_forest(g):
        bags, edges = [], []
        for comp in nx.connected_components(g):
            r = min(comp)
            top = len(bags)
            bags.append((r,))
            if top:
                edges.append((0, top))
            index = {r: top}
            for u, v in nx.bfs_edges(g, r):
                index[v] = len(bags)
                bags.append((u, v))
                edges.append((index[u], index[v]))
        return TreeDecomposition(bags, edges, 0)
    _, dec = nx.algorithms.approximation.treewidth_min_degree(g)
    nodes = sorted(dec.nodes, key=lambda b: sorted(b))
    pos = {b: i for i, b in enumerate(nodes)}
    return TreeDecomposition([tuple(b) for b in nodes],
                             [(pos[a], pos[b]) for a, b in dec.edges], 0)


def prepare_decomposition(graph: BaseGraph, td=AUTO, mode: str = EXACT, *,
                          facilities=None, clients=None) -> NiceBinaryTD:
    """Root, binarize and attach private leaf bags.

    Every vertex in ``facilities`` or ``clients`` (default: all) gets a
    duplicate joined by a zero-length connector in a leaf bag {v, v'}.
    """
    if mode not in (EXACT, APPROX):
        raise ValueError(f"unknown mode {mode!r}")
    if td is None or td == AUTO:
        td = auto_decomposition(graph)
    errs = validate_decomposition(td, graph.n, graph.edges)
    if errs:
        raise DecompositionError("invalid tree decomposition: " + "; ".join(errs))
    roles = set(range(graph.n)) if facilities is None and clients is None else \
        set(facilities or ()) | set(clients or ())
    nb = len(td.bags)
    adj = {b: [] for b in range(nb)}
    for a, b in td.edges:
        adj[a].append(b)
        adj[b].append(a)
    bags = [tuple(b) for b in td.bags]
    kids = [[] for _ in range(nb)]
    order, seen = [td.root], {td.root}
    for u in order:
        for v in sorted(adj[u]):
            if v not in seen:
                seen.add(v)
                kids[u].append(v)
                order.append(v)
    original = {v: v for v in range(graph.n)}
    duplicate, leaf_of = {}, {}
    home = {}
    for b in order:  # first bag in BFS order holding v is the one nearest the root
        for v in bags[b]:
            home.setdefault(v, b)
    nxt = graph.n
    for v in sorted(roles):
        d = nxt
        nxt += 1
        original[d] = v
        duplicate[v] = d
        leaf = len(bags)
        bags.append((v, d))
        kids.append([])
        kids[home[v]].append(leaf)
        leaf_of[d] = leaf
    # binarize: a bag with children c1..cm becomes a chain of copies
    i = 0
    while i < len(bags):
        if len(kids[i]) > 2:
            rest = kids[i][1:]
            copy = len(bags)
            bags.append(bags[i])
            kids.append(rest)
            kids[i] = [kids[i][0], copy]
        i += 1
    depth = 0
    stack = [(td.root, 0)]
    while stack:
        b, dep = stack.pop()
        depth = max(depth, dep)
        stack.extend((c, dep + 1) for c in kids[b])
    width = max(len(b) for b in bags) - 1
    return NiceBinaryTD(bags, kids, td.root, original, duplicate, leaf_of, depth, width)


class TreewidthDP:
    def __init__(self, inst: AggregateInstance, ntd: NiceBinaryTD, mode=EXACT, eps=0.25,
                 state_cap=DEFAULT_STATE_CAP):
        self.inst = inst
        self.ntd = ntd
        self.T = inst.T
        self.z = inst.z
        self.k = min(inst.k, len(inst.facilities))
        self.mode = mode
        self.eps = eps
        self.state_cap = state_cap
        self.scalar = inst.z == 1 or inst.T == 1
        self.D = [inst.metric(t) for t in range(inst.T)]
        self.rho = (1 + eps) ** (1 / max(1, 2 * ntd.depth)) if mode == APPROX else 1.0
        orig = ntd.original
        self.fac = {ntd.duplicate[f] for f in inst.facilities}
        self.weight = {}
        for t in range(inst.T):
            for c, w in zip(inst.clients, inst.weights(t)):
                if w > 0:
                    self.weight.setdefault(ntd.duplicate[c], [0.0] * inst.T)[t] = float(w)
        self.bagorig = [np.array([orig[v] for v in b]) for b in ntd.bags]
        self._lift = {}
        self._memo = {}
        self._build_states()

    # distances between vertices of two bags, per scenario: (T, |A|, |B|)
    def dist(self, a, b):
        key = (a, b)
        if key not in self._lift:
            oa, ob = self.bagorig[a], self.bagorig[b]
            self._lift[key] = np.stack([D[np.ix_(oa, ob)] for D in self.D])
        return self._lift[key]

    def _round(self, arr):
        if self.mode != APPROX:
            return arr
        e = self.rho - 1
        flat = [bucket_value(float(v), e) for v in np.ravel(arr)]
        return np.array(flat).reshape(np.shape(arr))

    def lift(self, to_bag, from_bag, vec):
        """min_y d(x, y) + vec_y for x in to_bag, vec indexed by from_bag vertices."""
        L = self.dist(to_bag, from_bag)
        v = np.asarray(vec, dtype=float).reshape(self.T, 1, -1)
        return (L + v).min(axis=2)

    # ---- bottom-up: realizable (budget, inner vector) states -----------------
    def _build_states(self):
        ntd = self.ntd
        order = []
        stack = [ntd.root]
        while stack:
            b = stack.pop()
            order.append(b)
            stack.extend(ntd.children[b])
        self.states = {}
        self.pairs = {}
        self.maxdist = {}  # bag -> per-scenario max d(client, facility) inside the subtree
        self.members = {}
        total = 0
        for b in reversed(order):
            X = ntd.bags[b]
            m = len(X)
            inf_vec = tuple([INF] * (self.T * m))
            kids = ntd.children[b]
            if not kids:
                st = {(0, inf_vec)}
                facs, cls = set(), set()
                for v in X:
                    if v in self.fac:
                        vec = tuple(self.dist(b, b)[:, :, X.index(v)].ravel())
                        st.add((1, vec))
                        facs.add(v)
                    if v in self.weight:
                        cls.add(v)
                self.states[b] = sorted(st)
                self.members[b] = (facs, cls)
            else:
                facs = set().union(*(self.members[c][0] for c in kids))
                cls = set().union(*(self.members[c][1] for c in kids))
                self.members[b] = (facs, cls)
                left = kids[0]
                right = kids[1] if len(kids) > 1 else None
                lifted_l = {s: self._round(self.lift(b, left, s[1])) for s in self.states[left]}
                rstates = self.states[right] if right is not None else [(0, None)]
                lifted_r = {s: (self._round(self.lift(b, right, s[1])) if right is not None
                                else np.full((self.T, m), INF)) for s in rstates}
                pairs = {}
                for sl, Ll in lifted_l.items():
                    for sr, Lr in lifted_r.items():
                        kk = sl[0] + sr[0]
                        if kk > self.k:
                            continue
                        vec = tuple(np.minimum(Ll, Lr).ravel())
                        pairs.setdefault((kk, vec), []).append((sl, sr))
                self.pairs[b] = pairs
                self.states[b] = sorted(pairs)
            self.maxdist[b] = [
                max((self.D[t][ntd.original[c], ntd.original[f]] for c in cls for f in facs),
                    default=INF if cls else -INF) for t in range(self.T)]
            total += len(self.states[b])
            if total > self.state_cap:
                raise InstanceError(
                    f"treewidth DP needs more than {self.state_cap} states (estimate so far "
                    f"{total} after {len(self.states)} of {len(order)} bags); "
                    "try mode=approx or the epas solver")
        self.n_states = total

    # ---- value algebra ----------------------------------------------------------
    def _zero(self):
        return (0.0, frozenset()) if self.scalar else [(tuple([0.0] * self.T), frozenset())]

    def _combine_vec(self, a, b):
        if math.isinf(self.z):
            return tuple(max(x, y) for x, y in zip(a, b))
        return tuple(x + y for x, y in zip(a, b))

    def _scalarize(self, vec):
        if self.scalar and self.T > 1:
            return sum(vec)  # z == 1
        return vec[0] if self.scalar else vec

    def _combine(self, va, vb):
        if self.scalar:
            if math.isinf(self.z):
                return (max(va[0], vb[0]), va[1] | vb[1])
            return (va[0] + vb[0], va[1] | vb[1])
        out = [(self._combine_vec(a, b), Sa | Sb) for a, Sa in va for b, Sb in vb]
        return _pareto(out)

    def _better(self, va, vb):
        """Merge two values for the same state (min / front union)."""
        if vb is None:
            return va
        if self.scalar:
            return min(va, vb, key=lambda x: (x[0], sorted(x[1])))
        return _pareto(va + vb)

    def objective(self, vec):
        z = self.z
        if math.isinf(z) or z == 1:
            return float(sum(vec))
        return float(sum(p ** (1 / z) for p in vec))

    # ---- top-down values ----------------------------------------------------------
    def _clip(self, b, kk, o):
        """Drop outer distances that cannot matter: no client below the bag, or
        every client is already at least as close to the subtree's centers."""
        thr = self.maxdist[b]
        if kk == 0 and not math.isinf(-thr[0]):
            return o
        m = len(self.ntd.bags[b])
        slack = (1 + self.eps) * (1 + 1e-9) if self.mode == APPROX else 1.0
        return tuple(INF if o[t * m + a] >= thr[t] * slack else o[t * m + a]
                     for t in range(self.T) for a in range(m))

    def values(self, b, kk, o):
        """dict inner vector -> value, for states with budget ``kk`` under outer ``o``."""
        o = self._clip(b, kk, o)
        key = (b, kk, o)
        if key in self._memo:
            return self._memo[key]
        ntd = self.ntd
        X = ntd.bags[b]
        m = len(X)
        kids = ntd.children[b]
        out = {}
        if not kids:
            ovec = np.array(o, dtype=float).reshape(self.T, m)
            for s in self.states[b]:
                if s[0] != kk:
                    continue
                chosen = frozenset(v for v in X if v in self.fac) if kk else frozenset()
                inner = np.array(s[1]).reshape(self.T, m)
                val = self._zero()
                for a, v in enumerate(X):
                    if v not in self.weight:
                        continue
                    w = self.weight[v]
                    d = np.minimum(inner[:, a], (self.dist(b, b)[:, a, :] + ovec).min(axis=1))
                    vec = tuple(0.0 if w[t] == 0 else
                                (w[t] * d[t] if math.isinf(self.z) else w[t] * d[t] ** self.z)
                                for t in range(self.T))
                    val = self._combine(val, (self._scalarize(vec), frozenset()) if self.scalar
                                        else [(vec, frozenset())])
                if self.scalar:
                    val = (val[0], chosen)
                else:
                    val = [(vec, chosen) for vec, _ in val]
                out[s[1]] = val
            self._memo[key] = out
            return out
        ovec = np.array(o, dtype=float).reshape(self.T, m)
        left = kids[0]
        right = kids[1] if len(kids) > 1 else None
        down_l = self.lift(left, b, ovec)
        down_r = self.lift(right, b, ovec) if right is not None else None
        cache_l, cache_r = {}, {}
        for (k2, vec), plist in self.pairs[b].items():
            if k2 != kk:
                continue
            best = None
            for sl, sr in plist:
                if sr[1] is None:
                    ol = down_l
                else:
                    ol = np.minimum(down_l, self.lift(left, right, sr[1]))
                ol = tuple(self._round(ol).ravel())
                ck = (sl[0], ol)
                if ck not in cache_l:
                    cache_l[ck] = self.values(left, sl[0], ol)
                vl = cache_l[ck].get(sl[1])
                if vl is None:
                    continue
                if right is None:
                    cand = vl
                else:
                    orr = np.minimum(down_r, self.lift(right, left, sl[1]))
                    orr = tuple(self._round(orr).ravel())
                    ck = (sr[0], orr)
                    if ck not in cache_r:
                        cache_r[ck] = self.values(right, sr[0], orr)
                    vr = cache_r[ck].get(sr[1])
                    if vr is None:
                        continue
                    cand = self._combine(vl, vr)
                best = self._better(cand, best)
            if best is not None:
                out[vec] = best
        self._memo[key] = out
        return out

    def solve(self):
        b = self.ntd.root
        m = len(self.ntd.bags[b])
        o = tuple([INF] * (self.T * m))
        best_key, best_S = None, None
        for kk in range(self.k + 1):
            for vec, val in self.values(b, kk, o).items():
                items = [val] if self.scalar else val
                for v, S in items:
                    obj = float(v) if self.scalar else self.objective(v)
                    if self.scalar and not (math.isinf(self.z) or self.z == 1):
                        obj = v ** (1 / self.z)
                    S_orig = tuple(sorted(self.ntd.original[d] for d in S))
                    key = (obj, len(S_orig) != self.k, S_orig)
                    if best_key is None or key < best_key:
                        best_key, best_S = key, S_orig
        return best_S, best_key[0]


def _pareto(items):
    items = sorted(items, key=lambda x: (x[0], sorted(x[1])))
    keep = []
    for vec, S in items:
        if any(all(a <= b for a, b in zip(kv, vec)) for kv, _ in keep):
            continue
        keep.append((vec, S))
    return keep


def check_consistency(dp: TreewidthDP, b: int, parent, left, right=None) -> bool:
    """Whether child tuples (k', o, i) justify the parent tuple at bag ``b``.

    Budgets must add up; each parent inner distance must be realized through a
    child bag vertex; each child outer distance must equal the best of the
    parent outer distances and the sibling inner distances. Equality is exact,
    or within a factor rho in approximate mode.
    """
    kids = dp.ntd.children[b]
    rho = dp.rho
    kp, op, ip = parent
    kl, ol, il = left
    if right is None:
        if len(kids) != 1:
            return False
        kr, orr, ir = 0, None, None
    else:
        if len(kids) != 2:
            return False
        kr, orr, ir = right
    if kl + kr != kp:
        return False

    def close(got, want):
        got, want = np.asarray(got, dtype=float).ravel(), np.asarray(want, dtype=float).ravel()
        both_inf = np.isinf(got) & np.isinf(want)
        fin = ~both_inf
        if np.any(np.isinf(got[fin]) | np.isinf(want[fin])):
            return False
        return bool(np.all(want[fin] <= got[fin] * (1 + 1e-12))
                    and np.all(got[fin] <= rho * want[fin] * (1 + 1e-12) + 1e-12))

    inner = dp.lift(b, kids[0], il)
    if ir is not None:
        inner = np.minimum(inner, dp.lift(b, kids[1], ir))
    if not close(ip, inner):
        return False
    want_l = dp.lift(kids[0], b, op)
    if ir is not None:
        want_l = np.minimum(want_l, dp.lift(kids[0], kids[1], ir))
    if not close(ol, want_l):
        return False
    if ir is not None:
        want_r = np.minimum(dp.lift(kids[1], b, op), dp.lift(kids[1], kids[0], il))
        if not close(orr, want_r):
            return False
    return True


def solve_treewidth_dp(inst: AggregateInstance, td=AUTO, mode: str = EXACT, eps: float = 0.25,
                       *, state_cap: int = DEFAULT_STATE_CAP, trace: dict | None = None):
    """Return ``(S, CostReport)``; exact mode is optimal, approx mode is within 1 + eps."""
    if inst.base_graph is None:
        raise InstanceError("treewidth solver needs a shared base graph")
    if inst.T > 1 and inst.aggregator.kind != "sum":
        raise InstanceError("treewidth solver needs the sum aggregator")
    if mode == APPROX and eps <= 0:
        raise ValueError("eps must be positive")
    nontrivial = [c for i, c in enumerate(inst.clients)
                  if any(inst.weights(t)[i] > 0 for t in range(inst.T))]
    ntd = prepare_decomposition(inst.base_graph, td, mode, facilities=inst.facilities,
                                clients=nontrivial)
    dp = TreewidthDP(inst, ntd, mode, eps, state_cap)
    S, value = dp.solve()
    if not S:
        S = (min(inst.facilities),)
    if trace is not None:
        trace.update(dp_value=value, width=ntd.width, depth=ntd.depth, bags=len(ntd.bags),
                     states=dp.n_states, memo=len(dp._memo), rho=dp.rho)
    return S, aggregate_cost(inst, S)
