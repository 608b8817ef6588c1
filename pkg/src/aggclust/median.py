"""Constant-factor approximation for sum-aggregate k-median with two scenarios.

Pipeline:

1. solve the facility-location style LP and make it complete (every client
   uses a facility copy either fully or not at all);
2. filter well separated representatives per scenario;
3. move to a half-integral opening by sampling a vertex of a polytope with
   half-integral vertices (two laminar families) that is good for both
   scenarios at once;
4. repeat with a second polytope whose vertices are integral.

Step 3 and 4 use a constructive Caratheodory decomposition: among the
vertices of a convex decomposition of the current point, one vertex loses at
most a factor 2 in both scenario objectives.

All intermediate guarantees are recorded in ``MedianTrace.checks``; with
``check=True`` a failed check raises ``InvariantError``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .core import INF, AggregateInstance, InstanceError, aggregate_cost
from .simplex import LPError, linprog

TOL = 1e-7


class InvariantError(AssertionError):
    pass


# ---------------------------------------------------------------- LP stage

@dataclass
class FractionalSolution:
    """LP solution over facility copies.

    ``parent[i]`` is the original facility (point index) of copy ``i``;
    ``x[t][v, i]`` is the assignment of client position ``v`` to copy ``i``.
    """

    parent: list
    y: np.ndarray
    x: list
    value: float
    exact: bool = False

    def mass(self, cols=None):
        return self.y.sum() if cols is None else self.y[list(cols)].sum()


def _greedy_assign(dist_row, y):
    """Cheapest fractional assignment of one unit to facilities with capacities ``y``."""
    order = sorted(range(len(y)), key=lambda i: (dist_row[i], i))
    x = [0 * y[0]] * len(y)
    need = 1 + 0 * y[0]
    for i in order:
        if need <= 0:
            break
        if y[i] <= 0 or math.isinf(dist_row[i]):
            continue
        take = y[i] if y[i] <= need else need
        x[i] = take
        need = need - take
    return x, need


def build_lp(inst: AggregateInstance):
    """Variables: y (one per facility) then x_t(i, v) for finite distances."""
    F, C = list(inst.facilities), list(inst.clients)
    nf = len(F)
    cols = []  # (t, v, i)
    for t in range(inst.T):
        D = inst.metric(t)[np.ix_(C, F)]
        for v in range(len(C)):
            for i in range(nf):
                if np.isfinite(D[v, i]):
                    cols.append((t, v, i))
    nv = nf + len(cols)
    c = np.zeros(nv)
    A_eq = np.zeros((inst.T * len(C), nv))
    A_ub = np.zeros((len(cols) + 1, nv))
    b_ub = np.zeros(len(cols) + 1)
    for col, (t, v, i) in enumerate(cols, start=nf):
        c[col] = inst.weights(t)[v] * inst.metric(t)[C[v], F[i]]
        A_eq[t * len(C) + v, col] = 1
        r = col - nf
        A_ub[r, col] = 1
        A_ub[r, i] = -1
    A_ub[-1, :nf] = 1
    b_ub[-1] = inst.k
    b_eq = np.ones(inst.T * len(C))
    upper = [1] * nf + [None] * len(cols)
    return c, A_ub, b_ub, A_eq, b_eq, upper, cols


def _check_median_instance(inst):
    if inst.T != 2 or inst.z != 1 or inst.aggregator.kind != "sum":
        raise InstanceError("median-t2 needs T=2, z=1 and the sum aggregator; "
                            "try fpt, epas or treewidth")


def solve_lp(inst: AggregateInstance, exact: bool = False, split: bool = True) -> FractionalSolution:
    """Optimal LP solution, made complete by facility splitting.

    The assignment is first re-derived greedily from y (cheapest facilities
    first; optimal for fixed y so the value is unchanged). Then every
    facility is split at the partial assignment levels, so each client uses
    each copy either fully or not at all.
    """
    _check_median_instance(inst)
    F, C = list(inst.facilities), list(inst.clients)
    nf = len(F)
    c, A_ub, b_ub, A_eq, b_eq, upper, cols = build_lp(inst)
    try:
        res = linprog(c, A_ub, b_ub, A_eq, b_eq, upper, exact=exact)
    except LPError as e:
        raise InstanceError(f"LP failed: {e}") from e
    if res.status != "optimal":
        raise InstanceError(f"LP is {res.status}; some client has no reachable facility")
    y = res.x[:nf].copy()
    if not exact:
        y = np.clip(y, 0.0, 1.0)
    D = [inst.metric(t)[np.ix_(C, F)] for t in range(inst.T)]
    x = []
    for t in range(inst.T):
        rows = []
        for v in range(len(C)):
            row, left = _greedy_assign(D[t][v], list(y))
            if left > (0 if exact else TOL):
                raise InvariantError("greedy reassignment could not place a client")
            rows.append(row)
        x.append(np.array(rows, dtype=object if exact else float))
    num = Fraction if exact else float
    value = sum(num(inst.weights(t)[v]) * num(D[t][v, i]) * x[t][v, i]
                for t in range(inst.T) for v in range(len(C)) for i in range(nf)
                if x[t][v, i] != 0)
    frac = FractionalSolution(list(F), np.array(y, dtype=object if exact else float), x,
                              value if exact else float(value), exact)
    return split_facilities(frac) if split else frac


def split_facilities(frac: FractionalSolution) -> FractionalSolution:
    tol = 0 if frac.exact else 1e-12
    parent, ys, cuts = [], [], []
    for i in range(len(frac.y)):
        levels = set()
        for xt in frac.x:
            for v in xt[:, i]:
                if tol < v < frac.y[i] - tol:
                    levels.add(v)
        pts = sorted(levels) + [frac.y[i]]
        prev = 0 * frac.y[i]
        pieces = []
        for p in pts:
            if p - prev > tol:
                pieces.append((prev, p))
            prev = p
        cuts.append(pieces)
        for lo, hi in pieces:
            parent.append(frac.parent[i])
            ys.append(hi - lo)
    newx = []
    for xt in frac.x:
        rows = []
        for v in range(xt.shape[0]):
            row = []
            for i, pieces in enumerate(cuts):
                a = xt[v, i]
                for lo, hi in pieces:
                    row.append(hi - lo if a >= hi - tol else 0 * a)
            rows.append(row)
        newx.append(np.array(rows, dtype=object if frac.exact else float).reshape(xt.shape[0], -1))
    return FractionalSolution(parent, np.array(ys, dtype=object if frac.exact else float),
                              newx, frac.value, frac.exact)


def lp_value(inst: AggregateInstance, exact: bool = False):
    return solve_lp(inst, exact=exact, split=False).value


# ---------------------------------------------------------------- filtering

@dataclass
class ClusterFiltering:
    cost: list  # cost[t][v] = fractional connection cost C_t(v), v = client position
    reps: list  # reps[t] = representative client positions in selection order
    children: list  # children[t][j] = client positions
    mass: list  # mass[t][j] = total weight of children


def _client_dist(inst, t):
    C = list(inst.clients)
    return inst.metric(t)[np.ix_(C, C)]


def _copy_dist(inst, t, frac):
    """Client-position x copy distance matrix."""
    return inst.metric(t)[np.ix_(list(inst.clients), frac.parent)]


def filter_representatives(frac: FractionalSolution, inst: AggregateInstance) -> ClusterFiltering:
    costs, reps, children, mass = [], [], [], []
    for t in range(inst.T):
        D = _copy_dist(inst, t, frac).astype(float)
        xt = frac.x[t].astype(float)
        with np.errstate(invalid="ignore"):
            Ct = np.where(xt > 0, D * xt, 0.0).sum(axis=1)
        dc = _client_dist(inst, t)
        order = sorted(range(len(Ct)), key=lambda v: (Ct[v], v))
        covered = set()
        rt, ch = [], {}
        for j in order:
            if j in covered:
                continue
            rt.append(j)
            kids = [v for v in order if v not in covered and dc[v, j] <= 4 * Ct[v]]
            if j not in kids:
                kids.append(j)
            covered.update(kids)
            ch[j] = sorted(kids)
        w = inst.weights(t)
        costs.append(Ct)
        reps.append(rt)
        children.append(ch)
        mass.append({j: float(sum(w[v] for v in ch[j])) for j in rt})
    return ClusterFiltering(costs, reps, children, mass)


# ---------------------------------------------------------------- neighborhoods

@dataclass
class Neighborhood:
    cell: frozenset  # F_j
    ball: frozenset  # B_j
    gamma: float
    near: frozenset  # G_j
    witness_rep: int | None  # rep whose cell holds the gamma-closest outside copy


def neighborhoods(inst, frac, filt, t):
    D = _copy_dist(inst, t, frac).astype(float)
    reps = filt.reps[t]
    Ct = filt.cost[t]
    ncopy = len(frac.parent)
    owner = {}
    for i in range(ncopy):
        owner[i] = min(reps, key=lambda j: (D[j, i], reps.index(j)))
    xt = frac.x[t]
    out = {}
    for j in reps:
        # B_j and G_j only keep copies that j itself uses; on those x = y
        # (completeness), which is what bounds T_t(y, j) by 3 C_t(j)
        used = {i for i in range(ncopy) if xt[j, i] > 0}
        cell = frozenset(i for i in range(ncopy) if owner[i] == j)
        ball = frozenset(i for i in used if D[j, i] <= 2 * Ct[j] + 1e-12)
        outside = [i for i in range(ncopy) if i not in cell]
        if outside:
            iw = min(outside, key=lambda i: (D[j, i], i))
            gamma, wit = float(D[j, iw]), owner[iw]
        else:
            gamma, wit = INF, None
        near = frozenset(i for i in cell & used if D[j, i] <= gamma)
        out[j] = Neighborhood(cell, ball, gamma, near, wit)
    return out


def proxy_T(D_row, z, nb: Neighborhood):
    """Sum over G_j of d*z, plus 3*gamma times the missing mass (0 when none is missing)."""
    s = sum(D_row[i] * z[i] for i in nb.near)
    missing = 1 - sum(z[i] for i in nb.near)
    if missing > TOL:
        return s + 3 * nb.gamma * missing
    return s


# ---------------------------------------------------------------- Caratheodory

@dataclass
class Polytope:
    """{x : A_ub x <= b_ub, A_eq x = b_eq, 0 <= x <= upper} (assumed bounded)."""

    A_ub: np.ndarray
    b_ub: np.ndarray
    A_eq: np.ndarray
    b_eq: np.ndarray
    upper: np.ndarray

    @property
    def dim(self):
        return len(self.upper)

    def contains(self, p, tol=1e-7):
        return ((self.A_ub @ p <= self.b_ub + tol).all() and
                np.allclose(self.A_eq @ p, self.b_eq, atol=tol) and
                (p >= -tol).all() and (p <= self.upper + tol).all())


class DecompositionError(RuntimeError):
    pass


def caratheodory(P: Polytope, p, tol: float = 1e-9):
    """Convex decomposition ``[(weight, vertex), ...]`` of ``p`` by face peeling.

    Each round takes the vertex of the minimal face through the current point
    that minimizes the all-ones objective, then moves the point away from that
    vertex until a new constraint becomes tight. The face dimension drops every
    round, so there are at most dim + 1 terms.
    """
    p = np.asarray(p, dtype=float)
    cur = p.copy()
    terms = []
    rem = 1.0
    n = P.dim
    ones = np.ones(n)
    for _ in range(n + 2):
        slack = P.b_ub - P.A_ub @ cur
        tight_rows = slack <= tol * (1 + np.abs(P.b_ub))
        at_zero = cur <= tol
        at_top = cur >= P.upper - tol
        A_eq = np.vstack([P.A_eq, P.A_ub[tight_rows]])
        b_eq = np.concatenate([P.b_eq, P.b_ub[tight_rows]])
        fixed_top = np.nonzero(at_top & ~at_zero)[0]
        if len(fixed_top):
            E = np.zeros((len(fixed_top), n))
            E[np.arange(len(fixed_top)), fixed_top] = 1
            A_eq = np.vstack([A_eq, E])
            b_eq = np.concatenate([b_eq, P.upper[fixed_top]])
        upper = np.where(at_zero, 0.0, P.upper)
        res = linprog(ones, P.A_ub[~tight_rows], P.b_ub[~tight_rows], A_eq, b_eq, upper)
        if res.status != "optimal":
            raise DecompositionError(f"face LP {res.status}")
        q = res.x
        d = cur - q
        if np.abs(d).max() <= 1e-8:
            terms.append((rem, q))
            rem = 0.0
            break
        # largest step along d that stays inside P
        theta = INF
        ad = P.A_ub @ d
        for r in np.nonzero(~tight_rows & (ad > 1e-12))[0]:
            theta = min(theta, slack[r] / ad[r])
        for j in range(n):
            if d[j] < -1e-12:
                theta = min(theta, cur[j] / -d[j])
            elif d[j] > 1e-12 and np.isfinite(P.upper[j]):
                theta = min(theta, (P.upper[j] - cur[j]) / d[j])
        if not np.isfinite(theta):
            raise DecompositionError("polytope is unbounded along the peeling direction")
        terms.append((rem * theta / (1 + theta), q))
        rem = rem / (1 + theta)
        cur = cur + theta * d
        cur = np.clip(cur, 0.0, P.upper)
    if rem > 0:
        terms.append((rem, cur.copy()))
    recon = sum(mu * q for mu, q in terms)
    resid = float(np.abs(recon - p).max())
    if resid > 1e-7:
        raise DecompositionError(f"decomposition residual {resid:.3g}")
    return terms


def caratheodory_sample(P: Polytope, p, W1, W2, terms=None):
    """First vertex q of the decomposition with W_t(q) <= 2 W_t(p) for both t.

    ``W1``/``W2`` are coefficient vectors. Returns ``(q, terms)``.
    """
    p = np.asarray(p, dtype=float)
    if terms is None:
        terms = caratheodory(P, p)
    w1, w2 = float(W1 @ p), float(W2 @ p)
    for mu, q in terms:
        if mu <= 0:
            continue
        if W1 @ q <= 2 * w1 + TOL * (1 + abs(w1)) and W2 @ q <= 2 * w2 + TOL * (1 + abs(w2)):
            return q, terms
    raise DecompositionError("no vertex within factor 2 in both objectives")


# ---------------------------------------------------------------- rounding

@dataclass
class HalfIntegralSolution:
    y: np.ndarray  # over copies of ``frac``
    assign: list  # assign[t][j] = {copy: amount}
    cost: list  # cost[t][j] = C_hat_t(j)


@dataclass
class MedianTrace:
    lp_value: float = 0.0
    checks: dict = field(default_factory=dict)
    vertices_P: list = field(default_factory=list)
    vertices_R: list = field(default_factory=list)
    W_seed: tuple = ()
    W_half: tuple = ()
    A_half: tuple = ()
    A_int: tuple = ()
    frac: FractionalSolution | None = None
    filtering: ClusterFiltering | None = None
    half: HalfIntegralSolution | None = None

    def ok(self, name, cond, strict):
        cond = bool(cond)
        self.checks[name] = self.checks.get(name, True) and cond
        if strict and not cond:
            raise InvariantError(name)


def _leq(a, b, rel=1e-9):
    return a <= b + rel * max(1.0, abs(b))


def round_half_integral(frac, filt, inst, trace=None, check=False):
    trace = trace if trace is not None else MedianTrace()
    ncopy = len(frac.parent)
    y = frac.y.astype(float)
    nbs = [neighborhoods(inst, frac, filt, t) for t in range(inst.T)]
    Ds = [_copy_dist(inst, t, frac).astype(float) for t in range(inst.T)]
    # lemma checks on the LP point
    for t in range(inst.T):
        for j, nb in nbs[t].items():
            trace.ok("y(B_j) >= 1/2", y[list(nb.ball)].sum() >= 0.5 - TOL, check)
            trace.ok("B_j within G_j within F_j", nb.ball <= nb.near <= nb.cell, check)
            if nb.witness_rep is not None:
                far = max((Ds[t][j, i] for i in nbs[t][nb.witness_rep].ball), default=0.0)
                trace.ok("d(i,j) <= 3 gamma_j on the witness ball", _leq(far, 3 * nb.gamma), check)
            trace.ok("T_t(y,j) <= 3 C_t(j)",
                     _leq(proxy_T(Ds[t][j], y, nb), 3 * filt.cost[t][j]), check)
    # variables: z (copies), then lambda_t(j) for reps with a finite gamma
    lam = []
    for t in range(inst.T):
        for j in filt.reps[t]:
            if np.isfinite(nbs[t][j].gamma):
                lam.append((t, j))
    lam_idx = {key: ncopy + a for a, key in enumerate(lam)}
    n = ncopy + len(lam)
    rows, rhs = [], []
    r = np.zeros(n)
    r[:ncopy] = 1
    rows.append(r)
    rhs.append(inst.k)
    for t in range(inst.T):
        for j in filt.reps[t]:
            nb = nbs[t][j]
            r = np.zeros(n)
            r[list(nb.ball)] = -1
            rows.append(r)
            rhs.append(-0.5)
            r = np.zeros(n)
            r[list(nb.near)] = -1
            if (t, j) in lam_idx:
                r[lam_idx[(t, j)]] = -1
            rows.append(r)
            rhs.append(-1.0)
    P = Polytope(np.array(rows), np.array(rhs, dtype=float), np.zeros((0, n)), np.zeros(0),
                 np.ones(n))
    W = [np.zeros(n) for _ in range(inst.T)]
    for t in range(inst.T):
        for j in filt.reps[t]:
            nb = nbs[t][j]
            mj = filt.mass[t][j]
            for i in nb.near:
                W[t][i] += mj * Ds[t][j, i]
            if (t, j) in lam_idx:
                W[t][lam_idx[(t, j)]] += mj * 3 * nb.gamma
    seed = np.zeros(n)
    seed[:ncopy] = y
    for (t, j), a in lam_idx.items():
        seed[a] = max(0.0, 1.0 - y[list(nbs[t][j].near)].sum())
    trace.ok("seed lies in P", P.contains(seed), check)
    q, terms = caratheodory_sample(P, seed, W[0], W[1])
    trace.vertices_P.extend(v for _, v in terms)
    for _, v in terms:
        z = v[:ncopy]
        trace.ok("P vertices are half-integral", np.abs(2 * z - np.round(2 * z)).max() <= TOL, check)
    trace.W_seed = tuple(float(w @ seed) for w in W)
    trace.W_half = tuple(float(w @ q) for w in W)
    for t in range(inst.T):
        trace.ok("W_t(sample) <= 2 W_t(seed)", _leq(trace.W_half[t], 2 * trace.W_seed[t], 1e-7), check)
    yhat = np.round(2 * q[:ncopy]) / 2
    trace.ok("sum of yhat <= k", yhat.sum() <= inst.k + TOL, check)
    assign, chat = [], []
    for t in range(inst.T):
        at, ct = {}, {}
        for j in filt.reps[t]:
            row, left = _greedy_assign(Ds[t][j], list(yhat))
            trace.ok("yhat serves every representative", left <= TOL, check)
            at[j] = {i: a for i, a in enumerate(row) if a > 0}
            ct[j] = sum(Ds[t][j, i] * a for i, a in at[j].items())
            trace.ok("C_hat_t(j) <= T_t(yhat, j)",
                     _leq(ct[j], proxy_T(Ds[t][j], yhat, nbs[t][j]), 1e-7), check)
        assign.append(at)
        chat.append(ct)
        lhs = sum(filt.mass[t][j] * ct[j] for j in filt.reps[t])
        total = float(np.dot(inst.weights(t), filt.cost[t]))
        trace.ok("half-integral cost <= 6 sum C_t", _leq(lhs, 6 * total, 1e-7), check)
    half = HalfIntegralSolution(yhat, assign, chat)
    trace.half = half
    return half


def _a_proxy(D_row, z, S_sup, prim, sec):
    val = sum(D_row[i] * z[i] for i in S_sup)
    if prim not in S_sup:
        val += (D_row[prim] - D_row[sec]) * z[prim]
    return val


def round_integral(half, frac, filt, inst, trace=None, check=False):
    """Integral solution (original facility ids) from a half-integral opening."""
    trace = trace if trace is not None else MedianTrace()
    # every copy with yhat = 1 becomes two halves; copies with yhat = 0 drop out
    halves = []  # index in ``frac`` copies
    for i, v in enumerate(half.y):
        if v >= 1 - TOL:
            halves += [i, i]
        elif v >= 0.5 - TOL:
            halves.append(i)
    H = len(halves)
    Ds = [_copy_dist(inst, t, frac).astype(float)[:, halves] for t in range(inst.T)]
    zhalf = np.full(H, 0.5)
    rows_eq, rhs_eq = [], []
    W = [np.zeros(H) for _ in range(inst.T)]
    supports = []
    for t in range(inst.T):
        D = Ds[t]
        S, chat = {}, {}
        for j in filt.reps[t]:
            order = sorted(range(H), key=lambda i: (D[j, i], i))
            S[j] = (order[0], order[1])  # primary, secondary
            chat[j] = 0.5 * (D[j, order[0]] + D[j, order[1]])
        order = sorted(filt.reps[t], key=lambda j: (chat[j], j))
        covered, sup_of, supers = set(), {}, []
        for l in order:
            if l in covered:
                continue
            supers.append(l)
            for j in order:
                if j not in covered and set(S[j]) & set(S[l]):
                    covered.add(j)
                    sup_of[j] = l
        for l in supers:
            r = np.zeros(H)
            r[list(S[l])] = 1
            rows_eq.append(r)
            rhs_eq.append(1.0)
        for j in filt.reps[t]:
            l = sup_of[j]
            prim, sec = S[j]
            S_sup = set(S[l])
            coef = np.zeros(H)
            for i in S_sup:
                coef[i] += D[j, i]
            if prim not in S_sup:
                coef[prim] += D[j, prim] - D[j, sec]
            W[t] += filt.mass[t][j] * coef
            a_half = _a_proxy(D[j], zhalf, S_sup, prim, sec)
            trace.ok("A_t(yhat,j) <= 2 C_hat_t(j)", _leq(a_half, 2 * chat[j]), check)
        supports.append((S, sup_of, supers))
    R = Polytope(np.ones((1, H)), np.array([float(inst.k)]), np.array(rows_eq),
                 np.array(rhs_eq), np.ones(H))
    trace.ok("half point lies in R", R.contains(zhalf), check)
    q, terms = caratheodory_sample(R, zhalf, W[0], W[1])
    trace.vertices_R.extend(v for _, v in terms)
    for _, v in terms:
        trace.ok("R vertices are integral", np.abs(v - np.round(v)).max() <= TOL, check)
    trace.A_half = tuple(float(w @ zhalf) for w in W)
    trace.A_int = tuple(float(w @ q) for w in W)
    for t in range(inst.T):
        trace.ok("A_t(sample) <= 2 A_t(yhat)", _leq(trace.A_int[t], 2 * trace.A_half[t], 1e-7), check)
    ztil = np.round(q)
    opened = sorted({frac.parent[halves[i]] for i in range(H) if ztil[i] == 1})
    trace.ok("integral solution has at most k centers", 1 <= len(opened) <= inst.k, check)
    # representative-level bound
    for t in range(inst.T):
        S, sup_of, _ = supports[t]
        Dorig = inst.metric(t)[np.ix_(list(inst.clients), opened)]
        total = 0.0
        for j in filt.reps[t]:
            dj = Dorig[j].min()
            prim, sec = S[j]
            a_int = _a_proxy(Ds[t][j], ztil, set(S[sup_of[j]]), prim, sec)
            trace.ok("d_t(j,S) <= A_t(z,j)", _leq(dj, a_int), check)
            total += filt.mass[t][j] * dj
        bound = 24 * float(np.dot(inst.weights(t), filt.cost[t]))
        trace.ok("representative cost <= 24 sum C_t", _leq(total, bound, 1e-7), check)
    return tuple(opened)


def solve_median_t2(inst: AggregateInstance, check: bool = False, exact_lp: bool = False,
                    trace: MedianTrace | None = None):
    """Return ``(S, CostReport)``; aggregate is at most 28 times the LP value."""
    _check_median_instance(inst)
    trace = trace if trace is not None else MedianTrace()
    frac = solve_lp(inst, exact=exact_lp)
    if exact_lp:
        frac = FractionalSolution(frac.parent, frac.y.astype(float),
                                  [x.astype(float) for x in frac.x], float(frac.value))
    trace.frac = frac
    trace.lp_value = float(frac.value)
    filt = filter_representatives(frac, inst)
    trace.filtering = filt
    half = round_half_integral(frac, filt, inst, trace, check)
    S = round_integral(half, frac, filt, inst, trace, check)
    report = aggregate_cost(inst, S)
    trace.ok("aggregate <= 28 LP", _leq(report.aggregate, 28 * trace.lp_value, 1e-7), check)
    return S, report
