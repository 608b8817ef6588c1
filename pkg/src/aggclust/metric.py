"""Metric checks, shortest-path metrics and distance bucketing."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import INF, BaseGraph, InstanceError

TRIANGLE_TOL = 1e-9


def validate_metric(m, tol: float = TRIANGLE_TOL):
    """Return the lexicographically first ``(a, b, c)`` with d(a,c) > d(a,b) + d(b,c).

    Returns ``None`` when the triangle inequality holds everywhere. Infinite
    entries are fine as long as they saturate consistently (0/inf partition
    metrics pass).
    """
    d = np.asarray(m, dtype=float)
    n = d.shape[0]
    with np.errstate(invalid="ignore"):
        for a in range(n):
            # via[b, c] = d(a,b) + d(b,c)
            via = d[a, :, None] + d
            slack = tol * np.maximum(1.0, np.where(np.isinf(d[a]), 0.0, d[a]))
            bad = via < d[a][None, :] - slack[None, :]
            if bad.any():
                b, c = np.unravel_index(np.argmax(bad), bad.shape)
                return (a, int(b), int(c))
    return None


def metric_axiom_errors(m) -> list[str]:
    """Non-triangle axioms: shape, zero diagonal, symmetry, non-negativity."""
    d = np.asarray(m, dtype=float)
    errs = []
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        return [f"metric is not square: {d.shape}"]
    if np.isnan(d).any():
        errs.append("metric has NaN entries")
    if (d < 0).any():
        errs.append("metric has negative entries")
    if (np.diag(d) != 0).any():
        errs.append("metric has nonzero diagonal")
    if not np.array_equal(d, d.T):
        errs.append("metric is not symmetric")
    return errs


def apsp(graph: BaseGraph, t: int = 0) -> np.ndarray:
    """All-pairs shortest paths of scenario ``t`` on the shared edge set.

    Unreachable pairs get ``inf``; an edge of length ``inf`` is absent.
    """
    lengths = graph.lengths[t]
    if any(w < 0 for w in lengths):
        raise InstanceError("negative edge weight")
    return shortest_paths(graph.n, graph.edges, lengths)


def shortest_paths(n: int, edges, lengths) -> np.ndarray:
    d = np.full((n, n), INF)
    np.fill_diagonal(d, 0.0)
    for (u, v), w in zip(edges, lengths):
        if w < 0:
            raise InstanceError("negative edge weight")
        if w < d[u, v]:
            d[u, v] = d[v, u] = w
    # Floyd-Warshall, vectorized over rows
    for m in range(n):
        np.minimum(d, d[:, m, None] + d[None, m, :], out=d)
    return d


@dataclass(frozen=True)
class DistanceBuckets:
    eps: float
    rounded: np.ndarray
    values: tuple  # sorted distinct finite values of ``rounded`` (0 included if present)


def round_up_power(v: float, base: float) -> float:
    """Smallest integer power of ``base`` strictly above ``v`` (v > 0)."""
    e = math.floor(math.log(v) / math.log(base)) + 1
    # guard against log rounding on either side
    while base ** (e - 1) > v:
        e -= 1
    while base ** e <= v:
        e += 1
    return base ** e


def bucket_value(v: float, eps: float, floor: float = 0.0) -> float:
    if v == 0 or math.isinf(v):
        return v
    return round_up_power(max(v, floor), 1.0 + eps)


def bucket_distances(m, eps: float) -> DistanceBuckets:
    """Round every finite nonzero distance up to a power of (1+eps).

    Values below ``max_finite * eps / n**2`` are first raised to that floor.
    The result is for guess enumeration only; it need not be a metric.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    d = np.asarray(m, dtype=float)
    n = d.shape[0]
    finite = d[np.isfinite(d) & (d > 0)]
    floor = finite.max() * eps / n**2 if finite.size else 0.0
    cache = {}
    out = d.copy()
    for idx, v in np.ndenumerate(d):
        if v == 0 or math.isinf(v):
            continue
        if v not in cache:
            cache[v] = bucket_value(v, eps, floor)
        out[idx] = cache[v]
    vals = tuple(sorted(set(out[np.isfinite(out)].tolist())))
    return DistanceBuckets(eps, out, vals)


def bucket_values(values, eps: float | None) -> list[float]:
    """Sorted distinct candidate values, bucketed when ``eps`` is given."""
    vals = {float(v) for v in values}
    if eps:
        vals = {bucket_value(v, eps) for v in vals}
    return sorted(vals)
