"""JSON instance format.

Distances and edge lengths may be the string ``"inf"``; ``z`` may be ``"inf"``.
"""

from __future__ import annotations

import json
import math

import numpy as np

from .core import (INF, AggregateInstance, Aggregator, BaseGraph, InstanceError,
                   Scenario)
from .metric import shortest_paths


class InstanceFormatError(InstanceError):
    """The document does not parse as an instance (as opposed to a bad instance)."""


def _num(v):
    if isinstance(v, str):
        if v.strip().lower() in ("inf", "infinity", "+inf"):
            return INF
        raise InstanceFormatError(f"bad number {v!r}")
    return float(v)


def _enc(v):
    v = float(v)
    if math.isinf(v):
        return "inf"
    return int(v) if v.is_integer() else v


def instance_from_dict(doc: dict) -> AggregateInstance:
    try:
        points = [str(p) for p in doc["points"]]
        n = len(points)
        facilities = [int(i) for i in doc["facilities"]]
        clients = [int(i) for i in doc["clients"]]
        k = int(doc["k"])
        z = _num(doc.get("z", 1))
        agg = doc.get("aggregator", {"type": "sum"})
        aggregator = Aggregator(agg["type"], float(agg.get("q", 2.0)))
        scenarios = []
        graph_edges, graph_lengths = None, []
        for sc in doc["scenarios"]:
            m = sc["metric"]
            if m["type"] == "matrix":
                d = np.array([[_num(x) for x in row] for row in m["d"]], dtype=float)
            elif m["type"] == "graph":
                edges = [(int(u), int(v)) for u, v, _ in m["edges"]]
                lengths = [_num(w) for _, _, w in m["edges"]]
                if graph_edges is None:
                    graph_edges = edges
                elif graph_edges != edges:
                    graph_edges = False
                graph_lengths.append(tuple(lengths))
                d = shortest_paths(n, edges, lengths)
            else:
                raise InstanceFormatError(f"unknown metric type {m['type']!r}")
            w = sc.get("weights")
            w = np.ones(len(clients)) if w is None else np.array([_num(x) for x in w])
            scenarios.append(Scenario(d, w))
    except InstanceFormatError:
        raise
    except (KeyError, TypeError, IndexError, AttributeError, ValueError) as e:
        raise InstanceFormatError(f"malformed instance: {e!r}") from e
    base = None
    if graph_edges and len(graph_lengths) == len(scenarios):
        base = BaseGraph(n, tuple(graph_edges), tuple(graph_lengths))
    return AggregateInstance(points, facilities, clients, k, z, aggregator,
                             tuple(scenarios), name=str(doc.get("name", "")),
                             base_graph=base, meta=dict(doc.get("meta") or {}))


def instance_to_dict(inst: AggregateInstance) -> dict:
    scen = []
    for t, sc in enumerate(inst.scenarios):
        if inst.base_graph is not None:
            g = inst.base_graph
            metric = {"type": "graph",
                      "edges": [[u, v, _enc(w)] for (u, v), w in zip(g.edges, g.lengths[t])]}
        else:
            metric = {"type": "matrix", "d": [[_enc(x) for x in row] for row in sc.metric]}
        entry = {"metric": metric}
        if not np.all(sc.weights == 1):
            entry["weights"] = [_enc(x) for x in sc.weights]
        scen.append(entry)
    out = {
        "name": inst.name,
        "points": list(inst.points),
        "facilities": list(inst.facilities),
        "clients": list(inst.clients),
        "k": inst.k,
        "z": _enc(inst.z),
        "aggregator": inst.aggregator.to_json(),
        "scenarios": scen,
    }
    if inst.meta:
        out["meta"] = inst.meta
    return out


def load_instance(path) -> AggregateInstance:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as e:
            raise InstanceFormatError(f"invalid JSON: {e}") from e
    if not isinstance(doc, dict):
        raise InstanceFormatError("instance must be a JSON object")
    return instance_from_dict(doc)


def dumps_instance(inst: AggregateInstance) -> str:
    return json.dumps(instance_to_dict(inst), indent=1)


def save_instance(inst: AggregateInstance, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps_instance(inst))
