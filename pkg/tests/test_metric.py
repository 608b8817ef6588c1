import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from aggclust import INF, BaseGraph, InstanceError
from aggclust.metric import (apsp, bucket_distances, bucket_values, metric_axiom_errors,
                             round_up_power, validate_metric)


def test_one_point_metric_ok():
    assert validate_metric(np.zeros((1, 1))) is None


def test_triangle_violation_reported():
    m = np.array([[0, 1, 5], [1, 0, 1], [5, 1, 0]], dtype=float)
    assert validate_metric(m) == (0, 1, 2)


def test_partition_metric_ok():
    part = np.array([0, 1, 0, 2, 1])
    m = np.where(part[:, None] == part[None, :], 0.0, INF)
    assert validate_metric(m) is None
    assert metric_axiom_errors(m) == []


def test_axiom_errors():
    assert "metric is not symmetric" in metric_axiom_errors(np.array([[0, 1], [2, 0.0]]))
    assert "metric has nonzero diagonal" in metric_axiom_errors(np.array([[1, 1], [1, 0.0]]))


def test_apsp_path():
    g = BaseGraph(3, ((0, 1), (1, 2)), ((1.0, 1.0),))
    assert apsp(g)[0, 2] == 2


def test_apsp_disconnected():
    g = BaseGraph(2, (), ((),))
    assert apsp(g)[0, 1] == INF


def test_apsp_triangle_tie():
    g = BaseGraph(3, ((0, 1), (1, 2), (0, 2)), ((1.0, 1.0, 2.0),))
    assert apsp(g)[0, 2] == 2


def test_apsp_negative():
    g = BaseGraph(2, ((0, 1),), ((-1.0,),))
    with pytest.raises(InstanceError):
        apsp(g)


def test_apsp_infinite_edge_is_absent():
    g = BaseGraph(3, ((0, 1), (1, 2)), ((INF, 1.0),))
    d = apsp(g)
    assert d[0, 1] == INF and d[0, 2] == INF and d[1, 2] == 1


def test_bucket_example():
    vals = bucket_values([1, 1.05, 2], 0.1)
    assert len(vals) == 2
    assert vals[0] == pytest.approx(1.1)


def test_round_up_power_strict():
    assert round_up_power(1.0, 1.1) == pytest.approx(1.1)
    assert round_up_power(1.05, 1.1) == pytest.approx(1.1)


def test_bucket_equal_and_inf():
    m = np.array([[0, 3, INF], [3, 0, 3], [INF, 3, 0]])
    b = bucket_distances(m, 0.2)
    assert len(b.values) == 2  # 0 and the single bucket
    assert b.rounded[0, 2] == INF and b.rounded[0, 0] == 0


def test_bucket_rejects_nonpositive_eps():
    with pytest.raises(ValueError):
        bucket_distances(np.zeros((2, 2)), 0)


@st.composite
def graphs(draw):
    n = draw(st.integers(1, 7))
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
    edges = draw(st.lists(st.sampled_from(pairs), unique=True)) if pairs else []
    w = draw(st.lists(st.one_of(st.integers(0, 20).map(float), st.just(INF)),
                      min_size=len(edges), max_size=len(edges)))
    return BaseGraph(n, tuple(edges), (tuple(w),))


@given(graphs())
def test_apsp_is_metric(g):
    d = apsp(g)
    assert metric_axiom_errors(d) == []
    assert validate_metric(d) is None


@given(st.lists(st.floats(1e-3, 1e6), min_size=1, max_size=20), st.floats(0.01, 1.0))
def test_bucket_bounds(xs, eps):
    n = len(xs) + 1
    m = np.zeros((n, n))
    m[0, 1:] = xs
    m[1:, 0] = xs
    b = bucket_distances(m, eps)
    floor = max(xs) * eps / n**2
    for x in xs:
        r = b.rounded[0, xs.index(x) + 1]
        assert r >= x
        assert r <= max(x, floor) * (1 + eps) * (1 + 1e-12)
    finite = [v for v in b.values if v > 0]
    aspect = max(xs) / max(min(xs), floor)
    assert len(finite) <= math.ceil(math.log(aspect) / math.log(1 + eps)) + 2
