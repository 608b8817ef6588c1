"""Aggregate clustering: one center set, several metrics."""

from .core import (INF, MAX, SUM, AggregateInstance, Aggregator, BaseGraph, CostReport,
                   InstanceError, Scenario, aggregate_cost, lp_norm, make_instance,
                   reduce_01_generalized, scenario_cost, validate_instance)
from .oracle import brute_force_opt

__all__ = [
    "INF", "MAX", "SUM", "AggregateInstance", "Aggregator", "BaseGraph", "CostReport",
    "InstanceError", "Scenario", "aggregate_cost", "brute_force_opt", "lp_norm",
    "make_instance", "reduce_01_generalized", "scenario_cost", "validate_instance",
]
