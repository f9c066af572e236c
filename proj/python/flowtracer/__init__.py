"""Hop-by-hop flow tracing and path imbalance analysis for simulated leaf-spine fabrics.

Topologies, workloads, static tables and run results are exchanged as plain
dicts with the same layout as the JSON files the command-line tool writes.
"""

from ._flowtracer import (
    FlowtracerError,
    ParseError,
    ShapeMismatch,
    ValidationError,
    ZeroIdeal,
    analyze,
    balanced_static_tables,
    bench,
    bipartite_workload,
    compare,
    fim,
    fnv1a64,
    generate_flows,
    maxmin_rates,
    oracle_paths,
    reference_testbed,
    trace,
    validate_topology,
)

__all__ = [
    "FlowtracerError",
    "ParseError",
    "ShapeMismatch",
    "ValidationError",
    "ZeroIdeal",
    "analyze",
    "balanced_static_tables",
    "bench",
    "bipartite_workload",
    "compare",
    "fim",
    "fnv1a64",
    "generate_flows",
    "maxmin_rates",
    "oracle_paths",
    "reference_testbed",
    "trace",
    "validate_topology",
]
