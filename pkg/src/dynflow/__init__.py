"""Exact dynamic network flows: network loading, flow decomposition and purification."""

from .balance import (
    SdFlowCertificate,
    SdFlowViolation,
    node_balance,
    node_balances,
    total_travel_time,
    validate_sd_flow,
)
from .decompose import (
    Decomposition,
    MaximallyPure,
    Pure,
    Witnesses,
    active_components,
    check_pure,
    decompose,
    find_flow_carrying_walk,
    purify,
    solve_fdk,
    zero_cycle_decompose,
)
from .loading import (
    Exogenous,
    LinearDelay,
    NonExistence,
    TravelTimes,
    Vickrey,
    network_loading,
    parameterized_load,
    travel_times,
)
from .netgraph import DynNetwork, Edge, enumerate_simple_cycles, enumerate_walks, validate_walk
from .timealg import Interval, MonotoneMap, PiecewiseLinear, StepFunction, TimeMeasure

__all__ = [
    "Decomposition",
    "DynNetwork",
    "Edge",
    "Exogenous",
    "Interval",
    "LinearDelay",
    "MaximallyPure",
    "MonotoneMap",
    "NonExistence",
    "PiecewiseLinear",
    "Pure",
    "SdFlowCertificate",
    "SdFlowViolation",
    "StepFunction",
    "TimeMeasure",
    "TravelTimes",
    "Vickrey",
    "Witnesses",
    "active_components",
    "check_pure",
    "decompose",
    "enumerate_simple_cycles",
    "enumerate_walks",
    "find_flow_carrying_walk",
    "network_loading",
    "node_balance",
    "node_balances",
    "parameterized_load",
    "purify",
    "solve_fdk",
    "total_travel_time",
    "travel_times",
    "validate_sd_flow",
    "validate_walk",
    "zero_cycle_decompose",
]
