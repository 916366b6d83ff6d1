"""Node balances and validation of s,d-flows under frozen travel times.

The balance of node ``v`` is the measure "flow entering edges out of ``v``"
minus "flow arriving at ``v`` over incoming edges", where arrivals are
computed with the frozen exit-time maps.  An edge flow is an s,d-flow when
the source balance is a nonnegative density, the destination balance is
nonpositive and every other node balances to zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

from .loading import TravelTimes
from .timealg import Interval, StepFunction, TimeMeasure, pushforward

__all__ = [
    "node_balance",
    "node_balances",
    "NodeClass",
    "NodeBalanceReport",
    "node_balance_report",
    "SdFlowCertificate",
    "SdFlowViolation",
    "validate_sd_flow",
    "ZeroSupportWitness",
    "is_zero_supported",
    "total_travel_time",
    "check_edge_flow",
]


def check_edge_flow(tt: TravelTimes, g: Mapping[str, StepFunction]) -> dict:
    """Normalise an edge flow to the extended horizon, checking sign and support.

    Missing edges carry no flow.  Flows must be nonnegative and vanish after
    the network horizon ``t_f``.
    """
    out = {}
    for eid in g:
        if eid not in tt.net.edges:
            raise ValueError(f"flow given for unknown edge {eid!r}")
    for eid in tt.net.edge_ids:
        f = g.get(eid)
        if f is None:
            out[eid] = StepFunction.zero(tt.horizon)
            continue
        if not f.is_nonnegative():
            raise ValueError(f"flow on {eid} is negative somewhere")
        if not f.vanishes_after(tt.base_horizon):
            raise ValueError(f"flow on {eid} is nonzero after the horizon {tt.base_horizon}")
        out[eid] = tt.fit(f)
    return out


def node_balance(tt: TravelTimes, g: Mapping[str, StepFunction], v) -> TimeMeasure:
    """Outflow into edges leaving ``v`` minus arrivals over edges entering ``v``."""
    g = check_edge_flow(tt, g)
    return _balance(tt, g, v)


def _balance(tt: TravelTimes, g: dict, v) -> TimeMeasure:
    net = tt.net
    total = TimeMeasure.zero(tt.horizon)
    for eid in net.out_edges(v):
        if g[eid]:
            total = total + TimeMeasure(g[eid])
    for eid in net.in_edges(v):
        if g[eid]:
            total = total - pushforward(g[eid], tt.T[eid]).extend(tt.horizon)
    return total


def node_balances(tt: TravelTimes, g: Mapping[str, StepFunction]) -> dict:
    """Balance of every node."""
    g = check_edge_flow(tt, g)
    return {v: _balance(tt, g, v) for v in tt.net.nodes}


@dataclass(frozen=True)
class NodeClass:
    """Classification of a node balance.

    ``kind`` is one of ``"conserving"``, ``"net-source"``, ``"net-sink"``,
    ``"mixed"`` or ``"non-absolutely-continuous"``.
    """

    kind: str
    rate: StepFunction | None = None
    atoms: tuple = ()


@dataclass(frozen=True)
class NodeBalanceReport:
    balances: dict
    classes: dict


def _classify(m: TimeMeasure) -> NodeClass:
    if m.atoms:
        return NodeClass("non-absolutely-continuous", None, m.atoms)
    r = m.density
    if r.is_zero():
        return NodeClass("conserving", r)
    if r.is_nonnegative():
        return NodeClass("net-source", r)
    if (-r).is_nonnegative():
        return NodeClass("net-sink", r)
    return NodeClass("mixed", r)


def node_balance_report(tt: TravelTimes, g: Mapping[str, StepFunction]) -> NodeBalanceReport:
    balances = node_balances(tt, g)
    return NodeBalanceReport(balances, {v: _classify(m) for v, m in balances.items()})


@dataclass(frozen=True)
class SdFlowCertificate:
    """Evidence that an edge flow is an s,d-flow.

    ``r_s`` is the net outflow rate at the source on ``[0, t_f]``;
    ``destination_balance`` the (nonpositive) balance at the destination on the
    extended horizon and ``r_d`` its density when it has no point masses.
    """

    r_s: StepFunction
    destination_balance: TimeMeasure
    r_d: StepFunction | None
    balances: dict = field(repr=False)


@dataclass(frozen=True)
class SdFlowViolation:
    """Where and by how much an edge flow fails to be an s,d-flow.

    ``kind`` is ``"density"`` for a cell with the wrong rate (``amount`` is the
    signed rate) or ``"atom"`` for a point mass (``amount`` is its mass).
    """

    node: object
    interval: Interval
    amount: Fraction
    kind: str = "density"

    def __str__(self):
        what = "rate" if self.kind == "density" else "point mass"
        return f"node {self.node!r}: {what} {self.amount} on {self.interval}"


def _first_cell(r: StepFunction, bad) -> tuple | None:
    for lo, hi, v in r.cells():
        if bad(v):
            return lo, hi, v
    return None


def validate_sd_flow(tt: TravelTimes, g: Mapping[str, StepFunction], s=None, d=None):
    """Certify that ``g`` is an s,d-flow or report the first violation.

    Nodes are checked in network order.  Returns ``SdFlowCertificate`` or
    ``SdFlowViolation``.
    """
    net = tt.net
    s = net.source if s is None else s
    d = net.destination if d is None else d
    balances = node_balances(tt, g)
    for v in net.nodes:
        m = balances[v]
        if v == s:
            if m.atoms:
                loc, mass = m.atoms[0]
                return SdFlowViolation(v, Interval.point(loc), mass, "atom")
            cell = _first_cell(m.density, lambda x: x < 0)
        elif v == d:
            for loc, mass in m.atoms:
                if mass > 0:
                    return SdFlowViolation(v, Interval.point(loc), mass, "atom")
            cell = _first_cell(m.density, lambda x: x > 0)
        else:
            if m.atoms:
                loc, mass = m.atoms[0]
                return SdFlowViolation(v, Interval.point(loc), mass, "atom")
            cell = _first_cell(m.density, lambda x: x != 0)
        if cell is not None:
            lo, hi, val = cell
            return SdFlowViolation(v, Interval(lo, hi), val, "density")
    dest = balances[d]
    r_s = balances[s].density.truncate(tt.base_horizon)
    r_d = None if dest.atoms else dest.density
    return SdFlowCertificate(r_s, dest, r_d, balances)


@dataclass(frozen=True)
class ZeroSupportWitness:
    """Edge ``edge`` carries flow on ``interval`` although its travel time is positive there."""

    edge: str
    interval: Interval


def is_zero_supported(tt: TravelTimes, g: Mapping[str, StepFunction]) -> ZeroSupportWitness | None:
    """Check that flow only enters edges while their travel time is zero.

    Returns None, or a witness naming the first offending edge and the maximal
    interval of consecutive offending cells.
    """
    g = check_edge_flow(tt, g)
    for eid in tt.net.edge_ids:
        f = g[eid]
        if not f:
            continue
        D = tt.D[eid]
        pts = sorted(set(f.breakpoints) | set(D.breakpoints))
        run = None
        for x0, x1 in zip(pts, pts[1:]):
            bad = f(x0) > 0 and not (D(x0) == 0 and D(x1) == 0)
            if bad:
                run = (run[0], x1) if run else (x0, x1)
            elif run:
                break
        if run:
            return ZeroSupportWitness(eid, Interval(run[0], run[1]))
    return None


def total_travel_time(tt: TravelTimes, g: Mapping[str, StepFunction]) -> Fraction:
    """Total time spent on edges, ``sum_e ∫ D_e g_e``.

    The value is computed twice, directly and as minus the first moments of
    all node balances; the two must agree exactly.
    """
    g = check_edge_flow(tt, g)
    direct = sum((tt.D[eid].integrate_against(f) for eid, f in g.items() if f), Fraction(0))
    via_balances = -sum((_balance(tt, g, v).moment() for v in tt.net.nodes), Fraction(0))
    if direct != via_balances:
        raise AssertionError(
            f"total travel time disagrees between direct ({direct}) and balance ({via_balances}) forms"
        )
    return direct
