"""Decomposing edge flows into walk inflows and zero-travel-time cycle inflows.

The main entry point is ``decompose``: it walks through s,d-walks in a fixed
order, removes from the residual flow as much inflow as each walk can carry
(``solve_fdk``) and finally splits what is left, a circulation on edges with
zero travel time, into simple-cycle inflows (``zero_cycle_decompose``).

The purity tools analyse the cycle part of a decomposition.  ``check_pure``
decides whether the cycle inflows could be absorbed into walks, and
``purify`` carries out that absorption by splicing cycles into walks.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .balance import (
    SdFlowViolation,
    ZeroSupportWitness,
    _balance,
    check_edge_flow,
    is_zero_supported,
    validate_sd_flow,
)
from .loading import (
    NonExistence,
    TravelTimes,
    arrival_function,
    inverse_load,
    parameterized_load,
    parameterized_load_edgewise,
)
from .lp import RationalLP, solve_lp
from .netgraph import (
    _walk_search,
    cycle_nodes,
    enumerate_simple_cycles,
    eulerian_circuit,
    validate_walk,
)
from .timealg import (
    Interval,
    MonotoneMap,
    StepFunction,
    TimeMeasure,
    as_rational,
    image_of_intervals,
    intersect_intervals,
    merge_intervals,
    preimage_of_intervals,
    pushforward,
    restrict,
    subtract_intervals,
    total_length,
)

logger = logging.getLogger(__name__)

__all__ = [
    "Decomposition",
    "FdkProblem",
    "InvalidFlow",
    "BudgetExhausted",
    "NoPositiveSourceOutflow",
    "ReconstructionMismatch",
    "solve_fdk",
    "fdk_arrangement",
    "decompose",
    "zero_cycle_decompose",
    "reconstruct",
    "reconstruction_mismatch",
    "FlowCarryingWalk",
    "find_flow_carrying_walk",
    "Component",
    "active_components",
    "Pure",
    "Witnesses",
    "check_pure",
    "MaximallyPure",
    "purify",
]


class InvalidFlow(ValueError):
    """The edge flow to be decomposed is not an s,d-flow."""

    def __init__(self, violation):
        self.violation = violation
        super().__init__(f"not an s,d-flow: {violation}")


class BudgetExhausted(RuntimeError):
    """The walk stream ended before the residual became a circulation."""

    def __init__(self, message, witness=None):
        self.witness = witness
        super().__init__(message)


class NoPositiveSourceOutflow(ValueError):
    """The flow has no net outflow at the source, so no walk carries flow."""


@dataclass(frozen=True)
class ReconstructionMismatch:
    """First cell where a decomposition disagrees with the edge flow.

    ``difference`` is the reconstructed rate minus the flow's rate there.
    """

    edge: str
    interval: Interval
    difference: Fraction

    def __str__(self):
        return f"edge {self.edge}: decomposition exceeds flow by {self.difference} on {self.interval}"


@dataclass
class Decomposition:
    """Walk inflows and cycle inflows whose loads add up to an edge flow.

    Walk and cycle inflows live on ``[0, t_f]``; their insertion order is the
    order in which they were found.
    """

    walk_inflows: dict
    cycle_inflows: dict
    travel_times: TravelTimes = field(repr=False)
    iterations: int = 0

    def walk_mass(self) -> Fraction:
        return sum((h.integral() for h in self.walk_inflows.values()), Fraction(0))

    def cycle_mass(self) -> Fraction:
        return sum((h.integral() for h in self.cycle_inflows.values()), Fraction(0))

    def is_pure(self) -> bool:
        return all(h.is_zero() for h in self.cycle_inflows.values())


def _zero(horizon) -> StepFunction:
    return StepFunction.zero(horizon)


def _walk_load(tt: TravelTimes, w, h) -> dict:
    load = parameterized_load(tt, w, h)
    if isinstance(load, NonExistence):
        raise AssertionError(f"walk {w} has no load: point masses at {load.locations}")
    return load


def reconstruct(dec: Decomposition) -> dict:
    """Edge flow induced by a decomposition, on the extended horizon."""
    tt = dec.travel_times
    total = {eid: _zero(tt.horizon) for eid in tt.net.edge_ids}
    for w, h in dec.walk_inflows.items():
        if h.is_zero():
            continue
        for eid, f in _walk_load(tt, w, h).items():
            if f:
                total[eid] = total[eid] + f
    for c, h in dec.cycle_inflows.items():
        if h.is_zero():
            continue
        hf = tt.fit(h)
        for eid in c:
            total[eid] = total[eid] + hf
    return total


def reconstruction_mismatch(tt: TravelTimes, g: Mapping[str, StepFunction], dec: Decomposition):
    """None if ``dec`` reproduces ``g`` exactly, else the first differing cell."""
    g = check_edge_flow(tt, g)
    rec = reconstruct(dec)
    for eid in tt.net.edge_ids:
        diff = rec[eid] - g[eid]
        for lo, hi, v in diff.cells():
            if v != 0:
                return ReconstructionMismatch(eid, Interval(lo, hi), v)
    return None


# ---------------------------------------------------------------------------
# maximal inflow along a single walk
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FdkProblem:
    """Data of one walk step: the walk, the residual flow, the source budget and the destination floor."""

    walk: tuple
    residual: Mapping[str, StepFunction]
    source_budget: StepFunction
    destination_floor: TimeMeasure


def _level_points(A: MonotoneMap, y: Fraction) -> list[Fraction]:
    """Endpoints of ``A^{-1}({y})`` (one point, or both ends of a plateau)."""
    if y < A.values[0] or y > A.values[-1]:
        return []
    a = A.first_reach(y)
    b = A.last_at_most(y)
    return [a] if a == b else [a, b]


@dataclass(frozen=True)
class Arrangement:
    """Departure-time breakpoints for one walk; ``closed`` tells whether the closure finished."""

    points: tuple
    closed: bool


def _feasible_departures(tt: TravelTimes, p: FdkProblem, A) -> list[Interval]:
    """Departure times at which every cap along the walk is positive and no arrival map is flat."""
    w = tuple(p.walk)
    k = len(w)
    feasible = p.source_budget.positive_part().support()
    for j in range(1, k + 1):
        supp = tt.fit(p.residual[w[j - 1]]).positive_part().support()
        feasible = intersect_intervals(feasible, preimage_of_intervals(A[j], supp))
    cap_d = (-p.destination_floor.density).positive_part().support()
    feasible = intersect_intervals(feasible, preimage_of_intervals(A[k + 1], cap_d))
    for j in range(2, k + 2):
        feasible = subtract_intervals(feasible, A[j].plateaus())
    return feasible


def fdk_arrangement(tt: TravelTimes, p: FdkProblem, max_points: int = 2000) -> Arrangement:
    """Departure breakpoints on which a piecewise-constant optimum exists.

    Contains the breakpoints of every arrival map, the pulled-back
    breakpoints of every cap, and is closed under moving a point between two
    visits of the same edge (``A_j^{-1} ∘ A_{j'}``).  That closure makes the
    images of two departure cells on a shared edge either coincide or be
    disjoint.  Only departures up to ``t_f`` carry flow, so the closure is
    taken inside the departure times where every cap is positive (a subset
    of ``[0, t_f]``); near the extended horizon travel times shrink to zero
    and an unrestricted closure would not terminate.  If it does not settle
    within ``max_points`` points the arrangement is still valid (results stay
    feasible) but may be too coarse for optimality; a warning is logged.
    """
    w = tuple(p.walk)
    k = len(w)
    H = tt.horizon
    t_f = tt.base_horizon
    A = [None] + [arrival_function(tt, w, j) for j in range(1, k + 2)]
    pts: set[Fraction] = {Fraction(0), H}
    pts.update(p.source_budget.breakpoints)
    for j in range(1, k + 2):
        pts.update(A[j].breakpoints)
    for j in range(1, k + 1):
        for y in tt.fit(p.residual[w[j - 1]]).breakpoints:
            pts.update(_level_points(A[j], y))
    for y in p.destination_floor.density.breakpoints:
        pts.update(_level_points(A[k + 1], y))
    pts = {x for x in pts if 0 <= x <= H}

    pairs = []
    for j in range(1, k + 1):
        for jj in range(1, k + 1):
            if j != jj and w[j - 1] == w[jj - 1]:
                pairs.append((j, jj))
    closed = True
    if pairs:
        feasible = _feasible_departures(tt, p, A)

        def relevant(z):
            return z <= t_f and any(iv.lo <= z <= iv.hi for iv in feasible)

        work = [x for x in pts if relevant(x)]
        while work:
            x = work.pop()
            for j, jj in pairs:
                for z in _level_points(A[j], A[jj](x)):
                    if z not in pts and relevant(z):
                        pts.add(z)
                        work.append(z)
            if len(pts) > max_points:
                closed = False
                logger.warning("departure arrangement for walk %s exceeded %d points; result may be suboptimal", w, max_points)
                break
    return Arrangement(tuple(sorted(pts)), closed)


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, x):
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def _arrival_rows(cells, var_of, images, cap_fn):
    """Constraint rows ``sum coef·x <= cap`` over the arrival cells of several images.

    ``images`` lists ``(cell index, y0, y1, coef)``; within each row every
    image either covers the arrival cell or misses it.
    """
    ends = sorted({y for _, y0, y1, _ in images for y in (y0, y1)})
    rows = []
    if not ends:
        return rows
    from bisect import bisect_left

    contributions: list[dict] = [dict() for _ in range(len(ends) - 1)]
    for ci, y0, y1, coef in images:
        for s in range(bisect_left(ends, y0), bisect_left(ends, y1)):
            v = var_of[ci]
            contributions[s][v] = contributions[s].get(v, Fraction(0)) + coef
    for s, contrib in enumerate(contributions):
        if contrib:
            cap = cap_fn((ends[s] + ends[s + 1]) / 2)
            rows.append((contrib, cap))
    return rows


def solve_fdk(tt: TravelTimes, p: FdkProblem, arrangement: Arrangement | None = None) -> StepFunction:
    """Largest inflow along ``p.walk`` that fits into the residual.

    Maximises ``∫ h`` subject to: the load of ``h`` on every edge stays below
    the residual, ``h <= source_budget``, the arrival density at the end of
    the walk stays below ``-destination_floor``, and no mass departs while an
    arrival map is flat.  Returns ``h`` on ``[0, t_f]``.
    """
    w = tuple(p.walk)
    k = len(w)
    t_f = tt.base_horizon
    arr = arrangement or fdk_arrangement(tt, p)
    A = [None] + [arrival_function(tt, w, j) for j in range(1, k + 2)]
    residual = {eid: tt.fit(p.residual[eid]) for eid in set(w)}
    r_s = p.source_budget
    cap_d = -p.destination_floor.density

    pts = arr.points
    cells = []
    for x0, x1 in zip(pts, pts[1:]):
        if x1 > t_f:
            break
        mid = (x0 + x1) / 2
        if r_s(mid) <= 0:
            continue
        ok = True
        slopes = []
        for j in range(1, k + 2):
            a = (A[j](x1) - A[j](x0)) / (x1 - x0)
            if a == 0:
                ok = False
                break
            slopes.append(a)
            y = A[j](mid)
            if j <= k and residual[w[j - 1]](y) <= 0:
                ok = False
                break
            if j == k + 1 and cap_d(y) <= 0:
                ok = False
                break
        if ok:
            cells.append((x0, x1, slopes))
    if not cells:
        return _zero(t_f)

    n = len(cells)
    var_of = list(range(n))
    rows: list[tuple[dict, Fraction]] = []
    for i, (x0, x1, _) in enumerate(cells):
        rows.append(({i: Fraction(1)}, r_s((x0 + x1) / 2)))
    by_edge: dict[str, list] = {}
    for j in range(1, k + 1):
        by_edge.setdefault(w[j - 1], []).append(j)
    for eid, js in by_edge.items():
        images = []
        for i, (x0, x1, slopes) in enumerate(cells):
            for j in js:
                images.append((i, A[j](x0), A[j](x1), 1 / slopes[j - 1]))
        rows.extend(_arrival_rows(cells, var_of, images, residual[eid]))
    images = [(i, A[k + 1](x0), A[k + 1](x1), 1 / slopes[k]) for i, (x0, x1, slopes) in enumerate(cells)]
    rows.extend(_arrival_rows(cells, var_of, images, cap_d))

    uf = _UnionFind(n)
    for contrib, _ in rows:
        vs = list(contrib)
        for v in vs[1:]:
            uf.union(vs[0], v)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(uf.find(i), []).append(i)
    rows_of_group: dict[int, list] = {}
    for contrib, cap in rows:
        rows_of_group.setdefault(uf.find(next(iter(contrib))), []).append((contrib, cap))

    x = [Fraction(0)] * n
    for root, members in groups.items():
        grow = rows_of_group.get(root, [])
        if len(members) == 1:
            i = members[0]
            x[i] = min(cap / contrib[i] for contrib, cap in grow)
            continue
        index = {v: pos for pos, v in enumerate(members)}
        c = [cells[v][1] - cells[v][0] for v in members]
        A_ub = []
        b_ub = []
        for contrib, cap in grow:
            row = [Fraction(0)] * len(members)
            for v, coef in contrib.items():
                row[index[v]] = coef
            A_ub.append(row)
            b_ub.append(cap)
        res = solve_lp(RationalLP(c, A_ub, b_ub))
        if res.status != "optimal":
            raise AssertionError(f"walk LP is {res.status}; zero is always feasible")
        for v, val in zip(members, res.x):
            x[v] = val
    return StepFunction.from_pieces(((x0, x1, x[i]) for i, (x0, x1, _) in enumerate(cells)), t_f)


# ---------------------------------------------------------------------------
# the decomposition algorithm
# ---------------------------------------------------------------------------


def _parse_order(order):
    if order is None or order == "edgecount-lex":
        return None
    if isinstance(order, str):
        raise ValueError(f"unknown walk order {order!r}")
    return [tuple(w) for w in order]


def decompose(
    tt: TravelTimes,
    g: Mapping[str, StepFunction],
    budget=None,
    max_len: int | None = None,
    order="edgecount-lex",
) -> Decomposition:
    """Decompose the s,d-flow ``g`` into walk inflows and zero-cycle inflows.

    Parameters
    ----------
    tt : travel times the flow is measured against
    g : edge flow on ``[0, t_f]``
    budget : walks whose summed minimal travel times exceed ``budget`` are
        skipped; defaults to the extended horizon, which loses nothing
    max_len : maximal number of edges per walk; required when some edge can
        have zero travel time
    order : ``"edgecount-lex"`` or an explicit list of walks to try in turn

    Raises
    ------
    InvalidFlow
        ``g`` is not an s,d-flow.
    BudgetExhausted
        The walks tried could not absorb all source outflow.
    EnumerationRefused
        Zero travel times are possible and no ``max_len`` was given.
    """
    cert = validate_sd_flow(tt, g)
    if isinstance(cert, SdFlowViolation):
        raise InvalidFlow(cert)
    residual = check_edge_flow(tt, g)
    net = tt.net
    t_f = tt.base_horizon
    budget = tt.horizon if budget is None else as_rational(budget)
    state = {"residual": residual, "r_s": cert.r_s, "floor": cert.destination_balance}

    explicit = _parse_order(order)
    if explicit is None:
        min_travel = {eid: tt.min_delay(eid) for eid in net.edge_ids}

        def step(node, eid):
            prefix, feasible = node
            A = arrival_function(tt, prefix, len(prefix) + 1)
            supp = state["residual"][eid].support()
            feasible = intersect_intervals(feasible, preimage_of_intervals(A, supp))
            walk = prefix + (eid,)
            A_next = arrival_function(tt, walk, len(walk) + 1)
            feasible = subtract_intervals(feasible, A_next.plateaus())
            if total_length(feasible) == 0:
                return None
            return walk, feasible

        walks = _walk_search(net, min_travel, budget, max_len, ((), state["r_s"].support()), step)
    else:
        for w in explicit:
            bad = validate_walk(net, w)
            if bad is not None:
                raise ValueError(f"walk {w}: {bad}")
        walks = iter(explicit)

    inflows: dict[tuple, StepFunction] = {}
    iterations = 0
    for w in walks:
        if state["r_s"].is_zero():
            break
        iterations += 1
        problem = FdkProblem(w, state["residual"], state["r_s"], state["floor"])
        h = solve_fdk(tt, problem)
        if h.is_zero():
            continue
        load = _walk_load(tt, w, h)
        state["residual"] = {eid: state["residual"][eid] - load[eid] for eid in net.edge_ids}
        r_s = state["r_s"] - h
        new_cert = validate_sd_flow(tt, state["residual"])
        if isinstance(new_cert, SdFlowViolation) or new_cert.r_s != r_s:
            raise AssertionError(f"residual after walk {w} is no longer an s,d-flow: {new_cert}")
        state["r_s"] = r_s
        state["floor"] = new_cert.destination_balance
        inflows[w] = inflows[w] + h if w in inflows else h

    residual = state["residual"]
    if not state["r_s"].is_zero():
        raise BudgetExhausted(
            f"source outflow of mass {state['r_s'].integral()} is not covered by the walks tried",
            state["r_s"],
        )
    for v in net.nodes:
        m = _balance(tt, residual, v)
        if not m.is_zero():
            raise BudgetExhausted(f"residual flow does not balance at node {v!r}", (v, m))
    witness = is_zero_supported(tt, residual)
    if witness is not None:
        raise BudgetExhausted(f"residual flow on {witness.edge} has positive travel time on {witness.interval}", witness)

    cycles = zero_cycle_decompose(tt, residual)
    return Decomposition(inflows, cycles, tt, iterations)


def zero_cycle_decompose(tt: TravelTimes, g_star: Mapping[str, StepFunction]) -> dict:
    """Split a zero-travel-time circulation into simple-cycle inflows.

    On each cell of the common refinement the simple cycles are visited in
    canonical order and each receives the minimum residual over its edges.
    """
    g_star = check_edge_flow(tt, g_star)
    t_f = tt.base_horizon
    active = {eid: f for eid, f in g_star.items() if f}
    if not active:
        return {}
    pts = sorted(set().union(*(f.breakpoints for f in active.values())))
    pieces: dict[tuple, list] = {}
    cycles = enumerate_simple_cycles(tt.net)
    for x0, x1 in zip(pts, pts[1:]):
        vals = {eid: f(x0) for eid, f in active.items()}
        if not any(vals.values()):
            continue
        for c in cycles:
            m = min(vals.get(eid, Fraction(0)) for eid in c)
            if m > 0:
                for eid in c:
                    vals[eid] -= m
                pieces.setdefault(c, []).append((x0, x1, m))
        left = next((eid for eid, v in vals.items() if v != 0), None)
        if left is not None:
            raise AssertionError(
                f"flow on {left} over [{x0}, {x1}) is not a circulation of zero-travel cycles"
            )
    return {c: StepFunction.from_pieces(ps, t_f) for c, ps in pieces.items()}


# ---------------------------------------------------------------------------
# finding a single flow-carrying walk
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FlowCarryingWalk:
    walk: tuple
    inflow: StepFunction
    depth: int


def _split(rate: StepFunction, caps: Sequence[tuple[str, StepFunction]]):
    """Split ``rate`` greedily over ``caps`` in order; returns shares and the uncovered rest."""
    rest = rate
    shares = []
    for eid, cap in caps:
        share = rest.minimum(cap)
        if share:
            shares.append((eid, share))
            rest = rest - share
    return shares, rest


def find_flow_carrying_walk(tt: TravelTimes, g: Mapping[str, StepFunction]) -> FlowCarryingWalk:
    """An s,d-walk with a nonzero inflow that fits under ``g``.

    Grows a tree of walks from the source level by level: each leaf's
    outflow is split greedily over the outgoing edges of its end node, within
    the flow not yet used by the tree.  A leaf at the destination whose
    outflow cannot be passed on entirely yields the walk; the inflow is then
    traced back edge by edge.  The returned inflow ``h`` satisfies
    ``load(h) <= g``, ``h <= r_s`` and raises the destination balance.
    """
    cert = validate_sd_flow(tt, g)
    if isinstance(cert, SdFlowViolation):
        raise InvalidFlow(cert)
    if cert.r_s.is_zero():
        raise NoPositiveSourceOutflow("the source has no net outflow")
    net = tt.net
    d = net.destination
    delta = check_edge_flow(tt, g)
    g_norm = sum((f.integral() for f in delta.values()), Fraction(0))
    max_depth = math.floor(g_norm / cert.r_s.integral())

    # a leaf is (tree path: list of (edge, inflow share), outflow rate)
    leaves = [([], tt.fit(cert.r_s))]
    depth = 0
    while True:
        depth += 1
        if depth > max_depth + 1:
            raise AssertionError("tree search exceeded its depth bound")
        new_leaves = []
        for path, outflow in leaves:
            v = net.head(path[-1][0]) if path else net.source
            caps = [(eid, delta[eid]) for eid in net.out_edges(v)]
            shares, rest = _split(outflow, caps)
            if rest:
                if v != d:
                    raise AssertionError(f"outflow at {v!r} cannot be passed on; input is not an s,d-flow")
                return _trace_back(tt, g, cert, path, rest.positive_part(), depth - 1)
            for eid, share in shares:
                delta[eid] = delta[eid] - share
                out = pushforward(share, tt.T[eid])
                new_leaves.append((path + [(eid, share)], out.density.fit(tt.horizon)))
        leaves = new_leaves


def _trace_back(tt, g, cert, path, surplus, depth) -> FlowCarryingWalk:
    walk = tuple(eid for eid, _ in path)
    h = surplus
    for eid, share in reversed(path):
        h = inverse_load(tt, (eid,), 2, h).minimum(share)
    h = h.truncate(tt.base_horizon)
    _check_carrying(tt, g, cert, walk, h)
    return FlowCarryingWalk(walk, h, depth)


def _check_carrying(tt, g, cert, walk, h):
    if h.is_zero():
        raise AssertionError("traced inflow is zero")
    if not h.le(cert.r_s):
        raise AssertionError("traced inflow exceeds the source outflow")
    load = _walk_load(tt, walk, h)
    gf = check_edge_flow(tt, g)
    for eid in tt.net.edge_ids:
        if not load[eid].le(gf[eid]):
            raise AssertionError(f"traced inflow overloads {eid}")
    diff = _balance(tt, load, tt.net.destination) - cert.destination_balance
    if not diff.density.is_nonnegative() or any(m < 0 for _, m in diff.atoms):
        raise AssertionError("traced inflow drains the destination beyond its balance")


# ---------------------------------------------------------------------------
# active components and purity
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Component:
    """Cycles that are simultaneously active and linked through shared nodes."""

    cycles: tuple
    nodes: frozenset
    edges: frozenset
    times: tuple  # merged half-open intervals

    def as_dict(self):
        return {"cycles": [list(c) for c in self.cycles]}


def _cycle_active_cells(tt: TravelTimes, cycle_inflows: Mapping[tuple, StepFunction]):
    """Cells of the common refinement with the set of active cycles on each."""
    t_f = tt.base_horizon
    nonzero = {c: h for c, h in cycle_inflows.items() if not h.is_zero()}
    if not nonzero:
        return []
    pts = {Fraction(0), t_f}
    for h in nonzero.values():
        pts.update(x for x in h.breakpoints if x <= t_f)
    for c in nonzero:
        for eid in c:
            pts.update(x for x in tt.D[eid].breakpoints if x <= t_f)
    pts = sorted(pts)
    out = []
    for x0, x1 in zip(pts, pts[1:]):
        mid = (x0 + x1) / 2
        act = [
            c
            for c, h in nonzero.items()
            if h(mid) > 0 and all(tt.D[eid](x0) == 0 and tt.D[eid](x1) == 0 for eid in c)
        ]
        if act:
            out.append((x0, x1, act))
    return out


def active_components(tt: TravelTimes, cycle_inflows: Mapping[tuple, StepFunction]) -> list[Component]:
    """Connected groups of active cycles and the times at which each group is active."""
    net = tt.net
    times: dict[frozenset, list] = {}
    for x0, x1, act in _cycle_active_cells(tt, cycle_inflows):
        uf = _UnionFind(len(act))
        owner = {}
        for i, c in enumerate(act):
            for v in cycle_nodes(net, c):
                if v in owner:
                    uf.union(owner[v], i)
                else:
                    owner[v] = i
        groups: dict[int, list] = {}
        for i, c in enumerate(act):
            groups.setdefault(uf.find(i), []).append(c)
        for members in groups.values():
            times.setdefault(frozenset(members), []).append(Interval(x0, x1, True, False))
    out = []
    for cycles, ivs in times.items():
        ivs = merge_intervals(ivs)
        if total_length(ivs) == 0:
            continue
        cs = tuple(sorted(cycles, key=lambda c: (len(c), c)))
        nodes = frozenset(v for c in cs for v in cycle_nodes(net, c))
        edges = frozenset(eid for c in cs for eid in c)
        out.append(Component(cs, nodes, edges, tuple(ivs)))
    out.sort(key=lambda comp: (comp.cycles, comp.times[0].lo))
    return out


@dataclass(frozen=True)
class Pure:
    """No active component blocks absorbing the cycle inflows into walks."""

    def __bool__(self):
        return True


@dataclass(frozen=True)
class Witnesses:
    """Components and time intervals on which cycle flow cannot be absorbed into walks."""

    items: tuple  # of (Component, Interval)

    def __bool__(self):
        return False


def _component_witnesses(tt: TravelTimes, g: dict, comp: Component, r_d: StepFunction) -> list[Interval]:
    net = tt.net
    d = net.destination
    leaving = [
        eid for eid in net.edge_ids if eid not in comp.edges and net.tail(eid) in comp.nodes
    ]
    bad = []
    for iv in comp.times:
        pts = {iv.lo, iv.hi}
        for eid in leaving:
            pts.update(x for x in g[eid].breakpoints if iv.lo < x < iv.hi)
        pts.update(x for x in r_d.breakpoints if iv.lo < x < iv.hi)
        pts = sorted(pts)
        for x0, x1 in zip(pts, pts[1:]):
            mid = (x0 + x1) / 2
            cond_a = d in comp.nodes and r_d(mid) < 0
            cond_b = any(g[eid](mid) > 0 for eid in leaving)
            if not (cond_a or cond_b):
                bad.append(Interval(x0, x1, True, False))
    return merge_intervals(bad)


def check_pure(tt: TravelTimes, g: Mapping[str, StepFunction], dec: Decomposition):
    """Whether every active component is linked to the rest of the flow at all times.

    A component passes at time ``t`` if the destination belongs to it and the
    destination balance is negative at ``t``, or if some edge leaving the
    component carries flow at ``t``.  Returns ``Pure()`` or ``Witnesses``.
    """
    gf = check_edge_flow(tt, g)
    r_d = _balance(tt, gf, tt.net.destination).density
    items = []
    for comp in active_components(tt, dec.cycle_inflows):
        for iv in _component_witnesses(tt, gf, comp, r_d):
            items.append((comp, iv))
    return Witnesses(tuple(items)) if items else Pure()


@dataclass(frozen=True)
class MaximallyPure:
    """Result of ``purify`` when some cycle flow cannot be absorbed.

    ``decomposition`` keeps cycle inflows exactly where ``witnesses`` say so.
    """

    decomposition: Decomposition
    witnesses: Witnesses


def _add(d: dict, key, f: StepFunction):
    if f.is_zero():
        return
    d[key] = d[key] + f if key in d else f


def _sub(d: dict, key, f: StepFunction):
    if f.is_zero():
        return
    r = d[key] - f
    if not r.is_nonnegative():
        raise AssertionError(f"inflow of {key} would become negative")
    d[key] = r


def _splice(w: tuple, j: int, loop: tuple) -> tuple:
    """Insert ``loop`` before position ``j`` (1-based; ``len(w)+1`` appends)."""
    return w[: j - 1] + tuple(loop) + w[j - 1 :]


def _positions_leaving(tt: TravelTimes, w: tuple, comp: Component) -> list[int]:
    net = tt.net
    out = []
    for j in range(1, len(w) + 2):
        if j == len(w) + 1:
            if net.destination in comp.nodes:
                out.append(j)
        elif w[j - 1] not in comp.edges and net.tail(w[j - 1]) in comp.nodes:
            out.append(j)
    return out


def _cover(tt: TravelTimes, walks: dict, target: list[Interval], positions) -> list:
    """Pick ``(walk, j, departures)`` triples whose arrivals tile ``target``.

    ``positions(w)`` lists the admissible positions of ``w``; walks and
    positions are taken in order, and each triple only claims arrival times
    no earlier triple has claimed.
    """
    covered: list[Interval] = []
    triples = []
    for w, h in walks.items():
        if h.is_zero():
            continue
        supp = h.support()
        for j in positions(w):
            A = arrival_function(tt, w, j)
            free = subtract_intervals(target, covered)
            if total_length(free) == 0:
                return triples
            dep = intersect_intervals(preimage_of_intervals(A, free), supp)
            dep = subtract_intervals(dep, A.plateaus())
            if total_length(dep) == 0:
                continue
            arrivals = image_of_intervals(A, dep)
            covered = merge_intervals(covered + arrivals)
            triples.append((w, j, dep, arrivals))
    if total_length(subtract_intervals(target, covered)) != 0:
        raise AssertionError("walk flow does not reach the component at all of its active times")
    return triples


def _absorb_component(tt: TravelTimes, dec: Decomposition, comp: Component) -> None:
    """Route a little walk flow through every cycle of ``comp`` while it is active."""
    net = tt.net
    t_f = tt.base_horizon
    walks = dict(dec.walk_inflows)
    new_walks = dict(walks)
    new_cycles = dict(dec.cycle_inflows)
    min_hc = None
    for c in comp.cycles:
        hc = tt.fit(dec.cycle_inflows[c])
        min_hc = hc if min_hc is None else min_hc.minimum(hc)
    triples = _cover(tt, walks, list(comp.times), lambda w: _positions_leaving(tt, w, comp))
    for l, (w, j, dep, arrivals) in enumerate(triples, start=1):
        weight = Fraction(1, 2**l)
        h_hat = inverse_load(tt, w, j, restrict(min_hc, arrivals)).truncate(t_f)
        rho = (h_hat * Fraction(1, 2)).minimum(walks[w])
        start = net.destination if j == len(w) + 1 else net.tail(w[j - 1])
        loop = eulerian_circuit(net, comp.cycles, None, start)
        moved = rho * weight
        _sub(new_walks, w, moved)
        _add(new_walks, _splice(w, j, loop), moved)
        arrived = parameterized_load_edgewise(tt, w, j, moved)
        if isinstance(arrived, NonExistence):
            raise AssertionError("rerouted flow departs on a plateau")
        arrived = arrived.truncate(t_f)
        for c in comp.cycles:
            _sub(new_cycles, c, arrived)
    dec.walk_inflows = {w: h for w, h in new_walks.items() if not h.is_zero()}
    dec.cycle_inflows = new_cycles


def _absorb_cycle(tt: TravelTimes, dec: Decomposition, c: tuple) -> None:
    """Replace the inflow into cycle ``c`` by extra laps on walks that already use it."""
    t_f = tt.base_horizon
    hc = dec.cycle_inflows.get(c)
    if hc is None or hc.is_zero():
        return
    e = c[0]
    walks = dict(dec.walk_inflows)
    new_walks = dict(walks)
    triples = _cover(
        tt, walks, hc.support(), lambda w: [j for j in range(1, len(w) + 1) if w[j - 1] == e]
    )
    per_walk: dict[tuple, int] = {}
    for w, _, _, _ in triples:
        per_walk[w] = per_walk.get(w, 0) + 1
    for w, j, dep, arrivals in triples:
        count = per_walk[w]
        h_hat = inverse_load(tt, w, j, restrict(tt.fit(hc), arrivals)).truncate(t_f)
        h_hat = restrict(h_hat, dep)
        h_w = walks[w]
        # ratio of the required rate to the available rate, cell by cell
        pieces: dict[int, list] = {}
        pts = sorted(set(h_hat.breakpoints) | set(h_w.breakpoints))
        for x0, x1 in zip(pts, pts[1:]):
            need = h_hat(x0)
            if need == 0:
                continue
            have = h_w(x0)
            if have == 0:
                raise AssertionError("cycle flow is not carried by the covering walk")
            ratio = need / have
            n = math.ceil(ratio)
            pieces.setdefault(n, []).append((x0, x1, need / (n * count)))
        for n, ps in sorted(pieces.items()):
            moved = StepFunction.from_pieces(ps, t_f)
            _sub(new_walks, w, moved)
            _add(new_walks, _splice(w, j, c * (n * count)), moved)
    dec.walk_inflows = {w: h for w, h in new_walks.items() if not h.is_zero()}
    dec.cycle_inflows = {k: h for k, h in dec.cycle_inflows.items() if k != c}


def purify(tt: TravelTimes, g: Mapping[str, StepFunction], dec: Decomposition):
    """Turn cycle inflows into walk inflows wherever possible.

    Cycle flow on the witness intervals of ``check_pure`` cannot be absorbed
    and is kept; everything else is moved onto walks in two phases.  First
    each active component gets a small share of walk flow routed through an
    Eulerian circuit of its cycles.  Then every cycle's inflow is replaced by
    extra laps of that cycle on the walks now passing through it.

    Returns the new ``Decomposition`` (the input itself if it is already
    pure) or ``MaximallyPure`` when some cycle flow had to be kept.  The
    input is not modified.
    """
    if dec.is_pure():
        return dec
    mismatch = reconstruction_mismatch(tt, g, dec)
    if mismatch is not None:
        raise ValueError(f"decomposition does not reproduce the flow: {mismatch}")
    verdict = check_pure(tt, g, dec)
    t_f = tt.base_horizon

    work = Decomposition(dict(dec.walk_inflows), {}, tt, dec.iterations)
    retained: dict[tuple, StepFunction] = {}
    keep_at: dict[tuple, list] = {}
    if isinstance(verdict, Witnesses):
        for comp, iv in verdict.items:
            for c in comp.cycles:
                keep_at.setdefault(c, []).append(iv)
    for c, h in dec.cycle_inflows.items():
        kept = restrict(h, keep_at.get(c, [])) if c in keep_at else _zero(h.horizon)
        _add(retained, c, kept)
        _add(work.cycle_inflows, c, h - kept)

    for comp in active_components(tt, work.cycle_inflows):
        _absorb_component(tt, work, comp)
    for c in sorted(list(work.cycle_inflows), key=lambda c: (len(c), c)):
        _absorb_cycle(tt, work, c)
    if any(not h.is_zero() for h in work.cycle_inflows.values()):
        raise AssertionError("cycle inflow left after absorbing all cycles")

    for c, h in retained.items():
        _add(work.cycle_inflows, c, h)
    mismatch = reconstruction_mismatch(tt, g, work)
    if mismatch is not None:
        raise AssertionError(f"purified decomposition does not reproduce the flow: {mismatch}")
    if retained:
        return MaximallyPure(work, verdict)
    return work
