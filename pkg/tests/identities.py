"""Checks of the structural identities of walk loads, shared by unit and acceptance tests.

Every check takes a random (walk, inflow, travel times) triple from
``random_triple`` and raises ``AssertionError`` on failure.
"""

from __future__ import annotations

from fractions import Fraction

from dynflow.balance import _balance, validate_sd_flow
from dynflow.loading import (
    NonExistence,
    arrival_function,
    parameterized_load,
    parameterized_load_edgewise,
)
from dynflow.timealg import (
    Interval,
    PiecewiseLinear,
    StepFunction,
    TimeMeasure,
    image_of_intervals,
    merge_intervals,
    pushforward,
    restrict,
    subtract_intervals,
    total_length,
)
from instances import random_step, random_travel_times, random_walk

F = Fraction


def random_triple(seed: int):
    """Random travel times, an s,d-walk and an inflow whose load exists, or None.

    The inflow is zeroed on every plateau of the walk's final arrival map;
    earlier arrival maps can only have plateaus inside those.
    """
    rng, net, tt = random_travel_times(seed)
    w = random_walk(rng, net, max_len=5)
    if w is None:
        return None
    t_f = tt.base_horizon
    h = random_step(rng, t_f, cells=3, max_value=3)
    A = arrival_function(tt, w, len(w) + 1)
    keep = subtract_intervals([Interval(0, t_f)], A.plateaus())
    h = restrict(h, keep)
    return rng, tt, w, h


def _loads(tt, w, h):
    out = []
    for j in range(1, len(w) + 2):
        f = parameterized_load_edgewise(tt, w, j, h)
        assert not isinstance(f, NonExistence), f"load at position {j} has atoms {f.atoms}"
        out.append(f)
    return out


def _other_inflow(rng, tt, w):
    t_f = tt.base_horizon
    h = random_step(rng, t_f, cells=3, max_value=3)
    A = arrival_function(tt, w, len(w) + 1)
    return restrict(h, subtract_intervals([Interval(0, t_f)], A.plateaus()))


def check_mass_conservation(rng, tt, w, h):
    for f in _loads(tt, w, h):
        assert f.integral() == h.integral()


def check_order_embedding(rng, tt, w, h):
    """``h <= h'`` iff every load of ``h`` is below the load of ``h'``; strictness sets correspond."""
    bump = _other_inflow(rng, tt, w)
    bigger = h + bump
    other = _other_inflow(rng, tt, w)
    lo_loads, hi_loads, other_loads = _loads(tt, w, h), _loads(tt, w, bigger), _loads(tt, w, other)
    for j, (a, b) in enumerate(zip(lo_loads, hi_loads), start=1):
        assert a.le(b)
        strict = (b - a).support()
        A = arrival_function(tt, w, j)
        assert _same_up_to_null(strict, image_of_intervals(A, bump.support()))
    # converse: loads ordered at every position forces the inflows to be ordered
    loads_le = all(a.le(c) for a, c in zip(lo_loads, other_loads))
    assert loads_le == h.le(other)
    # the first position alone already decides it (its arrival map is the identity)
    assert lo_loads[0].le(other_loads[0]) == h.le(other)


def _same_up_to_null(a, b):
    a, b = merge_intervals(a), merge_intervals(b)
    return total_length(subtract_intervals(a, b)) == 0 and total_length(subtract_intervals(b, a)) == 0


def check_indicator_commutation(rng, tt, w, h):
    t_f = tt.base_horizon
    x0 = F(rng.randint(0, 2 * int(t_f)), 2)
    x1 = F(rng.randint(0, 2 * int(t_f)), 2)
    T = [Interval(min(x0, x1), max(x0, x1), True, False)]
    cut = restrict(h, T)
    for j in range(1, len(w) + 2):
        A = arrival_function(tt, w, j)
        left = parameterized_load_edgewise(tt, w, j, cut)
        right = restrict(parameterized_load_edgewise(tt, w, j, h), image_of_intervals(A, T))
        assert left == right


def check_propagation(rng, tt, w, h):
    k = len(w)
    j1 = rng.randint(1, k + 1)
    j2 = rng.randint(j1, k + 1)
    direct = parameterized_load_edgewise(tt, w, j2, h)
    mid = parameterized_load_edgewise(tt, w, j1, h)
    suffix = w[j1 - 1 :] if j1 <= k else ()
    if not suffix:
        assert direct == mid
        return
    via = parameterized_load_edgewise(tt, suffix, j2 - j1 + 1, mid)
    assert direct == via


def check_walk_balances(rng, tt, w, h):
    """Loading one walk conserves flow everywhere except its two ends."""
    load = parameterized_load(tt, w, h)
    assert not isinstance(load, NonExistence)
    hf = tt.fit(h)
    start, end = tt.net.tail(w[0]), tt.net.head(w[-1])
    arrival = pushforward(hf, arrival_function(tt, w, len(w) + 1)).extend(tt.horizon)
    for v in tt.net.nodes:
        got = _balance(tt, load, v)
        expected = TimeMeasure.zero(tt.horizon)
        if v == start:
            expected = expected + TimeMeasure(hf)
        if v == end:
            expected = expected - arrival
        assert got == expected, f"node {v}"


def travel_time_routes(tt, w, h):
    """Total travel time of a walk load computed three ways."""
    load = parameterized_load(tt, w, h)
    direct = sum((tt.D[e].integrate_against(f) for e, f in load.items() if f), F(0))
    via_balances = -sum((_balance(tt, load, v).moment() for v in tt.net.nodes), F(0))
    A = arrival_function(tt, w, len(w) + 1)
    hf = tt.fit(h)
    per_particle = (A - PiecewiseLinear.identity(A.hi)).integrate_against(hf)
    return direct, via_balances, per_particle


def check_total_travel_time(rng, tt, w, h):
    direct, via_balances, per_particle = travel_time_routes(tt, w, h)
    assert direct == via_balances == per_particle


def check_flow_carrying_walk(tt, g, found):
    """The walk inflow fits under ``g``, under the source outflow and under the destination intake."""
    cert = validate_sd_flow(tt, g)
    h = found.inflow
    assert not h.is_zero()
    assert h.le(cert.r_s)
    load = parameterized_load(tt, found.walk, h)
    assert not isinstance(load, NonExistence)
    assert all(load[e].le(tt.fit(g.get(e, StepFunction.zero(tt.horizon)))) for e in tt.net.edge_ids)
    walk_only = validate_sd_flow(tt, load).destination_balance
    assert not walk_only.atoms
    # the walk never delivers more to d than g does
    assert cert.destination_balance.density.le(walk_only.density)
    total = sum((f.integral() for f in g.values()), F(0))
    assert found.depth <= total // cert.r_s.integral()


ALL_CHECKS = {
    "mass conservation": check_mass_conservation,
    "order embedding": check_order_embedding,
    "indicator commutation": check_indicator_commutation,
    "propagation": check_propagation,
    "walk node balances": check_walk_balances,
    "total travel time": check_total_travel_time,
}

