"""Travel times, arrival maps and the loading of walk inflows onto edges.

The travel time of an edge is ``D_e(t)``, its exit-time map is
``T_e(t) = t + D_e(t)``.  Three edge models are supported: the Vickrey point
queue, the linear edge delay and exogenously fixed travel times.

Travel times are computed on the network horizon ``t_f`` and then extended
to a longer horizon ``H``.  On ``[t_f, H]`` the travel time decreases linearly
to zero, so every exit-time map sends ``[0, H]`` onto ``[T_e(0), H]`` and no
particle is ever pushed past ``H``.  ``H = t_f + 2·max_e D_e(t_f)`` keeps the
slope of ``T_e`` at least ``1/2`` on the extension, so the extension never
creates plateaus.

Loading a walk inflow ``h`` under frozen travel times means pushing ``h``
forward through each arrival map ``A_{w,j}``.  The result is a density only if
no positive mass departs during a plateau of the arrival map; otherwise a
``NonExistence`` value lists the point masses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence, Union

from .netgraph import DynNetwork, validate_walk
from .timealg import (
    Interval,
    MonotoneMap,
    PiecewiseLinear,
    StepFunction,
    as_rational,
    compose,
    pushforward,
    restrict,
)

__all__ = [
    "Vickrey",
    "LinearDelay",
    "Exogenous",
    "FifoError",
    "LoadingError",
    "NonExistence",
    "TravelTimes",
    "vickrey_queue",
    "vickrey_exit_time",
    "linear_delay_volume",
    "linear_delay_exit_time",
    "travel_times",
    "arrival_function",
    "parameterized_load_edgewise",
    "parameterized_load",
    "inverse_load",
    "edge_outflow",
    "network_loading",
    "total_load",
]


class FifoError(ValueError):
    """An exogenous travel time violates FIFO or is negative."""


class LoadingError(RuntimeError):
    """Network loading did not reach a verified fixed point."""


@dataclass(frozen=True)
class Vickrey:
    """Point queue with free-flow time ``tau`` and service rate ``nu``."""

    tau: Fraction
    nu: Fraction

    def __post_init__(self):
        object.__setattr__(self, "tau", as_rational(self.tau))
        object.__setattr__(self, "nu", as_rational(self.nu))
        if self.tau <= 0 or self.nu <= 0:
            raise ValueError("Vickrey edges need tau > 0 and nu > 0")


@dataclass(frozen=True)
class LinearDelay:
    """Travel time ``tau + x(t)/nu`` where ``x`` is the volume on the edge."""

    tau: Fraction
    nu: Fraction

    def __post_init__(self):
        object.__setattr__(self, "tau", as_rational(self.tau))
        object.__setattr__(self, "nu", as_rational(self.nu))
        if self.tau <= 0 or self.nu <= 0:
            raise ValueError("linear-delay edges need tau > 0 and nu > 0")


@dataclass(frozen=True)
class Exogenous:
    """Travel time fixed in advance and independent of the flow."""

    D: PiecewiseLinear

    def __post_init__(self):
        D = self.D
        if D.lo != 0:
            raise FifoError("exogenous travel time must be given from time 0")
        if not D.is_nonnegative():
            raise FifoError("exogenous travel time must be nonnegative")
        if any(y1 - y0 < -(x1 - x0) for x0, x1, y0, y1 in D.segments()):
            raise FifoError("exogenous travel time violates FIFO: t + D(t) decreases")

    @classmethod
    def constant(cls, c, horizon) -> "Exogenous":
        return cls(PiecewiseLinear.constant(as_rational(c), as_rational(horizon)))

    def on(self, horizon: Fraction) -> PiecewiseLinear:
        """``D`` on ``[0, horizon]``, continued by its last value if too short."""
        D = self.D
        if D.hi == horizon:
            return D
        if D.hi > horizon:
            return D.restrict_domain(0, horizon)
        return PiecewiseLinear._raw(list(D.breakpoints) + [horizon], list(D.values) + [D.values[-1]])


Model = Union[Vickrey, LinearDelay, Exogenous]


@dataclass(frozen=True)
class NonExistence:
    """A load that is not a density.

    ``atoms`` holds ``(j, location, mass)`` triples: mass arriving at the
    tail of the ``j``-th edge (1-based; ``|w|+1`` is the walk end) all at once.
    """

    atoms: tuple

    def __bool__(self):
        return False

    @property
    def locations(self) -> tuple:
        return tuple(loc for _, loc, _ in self.atoms)


# ---------------------------------------------------------------------------
# single-edge models
# ---------------------------------------------------------------------------


def vickrey_queue(nu, g: StepFunction) -> PiecewiseLinear:
    """Queue volume of a point queue with service rate ``nu`` fed by ``g``."""
    nu = as_rational(nu)
    xs = [Fraction(0)]
    qs = [Fraction(0)]
    for lo, hi, v in g.cells():
        q = qs[-1]
        rate = v - nu
        if rate >= 0 or q == 0:
            if rate > 0:
                q_hi = q + rate * (hi - lo)
            else:
                q_hi = q
            xs.append(hi)
            qs.append(q_hi)
            continue
        empty_at = lo + q / (-rate)
        if empty_at < hi:
            xs.append(empty_at)
            qs.append(Fraction(0))
            xs.append(hi)
            qs.append(Fraction(0))
        else:
            xs.append(hi)
            qs.append(q + rate * (hi - lo))
    return PiecewiseLinear._raw(xs, qs)


def vickrey_exit_time(tau, nu, g: StepFunction) -> tuple[PiecewiseLinear, MonotoneMap]:
    """Travel time ``D = tau + q/nu`` and exit time ``T = id + D`` of a point queue.

    Examples
    --------
    >>> from dynflow.timealg import StepFunction
    >>> D, T = vickrey_exit_time(1, 1, StepFunction([0, 1, 4], [2, 0]))
    >>> [str(D(t)) for t in (0, 1, 2, 3)]
    ['1', '2', '1', '1']
    """
    tau, nu = as_rational(tau), as_rational(nu)
    q = vickrey_queue(nu, g)
    D = PiecewiseLinear._raw(list(q.breakpoints), [tau + y / nu for y in q.values])
    T = MonotoneMap._raw(list(D.breakpoints), [x + y for x, y in zip(D.breakpoints, D.values)])
    return D, T


def _cumulative(g: StepFunction) -> PiecewiseLinear:
    xs = list(g.breakpoints)
    ys = [Fraction(0)]
    for lo, hi, v in g.cells():
        ys.append(ys[-1] + v * (hi - lo))
    return PiecewiseLinear._raw(xs, ys)


def linear_delay_volume(tau, nu, g: StepFunction) -> PiecewiseLinear:
    """Edge volume ``x(t)`` of a linear-delay edge fed by ``g``.

    The outflow up to ``t`` is the inflow up to ``T^{-1}(t)``.  Since
    ``T(s) >= s + tau``, the volume on ``[k·tau, (k+1)·tau]`` only needs the
    exit-time map on ``[0, k·tau]``, so the solution is built window by window.
    Exit-time maps of this model are strictly increasing, which makes the
    inverse single valued.
    """
    tau, nu = as_rational(tau), as_rational(nu)
    horizon = g.horizon
    G = _cumulative(g)
    xs: list[Fraction] = [Fraction(0)]
    vol: list[Fraction] = [Fraction(0)]
    t_xs: list[Fraction] = [Fraction(0)]
    t_ys: list[Fraction] = [tau]
    g_bps = list(g.breakpoints)

    a = Fraction(0)
    while a < horizon:
        b = min(a + tau, horizon)
        pts = {a, b}
        pts.update(x for x in g_bps if a < x < b)
        known_T = MonotoneMap._raw(list(t_xs), list(t_ys)) if len(t_xs) > 1 else None
        if known_T is not None:
            for y in set(t_xs) | {x for x in g_bps if x <= known_T.hi}:
                ty = known_T(y)
                if a < ty < b:
                    pts.add(ty)
        window = sorted(pts)
        for t in window[1:]:
            if known_T is None or t < t_ys[0]:
                out = Fraction(0)
            else:
                s = known_T.first_reach(t)
                out = G(s)
            x = G(t) - out
            xs.append(t)
            vol.append(x)
            t_xs.append(t)
            t_ys.append(t + tau + x / nu)
        a = b
    return PiecewiseLinear._raw(xs, vol)


def linear_delay_exit_time(tau, nu, g: StepFunction) -> tuple[PiecewiseLinear, MonotoneMap]:
    """Travel time ``D = tau + x/nu`` and exit time ``T = id + D`` of a linear-delay edge."""
    tau, nu = as_rational(tau), as_rational(nu)
    x = linear_delay_volume(tau, nu, g)
    D = PiecewiseLinear._raw(list(x.breakpoints), [tau + y / nu for y in x.values])
    T = MonotoneMap._raw(list(D.breakpoints), [s + y for s, y in zip(D.breakpoints, D.values)])
    return D, T


# ---------------------------------------------------------------------------
# travel times of a whole network
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class TravelTimes:
    """Travel times of every edge, frozen at the values induced by some edge flow.

    Attributes
    ----------
    net : the network
    base_horizon : the network horizon ``t_f``
    horizon : the extended horizon ``H`` on which every map below lives
    D : per edge, travel time on ``[0, H]``
    T : per edge, exit time ``id + D`` on ``[0, H]``
    volume : per edge, queue or edge volume on ``[0, t_f]`` (None for exogenous edges)
    """

    net: DynNetwork
    base_horizon: Fraction
    horizon: Fraction
    D: dict
    T: dict
    volume: dict = field(default_factory=dict)
    _arrivals: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_delays(cls, net: DynNetwork, delays: Mapping[str, PiecewiseLinear], volume=None) -> "TravelTimes":
        """Extend travel times given on ``[0, t_f]`` to the longer horizon.

        Each ``D_e`` tapers linearly from ``D_e(t_f)`` to 0 on ``[t_f, H]``.
        """
        t_f = net.horizon
        base = {}
        for eid in net.edge_ids:
            D = delays[eid]
            if D.lo != 0 or D.hi != t_f:
                raise ValueError(f"travel time of {eid} must live on [0, {t_f}]")
            if not D.is_nonnegative():
                raise FifoError(f"negative travel time on {eid}")
            if any(y1 - y0 < -(x1 - x0) for x0, x1, y0, y1 in D.segments()):
                raise FifoError(f"travel time on {eid} violates FIFO")
            base[eid] = D
        peak = max((D.values[-1] for D in base.values()), default=Fraction(0))
        H = t_f + 2 * peak
        D_ext = {}
        T_ext = {}
        for eid, D in base.items():
            if H > t_f:
                D = PiecewiseLinear._raw(list(D.breakpoints) + [H], list(D.values) + [Fraction(0)])
            D_ext[eid] = D
            T_ext[eid] = MonotoneMap._raw(list(D.breakpoints), [x + y for x, y in zip(D.breakpoints, D.values)])
        return cls(net, t_f, H, D_ext, T_ext, dict(volume or {}))

    def fit(self, f: StepFunction) -> StepFunction:
        """Zero-extend (or truncate) a density to the extended horizon."""
        return f.fit(self.horizon)

    def identity(self) -> MonotoneMap:
        return MonotoneMap._raw([Fraction(0), self.horizon], [Fraction(0), self.horizon])

    def arrival(self, w: Sequence[str], j: int) -> MonotoneMap:
        return arrival_function(self, w, j)

    def delay_at_base(self, eid: str) -> PiecewiseLinear:
        """``D_e`` restricted to ``[0, t_f]``."""
        D = self.D[eid]
        return D if D.hi == self.base_horizon else D.restrict_domain(0, self.base_horizon)

    def min_delay(self, eid: str) -> Fraction:
        """Smallest travel time of ``eid`` on ``[0, t_f]``."""
        return self.delay_at_base(eid).min_value()

    def zero_delay_set(self, eid: str) -> list[Interval]:
        """Maximal intervals of positive length inside ``[0, t_f]`` where ``D_e = 0``."""
        D = self.delay_at_base(eid)
        out = []
        for x0, x1, y0, y1 in D.segments():
            if y0 == 0 and y1 == 0:
                if out and out[-1].hi == x0:
                    out[-1] = Interval(out[-1].lo, x1)
                else:
                    out.append(Interval(x0, x1))
        return out


def _edge_delay(model: Model, g: StepFunction, horizon: Fraction):
    if isinstance(model, Vickrey):
        D, _ = vickrey_exit_time(model.tau, model.nu, g)
        return D, vickrey_queue(model.nu, g)
    if isinstance(model, LinearDelay):
        x = linear_delay_volume(model.tau, model.nu, g)
        D = PiecewiseLinear._raw(list(x.breakpoints), [model.tau + y / model.nu for y in x.values])
        return D, x
    if isinstance(model, Exogenous):
        return model.on(horizon), None
    raise TypeError(f"unknown travel-time model {model!r}")


def travel_times(net: DynNetwork, u: Mapping[str, StepFunction]) -> TravelTimes:
    """Travel times induced by the edge flow ``u`` (missing edges carry no flow)."""
    t_f = net.horizon
    delays = {}
    volume = {}
    for eid in net.edge_ids:
        g = u.get(eid)
        g = StepFunction.zero(t_f) if g is None else g.fit(t_f)
        if not g.is_nonnegative():
            raise ValueError(f"edge flow on {eid} is negative somewhere")
        D, vol = _edge_delay(net.edge(eid).model, g, t_f)
        delays[eid] = D
        if vol is not None:
            volume[eid] = vol
    return TravelTimes.from_delays(net, delays, volume)


# ---------------------------------------------------------------------------
# arrival maps and u-based loads
# ---------------------------------------------------------------------------


def arrival_function(tt: TravelTimes, w: Sequence[str], j: int) -> MonotoneMap:
    """Time at which a particle entering ``w`` at ``t`` reaches the tail of ``w[j]``.

    ``j`` is 1-based; ``j = 1`` is the identity and ``j = len(w) + 1`` is the
    arrival at the end of the walk.
    """
    w = tuple(w)
    if not 1 <= j <= len(w) + 1:
        raise IndexError(f"arrival index {j} outside 1..{len(w) + 1}")
    key = w[: j - 1]
    cached = tt._arrivals.get(key)
    if cached is not None:
        return cached
    if j == 1:
        A = tt.identity()
    else:
        A = compose(tt.T[w[j - 2]], arrival_function(tt, w, j - 1))
    tt._arrivals[key] = A
    return A


def parameterized_load_edgewise(tt: TravelTimes, w: Sequence[str], j: int, h: StepFunction):
    """The flow that ``h`` puts onto the ``j``-th position of ``w``.

    Returns a ``StepFunction`` on the extended horizon, or ``NonExistence``
    when some of ``h``'s mass departs during a plateau of the arrival map.
    """
    A = arrival_function(tt, w, j)
    m = pushforward(tt.fit(h), A)
    if m.atoms:
        return NonExistence(tuple((j, loc, mass) for loc, mass in m.atoms))
    return m.density.fit(tt.horizon)


def parameterized_load(tt: TravelTimes, w: Sequence[str], h: StepFunction):
    """Per-edge load of ``h`` sent along ``w``; edges visited twice get both visits.

    Returns a dict over all edges or ``NonExistence`` with every offending atom.
    """
    w = tuple(w)
    zero = StepFunction.zero(tt.horizon)
    out = {eid: zero for eid in tt.net.edge_ids}
    atoms = []
    for j, eid in enumerate(w, start=1):
        f = parameterized_load_edgewise(tt, w, j, h)
        if isinstance(f, NonExistence):
            atoms.extend(f.atoms)
            continue
        out[eid] = out[eid] + f
    if atoms:
        return NonExistence(tuple(atoms))
    return out


def inverse_load(tt: TravelTimes, w: Sequence[str], j: int, f: StepFunction) -> StepFunction:
    """The unique inflow ``h`` whose load at position ``j`` of ``w`` equals ``f``.

    ``h(t) = f(A(t))·A'(t)``; it requires ``f`` to vanish before ``A(0)``.
    """
    A = arrival_function(tt, w, j)
    f = tt.fit(f)
    a0 = A.values[0]
    if a0 > 0 and restrict(f, [Interval(0, a0)]):
        raise ValueError(f"load must vanish on [0, {a0}) to have a preimage")
    pts = set(A.breakpoints)
    for y in f.breakpoints:
        for x0, x1, y0, y1 in A.segments():
            if y0 < y < y1:
                pts.add(x0 + (y - y0) * (x1 - x0) / (y1 - y0))
    pts = sorted(pts)
    pieces = []
    for x0, x1 in zip(pts, pts[1:]):
        y0, y1 = A(x0), A(x1)
        if y1 == y0:
            continue
        v = f((y0 + y1) / 2)
        if v:
            pieces.append((x0, x1, v * (y1 - y0) / (x1 - x0)))
    return StepFunction.from_pieces(pieces, tt.horizon)


def edge_outflow(tt: TravelTimes, eid: str, g: StepFunction):
    """Outflow rate of edge ``eid`` when it is entered at rate ``g``."""
    return parameterized_load_edgewise(tt, (eid,), 2, g)


def total_load(tt: TravelTimes, inflows: Mapping[tuple, StepFunction]):
    """Sum of the loads of several walk inflows; ``NonExistence`` if any fails."""
    zero = StepFunction.zero(tt.horizon)
    total = {eid: zero for eid in tt.net.edge_ids}
    atoms = []
    for w, h in inflows.items():
        load = parameterized_load(tt, w, h)
        if isinstance(load, NonExistence):
            atoms.extend(load.atoms)
            continue
        for eid, f in load.items():
            if f:
                total[eid] = total[eid] + f
    if atoms:
        return NonExistence(tuple(atoms))
    return total


# ---------------------------------------------------------------------------
# network loading
# ---------------------------------------------------------------------------


def _density_loads(tt: TravelTimes, inflows: Mapping[tuple, StepFunction]) -> dict:
    """Loads with point masses dropped; used while iterating towards the fixed point."""
    t_f = tt.base_horizon
    zero = StepFunction.zero(t_f)
    total = {eid: zero for eid in tt.net.edge_ids}
    for w, h in inflows.items():
        for j, eid in enumerate(w, start=1):
            m = pushforward(tt.fit(h), arrival_function(tt, w, j))
            total[eid] = total[eid] + m.density.fit(tt.horizon).clip(t_f)
    return total


def network_loading(net: DynNetwork, inflows: Mapping[Sequence[str], StepFunction]):
    """Edge flows and travel times produced by sending ``inflows`` into the network.

    Returns ``(g, tt)`` where ``g`` maps every edge to its inflow rate on
    ``[0, t_f]`` and ``tt`` are the travel times induced by ``g``.  The result
    is checked exactly: loading every walk under ``tt`` must reproduce ``g``.

    Raises
    ------
    ValueError
        If a walk is invalid or an inflow is negative.
    LoadingError
        If the loaded flow does not fit into ``[0, t_f]`` or the fixed point
        cannot be verified.
    """
    t_f = net.horizon
    clean: dict[tuple, StepFunction] = {}
    for w, h in inflows.items():
        w = tuple(w)
        bad = validate_walk(net, w)
        if bad is not None:
            raise ValueError(f"walk {w}: {bad}")
        if not h.is_nonnegative():
            raise ValueError(f"inflow of walk {w} is negative somewhere")
        h = h.truncate(t_f) if h.horizon > t_f else h.extend(t_f)
        if h:
            clean[w] = clean[w] + h if w in clean else h

    dependent = [
        e.model.tau for e in net.edges.values() if isinstance(e.model, (Vickrey, LinearDelay))
    ]
    if dependent:
        max_iter = math.ceil(t_f / min(dependent)) + 2
    else:
        max_iter = 2

    g = {eid: StepFunction.zero(t_f) for eid in net.edge_ids}
    for _ in range(max_iter):
        tt = travel_times(net, g)
        nxt = _density_loads(tt, clean)
        if nxt == g:
            break
        g = nxt
    else:
        tt = travel_times(net, g)

    loads = total_load(tt, clean)
    if isinstance(loads, NonExistence):
        raise LoadingError(f"loaded flow has point masses at {loads.locations}")
    for eid in net.edge_ids:
        if not loads[eid].vanishes_after(t_f):
            raise LoadingError(f"flow on {eid} extends beyond the horizon {t_f}")
        if loads[eid] != tt.fit(g[eid]):
            raise LoadingError(f"flow on {eid} is not a fixed point of the loading")
    return g, tt
