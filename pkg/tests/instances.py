"""Reference networks and random instance generators shared by the tests."""

from __future__ import annotations

import math
import random
from fractions import Fraction

from dynflow.decompose import Decomposition
from dynflow.loading import Exogenous, LinearDelay, Vickrey, network_loading, travel_times
from dynflow.netgraph import DynNetwork, Edge
from dynflow.timealg import PiecewiseLinear, StepFunction, intersect_intervals

F = Fraction
SF = StepFunction


# -- fixed instances --------------------------------------------------------


def queue_plateau_network(horizon=4):
    """Two parallel point queues into a third one; the first queue builds up and drains."""
    return DynNetwork(
        ["s", "v", "d"],
        [
            Edge("e1", "s", "v", Vickrey(1, 1)),
            Edge("e2", "s", "v", Vickrey(1, 2)),
            Edge("e3", "v", "d", Vickrey(1, 4)),
        ],
        "s",
        "d",
        horizon,
    )


def queue_plateau_inflows(horizon=4):
    return {
        ("e1", "e3"): SF.indicator(0, 1, horizon, 2),
        ("e2", "e3"): SF.indicator(1, 2, horizon, 2),
    }


def queue_plateau(horizon=4):
    net = queue_plateau_network(horizon)
    g, tt = network_loading(net, queue_plateau_inflows(horizon))
    return net, g, tt


LINKED_EDGES = [
    ("a", "s", "v1"),
    ("b", "v1", "d"),
    ("c", "v1", "v2"),
    ("f", "v2", "v1"),
    ("x", "v2", "v3"),
    ("y", "v3", "v2"),
]


def linked_cycles(horizon=2):
    """Zero-travel-time network with one s,d-path and two 2-cycles sharing a node.

    Every edge carries ``1`` on ``[0, 1)``.  Returns the network, the flow,
    its travel times and the decomposition into the path and both cycles.
    """
    net = DynNetwork(
        ["s", "v1", "v2", "v3", "d"],
        [Edge(i, t, h, Exogenous.constant(0, horizon)) for i, t, h in LINKED_EDGES],
        "s",
        "d",
        horizon,
    )
    one = SF.indicator(0, 1, horizon)
    g = {i: one for i, _, _ in LINKED_EDGES}
    tt = travel_times(net, g)
    dec = Decomposition({("a", "b"): one}, {("c", "f"): one, ("x", "y"): one}, tt)
    return net, g, tt, dec


def isolated_cycle(horizon=2):
    """A 2-cycle that no flow-carrying edge connects to the s,d-flow."""
    Z = Exogenous.constant(0, horizon)
    net = DynNetwork(
        ["s", "v1", "v2", "d"],
        [Edge("a", "s", "d", Z), Edge("b", "s", "v1", Z), Edge("c", "v1", "v2", Z), Edge("f", "v2", "v1", Z)],
        "s",
        "d",
        horizon,
    )
    one = SF.indicator(0, 1, horizon)
    g = {"a": one, "c": one, "f": one}
    tt = travel_times(net, g)
    dec = Decomposition({("a",): one}, {("c", "f"): one}, tt)
    return net, g, tt, dec


# -- random building blocks -------------------------------------------------


def random_step(rng: random.Random, horizon, cells=4, lo=0, hi=None, max_value=3, denom=2):
    """Nonnegative step function with at most ``cells`` nonzero pieces inside ``[lo, hi]``."""
    hi = horizon if hi is None else hi
    n = rng.randint(1, cells)
    a, b = math.ceil(lo * denom), math.floor(hi * denom)
    pts = sorted({F(rng.randint(a, b), denom) for _ in range(n + 1)})
    pieces = []
    for a, b in zip(pts, pts[1:]):
        if rng.random() < 0.8:
            pieces.append((a, b, F(rng.randint(1, max_value * denom), denom)))
    return SF.from_pieces(pieces, horizon)


def random_network(rng: random.Random, max_nodes=6, max_edges=10, model=None, horizon=10):
    """Random network in which every node is reachable from ``s`` and ``d`` is reachable."""
    k = rng.randint(0, max_nodes - 2)
    inner = [f"v{i}" for i in range(1, k + 1)]
    nodes = ["s"] + inner + ["d"]
    order = ["s"] + inner + ["d"]
    edges = []
    # spanning chain s -> ... -> d keeps everything reachable
    for a, b in zip(order, order[1:]):
        edges.append((a, b))
    budget = rng.randint(0, max_edges - len(edges))
    candidates = [(a, b) for a in nodes for b in nodes if a != b and a != "d" and b != "s"]
    for _ in range(budget):
        edges.append(rng.choice(candidates))
    model = model or (lambda: Vickrey(F(rng.randint(1, 4), 2), rng.randint(1, 3)))
    return DynNetwork(nodes, [Edge(f"e{i}", a, b, model()) for i, (a, b) in enumerate(edges)], "s", "d", horizon)


def random_walk(rng: random.Random, net: DynNetwork, max_len=5):
    """Random s,d-walk of at most ``max_len`` edges (None if the attempt fails)."""
    for _ in range(50):
        v, w = net.source, []
        while len(w) < max_len:
            outs = net.out_edges(v)
            if not outs:
                break
            e = rng.choice(outs)
            w.append(e)
            v = net.head(e)
            if v == net.destination:
                return tuple(w)
    return None


def random_vickrey_instance(seed: int):
    """Random point-queue network with up to five walk inflows, loaded exactly.

    The network horizon is set just past the last moment any edge carries
    flow so the extended horizon stays small.
    """
    rng = random.Random(seed)
    net = random_network(rng, horizon=200)
    inflows = {}
    for _ in range(rng.randint(1, 5)):
        w = random_walk(rng, net)
        if w is None:
            continue
        h = random_step(rng, 200, cells=4, lo=0, hi=2)
        inflows[w] = inflows[w] + h if w in inflows else h
    g, _ = network_loading(net, inflows)
    last = max((iv.hi for f in g.values() for iv in f.support()), default=F(1))
    horizon = int(last) + 1
    net = DynNetwork(list(net.nodes), [net.edge(e) for e in net.edge_ids], "s", "d", horizon)
    inflows = {w: h.truncate(horizon) for w, h in inflows.items()}
    g, tt = network_loading(net, inflows)
    return net, inflows, g, tt


def random_exogenous(rng: random.Random, horizon, allow_zero=True):
    """Random FIFO travel-time profile (slopes never below -1/2)."""
    xs = sorted({F(0), F(horizon)} | {F(rng.randint(1, 2 * horizon - 1), 2) for _ in range(rng.randint(0, 3))})
    ys = []
    y = F(rng.randint(0 if allow_zero else 1, 4), 2)
    for i, x in enumerate(xs):
        if i:
            dx = x - xs[i - 1]
            y = max(F(0) if allow_zero else F(1, 2), y + rng.choice([F(-1, 2), F(0), F(1, 2), F(1)]) * dx)
        ys.append(y)
    return Exogenous(PiecewiseLinear(xs, ys))


def random_travel_times(seed: int):
    """Random travel times from a mix of models, frozen at a random edge flow."""
    rng = random.Random(seed)
    horizon = rng.randint(3, 6)

    def model():
        kind = rng.choice(["vickrey", "linear", "exogenous"])
        if kind == "vickrey":
            return Vickrey(F(rng.randint(1, 4), 2), rng.randint(1, 3))
        if kind == "linear":
            return LinearDelay(F(rng.randint(1, 4), 2), rng.randint(1, 3))
        return random_exogenous(rng, horizon, allow_zero=False)

    net = random_network(rng, max_nodes=5, max_edges=8, model=model, horizon=horizon)
    u = {e: random_step(rng, horizon, cells=3, max_value=2) for e in net.edge_ids if rng.random() < 0.7}
    return rng, net, travel_times(net, u)


def random_purity_instance(seed: int):
    """Random walk and zero-travel cycle inflows on a mixed network, plus the flow they induce.

    Travel times are exogenous: each edge is free on all of the horizon, on
    an initial stretch only, or never.  Cycle inflows are placed only where
    every edge of the cycle is free, so the result is a valid decomposition
    of its own aggregate flow.
    """
    from dynflow.decompose import reconstruct
    from dynflow.netgraph import enumerate_simple_cycles

    rng = random.Random(seed)
    horizon = 12

    def model():
        kind = rng.choice(["free", "free", "free-then-slow", "slow"])
        if kind == "free":
            return Exogenous.constant(0, horizon)
        if kind == "slow":
            return Exogenous.constant(F(rng.randint(1, 3), 2), horizon)
        z = F(rng.randint(1, 4), 2)
        return Exogenous(PiecewiseLinear([0, z, z + 1, horizon], [0, 0, 1, 1]))

    k = rng.randint(1, 3)
    chain = ["s"] + [f"v{i}" for i in range(1, k + 1)] + ["d"]
    pairs = list(zip(chain, chain[1:]))
    pairs += [(b, a) for a, b in zip(chain[1:-1], chain[2:-1]) if rng.random() < 0.7]
    pairs += [(a, "d") for a in chain[1:-2] if rng.random() < 0.3]
    nodes = list(chain)
    if rng.random() < 0.4:
        # a 2-cycle hanging off the chain that walks cannot leave towards d
        attach = rng.choice(chain[:-1])
        nodes += ["p", "q"]
        pairs += [(attach, "p"), ("p", "q"), ("q", "p")]
    edges = [Edge(f"e{i}", a, b, model()) for i, (a, b) in enumerate(pairs)]
    net = DynNetwork(nodes, edges, "s", "d", horizon)
    tt = travel_times(net, {})
    walks = {}
    for _ in range(rng.randint(1, 4)):
        w = random_walk(rng, net, max_len=4)
        if w is None:
            continue
        h = random_step(rng, horizon, cells=2, lo=0, hi=2)
        if h:
            walks[w] = walks[w] + h if w in walks else h
    cycles = {}
    for c in enumerate_simple_cycles(net):
        if rng.random() < 0.2:
            continue
        free = None
        for e in c:
            z = tt.zero_delay_set(e)
            free = z if free is None else intersect_intervals(free, z)
        if not free:
            continue
        iv = free[0]
        lo = iv.lo + F(rng.randint(0, 2), 2)
        hi = min(iv.hi, lo + F(rng.randint(1, 3), 2), F(2))
        if hi <= lo:
            continue
        cycles[c] = SF.indicator(lo, hi, horizon, F(rng.randint(1, 4), 2))
    dec = Decomposition(walks, cycles, tt)
    g = {e: f.truncate(horizon) for e, f in reconstruct(dec).items()}
    return net, g, tt, dec



FDK_WALKS = [("e1", "e4"), ("e1", "e2", "e3", "e4"), ("e1", "e2", "e3", "e2", "e3", "e4")]


def random_fdk_instance(seed: int):
    """A single-walk problem on a network with a 2-cycle, so walks can repeat edges.

    Returns the travel times and an ``FdkProblem`` with random caps.
    """
    from dynflow.decompose import FdkProblem
    from dynflow.timealg import TimeMeasure

    rng = random.Random(seed)
    horizon = rng.randint(3, 5)
    pairs = [("s", "a"), ("a", "b"), ("b", "a"), ("a", "d")]

    def short_delay():
        mid = F(rng.randint(1, 2 * horizon - 1), 2)
        ys = [F(rng.randint(1, 3), 4) for _ in range(3)]
        return Exogenous(PiecewiseLinear([0, mid, horizon], ys))

    edges = [Edge(f"e{i}", t, h, short_delay()) for i, (t, h) in enumerate(pairs, start=1)]
    net = DynNetwork(["s", "a", "b", "d"], edges, "s", "d", horizon)
    tt = travel_times(net, {})
    H = tt.horizon
    walk = rng.choice(FDK_WALKS)

    def cap(hz):
        cut = F(rng.randint(1, 2 * int(hz) - 1), 2)
        return SF.from_pieces([(0, cut, F(rng.randint(1, 4), 2)), (cut, hz, F(rng.randint(0, 4), 2))], hz)

    residual = {e: cap(horizon) for e in net.edge_ids}
    source = cap(horizon)
    floor = TimeMeasure(-cap(H))
    return tt, FdkProblem(walk, residual, source, floor)
