"""Directed multigraphs with a source, a destination and a time horizon.

Walks and cycles are plain tuples of edge ids.  Edge ids are strings and
every ordering in this module is the plain string order on them, which keeps
enumeration deterministic.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Callable, Iterable, Iterator, Mapping, Sequence

import networkx as nx

from .timealg import as_rational

Walk = tuple  # tuple[str, ...]
SimpleCycle = tuple  # tuple[str, ...], rotated so the smallest edge id comes first

__all__ = [
    "CircuitError",
    "Edge",
    "DynNetwork",
    "NetworkError",
    "WalkViolation",
    "EnumerationRefused",
    "validate_walk",
    "enumerate_walks",
    "enumerate_simple_cycles",
    "canonical_cycle",
    "cycle_nodes",
    "eulerian_circuit",
]


class NetworkError(ValueError):
    """The network description is inconsistent."""


class EnumerationRefused(ValueError):
    """Walk enumeration would not terminate with the given bounds."""


@dataclass(frozen=True)
class Edge:
    id: str
    tail: Any
    head: Any
    model: Any = None


@dataclass(frozen=True)
class WalkViolation:
    """Why a walk is invalid; ``index`` is the 0-based position of the offending edge."""

    index: int
    message: str

    def __str__(self):
        return f"walk invalid at index {self.index}: {self.message}"


class DynNetwork:
    """A directed multigraph with source, destination, horizon and per-edge models.

    Parameters
    ----------
    nodes : sequence of node ids
    edges : sequence of ``Edge`` (or ``(id, tail, head, model)`` tuples)
    source, destination : node ids, must differ
    horizon : positive rational ``t_f``

    Every node has to be reachable from the source along a directed path.
    Parallel edges and self-loops are allowed.
    """

    def __init__(self, nodes: Sequence, edges: Iterable, source, destination, horizon):
        self.nodes: tuple = tuple(nodes)
        if len(set(self.nodes)) != len(self.nodes):
            raise NetworkError("duplicate node ids")
        node_set = set(self.nodes)
        parsed = []
        for e in edges:
            if not isinstance(e, Edge):
                e = Edge(*e)
            if not isinstance(e.id, str):
                raise NetworkError(f"edge id {e.id!r} is not a string")
            if e.tail not in node_set or e.head not in node_set:
                raise NetworkError(f"edge {e.id} has an endpoint that is not a node")
            parsed.append(e)
        self.edges: dict[str, Edge] = {}
        for e in parsed:
            if e.id in self.edges:
                raise NetworkError(f"duplicate edge id {e.id}")
            self.edges[e.id] = e
        if source not in node_set or destination not in node_set:
            raise NetworkError("source and destination must be nodes")
        if source == destination:
            raise NetworkError("source and destination must differ")
        self.source = source
        self.destination = destination
        self.horizon: Fraction = as_rational(horizon)
        if self.horizon <= 0:
            raise NetworkError("horizon must be positive")

        self._out: dict[Any, tuple[str, ...]] = {v: () for v in self.nodes}
        self._in: dict[Any, tuple[str, ...]] = {v: () for v in self.nodes}
        for eid in sorted(self.edges):
            e = self.edges[eid]
            self._out[e.tail] += (eid,)
            self._in[e.head] += (eid,)

        unreachable = [v for v in self.nodes if v not in self.reachable_from(source)]
        if unreachable:
            raise NetworkError(f"nodes not reachable from the source: {unreachable}")

    # -- queries ------------------------------------------------------------

    @property
    def edge_ids(self) -> list[str]:
        return sorted(self.edges)

    def edge(self, eid: str) -> Edge:
        try:
            return self.edges[eid]
        except KeyError:
            raise KeyError(f"unknown edge {eid!r}") from None

    def tail(self, eid: str):
        return self.edge(eid).tail

    def head(self, eid: str):
        return self.edge(eid).head

    def out_edges(self, v) -> tuple[str, ...]:
        """Outgoing edge ids of ``v`` in sorted order."""
        return self._out[v]

    def in_edges(self, v) -> tuple[str, ...]:
        return self._in[v]

    def reachable_from(self, v) -> set:
        seen = {v}
        queue = deque([v])
        while queue:
            x = queue.popleft()
            for eid in self._out[x]:
                y = self.edges[eid].head
                if y not in seen:
                    seen.add(y)
                    queue.append(y)
        return seen

    def with_models(self, models: Mapping[str, Any]) -> "DynNetwork":
        """Copy with the edge models replaced by ``models[eid]``."""
        edges = [Edge(e.id, e.tail, e.head, models.get(e.id, e.model)) for e in self.edges.values()]
        return DynNetwork(self.nodes, edges, self.source, self.destination, self.horizon)

    def __repr__(self):
        return (
            f"DynNetwork({len(self.nodes)} nodes, {len(self.edges)} edges, "
            f"s={self.source!r}, d={self.destination!r}, t_f={self.horizon})"
        )


def validate_walk(net: DynNetwork, w: Sequence[str], sd: bool = True) -> WalkViolation | None:
    """Check that ``w`` is a walk (and, if ``sd``, an s,d-walk).

    Returns None when valid, otherwise a ``WalkViolation``.

    Examples
    --------
    With edges ``e1: s->v`` and ``e3: v->d``, ``validate_walk(net, ("e3", "e1"))``
    reports index 1, where the incidence chain breaks.
    """
    w = tuple(w)
    if not w:
        return WalkViolation(0, "a walk needs at least one edge")
    for i, eid in enumerate(w):
        if eid not in net.edges:
            return WalkViolation(i, f"unknown edge {eid!r}")
    for i in range(1, len(w)):
        if net.head(w[i - 1]) != net.tail(w[i]):
            return WalkViolation(i, f"edge {w[i]} does not start where {w[i - 1]} ends")
    if sd:
        if net.tail(w[0]) != net.source:
            return WalkViolation(0, f"walk starts at {net.tail(w[0])!r}, not at the source")
        if net.head(w[-1]) != net.destination:
            return WalkViolation(len(w) - 1, f"walk ends at {net.head(w[-1])!r}, not at the destination")
    return None


def _distance_to_destination(net: DynNetwork, weight: Mapping[str, Fraction]) -> dict:
    """Least total edge weight from each node to the destination (Dijkstra on reversed edges)."""
    rev = nx.DiGraph()
    rev.add_nodes_from(net.nodes)
    for eid, e in net.edges.items():
        w = weight[eid]
        if rev.has_edge(e.head, e.tail):
            w = min(w, rev[e.head][e.tail]["weight"])
        rev.add_edge(e.head, e.tail, weight=w)
    return nx.single_source_dijkstra_path_length(rev, net.destination, weight="weight")


def enumerate_walks(
    net: DynNetwork,
    min_travel: Mapping[str, Fraction],
    budget,
    max_len: int | None = None,
) -> Iterator[Walk]:
    """Lazily yield every s,d-walk whose summed lower bounds stay within ``budget``.

    Walks come in order of edge count, ties broken lexicographically on the
    edge-id tuples.  If some lower bound is zero the stream may be infinite,
    so a ``max_len`` is then mandatory.

    Raising ``max_len`` only appends walks to the stream.  Raising ``budget``
    may insert walks between existing ones (a cheap long walk can come after
    an expensive short one) but never reorders or removes them.
    """
    return _walk_search(net, min_travel, budget, max_len)


def _walk_search(
    net: DynNetwork,
    min_travel: Mapping[str, Fraction],
    budget,
    max_len: int | None = None,
    init: Any = None,
    step: Callable[[Any, str], Any] | None = None,
) -> Iterator[Walk]:
    """Breadth-first walk search with an optional pruning state.

    ``step(state, eid)`` returns the state of the extended prefix or None to
    prune it; the root state is ``init``.  Children are created only when
    their parent is expanded, so a generator consumer that changes what
    ``step`` sees between two yielded walks affects all later expansions.
    """
    budget = as_rational(budget)
    if budget < 0:
        raise ValueError("budget must be nonnegative")
    bounds = {}
    for eid in net.edges:
        b = as_rational(min_travel[eid])
        if b < 0:
            raise ValueError(f"negative travel-time lower bound on {eid}")
        bounds[eid] = b
    if max_len is None and any(b == 0 for b in bounds.values()):
        raise EnumerationRefused("some travel-time lower bounds are zero; a maximum walk length is required")
    if max_len is not None and max_len < 0:
        raise ValueError("max_len must be nonnegative")

    dist = _distance_to_destination(net, bounds)
    if net.source not in dist:
        return

    def gen():
        frontier = [((), net.source, Fraction(0), init)]
        length = 0
        while frontier and (max_len is None or length < max_len):
            nxt = []
            for walk, v, used, state in frontier:
                for eid in net.out_edges(v):
                    head = net.head(eid)
                    cost = used + bounds[eid]
                    if head not in dist or cost + dist[head] > budget:
                        continue
                    if step is not None:
                        child_state = step(state, eid)
                        if child_state is None:
                            continue
                    else:
                        child_state = None
                    child = walk + (eid,)
                    if head == net.destination:
                        yield child
                    nxt.append((child, head, cost, child_state))
            frontier = nxt
            length += 1

    yield from gen()


def canonical_cycle(edges: Sequence[str]) -> SimpleCycle:
    """Rotate a closed edge sequence so that its smallest edge id comes first."""
    edges = tuple(edges)
    i = edges.index(min(edges))
    return edges[i:] + edges[:i]


def cycle_nodes(net: DynNetwork, cycle: Sequence[str]) -> tuple:
    """Nodes visited by ``cycle`` in order, starting with the tail of its first edge."""
    return tuple(net.tail(eid) for eid in cycle)


def enumerate_simple_cycles(net: DynNetwork) -> list[SimpleCycle]:
    """All elementary directed cycles, each once, sorted by length and then edge ids.

    Node cycles come from ``networkx.simple_cycles``; parallel edges are then
    expanded into one edge cycle per choice of edges.
    """
    g = nx.DiGraph()
    g.add_nodes_from(net.nodes)
    parallel: dict[tuple, list[str]] = {}
    for eid in net.edge_ids:
        e = net.edges[eid]
        g.add_edge(e.tail, e.head)
        parallel.setdefault((e.tail, e.head), []).append(eid)
    out = set()
    for node_cycle in nx.simple_cycles(g):
        pairs = [(node_cycle[i], node_cycle[(i + 1) % len(node_cycle)]) for i in range(len(node_cycle))]
        for choice in itertools.product(*(parallel[p] for p in pairs)):
            out.add(canonical_cycle(choice))
    return sorted(out, key=lambda c: (len(c), c))


class CircuitError(ValueError):
    """No Eulerian circuit with the requested properties exists."""


def eulerian_circuit(
    net: DynNetwork,
    cycles: Iterable[Sequence[str]],
    multiplicities: Mapping[tuple, int] | None = None,
    start=None,
) -> Walk:
    """Closed walk from ``start`` using every cycle edge exactly as often as prescribed.

    Each cycle contributes its edges ``multiplicities[cycle]`` times (default 1).
    The cycles must be linked through shared nodes and ``start`` must lie on
    one of them.
    """
    cycles = [tuple(c) for c in cycles]
    if not cycles:
        raise CircuitError("no cycles given")
    multiplicities = multiplicities or {}
    g = nx.MultiDiGraph()
    copies: dict[str, int] = {}
    for c in cycles:
        m = multiplicities.get(c, 1)
        if m <= 0:
            raise CircuitError(f"multiplicity of {c} must be positive")
        for eid in c:
            for _ in range(m):
                k = copies.get(eid, 0)
                copies[eid] = k + 1
                g.add_edge(net.tail(eid), net.head(eid), key=(eid, k))
    if start not in g:
        raise CircuitError(f"start node {start!r} lies on none of the cycles")
    if not nx.is_weakly_connected(g):
        raise CircuitError("the cycles are not connected through shared nodes")
    # cycle unions are balanced, so weak connectivity is enough
    return tuple(key[0] for _, _, key in nx.eulerian_circuit(g, source=start, keys=True))
