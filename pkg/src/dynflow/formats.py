"""JSON file formats for networks, flows, inflows, decompositions and reports.

Every rational number is written as a string, either ``"p/q"`` or an integer
string, so files round-trip exactly.  Floats are rejected on input.
"""

from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path
from typing import Any, Mapping

from .decompose import Component, Decomposition, MaximallyPure, Pure, Witnesses
from .loading import Exogenous, LinearDelay, TravelTimes, Vickrey
from .netgraph import DynNetwork, Edge, WalkViolation, validate_walk
from .timealg import Interval, PiecewiseLinear, StepFunction, as_rational

__all__ = [
    "ParseError",
    "rational",
    "parse_rational",
    "dump_step",
    "parse_step",
    "dump_pl",
    "parse_pl",
    "parse_network",
    "dump_network",
    "parse_flows",
    "dump_flows",
    "parse_inflows",
    "dump_inflows",
    "parse_decomposition",
    "dump_decomposition",
    "dump_travel_times",
    "dump_purity",
    "dump_interval",
    "read_json",
    "write_json",
]


class ParseError(ValueError):
    """An input file does not follow its format."""


def rational(x: Fraction) -> str:
    return str(Fraction(x))


def parse_rational(v: Any, where: str = "value") -> Fraction:
    if isinstance(v, bool) or isinstance(v, float):
        raise ParseError(f"{where}: rationals must be strings or integers, got {v!r}")
    try:
        return as_rational(v)
    except (TypeError, ValueError, ZeroDivisionError) as exc:
        raise ParseError(f"{where}: {exc}") from None


def _field(obj: Mapping, key: str, where: str):
    if not isinstance(obj, Mapping):
        raise ParseError(f"{where}: expected an object")
    if key not in obj:
        raise ParseError(f"{where}: missing field {key!r}")
    return obj[key]


def _list(v, where: str) -> list:
    if not isinstance(v, list):
        raise ParseError(f"{where}: expected a list")
    return v


def dump_step(f: StepFunction) -> dict:
    return {"breakpoints": [rational(b) for b in f.breakpoints], "values": [rational(v) for v in f.values]}


def parse_step(obj, where: str = "step function") -> StepFunction:
    bps = _list(_field(obj, "breakpoints", where), where)
    vals = _list(_field(obj, "values", where), where)
    try:
        return StepFunction(
            [parse_rational(b, where) for b in bps], [parse_rational(v, where) for v in vals]
        )
    except ValueError as exc:
        if isinstance(exc, ParseError):
            raise
        raise ParseError(f"{where}: {exc}") from None


def dump_pl(f: PiecewiseLinear) -> dict:
    return {"breakpoints": [rational(b) for b in f.breakpoints], "values": [rational(v) for v in f.values]}


def parse_pl(obj, where: str = "piecewise-linear function") -> PiecewiseLinear:
    bps = _list(_field(obj, "breakpoints", where), where)
    vals = _list(_field(obj, "values", where), where)
    try:
        return PiecewiseLinear([parse_rational(b, where) for b in bps], [parse_rational(v, where) for v in vals])
    except ValueError as exc:
        if isinstance(exc, ParseError):
            raise
        raise ParseError(f"{where}: {exc}") from None


def dump_interval(iv: Interval) -> list:
    return [rational(iv.lo), rational(iv.hi)]


# -- network ----------------------------------------------------------------


def _parse_model(obj, where: str):
    kind = _field(obj, "kind", where)
    try:
        if kind == "vickrey":
            return Vickrey(parse_rational(_field(obj, "tau", where), where), parse_rational(_field(obj, "nu", where), where))
        if kind == "linear_delay":
            return LinearDelay(parse_rational(_field(obj, "tau", where), where), parse_rational(_field(obj, "nu", where), where))
        if kind == "exogenous":
            return Exogenous(parse_pl(_field(obj, "D", where), where))
    except ParseError:
        raise
    except ValueError as exc:
        raise ParseError(f"{where}: {exc}") from None
    raise ParseError(f"{where}: unknown model kind {kind!r}")


def _dump_model(model) -> dict:
    if isinstance(model, Vickrey):
        return {"kind": "vickrey", "tau": rational(model.tau), "nu": rational(model.nu)}
    if isinstance(model, LinearDelay):
        return {"kind": "linear_delay", "tau": rational(model.tau), "nu": rational(model.nu)}
    if isinstance(model, Exogenous):
        return {"kind": "exogenous", "D": dump_pl(model.D)}
    raise TypeError(f"unknown travel-time model {model!r}")


def parse_network(obj) -> DynNetwork:
    nodes = _list(_field(obj, "nodes", "network"), "network.nodes")
    edges = []
    for i, e in enumerate(_list(_field(obj, "edges", "network"), "network.edges")):
        where = f"network.edges[{i}]"
        edges.append(
            Edge(
                _field(e, "id", where),
                _field(e, "tail", where),
                _field(e, "head", where),
                _parse_model(_field(e, "model", where), where + ".model"),
            )
        )
    try:
        return DynNetwork(
            nodes,
            edges,
            _field(obj, "source", "network"),
            _field(obj, "destination", "network"),
            parse_rational(_field(obj, "horizon", "network"), "network.horizon"),
        )
    except ParseError:
        raise
    except ValueError as exc:
        raise ParseError(f"network: {exc}") from None


def dump_network(net: DynNetwork) -> dict:
    return {
        "nodes": list(net.nodes),
        "edges": [
            {"id": e.id, "tail": e.tail, "head": e.head, "model": _dump_model(e.model)}
            for e in (net.edge(eid) for eid in net.edge_ids)
        ],
        "source": net.source,
        "destination": net.destination,
        "horizon": rational(net.horizon),
    }


# -- flows and inflows ------------------------------------------------------


def parse_flows(obj) -> dict:
    flows = _field(obj, "flows", "flow file")
    if not isinstance(flows, Mapping):
        raise ParseError("flow file: 'flows' must be an object")
    return {eid: parse_step(f, f"flows[{eid!r}]") for eid, f in flows.items()}


def dump_flows(g: Mapping[str, StepFunction], order=None) -> dict:
    keys = list(order) if order is not None else sorted(g)
    return {"flows": {eid: dump_step(g[eid]) for eid in keys if eid in g}}


def _walk(v, where: str) -> tuple:
    w = _list(v, where)
    if not all(isinstance(e, str) for e in w):
        raise ParseError(f"{where}: edge ids must be strings")
    return tuple(w)


def parse_inflows(obj) -> dict:
    out: dict[tuple, StepFunction] = {}
    for i, item in enumerate(_list(_field(obj, "inflows", "inflow file"), "inflows")):
        where = f"inflows[{i}]"
        w = _walk(_field(item, "walk", where), where + ".walk")
        h = parse_step(_field(item, "rate", where), where + ".rate")
        if w in out:
            if out[w].horizon != h.horizon:
                raise ParseError(f"{where}: repeated walk with a different horizon")
            h = out[w] + h
        out[w] = h
    return out


def dump_inflows(inflows: Mapping[tuple, StepFunction]) -> dict:
    return {"inflows": [{"walk": list(w), "rate": dump_step(h)} for w, h in inflows.items()]}


# -- decompositions and reports ---------------------------------------------


def parse_decomposition(obj, tt: TravelTimes) -> Decomposition:
    t_f = tt.base_horizon
    walks: dict[tuple, StepFunction] = {}
    cycles: dict[tuple, StepFunction] = {}
    for key, target in (("walks", walks), ("cycles", cycles)):
        label = "walk" if key == "walks" else "cycle"
        for i, item in enumerate(_list(_field(obj, key, "decomposition"), key)):
            where = f"{key}[{i}]"
            w = _walk(_field(item, label, where), f"{where}.{label}")
            bad = validate_walk(tt.net, w, sd=key == "walks")
            if bad is None and key == "cycles" and tt.net.head(w[-1]) != tt.net.tail(w[0]):
                bad = WalkViolation(len(w) - 1, "cycle does not return to its start")
            if bad is not None:
                raise ParseError(f"{where}.{label}: {bad}")
            h = parse_step(_field(item, "rate", where), where + ".rate")
            if not h.vanishes_after(t_f):
                raise ParseError(f"{where}: rate is nonzero after the horizon {t_f}")
            h = h.fit(t_f)
            target[w] = target[w] + h if w in target else h
    return Decomposition(walks, cycles, tt)


def dump_decomposition(dec: Decomposition) -> dict:
    return {
        "walks": [{"walk": list(w), "rate": dump_step(h)} for w, h in dec.walk_inflows.items()],
        "cycles": [{"cycle": list(c), "rate": dump_step(h)} for c, h in dec.cycle_inflows.items()],
    }


def dump_component(comp: Component) -> dict:
    return {
        "cycles": [list(c) for c in comp.cycles],
        "nodes": sorted(comp.nodes, key=str),
        "edges": sorted(comp.edges),
        "times": [dump_interval(iv) for iv in comp.times],
    }


def dump_purity(verdict) -> dict:
    if isinstance(verdict, MaximallyPure):
        verdict = verdict.witnesses
    if isinstance(verdict, Pure):
        return {"verdict": "pure", "witnesses": []}
    if isinstance(verdict, Witnesses):
        return {
            "verdict": "witnesses",
            "witnesses": [
                {"component": dump_component(comp), "interval": dump_interval(iv)} for comp, iv in verdict.items
            ],
        }
    raise TypeError(f"not a purity verdict: {verdict!r}")


def dump_travel_times(tt: TravelTimes) -> dict:
    """Travel times and queue volumes on ``[0, t_f]``."""
    out = {}
    for eid in tt.net.edge_ids:
        entry = {"D": dump_pl(tt.delay_at_base(eid))}
        if eid in tt.volume:
            entry["volume"] = dump_pl(tt.volume[eid])
        out[eid] = entry
    return {"horizon": rational(tt.base_horizon), "travel_times": out}


# -- files ------------------------------------------------------------------


def read_json(path) -> Any:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON: {exc}") from None
    except OSError as exc:
        raise ParseError(f"{path}: {exc.strerror}") from None


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False) + "\n"


def write_json(obj, path=None) -> str:
    text = dumps(obj)
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text
