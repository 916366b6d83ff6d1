"""Command-line interface.

Every command reads JSON files, prints a report on stdout (``--format``
text or json) and optionally writes its main result to ``--out``.  Without
``--out`` the json report embeds the result under ``"result"``.

Exit codes: 0 success, 2 unreadable or malformed input, 3 network loading
failed, 4 the edge flow is not an s,d-flow, 5 walk budget exhausted or walk
enumeration refused, 6 a decomposition does not reproduce the flow.
"""

from __future__ import annotations

import sys

import click

from . import formats
from .balance import SdFlowViolation, node_balance_report, validate_sd_flow
from .decompose import (
    BudgetExhausted,
    InvalidFlow,
    MaximallyPure,
    NoPositiveSourceOutflow,
    Witnesses,
    check_pure,
    decompose,
    find_flow_carrying_walk,
    purify,
    reconstruction_mismatch,
)
from .loading import FifoError, LoadingError, network_loading, travel_times
from .netgraph import EnumerationRefused
from .formats import ParseError, rational

EXIT_PARSE = 2
EXIT_LOADING = 3
EXIT_INVALID_FLOW = 4
EXIT_BUDGET = 5
EXIT_MISMATCH = 6


class CliFailure(click.ClickException):
    def __init__(self, message, code):
        super().__init__(message)
        self.exit_code = code


def _fail(message, code):
    raise CliFailure(message, code)


def _emit(fmt, summary: dict, text_lines: list[str], result=None, out=None):
    if out is not None and result is not None:
        formats.write_json(result, out)
    if fmt == "json":
        payload = dict(summary)
        if out is None and result is not None:
            payload["result"] = result
        click.echo(formats.dumps(payload), nl=False)
    else:
        for line in text_lines:
            click.echo(line)
        if out is None and result is not None:
            click.echo(formats.dumps(result), nl=False)


def _network(path):
    try:
        return formats.parse_network(formats.read_json(path))
    except ParseError as exc:
        _fail(str(exc), EXIT_PARSE)


def _flows(path, net):
    try:
        g = formats.parse_flows(formats.read_json(path))
    except ParseError as exc:
        _fail(str(exc), EXIT_PARSE)
    for eid, f in g.items():
        if eid not in net.edges:
            _fail(f"{path}: flow given for unknown edge {eid!r}", EXIT_PARSE)
        if not f.vanishes_after(net.horizon):
            _fail(f"{path}: flow on {eid} is nonzero after the horizon {net.horizon}", EXIT_PARSE)
        if not f.is_nonnegative():
            _fail(f"{path}: flow on {eid} is negative somewhere", EXIT_PARSE)
    return {eid: g[eid].fit(net.horizon) for eid in g}


def _travel_times(net, g, base_path):
    u = g if base_path is None else _flows(base_path, net)
    try:
        return travel_times(net, u)
    except (FifoError, ValueError) as exc:
        _fail(f"travel times: {exc}", EXIT_LOADING)


def _decomposition(path, tt):
    try:
        return formats.parse_decomposition(formats.read_json(path), tt)
    except ParseError as exc:
        _fail(str(exc), EXIT_PARSE)


def _order(choice):
    if choice == "edgecount-lex":
        return choice
    if choice.startswith("file:"):
        data = None
        try:
            data = formats.read_json(choice[5:])
        except ParseError as exc:
            _fail(str(exc), EXIT_PARSE)
        walks = data.get("walks") if isinstance(data, dict) else data
        if not isinstance(walks, list) or not all(
            isinstance(w, list) and all(isinstance(e, str) for e in w) for w in walks
        ):
            _fail(f"{choice[5:]}: expected a list of walks (lists of edge ids)", EXIT_PARSE)
        return [tuple(w) for w in walks]
    _fail(f"unknown walk order {choice!r}; use edgecount-lex or file:<path>", EXIT_PARSE)


def _mass_lines(label, items):
    return [f"{label} {key}: mass {rational(value)}" for key, value in items]


def _format_walk(w):
    return "(" + ",".join(w) + ")"


format_option = click.option(
    "--format", "fmt", type=click.Choice(["json", "text"]), default="text", show_default=True, help="report format"
)
out_option = click.option("--out", type=click.Path(dir_okay=False), default=None, help="write the result to this file")
base_option = click.option(
    "--base-flows",
    type=click.Path(exists=False, dir_okay=False),
    default=None,
    help="edge-flow file inducing the travel times (default: the flow itself)",
)


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
def main():
    """Exact dynamic network flows: loading, decomposition and purification."""


@main.command("load")
@click.argument("network", type=click.Path(dir_okay=False))
@click.argument("inflows", type=click.Path(dir_okay=False))
@out_option
@format_option
def cmd_load(network, inflows, out, fmt):
    """Load walk inflows into edge flows under flow-dependent travel times."""
    net = _network(network)
    try:
        h = formats.parse_inflows(formats.read_json(inflows))
    except ParseError as exc:
        _fail(str(exc), EXIT_PARSE)
    try:
        g, tt = network_loading(net, h)
    except (LoadingError, FifoError) as exc:
        _fail(f"loading failed: {exc}", EXIT_LOADING)
    except ValueError as exc:
        _fail(str(exc), EXIT_PARSE)
    result = formats.dump_flows(g, net.edge_ids)
    result.update(formats.dump_travel_times(tt))
    masses = [(eid, g[eid].integral()) for eid in net.edge_ids]
    summary = {"edge_mass": {eid: rational(m) for eid, m in masses}}
    _emit(fmt, summary, _mass_lines("edge", masses), result, out)


@main.command("traveltimes")
@click.argument("network", type=click.Path(dir_okay=False))
@click.argument("flows", type=click.Path(dir_okay=False))
@out_option
@format_option
def cmd_traveltimes(network, flows, out, fmt):
    """Travel times induced by an edge flow."""
    net = _network(network)
    g = _flows(flows, net)
    tt = _travel_times(net, g, None)
    result = formats.dump_travel_times(tt)
    lines = []
    for eid in net.edge_ids:
        D = tt.delay_at_base(eid)
        pts = ", ".join(f"({rational(x)}, {rational(y)})" for x, y in zip(D.breakpoints, D.values))
        lines.append(f"edge {eid}: D through {pts}")
    summary = {"min_travel_time": {eid: rational(tt.min_delay(eid)) for eid in net.edge_ids}}
    _emit(fmt, summary, lines, result, out)


@main.command("decompose")
@click.argument("network", type=click.Path(dir_okay=False))
@click.argument("flows", type=click.Path(dir_okay=False))
@click.option("--budget", default=None, help="skip walks whose minimal travel time exceeds this (p/q)")
@click.option("--max-walk-len", type=click.IntRange(min=0), default=None, help="maximal number of edges per walk")
@click.option("--order", default="edgecount-lex", show_default=True, help="edgecount-lex or file:<path>")
@base_option
@out_option
@format_option
def cmd_decompose(network, flows, budget, max_walk_len, order, base_flows, out, fmt):
    """Decompose an edge flow into walk inflows and zero-travel-time cycle inflows."""
    net = _network(network)
    g = _flows(flows, net)
    tt = _travel_times(net, g, base_flows)
    walk_order = _order(order)
    if budget is not None:
        try:
            budget = formats.parse_rational(budget, "--budget")
        except ParseError as exc:
            _fail(str(exc), EXIT_PARSE)
    try:
        dec = decompose(tt, g, budget=budget, max_len=max_walk_len, order=walk_order)
    except InvalidFlow as exc:
        _fail(str(exc), EXIT_INVALID_FLOW)
    except (BudgetExhausted, EnumerationRefused) as exc:
        _fail(str(exc), EXIT_BUDGET)
    except ValueError as exc:
        _fail(str(exc), EXIT_PARSE)
    summary = {
        "walks": len(dec.walk_inflows),
        "cycles": len(dec.cycle_inflows),
        "walk_mass": rational(dec.walk_mass()),
        "cycle_mass": rational(dec.cycle_mass()),
        "iterations": dec.iterations,
    }
    lines = [
        f"walks: {summary['walks']} (mass {summary['walk_mass']})",
        f"cycles: {summary['cycles']} (mass {summary['cycle_mass']})",
        f"walks tried: {dec.iterations}",
    ]
    _emit(fmt, summary, lines, formats.dump_decomposition(dec), out)


@main.command("verify")
@click.argument("network", type=click.Path(dir_okay=False))
@click.argument("flows", type=click.Path(dir_okay=False))
@click.argument("decomposition", type=click.Path(dir_okay=False), required=False)
@base_option
@format_option
def cmd_verify(network, flows, decomposition, base_flows, fmt):
    """Check that an edge flow is an s,d-flow and that a decomposition reproduces it."""
    net = _network(network)
    g = _flows(flows, net)
    tt = _travel_times(net, g, base_flows)
    report = node_balance_report(tt, g)
    nodes = {str(v): report.classes[v].kind for v in net.nodes}
    summary: dict = {"nodes": nodes}
    lines = [f"node {v}: {kind}" for v, kind in nodes.items()]
    cert = validate_sd_flow(tt, g)
    if isinstance(cert, SdFlowViolation):
        summary["sd_flow"] = {
            "valid": False,
            "node": str(cert.node),
            "interval": formats.dump_interval(cert.interval),
            "amount": rational(cert.amount),
            "kind": cert.kind,
        }
        lines.append(f"not an s,d-flow: {cert}")
        _emit(fmt, summary, lines)
        sys.exit(EXIT_INVALID_FLOW)
    summary["sd_flow"] = {"valid": True, "r_s": formats.dump_step(cert.r_s)}
    if cert.r_d is not None:
        summary["sd_flow"]["r_d"] = formats.dump_step(cert.r_d)
    lines.append(f"s,d-flow: source outflow {rational(cert.r_s.integral())}")
    if decomposition is not None:
        dec = _decomposition(decomposition, tt)
        try:
            mismatch = reconstruction_mismatch(tt, g, dec)
        except (AssertionError, ValueError) as exc:
            summary["reconstruction"] = {"ok": False, "error": str(exc)}
            lines.append(f"reconstruction fails: {exc}")
            _emit(fmt, summary, lines)
            sys.exit(EXIT_MISMATCH)
        if mismatch is not None:
            summary["reconstruction"] = {
                "ok": False,
                "edge": mismatch.edge,
                "interval": formats.dump_interval(mismatch.interval),
                "difference": rational(mismatch.difference),
            }
            lines.append(f"reconstruction fails: {mismatch}")
            _emit(fmt, summary, lines)
            sys.exit(EXIT_MISMATCH)
        summary["reconstruction"] = {"ok": True}
        lines.append("decomposition reproduces the flow exactly")
    _emit(fmt, summary, lines)


def _checked_decomposition(path, tt, g):
    dec = _decomposition(path, tt)
    try:
        mismatch = reconstruction_mismatch(tt, g, dec)
    except (AssertionError, ValueError) as exc:
        _fail(f"decomposition is invalid: {exc}", EXIT_MISMATCH)
    if mismatch is not None:
        _fail(f"decomposition does not reproduce the flow: {mismatch}", EXIT_MISMATCH)
    return dec


def _verdict_lines(verdict):
    if not isinstance(verdict, Witnesses):
        return ["verdict: pure"]
    lines = ["verdict: witnesses"]
    for comp, iv in verdict.items:
        cycles = " ".join(_format_walk(c) for c in comp.cycles)
        lines.append(f"  component {cycles} cannot be absorbed on [{rational(iv.lo)}, {rational(iv.hi)})")
    return lines


@main.command("check-pure")
@click.argument("network", type=click.Path(dir_okay=False))
@click.argument("flows", type=click.Path(dir_okay=False))
@click.argument("decomposition", type=click.Path(dir_okay=False))
@base_option
@out_option
@format_option
def cmd_check_pure(network, flows, decomposition, base_flows, out, fmt):
    """Decide whether the cycle inflows of a decomposition can be absorbed into walks."""
    net = _network(network)
    g = _flows(flows, net)
    tt = _travel_times(net, g, base_flows)
    dec = _checked_decomposition(decomposition, tt, g)
    verdict = check_pure(tt, g, dec)
    report = formats.dump_purity(verdict)
    _emit(fmt, {"verdict": report["verdict"]}, _verdict_lines(verdict), report, out)


@main.command("purify")
@click.argument("network", type=click.Path(dir_okay=False))
@click.argument("flows", type=click.Path(dir_okay=False))
@click.argument("decomposition", type=click.Path(dir_okay=False))
@base_option
@out_option
@format_option
def cmd_purify(network, flows, decomposition, base_flows, out, fmt):
    """Move cycle inflows onto walks wherever possible."""
    net = _network(network)
    g = _flows(flows, net)
    tt = _travel_times(net, g, base_flows)
    dec = _checked_decomposition(decomposition, tt, g)
    res = purify(tt, g, dec)
    if isinstance(res, MaximallyPure):
        new, status = res.decomposition, "maximally pure"
        purity = formats.dump_purity(res)
    else:
        new, status = res, "pure"
        purity = {"verdict": "pure", "witnesses": []}
    summary = {
        "status": status,
        "walks": len(new.walk_inflows),
        "cycles": len(new.cycle_inflows),
        "cycle_mass": rational(new.cycle_mass()),
        "purity": purity,
    }
    lines = [f"result: {status}", f"walks: {summary['walks']}", f"cycles: {summary['cycles']}"]
    if isinstance(res, MaximallyPure):
        lines += _verdict_lines(res.witnesses)[1:]
    _emit(fmt, summary, lines, formats.dump_decomposition(new), out)


@main.command("find-walk")
@click.argument("network", type=click.Path(dir_okay=False))
@click.argument("flows", type=click.Path(dir_okay=False))
@base_option
@out_option
@format_option
def cmd_find_walk(network, flows, base_flows, out, fmt):
    """Find one s,d-walk with a nonzero inflow that fits under the edge flow."""
    net = _network(network)
    g = _flows(flows, net)
    tt = _travel_times(net, g, base_flows)
    try:
        found = find_flow_carrying_walk(tt, g)
    except InvalidFlow as exc:
        _fail(str(exc), EXIT_INVALID_FLOW)
    except NoPositiveSourceOutflow as exc:
        summary = {"walk": None, "reason": str(exc)}
        _emit(fmt, summary, [f"no walk: {exc}"])
        return
    result = {"walk": list(found.walk), "rate": formats.dump_step(found.inflow)}
    summary = {"walk": list(found.walk), "mass": rational(found.inflow.integral()), "depth": found.depth}
    lines = [
        f"walk: {_format_walk(found.walk)}",
        f"inflow mass: {summary['mass']}",
        f"tree depth: {found.depth}",
    ]
    _emit(fmt, summary, lines, result, out)


if __name__ == "__main__":  # pragma: no cover
    main()
