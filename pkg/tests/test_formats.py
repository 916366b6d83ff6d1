import json
from fractions import Fraction
from pathlib import Path

import pytest
from hypothesis import given, settings

from dynflow import formats
from dynflow.decompose import Decomposition, Pure, check_pure
from dynflow.formats import ParseError
from dynflow.loading import Exogenous, LinearDelay, Vickrey
from dynflow.netgraph import DynNetwork, Edge
from dynflow.timealg import PiecewiseLinear, StepFunction
from instances import isolated_cycle, linked_cycles, queue_plateau, queue_plateau_inflows
from strategies import step_functions

F = Fraction
SF = StepFunction
DATA = Path(__file__).resolve().parent.parent / "data"


def through_json(obj):
    return json.loads(formats.dumps(obj))


class TestRationals:
    def test_strings_and_integers(self):
        assert formats.parse_rational("3/4") == F(3, 4)
        assert formats.parse_rational(2) == 2
        assert formats.parse_rational("-5") == -5

    def test_floats_and_booleans_are_rejected(self):
        for bad in (0.5, 1.0, True):
            with pytest.raises(ParseError):
                formats.parse_rational(bad)

    def test_garbage(self):
        for bad in ("x", "1/0", None, [1]):
            with pytest.raises(ParseError):
                formats.parse_rational(bad)

    def test_written_as_strings(self):
        assert formats.rational(F(6, 4)) == "3/2"
        assert formats.rational(F(2)) == "2"


@given(step_functions())
@settings(max_examples=100, deadline=None)
def test_step_functions_round_trip(f):
    assert formats.parse_step(through_json(formats.dump_step(f))) == f


def test_step_function_errors():
    with pytest.raises(ParseError):
        formats.parse_step({"breakpoints": ["0", "1"]})
    with pytest.raises(ParseError):
        formats.parse_step({"breakpoints": ["0", "1"], "values": [0.5]})
    with pytest.raises(ParseError):
        formats.parse_step({"breakpoints": ["1", "0"], "values": ["0", "0"]})
    with pytest.raises(ParseError):
        formats.parse_step([1, 2])


def test_network_round_trip_keeps_every_model():
    net = DynNetwork(
        ["s", "v", "d"],
        [
            Edge("a", "s", "v", Vickrey(F(1, 2), 3)),
            Edge("b", "v", "d", LinearDelay(1, 2)),
            Edge("c", "s", "d", Exogenous(PiecewiseLinear([0, 1, 4], [2, 1, 1]))),
        ],
        "s",
        "d",
        4,
    )
    back = formats.parse_network(through_json(formats.dump_network(net)))
    assert formats.dump_network(back) == formats.dump_network(net)


def test_network_errors():
    good = formats.dump_network(queue_plateau()[0])
    for mutate in (
        lambda o: o.pop("source"),
        lambda o: o["edges"][0]["model"].update(kind="teleport"),
        lambda o: o["edges"][0]["model"].update(nu="0"),
        lambda o: o["edges"][0].update(head="nowhere"),
        lambda o: o.update(horizon=4.0),
    ):
        obj = json.loads(json.dumps(good))
        mutate(obj)
        with pytest.raises(ParseError):
            formats.parse_network(obj)


def test_flows_and_inflows_round_trip():
    _, g, _ = queue_plateau()
    assert formats.parse_flows(through_json(formats.dump_flows(g))) == g
    h = queue_plateau_inflows()
    assert formats.parse_inflows(through_json(formats.dump_inflows(h))) == h


def test_inflow_walks_must_be_edge_id_lists():
    with pytest.raises(ParseError):
        formats.parse_inflows({"inflows": [{"walk": [1, 2], "rate": formats.dump_step(SF.zero(1))}]})
    with pytest.raises(ParseError):
        formats.parse_flows({"flows": []})


def test_decomposition_round_trip():
    _, _, tt, dec = linked_cycles()
    back = formats.parse_decomposition(through_json(formats.dump_decomposition(dec)), tt)
    assert back.walk_inflows == dec.walk_inflows
    assert back.cycle_inflows == dec.cycle_inflows


def test_decomposition_rate_must_end_by_the_horizon():
    _, _, tt, _ = linked_cycles()
    obj = {"walks": [{"walk": ["a", "b"], "rate": formats.dump_step(SF.indicator(1, 3, 4))}], "cycles": []}
    with pytest.raises(ParseError):
        formats.parse_decomposition(obj, tt)


def test_purity_report():
    assert formats.dump_purity(Pure()) == {"verdict": "pure", "witnesses": []}
    _, g, tt, dec = isolated_cycle()
    report = formats.dump_purity(check_pure(tt, g, dec))
    assert report["verdict"] == "witnesses"
    (item,) = report["witnesses"]
    assert item["interval"] == ["0", "1"]
    assert item["component"]["cycles"] == [["c", "f"]]


def test_shipped_data_files_parse():
    for name in ("queue_plateau", "linked_cycles", "isolated_cycle"):
        net = formats.parse_network(formats.read_json(DATA / name / "network.json"))
        assert net.source == "s"
    _, _, tt, dec = linked_cycles()
    back = formats.parse_decomposition(formats.read_json(DATA / "linked_cycles" / "decomposition.json"), tt)
    assert isinstance(back, Decomposition)
    assert formats.parse_inflows(formats.read_json(DATA / "queue_plateau" / "inflows.json")) == queue_plateau_inflows()


def test_read_json_errors(tmp_path):
    with pytest.raises(ParseError):
        formats.read_json(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    with pytest.raises(ParseError):
        formats.read_json(bad)


def test_decomposition_walks_are_validated():
    _, _, tt, _ = linked_cycles()
    rate = formats.dump_step(SF.indicator(0, 1, 2))
    for obj in (
        {"walks": [{"walk": ["a", "zz"], "rate": rate}], "cycles": []},
        {"walks": [{"walk": ["a"], "rate": rate}], "cycles": []},
        {"walks": [], "cycles": [{"cycle": ["c", "x"], "rate": rate}]},
    ):
        with pytest.raises(ParseError):
            formats.parse_decomposition(obj, tt)
