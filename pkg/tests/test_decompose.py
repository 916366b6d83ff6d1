from fractions import Fraction

import pytest

from dynflow.balance import SdFlowCertificate, validate_sd_flow
from dynflow.decompose import (
    BudgetExhausted,
    Decomposition,
    FdkProblem,
    InvalidFlow,
    MaximallyPure,
    NoPositiveSourceOutflow,
    Pure,
    Witnesses,
    active_components,
    check_pure,
    decompose,
    find_flow_carrying_walk,
    purify,
    reconstruct,
    reconstruction_mismatch,
    solve_fdk,
    zero_cycle_decompose,
)
from dynflow.loading import Exogenous, parameterized_load, travel_times
from dynflow.netgraph import DynNetwork, Edge, EnumerationRefused
from dynflow.timealg import Interval, StepFunction, TimeMeasure
from identities import check_flow_carrying_walk
from instances import (
    isolated_cycle,
    linked_cycles,
    queue_plateau,
    random_purity_instance,
    random_vickrey_instance,
)

F = Fraction
SF = StepFunction
W1, W2 = ("e1", "e3"), ("e2", "e3")


def single_edge(delay=1, horizon=4):
    net = DynNetwork(["s", "d"], [Edge("e", "s", "d", Exogenous.constant(delay, horizon))], "s", "d", horizon)
    return travel_times(net, {})


def two_cycle(horizon=2):
    Z = Exogenous.constant(0, horizon)
    net = DynNetwork(
        ["s", "v1", "v2", "d"],
        [Edge("a", "s", "v1", Z), Edge("b", "v1", "d", Z), Edge("c", "v1", "v2", Z), Edge("f", "v2", "v1", Z)],
        "s",
        "d",
        horizon,
    )
    return travel_times(net, {})


def subtract_walks(tt, g, walk_inflows):
    residual = {e: tt.fit(g.get(e, SF.zero(tt.horizon))) for e in tt.net.edge_ids}
    for w, h in walk_inflows.items():
        for e, f in parameterized_load(tt, w, h).items():
            residual[e] = residual[e] - f
    return residual


class TestSolveFdk:
    def test_single_edge_all_caps_equal_one(self):
        tt = single_edge()
        one = SF.indicator(0, 1, 4)
        p = FdkProblem(("e",), {"e": one}, one, TimeMeasure(-SF.indicator(1, 2, tt.horizon)))
        assert solve_fdk(tt, p) == one

    def test_zero_residual(self):
        tt = single_edge()
        zero = SF.zero(4)
        p = FdkProblem(("e",), {"e": zero}, SF.indicator(0, 1, 4), TimeMeasure.zero(tt.horizon))
        assert solve_fdk(tt, p).is_zero()

    def test_plateau_forces_zero(self):
        net, g, tt = queue_plateau()
        cert = validate_sd_flow(tt, g)
        h = solve_fdk(tt, FdkProblem(W1, g, cert.r_s, cert.destination_balance))
        assert h == SF.indicator(0, 1, 4, 2)

    def test_destination_floor_binds(self):
        tt = single_edge()
        one = SF.indicator(0, 1, 4)
        floor = TimeMeasure(SF.indicator(1, 2, tt.horizon, F(-1, 3)))
        assert solve_fdk(tt, FdkProblem(("e",), {"e": one}, one, floor)) == SF.indicator(0, 1, 4, F(1, 3))

    def test_shared_edge_couples_positions(self):
        tt = two_cycle()
        one = SF.indicator(0, 1, 2)
        residual = {"a": one, "b": one, "c": one, "f": one}
        # c and f are used twice each, so their caps halve the inflow
        h = solve_fdk(tt, FdkProblem(("a", "c", "f", "c", "f", "b"), residual, one, TimeMeasure(-one)))
        assert h == SF.indicator(0, 1, 2, F(1, 2))


class TestDecompose:
    def test_plateau_instance(self):
        _, g, tt = queue_plateau()
        dec = decompose(tt, g)
        assert dec.walk_inflows == {W1: SF.indicator(0, 1, 4, 2), W2: SF.indicator(1, 2, 4, 2)}
        assert dec.cycle_inflows == {}
        assert reconstruction_mismatch(tt, g, dec) is None

    def test_zero_flow(self):
        _, _, tt = queue_plateau()
        dec = decompose(tt, {})
        assert dec.walk_inflows == {} and dec.cycle_inflows == {}

    def test_linked_cycles(self):
        _, g, tt, _ = linked_cycles()
        dec = decompose(tt, g, max_len=8)
        assert reconstruction_mismatch(tt, g, dec) is None
        assert dec.walk_mass() >= 1
        assert set(dec.cycle_inflows) <= {("c", "f"), ("x", "y")}

    def test_zero_travel_times_need_a_length_cap(self):
        _, g, tt, _ = linked_cycles()
        with pytest.raises(EnumerationRefused):
            decompose(tt, g)

    def test_invalid_flow(self):
        _, _, tt = queue_plateau()
        with pytest.raises(InvalidFlow):
            decompose(tt, {"e3": SF.indicator(0, 1, 4)})

    def test_budget_too_small(self):
        _, g, tt = queue_plateau()
        with pytest.raises(BudgetExhausted):
            decompose(tt, g, budget=1)

    def test_explicit_order(self):
        _, g, tt = queue_plateau()
        dec = decompose(tt, g, order=[W2, W1])
        assert dec.walk_inflows == {W2: SF.indicator(1, 2, 4, 2), W1: SF.indicator(0, 1, 4, 2)}
        with pytest.raises(ValueError):
            decompose(tt, g, order=[("e3", "e1")])
        with pytest.raises(ValueError):
            decompose(tt, g, order="random")

    @pytest.mark.parametrize("seed", range(12))
    def test_random_loaded_flows(self, seed):
        net, _, g, tt = random_vickrey_instance(seed)
        dec = decompose(tt, g)
        assert reconstruction_mismatch(tt, g, dec) is None
        # replay the walks in order: every intermediate residual is an s,d-flow
        residual = {e: tt.fit(g[e]) for e in net.edge_ids}
        for w, h in dec.walk_inflows.items():
            for e, f in parameterized_load(tt, w, h).items():
                residual[e] = residual[e] - f
            assert isinstance(validate_sd_flow(tt, residual), SdFlowCertificate)
        # no source outflow remains, so no flow-carrying walk exists either
        assert validate_sd_flow(tt, residual).r_s.is_zero()
        with pytest.raises(NoPositiveSourceOutflow):
            find_flow_carrying_walk(tt, residual)


class TestZeroCycleDecompose:
    def test_zero(self):
        assert zero_cycle_decompose(two_cycle(), {}) == {}

    def test_single_cycle(self):
        tt = two_cycle()
        one = SF.indicator(0, 1, 2)
        assert zero_cycle_decompose(tt, {"c": one, "f": one}) == {("c", "f"): one}

    def test_linked_cycles_residual(self):
        _, g, tt, _ = linked_cycles()
        residual = subtract_walks(tt, g, {("a", "b"): SF.indicator(0, 1, 2)})
        one = SF.indicator(0, 1, tt.horizon)
        assert zero_cycle_decompose(tt, residual) == {("c", "f"): one, ("x", "y"): one}

    def test_rejects_non_circulations(self):
        tt = two_cycle()
        with pytest.raises(AssertionError):
            zero_cycle_decompose(tt, {"c": SF.indicator(0, 1, 2)})

    @pytest.mark.parametrize("seed", range(25))
    def test_mass_identity(self, seed):
        _, g, tt, dec = random_purity_instance(seed)
        residual = subtract_walks(tt, g, dec.walk_inflows)
        cycles = zero_cycle_decompose(tt, residual)
        assert sum((len(c) * h.integral() for c, h in cycles.items()), F(0)) == sum(
            (f.integral() for f in residual.values()), F(0)
        )
        back = reconstruct(Decomposition({}, cycles, tt))
        assert all(back[e] == residual[e] for e in tt.net.edge_ids)


class TestFindFlowCarryingWalk:
    def test_single_edge(self):
        tt = single_edge()
        found = find_flow_carrying_walk(tt, {"e": SF.indicator(0, 1, 4)})
        assert found.walk == ("e",)
        assert found.inflow == SF.indicator(0, 1, 4)

    def test_zero_flow(self):
        with pytest.raises(NoPositiveSourceOutflow):
            find_flow_carrying_walk(single_edge(), {})

    def test_invalid_flow(self):
        _, _, tt = queue_plateau()
        with pytest.raises(InvalidFlow):
            find_flow_carrying_walk(tt, {"e3": SF.indicator(0, 1, 4)})

    def test_plateau_instance(self):
        _, g, tt = queue_plateau()
        found = find_flow_carrying_walk(tt, g)
        assert found.walk in (W1, W2)
        check_flow_carrying_walk(tt, g, found)


def test_flow_carrying_walk_on_random_flows():
    checked = 0
    for seed in range(15):
        _, _, g, tt = random_vickrey_instance(seed)
        if validate_sd_flow(tt, g).r_s.is_zero():
            continue
        check_flow_carrying_walk(tt, g, find_flow_carrying_walk(tt, g))
        checked += 1
    assert checked >= 10


class TestActiveComponents:
    def test_empty(self):
        _, _, tt, _ = linked_cycles()
        assert active_components(tt, {}) == []

    def test_linked_cycles_form_one_component(self):
        _, _, tt, dec = linked_cycles()
        (comp,) = active_components(tt, dec.cycle_inflows)
        assert set(comp.cycles) == {("c", "f"), ("x", "y")}
        assert comp.nodes == {"v1", "v2", "v3"}
        assert comp.times == (Interval(0, 1, True, False),)

    def test_disjoint_cycles_at_disjoint_times(self):
        _, _, tt, _ = linked_cycles()
        # c/f and x/y share v2; make them active at different times instead
        comps = active_components(tt, {("c", "f"): SF.indicator(0, 1, 2), ("x", "y"): SF.indicator(1, 2, 2)})
        assert [(c.cycles, c.times) for c in comps] == [
            ((("c", "f"),), (Interval(0, 1, True, False),)),
            ((("x", "y"),), (Interval(1, 2, True, False),)),
        ]


class TestCheckPure:
    def test_no_cycles(self):
        _, g, tt = queue_plateau()
        assert isinstance(check_pure(tt, g, decompose(tt, g)), Pure)

    def test_linked_cycles(self):
        _, g, tt, dec = linked_cycles()
        assert check_pure(tt, g, dec)

    def test_isolated_cycle(self):
        _, g, tt, dec = isolated_cycle()
        verdict = check_pure(tt, g, dec)
        assert isinstance(verdict, Witnesses) and not verdict
        ((comp, iv),) = verdict.items
        assert comp.cycles == (("c", "f"),)
        assert iv == Interval(0, 1, True, False)


class TestPurify:
    def test_already_pure_is_unchanged(self):
        _, g, tt = queue_plateau()
        dec = decompose(tt, g)
        assert purify(tt, g, dec) is dec

    def test_linked_cycles(self):
        _, g, tt, dec = linked_cycles()
        pure = purify(tt, g, dec)
        assert isinstance(pure, Decomposition)
        assert pure.cycle_inflows == {}
        assert reconstruction_mismatch(tt, g, pure) is None
        assert pure.walk_inflows[("a", "b")] == SF.indicator(0, 1, 2, F(3, 4))
        assert pure.is_pure()
        assert isinstance(check_pure(tt, g, pure), Pure)
        carried = sum((h.integral() * w.count("c") for w, h in pure.walk_inflows.items()), F(0))
        assert carried == 1

    def test_isolated_cycle_is_kept(self):
        _, g, tt, dec = isolated_cycle()
        result = purify(tt, g, dec)
        assert isinstance(result, MaximallyPure)
        assert result.decomposition.cycle_inflows == {("c", "f"): SF.indicator(0, 1, 2)}
        assert result.witnesses == check_pure(tt, g, dec)
        assert reconstruction_mismatch(tt, g, result.decomposition) is None

    @pytest.mark.parametrize("seed", range(20))
    def test_random_instances(self, seed):
        _, g, tt, dec = random_purity_instance(seed)
        verdict = check_pure(tt, g, dec)
        result = purify(tt, g, dec)
        if verdict:
            assert isinstance(result, Decomposition) and result.is_pure()
            final = result
        else:
            assert isinstance(result, MaximallyPure)
            final = result.decomposition
            kept = {c for comp, _ in result.witnesses.items for c in comp.cycles}
            assert set(final.cycle_inflows) <= kept
        assert reconstruction_mismatch(tt, g, final) is None


def test_reconstruction_mismatch_reports_the_edge():
    _, g, tt = queue_plateau()
    dec = Decomposition({W1: SF.indicator(0, 1, 4, 2)}, {}, tt)
    bad = reconstruction_mismatch(tt, g, dec)
    # the decomposition misses the 2 units entering e2 on [1, 2]
    assert (bad.edge, bad.interval, bad.difference) == ("e2", Interval(1, 2), -2)
