from __future__ import annotations

import random

from hypothesis import given, settings
from hypothesis import strategies as st

from archrv.dsl import parse_spec
from archrv.model import (
    ArchSnapshot,
    ArchTrace,
    ComponentId,
    EventRecord,
    PortRef,
    abstract_trace,
    canonical_literal,
    snapshot_from_json,
    snapshot_to_json,
    trace_from_json,
    trace_to_json,
    validate_snapshot,
    validate_trace,
)
from archrv.simulator import SimConfig, simulate

EXAMPLE_SPEC = parse_spec(
    """
    component C1 { in i0(Integer); out o0(Integer); out o1(Integer); out o2(Integer); }
    component C2 { in i0(Integer); in i1(Integer); in i2(Integer); }
    component C3 { in i0(Integer); in i1(Integer); out o1(Integer); }
    """
)


def msg(*ints):
    return tuple(("Integer", str(i)) for i in ints)


def example_snapshot(**override) -> ArchSnapshot:
    c1, c2, c3 = ComponentId("C1", "c1"), ComponentId("C2", "c2"), ComponentId("C3", "c3")
    conns = {
        PortRef("c2", "i1"): frozenset({PortRef("c1", "o1")}),
        PortRef("c3", "i1"): frozenset({PortRef("c1", "o2")}),
        PortRef("c2", "i2"): frozenset({PortRef("c3", "o1")}),
    }
    vals = {
        PortRef("c1", "o0"): frozenset({msg(3)}),
        PortRef("c1", "o1"): frozenset({msg(5)}),
        PortRef("c2", "i1"): frozenset({msg(5)}),
        PortRef("c1", "o2"): frozenset({msg(7)}),
        PortRef("c3", "i1"): frozenset({msg(7)}),
        PortRef("c3", "o1"): frozenset({msg(3)}),
        PortRef("c2", "i2"): frozenset({msg(3)}),
    }
    vals.update(override)
    return ArchSnapshot(frozenset({c1, c2, c3}), conns, vals)


def codes(diags):
    return sorted(d.code for d in diags)


def test_example_snapshot_is_well_formed():
    assert validate_snapshot(example_snapshot(), EXAMPLE_SPEC) == []


def test_empty_snapshot_is_well_formed():
    assert validate_snapshot(ArchSnapshot(), EXAMPLE_SPEC) == []


def test_input_differing_from_connected_output_is_inconsistent():
    bad = example_snapshot()
    vals = dict(bad.valuations)
    vals[PortRef("c2", "i1")] = frozenset({msg(6)})
    diags = validate_snapshot(ArchSnapshot(bad.active, bad.connections, vals), EXAMPLE_SPEC)
    assert codes(diags) == ["VALUATION_INCONSISTENT"]
    assert diags[0].ref == "(c2,i1)"


def test_structural_violations():
    snap = example_snapshot()
    conns = dict(snap.connections)
    conns[PortRef("c2", "i0")] = frozenset({PortRef("ghost", "o1")})
    conns[PortRef("c1", "o0")] = frozenset({PortRef("c1", "o1")})
    vals = dict(snap.valuations)
    vals[PortRef("c3", "nope")] = frozenset({msg(1)})
    vals[PortRef("c1", "o0")] = frozenset({(("String", "x"),)})
    diags = validate_snapshot(ArchSnapshot(snap.active, conns, vals), EXAMPLE_SPEC)
    assert set(codes(diags)) >= {"INACTIVE_ENDPOINT", "CONNECTION_DIRECTION", "PORT_NOT_DECLARED", "TYPE_MISMATCH"}


def test_unknown_type_and_duplicate_id():
    snap = ArchSnapshot(frozenset({ComponentId("C1", "a"), ComponentId("C2", "a"), ComponentId("Nope", "b")}))
    assert codes(validate_snapshot(snap, EXAMPLE_SPEC)) == ["DUPLICATE_ID", "UNKNOWN_TYPE"]


def test_validate_trace():
    good = example_snapshot()
    assert validate_trace(ArchTrace((good, good, good)), EXAMPLE_SPEC) == []
    assert codes(validate_trace(ArchTrace((good, good), 2), EXAMPLE_SPEC)) == ["LOOP_OUT_OF_RANGE"]
    vals = dict(good.valuations)
    vals[PortRef("c2", "i1")] = frozenset({msg(6)})
    bad = ArchSnapshot(good.active, good.connections, vals)
    diags = validate_trace(ArchTrace((good, bad, good)), EXAMPLE_SPEC)
    assert [(d.code, d.step) for d in diags] == [("VALUATION_INCONSISTENT", 1)]


def test_type_change_across_steps():
    a = ArchSnapshot(frozenset({ComponentId("C1", "x")}))
    b = ArchSnapshot(frozenset({ComponentId("C2", "x")}))
    assert codes(validate_trace(ArchTrace((a, b)), EXAMPLE_SPEC)) == ["TYPE_CHANGED"]


def test_validation_is_order_independent():
    snap = example_snapshot()
    vals = dict(snap.valuations)
    vals[PortRef("c2", "i1")] = frozenset({msg(6)})
    vals[PortRef("c1", "o0")] = frozenset({(("String", "x"),)})
    rng = random.Random(3)
    ref = validate_snapshot(ArchSnapshot(snap.active, snap.connections, vals), EXAMPLE_SPEC)
    for _ in range(10):
        items = list(vals.items())
        rng.shuffle(items)
        citems = list(snap.connections.items())
        rng.shuffle(citems)
        again = validate_snapshot(ArchSnapshot(frozenset(snap.active), dict(citems), dict(items)), EXAMPLE_SPEC)
        assert again == ref


def test_canonical_literals():
    assert canonical_literal("Integer", "007") == "7"
    assert canonical_literal("Integer", -0) == "0"
    assert canonical_literal("Boolean", "TRUE") == "true"
    assert canonical_literal("String", "é") == "é"


def test_abstraction_of_single_addition(webshop):
    bs = ComponentId("Basket", "bs")
    snap = ArchSnapshot(
        frozenset({bs}), {}, {PortRef("bs", "addItem"): frozenset({(("String", "book"), ("Integer", "100"))})}
    )
    events = abstract_trace(ArchTrace((snap,)), webshop)
    assert set(events.steps[0]) == {
        EventRecord(0, "basket_activation", ("bs",)),
        EventRecord(0, "basket_addItem_execution", ("bs",)),
        EventRecord(0, "basket_addItem_execution", ("bs", "book", "100")),
    }


def test_activation_fires_only_when_becoming_active(webshop):
    bs = ArchSnapshot(frozenset({ComponentId("Basket", "bs")}))
    events = abstract_trace(ArchTrace((bs, bs)), webshop)
    assert [r.name for r in events.steps[0]] == ["basket_activation"]
    assert events.steps[1] == ()


def test_empty_trace_abstracts_to_nothing(webshop):
    assert abstract_trace(ArchTrace(()), webshop).steps == ()


def test_connection_call_requires_valuated_input(webshop):
    bs, it = ComponentId("Basket", "bs"), ComponentId("Item", "it")
    conn = {PortRef("it", "setPrice"): frozenset({PortRef("bs", "setPrice")})}
    vals = {PortRef("bs", "setPrice"): frozenset({(("Integer", "5"),)}), PortRef("it", "setPrice"): frozenset({(("Integer", "5"),)})}
    with_msg = abstract_trace(ArchTrace((ArchSnapshot(frozenset({bs, it}), conn, vals),)), webshop)
    assert EventRecord(0, "item_call_basket_setPrice", ("it", "bs")) in with_msg.steps[0]
    silent = abstract_trace(ArchTrace((ArchSnapshot(frozenset({bs, it}), conn, {}),)), webshop)
    assert all(r.name != "item_call_basket_setPrice" for r in silent.steps[0])


def test_json_round_trip():
    snap = example_snapshot()
    assert snapshot_from_json(snapshot_to_json(snap)) == snap.normalized()
    trace = ArchTrace((snap, ArchSnapshot()), 1)
    assert trace_from_json(trace_to_json(trace)) == ArchTrace((snap.normalized(), ArchSnapshot()), 1)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32), st.integers(1, 8), st.integers(0, 4))
def test_lasso_unrolling_commutes_with_abstraction(webshop, seed, steps, k):
    trace = simulate(webshop, SimConfig(seed=seed, steps=steps, lasso=True))
    unrolled_then_abstracted = abstract_trace(trace.unrolled(k), webshop)
    assert unrolled_then_abstracted == abstract_trace(trace, webshop).unrolled(k)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32))
def test_valid_snapshots_satisfy_union_rule(webshop, seed):
    trace = simulate(webshop, SimConfig(seed=seed, steps=5, connect_rate=0.8, message_rate=0.7))
    for snap in trace.steps:
        assert validate_snapshot(snap, webshop) == []
        for ci, outs in snap.connections.items():
            union = frozenset().union(*(snap.value_of(o) for o in outs))
            assert snap.value_of(ci) == union
