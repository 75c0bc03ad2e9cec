from __future__ import annotations

import itertools
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from archrv.events import (
    NameCollision,
    generate_events,
    generate_instrumentation_manifest,
    parse_event_name,
)
from archrv.model import IN, OUT, ComponentType, PortDecl

WEBSHOP_EVENTS = [
    ("basket_activation", 1),
    ("basket_addItem_execution", 1),
    ("basket_addItem_execution", 3),
    ("basket_setName_call", 1),
    ("basket_setName_call", 2),
    ("basket_setPrice_call", 1),
    ("basket_setPrice_call", 2),
    ("item_activation", 1),
    ("item_call_basket_setName", 2),
    ("item_call_basket_setPrice", 2),
    ("item_setName_execution", 1),
    ("item_setName_execution", 2),
    ("item_setPrice_execution", 1),
    ("item_setPrice_execution", 2),
]


def test_webshop_vocabulary(webshop_schemas):
    assert sorted(s.key for s in webshop_schemas) == WEBSHOP_EVENTS
    assert len({s.name for s in webshop_schemas}) == 9


def test_connection_call_params(webshop_schemas):
    s = next(s for s in webshop_schemas if s.name == "item_call_basket_setPrice")
    assert [(p.role, p.sort) for p in s.params] == [("self", "Item"), ("peer", "Basket")]


def test_type_without_ports():
    schemas = generate_events([ComponentType("Lonely")])
    assert [s.name for s in schemas] == ["lonely_activation"]


def test_single_input_port():
    schemas = generate_events([ComponentType("A", (PortDecl("go", IN, ("Integer",)),))])
    assert [s.key for s in schemas] == [("a_activation", 1), ("a_go_execution", 1), ("a_go_execution", 2)]


def test_case_collision():
    with pytest.raises(NameCollision):
        generate_events([ComponentType("Ab"), ComponentType("ab")])


def test_manifest(webshop_schemas):
    assert generate_instrumentation_manifest([]) == {"events": []}
    manifest = generate_instrumentation_manifest(webshop_schemas)
    assert [(e["name"], len(e["params"])) for e in manifest["events"]] == WEBSHOP_EVENTS
    entry = next(e for e in manifest["events"] if e["name"] == "basket_addItem_execution" and len(e["params"]) == 3)
    assert entry["joinpoint"] == "entry of Basket.addItem, capture (self, arg0, arg1)"
    act = next(e for e in manifest["events"] if e["name"] == "item_activation")
    assert act["kind"] == "activation" and "constructor completion" in act["joinpoint"]


@st.composite
def type_sets(draw):
    names = draw(st.lists(st.sampled_from(["Aa", "Bb", "Cc", "Dd"]), min_size=1, max_size=4, unique=True))
    out = []
    for n in names:
        ports = draw(st.lists(st.sampled_from(["p", "q", "r"]), max_size=3, unique=True))
        out.append(
            ComponentType(n, tuple(PortDecl(p, draw(st.sampled_from([IN, OUT])), ("Integer",)) for p in ports))
        )
    return out


@settings(max_examples=200, deadline=None)
@given(type_sets())
def test_cardinality_law(types):
    expected = sum(1 + 2 * len(ct.ports) for ct in types)
    for ct, other in itertools.permutations(types, 2):
        expected += sum(1 for p in ct.inputs if other.port(p.name) is not None)
    assert len(generate_events(types)) == expected


@settings(max_examples=100, deadline=None)
@given(type_sets(), st.randoms())
def test_declaration_order_does_not_matter(types, rnd):
    shuffled = list(types)
    rnd.shuffle(shuffled)
    assert generate_events(shuffled) == generate_events(types)


@settings(max_examples=100, deadline=None)
@given(type_sets())
def test_names_parse_back(types):
    type_names = [ct.name for ct in types]
    ports = {p.name for ct in types for p in ct.ports}
    for s in generate_events(types):
        assert parse_event_name(s.name, type_names, ports) == (s.component_type, s.port, s.kind, s.peer_type)
