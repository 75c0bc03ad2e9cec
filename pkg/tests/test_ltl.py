from __future__ import annotations

import random
from pathlib import Path

from hypothesis import given, settings
from hypothesis import strategies as st

from archrv import formula as fm
from archrv.dsl import parse_spec
from archrv.events import generate_events
from archrv.formula import Lit, Var
from archrv.ltl import EventAtom, parse_ltl, print_ltl, translate_assertion

from randspec import random_spec_text

GOLDEN = Path(__file__).parent / "golden" / "additem.ltl"


def translate(doc, name):
    return translate_assertion(doc.assertion(name), generate_events(doc.component_types), doc)


def ev(name, *args):
    return EventAtom(name, tuple(Var(a) for a in args))


def test_additem_matches_golden(webshop):
    assert print_ltl(translate(webshop, "AddItem")) + "\n" == GOLDEN.read_text()


def test_additem_structure(webshop):
    expected = fm.Globally(
        fm.Implies(
            ev("basket_addItem_execution", "bs", "n", "p"),
            fm.And(
                fm.And(
                    fm.Next(ev("item_activation", "it")),
                    fm.Next(fm.Next(fm.And(ev("basket_setPrice_call", "bs", "p"), ev("item_call_basket_setPrice", "it", "bs")))),
                ),
                fm.Next(fm.Next(fm.Next(fm.And(ev("basket_setName_call", "bs", "n"), ev("item_call_basket_setName", "it", "bs"))))),
            ),
        )
    )
    assert translate(webshop, "AddItem") == expected


def test_activation_atom():
    doc = parse_spec("component Item { } assertion A vars it: Item { G active(it) }")
    assert translate(doc, "A") == fm.Globally(ev("item_activation", "it"))


def test_atomless_body_is_unchanged():
    doc = parse_spec("assertion A { G (true & !false) }")
    assert translate(doc, "A") == doc.assertion("A").body


def test_port_activity_and_literals():
    doc = parse_spec(
        "component B { in a(String, Integer); out o(Integer); }"
        " assertion A vars b: B { val(b.a) & val(b.o) & b.a = (\"x\", 07) }"
    )
    f = translate(doc, "A")
    assert [str(a) for a in fm.atoms(f)] == [
        "b_a_execution(b)",
        "b_o_call(b)",
        'b_a_execution(b,"x",7)',
    ]
    assert list(fm.atoms(f))[2].args == (Var("b"), Lit("x"), Lit("7", True))


def test_print_simple():
    assert print_ltl(EventAtom("a")) == "a"
    assert print_ltl(fm.Next(EventAtom("a"))) == "X (a)"


def test_round_trip_through_parser(webshop):
    f = translate(webshop, "AddItem")
    assert parse_ltl(print_ltl(f)) == f


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32))
def test_translation_preserves_skeleton_and_variables(seed):
    doc = parse_spec(random_spec_text(random.Random(seed)))
    a = doc.assertions[0]
    f = translate(doc, a.name)
    assert fm.skeleton(f) == fm.skeleton(a.body)
    assert fm.term_vars(f) == fm.term_vars(a.body)
    assert all(isinstance(x, EventAtom) for x in fm.atoms(f))
    assert parse_ltl(print_ltl(f)) == f
