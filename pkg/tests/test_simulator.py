from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from archrv.dsl import parse_spec
from archrv.engine import exit_status
from archrv.model import ArchSnapshot, abstract_trace, validate_trace
from archrv.oracle import enumerate_bindings, eval_assertion
from archrv.simulator import (
    ErosionOp,
    SelectorMiss,
    SimConfig,
    SimulationError,
    inject_erosion,
    parse_erosion,
    simulate,
)

from pipeline import monitor_trace
from randspec import random_spec_text

QUIET = dict(activation_rate=0.0, message_rate=0.0, connect_rate=0.0)


def test_deterministic(webshop):
    cfg = SimConfig(seed=7, steps=15)
    assert simulate(webshop, cfg) == simulate(webshop, cfg)
    assert simulate(webshop, cfg) != simulate(webshop, SimConfig(seed=8, steps=15))


def test_single_quiet_step(webshop):
    trace = simulate(webshop, SimConfig(steps=1, **QUIET))
    assert trace.steps == (ArchSnapshot(),)
    assert simulate(webshop, SimConfig(steps=1, lasso=False, **QUIET)).steps == (ArchSnapshot(),)


def test_seed_42_adds_an_item(webshop):
    trace = simulate(webshop, SimConfig(seed=42, steps=20))
    names = {r.name for r in abstract_trace(trace, webshop).records()}
    assert "basket_addItem_execution" in names


def test_open_trace_when_not_a_lasso(webshop):
    assert simulate(webshop, SimConfig(seed=1, steps=4, lasso=False)).loop_start is None


def test_config_validation_and_json():
    with pytest.raises(ValueError):
        SimConfig(steps=0)
    with pytest.raises(ValueError):
        SimConfig(message_rate=1.5)
    with pytest.raises(ValueError):
        SimConfig.from_json({"sed": 1})
    cfg = SimConfig(seed=3, steps=5, scenario="AddItem", lasso=False)
    assert SimConfig.from_json(cfg.to_json()) == cfg
    assert "maxInstancesPerType" in cfg.to_json()


def test_scenario_must_exist(webshop):
    with pytest.raises(SimulationError):
        simulate(webshop, SimConfig(scenario="Nope"))


def test_guided_scenario_and_swap(webshop):
    trace = simulate(webshop, SimConfig(seed=42, steps=20, scenario="AddItem"))
    assert validate_trace(trace, webshop) == []
    report = monitor_trace(trace, webshop)
    assert report["summary"]["instances"] >= 1
    assert exit_status(report) == 0
    eroded = inject_erosion(trace, parse_erosion("swap-order:ports=setPrice,setName"), webshop)
    assert validate_trace(eroded, webshop) == []
    assert exit_status(monitor_trace(eroded, webshop)) == 1


def test_single_episode_satisfies_the_assertion(webshop):
    # with several episodes, bindings mixing two episodes are violated
    # because the item variable is rigid
    a = webshop.assertion("AddItem")
    for seed in range(20):
        trace = simulate(webshop, SimConfig(seed=seed, steps=5, scenario="AddItem", episode_rate=1.0))
        bindings = enumerate_bindings(a, trace, webshop)
        assert bindings
        assert all(eval_assertion(a, trace, b) for b in bindings)


def test_duplicate_draw(drawing):
    a = drawing.assertion("DrawOnce")
    trace = simulate(drawing, SimConfig(seed=3, steps=12, scenario="DrawOnAdd"))
    bindings = enumerate_bindings(a, trace, drawing)
    assert bindings and all(eval_assertion(a, trace, b) for b in bindings)
    eroded = inject_erosion(trace, parse_erosion("duplicate-event:port=draw"), drawing)
    assert validate_trace(eroded, drawing) == []
    assert not all(eval_assertion(a, eroded, b) for b in enumerate_bindings(a, eroded, drawing))
    assert exit_status(monitor_trace(eroded, drawing, assertions=["DrawOnce"])) == 1


def test_identity_op_list(webshop):
    trace = simulate(webshop, SimConfig(seed=5))
    assert inject_erosion(trace, [], webshop) == trace


def test_selector_miss(webshop):
    trace = simulate(webshop, SimConfig(steps=3, **QUIET))
    for text in ("swap-order:ports=setPrice,setName", "swap-order:steps=0,9", "drop-event:port=setName",
                 "duplicate-event:port=addItem", "swap-order", "rewire-connection:port=setName"):
        with pytest.raises(SelectorMiss):
            inject_erosion(trace, parse_erosion(text), webshop)


def test_parse_erosion():
    op = parse_erosion("rewire-connection:port=setName;id=it0;seed=4")
    assert op == ErosionOp.make("rewire-connection", 4, port="setName", id="it0")
    assert op.get("id") == "it0"
    with pytest.raises(ValueError):
        parse_erosion("melt:port=x")
    with pytest.raises(ValueError):
        parse_erosion("swap-order:steps")


def test_steps_selector(webshop):
    trace = simulate(webshop, SimConfig(seed=2, steps=6))
    swapped = inject_erosion(trace, parse_erosion("swap-order:steps=1,3"))
    assert swapped.steps[1] == trace.steps[3] and swapped.steps[3] == trace.steps[1]
    dup = inject_erosion(trace, parse_erosion("duplicate-event:steps=1"))
    assert len(dup.steps) == len(trace.steps) + 1 and dup.steps[1] == dup.steps[2]


def test_rewire_changes_the_sender(webshop):
    cfg = SimConfig(seed=0, steps=8, max_instances_per_type=3, connect_rate=1.0, message_rate=1.0)
    trace = simulate(webshop, cfg)
    op = parse_erosion("rewire-connection:port=setName;seed=1")
    with pytest.raises(SimulationError):
        inject_erosion(trace, op)
    rewired = inject_erosion(trace, op, webshop)
    assert rewired != trace
    assert validate_trace(rewired, webshop) == []


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32), st.integers(1, 12), st.booleans())
def test_webshop_traces_are_valid(webshop, seed, steps, lasso):
    rng = random.Random(seed)
    cfg = SimConfig(
        seed=seed, steps=steps, lasso=lasso, max_instances_per_type=rng.randint(1, 3),
        activation_rate=rng.random(), message_rate=rng.random(), connect_rate=rng.random(),
        scenario=rng.choice([None, "AddItem"]),
    )
    trace = simulate(webshop, cfg)
    assert len(trace.steps) == steps
    assert validate_trace(trace, webshop) == []
    abstract_trace(trace, webshop)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32))
def test_random_spec_traces_are_valid(seed):
    rng = random.Random(seed)
    spec = parse_spec(random_spec_text(rng))
    trace = simulate(spec, SimConfig(seed=seed, steps=rng.randint(1, 8), connect_rate=0.7))
    assert validate_trace(trace, spec) == []
    abstract_trace(trace, spec)


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32), st.sampled_from(["swap-order", "duplicate-event", "drop-event", "rewire-connection"]))
def test_erosion_keeps_traces_valid(webshop, seed, kind):
    rng = random.Random(seed)
    trace = simulate(webshop, SimConfig(seed=seed, steps=8, connect_rate=0.8, message_rate=0.8, max_instances_per_type=3))
    n = len(trace.steps)
    port = rng.choice(["setName", "setPrice", "addItem"])
    text = {
        "swap-order": f"swap-order:steps={rng.randrange(n)},{(rng.randrange(1, n) + 0) % n}",
        "duplicate-event": f"duplicate-event:port={port}",
        "drop-event": f"drop-event:port={port}",
        "rewire-connection": f"rewire-connection:port={port};seed={seed % 100}",
    }[kind]
    try:
        eroded = inject_erosion(trace, parse_erosion(text), webshop)
    except SelectorMiss:
        return
    assert validate_trace(eroded, webshop) == []
