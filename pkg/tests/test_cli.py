from __future__ import annotations

import io
import json
import subprocess
import sys
from pathlib import Path

import pytest

from archrv.cli import main
from archrv.model import trace_to_json
from archrv.monitor import from_json

from conftest import data_path
from webshop_traces import additem_trace

GOLDEN = Path(__file__).parent / "golden" / "additem.ltl"
WEBSHOP = data_path("webshop.factum")


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_check(capsys, tmp_path):
    code, out, _ = run(capsys, "check", WEBSHOP)
    assert code == 0 and json.loads(out) == {"components": 2, "assertions": 1, "diagnostics": []}
    code, _, err = run(capsys, "check", write(tmp_path, "junk.factum", "%%% not a spec"))
    assert code == 2 and "junk.factum:1:1: BAD_CHAR" in err
    code, _, err = run(capsys, "check", write(tmp_path, "cut.factum", "component {"))
    assert code == 2 and "cut.factum:1:11: SYNTAX" in err
    bad = write(
        tmp_path,
        "dir.factum",
        "component Basket { in addItem(String, Integer); } component Item { in setName(String); }"
        " assertion A vars bs: Basket, it: Item { conn(bs.addItem -> it.setName) }",
    )
    code, _, err = run(capsys, "check", bad)
    assert code == 2
    assert err.startswith(f"{bad}:1:") and "PORT_DIRECTION" in err
    code, _, err = run(capsys, "check", tmp_path / "missing.factum")
    assert code == 2 and "UNREADABLE" in err


def test_gen_events(capsys, tmp_path):
    code, out, _ = run(capsys, "gen-events", WEBSHOP)
    assert code == 0 and len(json.loads(out)) == 14
    code, out, _ = run(capsys, "gen-events", write(tmp_path, "empty.factum", ""))
    assert code == 0 and json.loads(out) == []
    code, out, _ = run(capsys, "gen-events", write(tmp_path, "one.factum", "component Lonely { }"))
    assert [s["name"] for s in json.loads(out)] == ["lonely_activation"]
    code, out, _ = run(capsys, "gen-events", WEBSHOP, "--manifest")
    doc = json.loads(out)
    assert len(doc["schemas"]) == 14 and len(doc["manifest"]["events"]) == 14


def test_gen_ltl(capsys, tmp_path):
    code, out, _ = run(capsys, "gen-ltl", WEBSHOP, "AddItem")
    assert code == 0 and out == GOLDEN.read_text()
    code, _, err = run(capsys, "gen-ltl", WEBSHOP, "Nope")
    assert code == 2 and "UNKNOWN_ASSERTION" in err
    spec = write(tmp_path, "plain.factum", "assertion Plain { G (true | false) }")
    code, out, _ = run(capsys, "gen-ltl", spec, "Plain")
    assert out == "G ((true | false))\n"


def test_gen_monitor(capsys, tmp_path):
    code, out, _ = run(capsys, "gen-monitor", WEBSHOP, "AddItem")
    assert code == 0 and out.startswith("digraph") and out.count("color=red") == 1
    code, out, _ = run(capsys, "gen-monitor", WEBSHOP, "AddItem", "--format", "json")
    m = from_json(json.loads(out))
    assert [v.value for v in m.verdicts].count("BOTTOM") == 1
    spec = write(tmp_path, "f.factum", "component A { in go(Integer); } assertion Eventually vars x: A { F val(x.go) }")
    code, out, _ = run(capsys, "gen-monitor", spec, "Eventually")
    assert code == 0 and "color=green" in out
    ports = " ".join(f"in p{i}(Integer);" for i in range(17))
    body = " & ".join(f"val(x.p{i})" for i in range(17))
    big = write(tmp_path, "big.factum", f"component A {{ {ports} }} assertion Big vars x: A {{ G ({body}) }}")
    code, _, err = run(capsys, "gen-monitor", big, "Big")
    assert code == 2 and "ATOM_BUDGET_EXCEEDED" in err
    code, _, _ = run(capsys, "gen-monitor", big, "Big", "--max-atoms", "17", "--format", "json")
    assert code == 0


def test_monitor(capsys, tmp_path):
    code, out, _ = run(capsys, "monitor", WEBSHOP, "--log", data_path("additem_violation.jsonl"))
    report = json.loads(out)
    assert code == 1
    assert report["instances"][0]["firstViolationStep"] == 3
    code, out, _ = run(capsys, "monitor", WEBSHOP, "--log", data_path("additem_violation_corrected.jsonl"))
    assert code == 0 and json.loads(out)["summary"]["INCONCLUSIVE"] == 1
    code, out, _ = run(capsys, "monitor", WEBSHOP, "--log", write(tmp_path, "empty.jsonl", ""))
    assert code == 0 and json.loads(out)["instances"] == []
    code, _, err = run(capsys, "monitor", WEBSHOP, "--log", write(tmp_path, "bad.jsonl", "{oops\n"))
    assert code == 2 and "BAD_LOG" in err
    code, _, err = run(capsys, "monitor", WEBSHOP, "--log", write(tmp_path, "u.jsonl", '{"step":0,"event":"zzz"}\n'))
    assert code == 2 and "UNKNOWN_EVENT" in err


def test_monitor_stdin(capsys, monkeypatch):
    monkeypatch.setattr(sys, "stdin", io.StringIO(Path(data_path("additem_violation.jsonl")).read_text()))
    code, out, err = run(capsys, "monitor", WEBSHOP, "--stdin")
    assert code == 1
    assert err.splitlines() == ['step 3: AddItem {"n": "book", "p": "100", "it": "it", "bs": "bs"} -> BOTTOM']
    offline = main(["monitor", WEBSHOP, "--log", data_path("additem_violation.jsonl")])
    assert offline == 1 and capsys.readouterr().out == out


def test_simulate(capsys, tmp_path):
    args = ("simulate", WEBSHOP, "--seed", "11", "--steps", "6")
    _, first, _ = run(capsys, *args)
    _, second, _ = run(capsys, *args)
    assert first == second
    code, out, _ = run(
        capsys, "simulate", WEBSHOP, "--steps", "1",
        "--activation-rate", "0", "--message-rate", "0", "--connect-rate", "0",
    )
    assert code == 0
    assert json.loads(out) == {"steps": [{"active": [], "connections": [], "valuations": []}], "loopStart": 0}
    cfg = write(tmp_path, "cfg.json", json.dumps({"seed": 11, "steps": 6}))
    _, from_file, _ = run(capsys, "simulate", WEBSHOP, "--config", cfg)
    assert from_file == first
    code, _, err = run(capsys, "simulate", WEBSHOP, "--erode", "melt:port=x")
    assert code == 2 and "BAD_CONFIG" in err
    code, _, _ = run(capsys, "simulate", WEBSHOP, "--message-rate", "2")
    assert code == 2


def test_pipeline_detects_swapped_setters(capsys, tmp_path):
    base = ("simulate", WEBSHOP, "--seed", "42", "--steps", "20", "--scenario", "AddItem")
    verdicts = []
    for extra in ((), ("--erode", "swap-order:ports=setPrice,setName")):
        _, trace, _ = run(capsys, *base, *extra)
        tpath = write(tmp_path, "t.json", trace)
        code, log, _ = run(capsys, "abstract", WEBSHOP, tpath)
        assert code == 0
        lpath = write(tmp_path, "t.jsonl", log)
        code, _, _ = run(capsys, "monitor", WEBSHOP, "--log", lpath)
        verdicts.append(code)
    assert verdicts == [0, 1]


def test_abstract(capsys, tmp_path):
    empty = write(tmp_path, "e.json", json.dumps({"steps": [], "loopStart": None}))
    code, out, _ = run(capsys, "abstract", WEBSHOP, empty)
    assert code == 0 and out == ""
    lasso = write(tmp_path, "l.json", json.dumps(trace_to_json(additem_trace())))
    code, out, _ = run(capsys, "abstract", WEBSHOP, lasso)
    lines = [json.loads(x) for x in out.splitlines()]
    assert lines[0] == {"meta": {"steps": 5, "loopStart": 4}}
    _, schemas, _ = run(capsys, "gen-events", WEBSHOP)
    names = {s["name"] for s in json.loads(schemas)}
    assert {x["event"] for x in lines[1:]} <= names
    broken = write(tmp_path, "b.json", "[")
    code, _, err = run(capsys, "abstract", WEBSHOP, broken)
    assert code == 2 and "BAD_TRACE" in err


def test_eval(capsys, tmp_path):
    good = write(tmp_path, "g.json", json.dumps(trace_to_json(additem_trace(True))))
    bad = write(tmp_path, "b.json", json.dumps(trace_to_json(additem_trace(False))))
    code, out, _ = run(capsys, "eval", WEBSHOP, "AddItem", good)
    assert code == 0 and json.loads(out)["holds"] is True
    code, out, _ = run(capsys, "eval", WEBSHOP, "AddItem", bad)
    assert code == 1 and json.loads(out)["bindings"][0]["holds"] is False
    doc = trace_to_json(additem_trace())
    doc["loopStart"] = None
    code, _, err = run(capsys, "eval", WEBSHOP, "AddItem", write(tmp_path, "o.json", json.dumps(doc)))
    assert code == 2 and "OPEN_TRACE" in err


def test_usage_errors(capsys):
    assert main([]) == 2
    assert main(["--help"]) == 0
    assert main(["monitor", WEBSHOP]) == 2
    capsys.readouterr()


def test_console_script(tmp_path):
    out = subprocess.run(
        [sys.executable, "-m", "archrv.cli", "gen-ltl", WEBSHOP, "AddItem"], capture_output=True, text=True, check=True
    )
    assert out.stdout == GOLDEN.read_text()
