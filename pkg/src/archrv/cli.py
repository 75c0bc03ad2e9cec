"""Command line entry point: ``archrv <command> ...``.

Machine-readable output goes to standard output, diagnostics to standard
error. Exit status 0 means success and no violation, 1 a violation, 2 a usage
or input error.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Optional, Sequence

from .diagnostics import ArchError, Diagnostic
from .dsl import SpecDocument, parse_spec, typecheck_spec
from .engine import Engine, LogMeta, dump_report, exit_status, read_log, run_log, run_stream, write_log
from .events import generate_events, generate_instrumentation_manifest, schemas_to_json
from .ltl import print_ltl, translate_assertion
from .model import abstract_trace, trace_from_json, trace_to_json, validate_trace
from .monitor import DEFAULT_MAX_ATOMS, compile_monitor, export_automaton
from .oracle import enumerate_bindings, eval_assertion
from .simulator import SimConfig, inject_erosion, parse_erosion, simulate

OK, VIOLATION, INPUT_ERROR = 0, 1, 2


class _Fail(Exception):
    def __init__(self, diags: Sequence[Diagnostic], filename: str = "<input>"):
        self.diags, self.filename = list(diags), filename


def _err(code: str, message: str, filename: str = "<input>") -> _Fail:
    return _Fail([Diagnostic(code, message)], filename)


def _read(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except (OSError, UnicodeDecodeError) as exc:
        raise _err("UNREADABLE", f"cannot read {path}: {exc}", path) from exc


def _load_spec(path: str) -> SpecDocument:
    text = _read(path)
    try:
        doc = parse_spec(text)
    except ArchError as exc:
        raise _Fail(exc.diagnostics or [Diagnostic(exc.code, str(exc))], path) from exc
    diags = typecheck_spec(doc)
    if diags:
        raise _Fail(diags, path)
    return doc


def _assertion(doc: SpecDocument, name: str, path: str):
    a = doc.assertion(name)
    if a is None:
        known = ", ".join(x.name for x in doc.assertions) or "none"
        raise _err("UNKNOWN_ASSERTION", f"no assertion named {name} (declared: {known})", path)
    return a


def _load_trace(path: str, doc: SpecDocument):
    text = _read(path)
    try:
        trace = trace_from_json(json.loads(text))
    except json.JSONDecodeError as exc:
        raise _err("BAD_TRACE", f"{exc.msg} at line {exc.lineno}", path) from exc
    diags = validate_trace(trace, doc)
    if diags:
        raise _Fail(diags, path)
    return trace


def _emit(obj) -> None:
    sys.stdout.write(json.dumps(obj, indent=2, ensure_ascii=False) + "\n")


# --- commands -------------------------------------------------------------------


def cmd_check(args) -> int:
    doc = _load_spec(args.spec)
    _emit({"components": len(doc.component_types), "assertions": len(doc.assertions), "diagnostics": []})
    return OK


def cmd_gen_events(args) -> int:
    doc = _load_spec(args.spec)
    schemas = generate_events(doc.component_types)
    if args.manifest:
        _emit({"schemas": schemas_to_json(schemas), "manifest": generate_instrumentation_manifest(schemas)})
    else:
        _emit(schemas_to_json(schemas))
    return OK


def cmd_gen_ltl(args) -> int:
    doc = _load_spec(args.spec)
    a = _assertion(doc, args.assertion, args.spec)
    f = translate_assertion(a, generate_events(doc.component_types), doc)
    sys.stdout.write(print_ltl(f) + "\n")
    return OK


def cmd_gen_monitor(args) -> int:
    doc = _load_spec(args.spec)
    a = _assertion(doc, args.assertion, args.spec)
    f = translate_assertion(a, generate_events(doc.component_types), doc)
    m = compile_monitor(f, args.max_atoms)
    sys.stdout.write(export_automaton(m, args.format))
    return OK


def cmd_monitor(args) -> int:
    doc = _load_spec(args.spec)
    engine = Engine.from_spec(doc, args.assertion or None, args.max_atoms)
    if args.stdin:

        def sink(inst: dict, step: int) -> None:
            sys.stderr.write(f"step {step}: {inst['assertion']} {json.dumps(inst['binding'])} -> {inst['verdict']}\n")
            sys.stderr.flush()

        report = run_stream(read_log(sys.stdin), engine, sink)
    else:
        report = run_log(read_log(_read(args.log).splitlines()), engine)
    for d in report["diagnostics"]:
        sys.stderr.write(Diagnostic(d["code"], d["message"], step=d.get("step")).format(args.log or "<stdin>") + "\n")
    sys.stdout.write(dump_report(report))
    return exit_status(report)


def cmd_simulate(args) -> int:
    doc = _load_spec(args.spec)
    base = {}
    if args.config:
        try:
            base = SimConfig.from_json(json.loads(_read(args.config))).to_json()
        except (json.JSONDecodeError, ValueError, TypeError) as exc:
            raise _err("BAD_CONFIG", str(exc), args.config) from exc
    flags = {
        "seed": args.seed,
        "steps": args.steps,
        "maxInstancesPerType": args.max_instances,
        "activationRate": args.activation_rate,
        "messageRate": args.message_rate,
        "connectRate": args.connect_rate,
        "lasso": args.lasso,
        "scenario": args.scenario,
        "episodeRate": args.episode_rate,
    }
    base.update({k: v for k, v in flags.items() if v is not None})
    try:
        cfg = SimConfig.from_json(base)
        ops = [parse_erosion(e) for e in args.erode or ()]
    except (ValueError, TypeError) as exc:
        raise _err("BAD_CONFIG", str(exc), args.spec) from exc
    trace = simulate(doc, cfg)
    trace = inject_erosion(trace, ops, doc)
    _emit(trace_to_json(trace))
    return OK


def cmd_abstract(args) -> int:
    doc = _load_spec(args.spec)
    trace = _load_trace(args.trace, doc)
    events = abstract_trace(trace, doc)
    meta = LogMeta(len(trace.steps), trace.loop_start) if trace.is_lasso else None
    sys.stdout.write(write_log(events.records(), meta))
    return OK


def cmd_eval(args) -> int:
    doc = _load_spec(args.spec)
    a = _assertion(doc, args.assertion, args.spec)
    trace = _load_trace(args.trace, doc)
    results = []
    for b in enumerate_bindings(a, trace, doc):
        results.append({"binding": b, "holds": eval_assertion(a, trace, b)})
    holds = all(r["holds"] for r in results)
    _emit({"assertion": a.name, "holds": holds, "bindings": results})
    return OK if holds else VIOLATION


# --- parser -------------------------------------------------------------------------


def _probability(text: str) -> float:
    v = float(text)
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError(f"{text} is not in [0, 1]")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="archrv", description="Runtime verification of architectural assertions.")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check", help="parse and typecheck a specification")
    c.add_argument("spec")
    c.set_defaults(func=cmd_check)

    c = sub.add_parser("gen-events", help="print the event schemas")
    c.add_argument("spec")
    c.add_argument("--manifest", action="store_true", help="include the instrumentation manifest")
    c.set_defaults(func=cmd_gen_events)

    c = sub.add_parser("gen-ltl", help="print an assertion translated to LTL over events")
    c.add_argument("spec")
    c.add_argument("assertion")
    c.set_defaults(func=cmd_gen_ltl)

    c = sub.add_parser("gen-monitor", help="synthesise, minimise and export a monitor")
    c.add_argument("spec")
    c.add_argument("assertion")
    c.add_argument("--format", choices=("dot", "json"), default="dot")
    c.add_argument("--max-atoms", type=int, default=DEFAULT_MAX_ATOMS)
    c.set_defaults(func=cmd_gen_monitor)

    c = sub.add_parser("monitor", help="check an event log (JSON Lines)")
    c.add_argument("spec")
    src = c.add_mutually_exclusive_group(required=True)
    src.add_argument("--log", help="offline: read a complete log file")
    src.add_argument("--stdin", action="store_true", help="online: read records from standard input")
    c.add_argument("--assertion", action="append", help="restrict to this assertion (repeatable)")
    c.add_argument("--max-atoms", type=int, default=DEFAULT_MAX_ATOMS)
    c.set_defaults(func=cmd_monitor)

    c = sub.add_parser("simulate", help="generate an architecture trace")
    c.add_argument("spec")
    c.add_argument("--config", help="JSON file with simulation settings; flags override it")
    c.add_argument("--seed", type=int)
    c.add_argument("--steps", type=int)
    c.add_argument("--max-instances", type=int)
    c.add_argument("--activation-rate", type=_probability)
    c.add_argument("--message-rate", type=_probability)
    c.add_argument("--connect-rate", type=_probability)
    c.add_argument("--episode-rate", type=_probability)
    c.add_argument("--lasso", action=argparse.BooleanOptionalAction, default=None)
    c.add_argument("--scenario", help="play out episodes of this assertion")
    c.add_argument("--erode", action="append", metavar="OP", help="erosion op, e.g. swap-order:ports=setPrice,setName")
    c.set_defaults(func=cmd_simulate)

    c = sub.add_parser("abstract", help="turn an architecture trace into an event log")
    c.add_argument("spec")
    c.add_argument("trace")
    c.set_defaults(func=cmd_abstract)

    c = sub.add_parser("eval", help="evaluate an assertion on a lasso trace for every binding")
    c.add_argument("spec")
    c.add_argument("assertion")
    c.add_argument("trace")
    c.set_defaults(func=cmd_eval)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return INPUT_ERROR if exc.code else OK
    try:
        return args.func(args)
    except _Fail as fail:
        for d in fail.diags:
            sys.stderr.write(d.format(fail.filename) + "\n")
        return INPUT_ERROR
    except ArchError as exc:
        diags = exc.diagnostics or [Diagnostic(exc.code, str(exc))]
        for d in diags:
            sys.stderr.write(d.format(getattr(args, "spec", "<input>")) + "\n")
        return INPUT_ERROR


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
