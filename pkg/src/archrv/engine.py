"""Parametric runtime verification over event logs.

Each assertion is compiled once into a monitor whose atoms still contain
assertion variables. An event matching the assertion's trigger atom creates a
monitor instance carrying a partial binding; later events may extend that
binding. At every step each live instance reads one letter: a schematic atom
holds iff some event of the step matches it under the instance's binding.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Optional, Sequence, Union

import numpy as np

from . import formula as fm
from .diagnostics import ArchError, Diagnostic
from .dsl import AssertionDecl, SpecDocument
from .events import EventSchema, generate_events
from .ltl import EventAtom, translate_assertion, translate_atom
from .model import EventRecord, canonical_literal
from .monitor import DEFAULT_MAX_ATOMS, MonitorAutomaton, Verdict, compile_monitor


class EngineError(ArchError):
    code = "ENGINE_ERROR"


@dataclass(frozen=True)
class CompiledAssertion:
    decl: AssertionDecl
    formula: fm.Formula
    trigger: EventAtom
    monitor: MonitorAutomaton

    @property
    def name(self) -> str:
        return self.decl.name


def compile_assertion(
    decl: AssertionDecl,
    spec: SpecDocument,
    schemas: Sequence[EventSchema],
    max_atoms: int = DEFAULT_MAX_ATOMS,
) -> CompiledAssertion:
    f = translate_assertion(decl, schemas, spec)
    if decl.trigger is not None:
        trigger = translate_atom(decl.trigger, decl, schemas, spec)
    else:
        trigger = next(fm.atoms(f), None)
    if trigger is None:
        raise EngineError(f"assertion {decl.name} has no atom to trigger on", "NO_TRIGGER")
    return CompiledAssertion(decl, f, trigger, compile_monitor(f, max_atoms))


def match(atom: EventAtom, rec: EventRecord, binding: dict) -> Optional[dict]:
    """Bindings for the variables of ``atom`` left open by ``binding`` under
    which ``rec`` is an occurrence of ``atom``; None if it is not one."""
    if atom.name != rec.name or len(atom.args) != len(rec.args):
        return None
    new: dict = {}
    for term, value in zip(atom.args, rec.args):
        if isinstance(term, fm.Var):
            have = binding.get(term.name, new.get(term.name))
            if have is None:
                new[term.name] = value
            elif have != value:
                return None
        elif term.text != value:
            return None
    return new


def _relevant_atoms(m: MonitorAutomaton, state: int) -> int:
    """Bitmask of the atoms whose truth can change the successor of ``state``."""
    key = ("relevant", state)
    mask = m._cache.get(key)
    if mask is None:
        table = m._cache.get("table")
        if table is None:
            table = m._cache["table"] = m.table()
        row = table[state]
        letters = np.arange(len(row))
        mask = 0
        for i in range(len(m.atoms)):
            if (row != row[letters ^ (1 << i)]).any():
                mask |= 1 << i
        m._cache[key] = mask
    return mask


@dataclass
class Instance:
    id: int
    assertion: CompiledAssertion
    binding: dict
    created_at: int
    state: int
    verdict: Verdict = Verdict.INCONCLUSIVE
    verdict_step: Optional[int] = None

    @property
    def live(self) -> bool:
        return self.verdict is Verdict.INCONCLUSIVE

    def to_json(self) -> dict:
        variables = [v for v, _ in self.assertion.decl.variables]
        order = {v: i for i, v in enumerate(variables)}
        return {
            "id": self.id,
            "assertion": self.assertion.name,
            "binding": {k: self.binding[k] for k in sorted(self.binding, key=lambda k: (order.get(k, len(order)), k))},
            "verdict": self.verdict.value,
            "createdAt": self.created_at,
            "verdictStep": self.verdict_step,
            "firstViolationStep": self.verdict_step if self.verdict is Verdict.BOTTOM else None,
        }


@dataclass
class Engine:
    assertions: Sequence[CompiledAssertion]
    schemas: Sequence[EventSchema]
    instances: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    last_step: Optional[int] = None
    truncated: bool = False

    @classmethod
    def from_spec(
        cls,
        spec: SpecDocument,
        assertions: Optional[Iterable[str]] = None,
        max_atoms: int = DEFAULT_MAX_ATOMS,
    ) -> "Engine":
        schemas = generate_events(spec.component_types)
        names = set(assertions) if assertions is not None else None
        compiled = [
            compile_assertion(a, spec, schemas, max_atoms)
            for a in spec.assertions
            if names is None or a.name in names
        ]
        return cls(compiled, schemas)

    def __post_init__(self):
        self._triggered: dict[str, set] = {}
        self._by_name: dict[str, dict[int, EventSchema]] = {}
        for s in self.schemas:
            self._by_name.setdefault(s.name, {})[s.arity] = s

    # --- validation ---------------------------------------------------------

    def check_record(self, rec: EventRecord, index: Optional[int] = None) -> Optional[EventRecord]:
        """Canonical copy of ``rec``, or None after recording a diagnostic."""
        arities = self._by_name.get(rec.name)
        if arities is None:
            self.diagnostics.append(
                Diagnostic("UNKNOWN_EVENT", f"no event schema named {rec.name}", step=rec.step, ref=_ref(index))
            )
            return None
        schema = arities.get(len(rec.args))
        if schema is None:
            want = "/".join(str(a) for a in sorted(arities))
            self.diagnostics.append(
                Diagnostic(
                    "ARITY_MISMATCH",
                    f"{rec.name} takes {want} arguments, got {len(rec.args)}",
                    step=rec.step,
                    ref=_ref(index),
                )
            )
            return None
        try:
            args = tuple(canonical_literal(p.sort, a) for p, a in zip(schema.params, rec.args))
        except ValueError as exc:
            self.diagnostics.append(Diagnostic("BAD_LITERAL", f"{rec.name}: {exc}", step=rec.step, ref=_ref(index)))
            return None
        return EventRecord(rec.step, rec.name, args)

    # --- stepping -------------------------------------------------------------

    def _advance(self, inst: Instance, events: Sequence[EventRecord], step: int) -> Optional[Instance]:
        mon = inst.assertion.monitor
        letter = 0
        for i, atom in enumerate(mon.atoms):
            if any(match(atom, e, inst.binding) is not None for e in events):
                letter |= 1 << i
        inst.state = mon.step(inst.state, letter)
        v = mon.verdicts[inst.state]
        if v is not Verdict.INCONCLUSIVE:
            inst.verdict = v
            inst.verdict_step = step
            return inst
        return None

    def ingest_step(self, step: int, events: Sequence[EventRecord]) -> list[Instance]:
        """Consume all (already validated) events of one step; returns the
        instances whose verdict became final during this call."""
        if self.last_step is not None and step <= self.last_step:
            raise EngineError(
                f"step {step} does not follow step {self.last_step}",
                "NONMONOTONIC_STEP",
                [Diagnostic("NONMONOTONIC_STEP", f"step {step} after step {self.last_step}", step=step)],
            )
        changed: list[Instance] = []
        if self.last_step is not None:
            for gap in range(self.last_step + 1, step):
                for inst in self.instances:
                    if inst.live and self._advance(inst, (), gap):
                        changed.append(inst)
        self.last_step = step

        for ca in self.assertions:
            seen = self._triggered.setdefault(ca.name, set())
            for e in events:
                b = match(ca.trigger, e, {})
                if b is None:
                    continue
                key = tuple(sorted(b.items()))
                if key in seen:
                    continue
                seen.add(key)
                inst = Instance(len(self.instances), ca, dict(b), step, ca.monitor.initial)
                self.instances.append(inst)

        for inst in self.instances:
            if inst.live:
                self._extend(inst, events, step)
        for inst in self.instances:
            if inst.live and self._advance(inst, events, step):
                changed.append(inst)
        return changed

    def _extend(self, inst: Instance, events: Sequence[EventRecord], step: int) -> None:
        mon = inst.assertion.monitor
        relevant = _relevant_atoms(mon, inst.state)
        for atom in fm.unique_atoms(inst.assertion.formula):
            if all(v in inst.binding for v in atom.variables()):
                continue
            if not relevant >> mon.atom_index()[atom] & 1:
                continue
            options = []
            for e in events:
                b = match(atom, e, inst.binding)
                if b:
                    options.append(b)
            if not options:
                continue
            if len({tuple(sorted(o.items())) for o in options}) > 1:
                self.warnings.append(
                    Diagnostic(
                        "AMBIGUOUS_BINDING",
                        f"instance {inst.id} of {inst.assertion.name}: {len(options)} candidate bindings for {atom}",
                        step=step,
                        ref=str(inst.id),
                    )
                )
            inst.binding.update(options[0])

    def finish(self, total_steps: Optional[int] = None) -> list[Instance]:
        """Feed empty letters up to ``total_steps`` (exclusive)."""
        changed: list[Instance] = []
        if total_steps is None or self.last_step is None:
            return changed
        for gap in range(self.last_step + 1, total_steps):
            for inst in self.instances:
                if inst.live and self._advance(inst, (), gap):
                    changed.append(inst)
            self.last_step = gap
        return changed

    # --- reporting --------------------------------------------------------------

    def report(self) -> dict:
        counts = {v.value: 0 for v in Verdict}
        for inst in self.instances:
            counts[inst.verdict.value] += 1
        return {
            "instances": [i.to_json() for i in self.instances],
            "summary": {"instances": len(self.instances), **counts},
            "truncated": self.truncated,
            "diagnostics": [d.to_json() for d in self.diagnostics],
            "warnings": [d.to_json() for d in self.warnings],
        }


def _ref(index: Optional[int]) -> Optional[str]:
    return None if index is None else f"record {index}"


# --- logs -------------------------------------------------------------------------


@dataclass(frozen=True)
class LogMeta:
    steps: Optional[int] = None
    loop_start: Optional[int] = None


class LogFormatError(ArchError):
    code = "BAD_LOG"


LogItem = Union[EventRecord, LogMeta]


def parse_log_line(line: str, lineno: int = 0) -> Optional[LogItem]:
    line = line.strip()
    if not line:
        return None
    try:
        doc = json.loads(line)
    except json.JSONDecodeError as exc:
        raise LogFormatError(f"line {lineno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise LogFormatError(f"line {lineno}: expected a JSON object")
    if "meta" in doc:
        meta = doc["meta"] or {}
        return LogMeta(meta.get("steps"), meta.get("loopStart"))
    step, name, args = doc.get("step"), doc.get("event"), doc.get("args", [])
    if not isinstance(step, int) or isinstance(step, bool) or step < 0:
        raise LogFormatError(f"line {lineno}: 'step' must be a nonnegative integer")
    if not isinstance(name, str) or not isinstance(args, list):
        raise LogFormatError(f"line {lineno}: 'event' must be a string and 'args' a list")
    if not all(isinstance(a, (str, int)) and not isinstance(a, bool) for a in args):
        raise LogFormatError(f"line {lineno}: arguments must be strings or integers")
    return EventRecord(step, name, tuple(str(a) for a in args))


def read_log(lines: Iterable[str]) -> Iterator[LogItem]:
    for n, line in enumerate(lines, 1):
        item = parse_log_line(line, n)
        if item is not None:
            yield item


def write_log(records: Iterable[EventRecord], meta: Optional[LogMeta] = None) -> str:
    out = []
    if meta is not None:
        out.append(json.dumps({"meta": {"steps": meta.steps, "loopStart": meta.loop_start}}))
    out += [json.dumps(r.to_json()) for r in records]
    return "".join(line + "\n" for line in out)


# --- drivers ----------------------------------------------------------------------

Sink = Callable[[dict, int], None]


def _run(engine: Engine, items: Iterable[LogItem], sink: Optional[Sink]) -> dict:
    meta: Optional[LogMeta] = None
    group: list[EventRecord] = []
    group_step: Optional[int] = None
    index = 0

    def notify(changed: list[Instance]) -> None:
        if sink is not None:
            for inst in changed:
                sink(inst.to_json(), inst.verdict_step)

    def flush() -> None:
        if group_step is not None:
            notify(engine.ingest_step(group_step, group))

    iterator = iter(items)
    while True:
        try:
            item = next(iterator)
        except StopIteration:
            break
        except OSError as exc:
            engine.truncated = True
            engine.diagnostics.append(Diagnostic("SOURCE_FAILED", f"event source failed: {exc}"))
            break
        if isinstance(item, LogMeta):
            meta = item
            continue
        rec = engine.check_record(item, index)
        index += 1
        if rec is None:
            continue
        if group_step is not None and rec.step < group_step:
            raise EngineError(
                f"record {index - 1} at step {rec.step} follows step {group_step}",
                "NONMONOTONIC_STEP",
                [Diagnostic("NONMONOTONIC_STEP", f"step {rec.step} after step {group_step}", step=rec.step, ref=_ref(index - 1))],
            )
        if rec.step != group_step:
            flush()
            group, group_step = [], rec.step
        group.append(rec)
    flush()
    if meta is not None and meta.steps is not None and not engine.truncated:
        notify(engine.finish(meta.steps))
    return engine.report()


def run_log(items: Iterable[LogItem], spec: Union[SpecDocument, Engine], **kw) -> dict:
    """Offline verification of a complete log."""
    engine = spec if isinstance(spec, Engine) else Engine.from_spec(spec, **kw)
    return _run(engine, list(items), None)


def run_stream(source: Iterable[LogItem], spec: Union[SpecDocument, Engine], sink: Optional[Sink] = None, **kw) -> dict:
    """Online verification; ``sink(instance, step)`` fires whenever an
    instance reaches TOP or BOTTOM. Records are consumed one at a time, and a
    step is processed as soon as a record of a later step arrives."""
    engine = spec if isinstance(spec, Engine) else Engine.from_spec(spec, **kw)
    return _run(engine, source, sink)


def exit_status(report: dict) -> int:
    if report["summary"]["BOTTOM"]:
        return 1
    if report["diagnostics"] or report.get("truncated"):
        return 2
    return 0


def dump_report(report: dict) -> str:
    return json.dumps(report, indent=2, ensure_ascii=False) + "\n"
