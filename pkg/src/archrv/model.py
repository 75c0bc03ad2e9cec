"""Ports, interfaces, components, architecture snapshots and traces.

A snapshot is the triple of active components, the connection from input
component ports to sets of output component ports, and the valuation of
component ports with sets of messages. A message is a tuple of typed values,
one per sort in the port signature.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable, Mapping, Optional

from .diagnostics import ArchError, Diagnostic

if TYPE_CHECKING:  # pragma: no cover
    from .dsl import SpecDocument

BUILTIN_SORTS = ("String", "Integer", "Boolean")

IN = "in"
OUT = "out"


def canonical_literal(sort: str, text) -> str:
    """Normalise a literal for comparison: integers without leading zeros,
    booleans lower-case, everything else NFC-normalised text."""
    if sort == "Integer":
        return str(int(str(text).strip()))
    if sort == "Boolean":
        low = str(text).strip().lower()
        if low not in ("true", "false"):
            raise ValueError(f"not a Boolean literal: {text!r}")
        return low
    if isinstance(text, bool):
        text = "true" if text else "false"
    return unicodedata.normalize("NFC", str(text))


def first_lower(name: str) -> str:
    return name[:1].lower() + name[1:]


@dataclass(frozen=True)
class PortDecl:
    name: str
    direction: str  # IN or OUT
    signature: tuple[str, ...]


@dataclass(frozen=True)
class ComponentType:
    name: str
    ports: tuple[PortDecl, ...] = ()

    def port(self, name: str) -> Optional[PortDecl]:
        for p in self.ports:
            if p.name == name:
                return p
        return None

    @property
    def inputs(self) -> tuple[PortDecl, ...]:
        return tuple(p for p in self.ports if p.direction == IN)

    @property
    def outputs(self) -> tuple[PortDecl, ...]:
        return tuple(p for p in self.ports if p.direction == OUT)


@dataclass(frozen=True, order=True)
class ComponentId:
    type: str
    id: str


@dataclass(frozen=True, order=True)
class PortRef:
    """A component port, addressed by instance id."""

    component: str
    port: str

    def __str__(self) -> str:
        return f"({self.component},{self.port})"


Value = tuple  # (sort, canonical literal)
Message = tuple  # tuple of Value


@dataclass(frozen=True)
class ArchSnapshot:
    active: frozenset = frozenset()
    connections: Mapping[PortRef, frozenset] = field(default_factory=dict)
    valuations: Mapping[PortRef, frozenset] = field(default_factory=dict)

    def component(self, instance: str) -> Optional[ComponentId]:
        for c in self.active:
            if c.id == instance:
                return c
        return None

    def value_of(self, ref: PortRef) -> frozenset:
        return self.valuations.get(ref, frozenset())

    def connected(self, ref: PortRef) -> frozenset:
        return self.connections.get(ref, frozenset())

    def normalized(self) -> "ArchSnapshot":
        """Drop empty connection and valuation entries."""
        return ArchSnapshot(
            frozenset(self.active),
            {k: frozenset(v) for k, v in self.connections.items() if v},
            {k: frozenset(v) for k, v in self.valuations.items() if v},
        )


@dataclass(frozen=True)
class ArchTrace:
    steps: tuple[ArchSnapshot, ...] = ()
    loop_start: Optional[int] = None

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def is_lasso(self) -> bool:
        return self.loop_start is not None

    def unrolled(self, k: int) -> "ArchTrace":
        """Prefix followed by ``k`` extra copies of the loop segment; the
        result keeps the loop on its last copy."""
        if self.loop_start is None:
            return self
        loop = self.steps[self.loop_start :]
        steps = self.steps + loop * k
        return ArchTrace(steps, self.loop_start + k * len(loop))


class SchemaMiss(ArchError):
    code = "SCHEMA_MISS"


def _types(spec: "SpecDocument") -> dict[str, ComponentType]:
    return {ct.name: ct for ct in spec.component_types}


def _check_message(msg, signature) -> Optional[str]:
    if not isinstance(msg, tuple) or len(msg) != len(signature):
        return f"message {msg!r} has arity {len(msg) if isinstance(msg, tuple) else '?'}, port expects {len(signature)}"
    for (sort, lit), want in zip(msg, signature):
        if sort != want:
            return f"value {lit!r} of sort {sort} where {want} is expected"
        try:
            if canonical_literal(sort, lit) != lit:
                return f"literal {lit!r} is not canonical for sort {sort}"
        except ValueError:
            return f"literal {lit!r} is not a valid {sort}"
    return None


def validate_snapshot(snapshot: ArchSnapshot, spec: "SpecDocument") -> list[Diagnostic]:
    """Check well-formedness: declared ports, active endpoints, connection
    type compatibility and valuation consistency. Returns diagnostics sorted
    so the result does not depend on container iteration order."""
    types = _types(spec)
    diags: list[Diagnostic] = []
    by_id: dict[str, ComponentId] = {}
    for c in sorted(snapshot.active):
        if c.type not in types:
            diags.append(Diagnostic("UNKNOWN_TYPE", f"component {c.id} has undeclared type {c.type}", ref=c.id))
        if c.id in by_id:
            diags.append(Diagnostic("DUPLICATE_ID", f"instance id {c.id} used twice", ref=c.id))
        by_id[c.id] = c

    def resolve(ref: PortRef, direction: Optional[str] = None) -> Optional[PortDecl]:
        comp = by_id.get(ref.component)
        if comp is None:
            diags.append(Diagnostic("INACTIVE_ENDPOINT", f"{ref} belongs to no active component", ref=str(ref)))
            return None
        ct = types.get(comp.type)
        if ct is None:
            return None
        port = ct.port(ref.port)
        if port is None:
            diags.append(Diagnostic("PORT_NOT_DECLARED", f"{comp.type} declares no port {ref.port}", ref=str(ref)))
            return None
        if direction is not None and port.direction != direction:
            want = "an input" if direction == IN else "an output"
            diags.append(Diagnostic("CONNECTION_DIRECTION", f"{ref} is not {want} port", ref=str(ref)))
            return None
        return port

    for ci in sorted(snapshot.connections):
        targets = snapshot.connections[ci]
        pin = resolve(ci, IN)
        for co in sorted(targets):
            pout = resolve(co, OUT)
            if pin is not None and pout is not None and pout.signature != pin.signature:
                diags.append(
                    Diagnostic(
                        "TYPE_MISMATCH",
                        f"{co} carries ({', '.join(pout.signature)}) but {ci} accepts ({', '.join(pin.signature)})",
                        ref=str(ci),
                    )
                )

    for ref in sorted(snapshot.valuations):
        port = resolve(ref)
        if port is None:
            continue
        for msg in sorted(snapshot.valuations[ref], key=repr):
            problem = _check_message(msg, port.signature)
            if problem:
                diags.append(Diagnostic("TYPE_MISMATCH", f"{ref}: {problem}", ref=str(ref)))

    for ci in sorted(snapshot.connections):
        targets = snapshot.connections[ci]
        if not targets:
            continue
        union: set = set()
        for co in targets:
            union |= snapshot.value_of(co)
        if snapshot.value_of(ci) != union:
            diags.append(
                Diagnostic(
                    "VALUATION_INCONSISTENT",
                    f"{ci} is not valuated with the union of its connected outputs",
                    ref=str(ci),
                )
            )
    return sorted(set(diags), key=lambda d: (d.ref or "", d.code, d.message))


def validate_trace(trace: ArchTrace, spec: "SpecDocument") -> list[Diagnostic]:
    diags = []
    if trace.loop_start is not None and not 0 <= trace.loop_start < len(trace.steps):
        diags.append(Diagnostic("LOOP_OUT_OF_RANGE", f"loopStart {trace.loop_start} outside 0..{len(trace.steps) - 1}"))
    seen: dict[str, str] = {}
    for i, snap in enumerate(trace.steps):
        for d in validate_snapshot(snap, spec):
            diags.append(Diagnostic(d.code, d.message, step=i, ref=d.ref))
        for c in sorted(snap.active):
            if seen.setdefault(c.id, c.type) != c.type:
                diags.append(Diagnostic("TYPE_CHANGED", f"instance {c.id} changes type to {c.type}", step=i, ref=c.id))
    return diags


# --- event abstraction -----------------------------------------------------


@dataclass(frozen=True)
class EventRecord:
    step: int
    name: str
    args: tuple[str, ...] = ()

    def to_json(self) -> dict:
        return {"step": self.step, "event": self.name, "args": list(self.args)}


@dataclass(frozen=True)
class EventTrace:
    steps: tuple[tuple[EventRecord, ...], ...] = ()
    loop_start: Optional[int] = None

    def records(self) -> list[EventRecord]:
        return [r for step in self.steps for r in step]

    def unrolled(self, k: int) -> "EventTrace":
        """Repeat the loop segment ``k`` more times, renumbering steps."""
        if self.loop_start is None:
            return self
        loop = self.steps[self.loop_start :]
        steps = list(self.steps)
        for _ in range(k):
            for recs in loop:
                i = len(steps)
                steps.append(tuple(EventRecord(i, r.name, r.args) for r in recs))
        return EventTrace(tuple(steps), self.loop_start + k * len(loop))


def abstract_trace(trace: ArchTrace, spec: "SpecDocument", schemas: Optional[Iterable] = None) -> EventTrace:
    """Map each snapshot to the events an instrumented system would emit.

    Activation events fire for components that become active at a step
    (everything active at step 0 counts). Execution and call events fire for
    input and output ports with a nonempty valuation, once without payload
    and once per message with payload. A connection-call event fires for an
    input port of ``c`` connected to a same-named output port of ``c'``
    whenever the input carries messages.
    """
    from .events import event_name, generate_events

    types = _types(spec)
    if schemas is None:
        schemas = generate_events(spec.component_types)
    index = {(s.name, len(s.params)) for s in schemas}

    def emit(out: list, step: int, name: str, args: tuple) -> None:
        if (name, len(args)) not in index:
            raise SchemaMiss(f"no schema for event {name}/{len(args)} at step {step}")
        out.append(EventRecord(step, name, args))

    result = []
    prev: frozenset = frozenset()
    for i, snap in enumerate(trace.steps):
        out: list[EventRecord] = []
        comps = sorted(snap.active)
        for c in comps:
            if c not in prev:
                emit(out, i, event_name(c.type, None, "activation"), (c.id,))
        for c in comps:
            ct = types[c.type]
            for port in ct.ports:
                ref = PortRef(c.id, port.name)
                msgs = snap.value_of(ref)
                if not msgs:
                    continue
                kind = "execution" if port.direction == IN else "call"
                name = event_name(c.type, port.name, kind)
                emit(out, i, name, (c.id,))
                for msg in sorted(msgs):
                    emit(out, i, name, (c.id, *(lit for _, lit in msg)))
        for c in comps:
            ct = types[c.type]
            for port in ct.inputs:
                ref = PortRef(c.id, port.name)
                if not snap.value_of(ref):
                    continue
                for co in sorted(snap.connected(ref)):
                    if co.port != port.name:
                        continue
                    peer = snap.component(co.component)
                    if peer is None:
                        continue
                    name = event_name(c.type, port.name, "connection-call", peer.type)
                    emit(out, i, name, (c.id, peer.id))
        result.append(tuple(out))
        prev = snap.active
    return EventTrace(tuple(result), trace.loop_start)


# --- JSON --------------------------------------------------------------------


def _ref_json(ref: PortRef) -> dict:
    return {"id": ref.component, "port": ref.port}


def snapshot_to_json(snap: ArchSnapshot) -> dict:
    return {
        "active": [{"type": c.type, "id": c.id} for c in sorted(snap.active)],
        "connections": [
            {"from": _ref_json(ci), "to": [_ref_json(co) for co in sorted(snap.connections[ci])]}
            for ci in sorted(snap.connections)
            if snap.connections[ci]
        ],
        "valuations": [
            {
                "id": ref.component,
                "port": ref.port,
                "values": [[x for value in msg for x in value] for msg in sorted(snap.valuations[ref])],
            }
            for ref in sorted(snap.valuations)
            if snap.valuations[ref]
        ],
    }


def trace_to_json(trace: ArchTrace) -> dict:
    return {"steps": [snapshot_to_json(s) for s in trace.steps], "loopStart": trace.loop_start}


class TraceFormatError(ArchError):
    code = "BAD_TRACE"


def _message(raw) -> Message:
    if not isinstance(raw, list) or len(raw) % 2 or not raw:
        raise TraceFormatError(f"message must be a nonempty flat list of sort/literal pairs: {raw!r}")
    values = []
    for k in range(0, len(raw), 2):
        sort, lit = raw[k], raw[k + 1]
        if not isinstance(sort, str):
            raise TraceFormatError(f"sort must be a string: {sort!r}")
        try:
            lit = canonical_literal(sort, lit)
        except ValueError:
            lit = str(lit)  # kept verbatim; validate_snapshot reports it
        values.append((sort, lit))
    return tuple(values)


def snapshot_from_json(doc: dict) -> ArchSnapshot:
    try:
        active = frozenset(ComponentId(str(c["type"]), str(c["id"])) for c in doc.get("active", []))
        conns: dict[PortRef, set] = {}
        for entry in doc.get("connections", []):
            ci = PortRef(str(entry["from"]["id"]), str(entry["from"]["port"]))
            conns.setdefault(ci, set()).update(PortRef(str(t["id"]), str(t["port"])) for t in entry.get("to", []))
        vals: dict[PortRef, set] = {}
        for entry in doc.get("valuations", []):
            ref = PortRef(str(entry["id"]), str(entry["port"]))
            vals.setdefault(ref, set()).update(_message(m) for m in entry.get("values", []))
    except (KeyError, TypeError, AttributeError) as exc:
        raise TraceFormatError(f"malformed snapshot: {exc}") from exc
    return ArchSnapshot(active, {k: frozenset(v) for k, v in conns.items()}, {k: frozenset(v) for k, v in vals.items()})


def trace_from_json(doc: dict) -> ArchTrace:
    if not isinstance(doc, dict) or not isinstance(doc.get("steps", []), list):
        raise TraceFormatError("trace document must be an object with a 'steps' list")
    loop = doc.get("loopStart")
    if loop is not None and not isinstance(loop, int):
        raise TraceFormatError("loopStart must be an integer or null")
    return ArchTrace(tuple(snapshot_from_json(s) for s in doc.get("steps", [])), loop)
