"""Monitorable event vocabulary derived from component types."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

from .diagnostics import ArchError
from .model import IN, ComponentType, first_lower

ACTIVATION = "activation"
EXECUTION = "execution"
CALL = "call"
CONNECTION_CALL = "connection-call"


@dataclass(frozen=True, order=True)
class EventParam:
    role: str  # self | payload | peer
    sort: str


@dataclass(frozen=True, order=True)
class EventSchema:
    name: str
    kind: str
    params: tuple[EventParam, ...]
    component_type: str = ""
    port: Optional[str] = None
    peer_type: Optional[str] = None

    @property
    def arity(self) -> int:
        return len(self.params)

    @property
    def key(self) -> tuple[str, int]:
        return (self.name, len(self.params))

    def signature(self) -> str:
        return f"{self.name}({', '.join(p.sort for p in self.params)})"


class NameCollision(ArchError):
    code = "NAME_COLLISION"


def event_name(ctype: str, port: Optional[str], kind: str, peer_type: Optional[str] = None) -> str:
    ct = first_lower(ctype)
    if kind == ACTIVATION:
        return f"{ct}_activation"
    if kind == CONNECTION_CALL:
        return f"{ct}_call_{first_lower(peer_type)}_{port}"
    suffix = "execution" if kind == EXECUTION else "call"
    return f"{ct}_{port}_{suffix}"


def generate_events(types: Iterable[ComponentType]) -> tuple[EventSchema, ...]:
    """All event schemas for ``types``, sorted by (name, arity).

    Raises NameCollision if two distinct schemas end up with the same name
    and arity, which can only happen when type names differ solely in the
    case of their first letter.
    """
    types = list(types)
    out: dict[tuple[str, int], EventSchema] = {}

    def add(schema: EventSchema) -> None:
        prev = out.get(schema.key)
        if prev is not None and prev != schema:
            raise NameCollision(f"event name {schema.name}/{schema.arity} produced twice")
        out[schema.key] = schema

    for ct in types:
        me = EventParam("self", ct.name)
        add(EventSchema(event_name(ct.name, None, ACTIVATION), ACTIVATION, (me,), ct.name))
        for p in ct.ports:
            kind = EXECUTION if p.direction == IN else CALL
            name = event_name(ct.name, p.name, kind)
            payload = tuple(EventParam("payload", s) for s in p.signature)
            add(EventSchema(name, kind, (me,), ct.name, p.name))
            add(EventSchema(name, kind, (me, *payload), ct.name, p.name))
            if p.direction != IN:
                continue
            for other in types:
                if other.name == ct.name or other.port(p.name) is None:
                    continue
                name = event_name(ct.name, p.name, CONNECTION_CALL, other.name)
                add(
                    EventSchema(
                        name, CONNECTION_CALL, (me, EventParam("peer", other.name)), ct.name, p.name, other.name
                    )
                )
    return tuple(sorted(out.values(), key=lambda s: s.key))


def schema_index(schemas: Iterable[EventSchema]) -> dict[tuple[str, int], EventSchema]:
    return {s.key: s for s in schemas}


def _joinpoint(s: EventSchema) -> str:
    if s.kind == ACTIVATION:
        return f"on constructor completion of {s.component_type}"
    if s.kind == CONNECTION_CALL:
        where = f"entry of {s.component_type}.{s.port} invoked from {s.peer_type}"
        return f"{where}, capture (self, caller)"
    captured = ["self"] + [f"arg{i}" for i in range(len(s.params) - 1)]
    if s.kind == EXECUTION:
        where = f"entry of {s.component_type}.{s.port}"
    else:
        where = f"before outgoing invocation of {s.port} from {s.component_type}"
    return f"{where}, capture ({', '.join(captured)})"


def generate_instrumentation_manifest(schemas: Iterable[EventSchema]) -> dict:
    return {
        "events": [
            {
                "name": s.name,
                "kind": s.kind,
                "joinpoint": _joinpoint(s),
                "params": [{"role": p.role, "sort": p.sort} for p in s.params],
            }
            for s in sorted(schemas, key=lambda s: s.key)
        ]
    }


def schemas_to_json(schemas: Iterable[EventSchema]) -> list[dict]:
    return [
        {
            "name": s.name,
            "kind": s.kind,
            "params": [{"role": p.role, "sort": p.sort} for p in s.params],
        }
        for s in sorted(schemas, key=lambda s: s.key)
    ]


def parse_event_name(name: str, type_names: Iterable[str], port_names: Iterable[str]) -> tuple[str, Optional[str], str, Optional[str]]:
    """Split an event name back into (type, port, kind, peer type)."""
    lowered = {first_lower(t): t for t in type_names}
    ports = set(port_names)
    for low, tname in lowered.items():
        if name == f"{low}_activation":
            return tname, None, ACTIVATION, None
        if not name.startswith(low + "_"):
            continue
        rest = name[len(low) + 1 :]
        for suffix, kind in (("_execution", EXECUTION), ("_call", CALL)):
            if rest.endswith(suffix) and rest[: -len(suffix)] in ports:
                return tname, rest[: -len(suffix)], kind, None
        if rest.startswith("call_"):
            tail = rest[len("call_") :]
            for plow, peer in lowered.items():
                if tail.startswith(plow + "_") and tail[len(plow) + 1 :] in ports:
                    return tname, tail[len(plow) + 1 :], CONNECTION_CALL, peer
    raise ValueError(f"cannot decompose event name {name!r}")
