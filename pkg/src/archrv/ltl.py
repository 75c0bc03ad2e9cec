"""Rewriting architectural assertions into LTL over parameterised events."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

from . import formula as fm
from ._lex import TokenStream, unescape
from .diagnostics import ArchError
from .dsl import AssertionDecl, ComponentActive, Connected, PortActive, PortValuation, SpecDocument
from .events import ACTIVATION, CALL, CONNECTION_CALL, EXECUTION, EventSchema, event_name
from .formula import Formula, Lit, Term, Var
from .model import IN


@dataclass(frozen=True)
class EventAtom(Formula):
    name: str
    args: tuple[Term, ...] = ()

    def variables(self):
        return tuple(t.name for t in self.args if isinstance(t, Var))

    def __str__(self) -> str:
        if not self.args:
            return self.name
        return f"{self.name}({','.join(str(a) for a in self.args)})"

    def bind(self, binding: Mapping[str, str]) -> "EventAtom":
        return EventAtom(
            self.name,
            tuple(Lit(binding[t.name]) if isinstance(t, Var) and t.name in binding else t for t in self.args),
        )


# Lit equality includes the ``integer`` printing flag; keys for matching
# against event arguments use the text only.
def arg_key(t: Term) -> tuple[str, str]:
    return ("var", t.name) if isinstance(t, Var) else ("lit", t.text)


class AtomUnresolved(ArchError):
    code = "ATOM_UNRESOLVED"


def translate_assertion(a: AssertionDecl, schemas: Iterable[EventSchema], spec: SpecDocument) -> Formula:
    """Replace every architecture atom of ``a.body`` by its event atom.

    Port activity becomes the payload-free execution (input) or call
    (output) event, a port valuation the payload variant, component
    activity the activation event, and a connection the connection-call
    event of the receiving component.
    """
    return fm.map_atoms(a.body, lambda atom: translate_atom(atom, a, schemas, spec))


def translate_atom(atom: Formula, a: AssertionDecl, schemas: Iterable[EventSchema], spec: SpecDocument) -> EventAtom:
    index = {s.key: s for s in schemas}

    def ctype(var: str):
        sort = a.sort_of(var)
        ct = spec.component_type(sort) if sort else None
        if ct is None:
            raise AtomUnresolved(f"{a.name}: variable {var} is not a component")
        return ct

    def resolve(name: str, args: tuple) -> EventAtom:
        if (name, len(args)) not in index:
            raise AtomUnresolved(f"{a.name}: no event schema {name}/{len(args)} for atom {atom}")
        return EventAtom(name, args)

    if isinstance(atom, ComponentActive):
        ct = ctype(atom.comp)
        return resolve(event_name(ct.name, None, ACTIVATION), (Var(atom.comp),))
    if isinstance(atom, (PortActive, PortValuation)):
        ct = ctype(atom.comp)
        port = ct.port(atom.port)
        if port is None:
            raise AtomUnresolved(f"{a.name}: {ct.name} has no port {atom.port}")
        kind = EXECUTION if port.direction == IN else CALL
        args: tuple = (Var(atom.comp),)
        if isinstance(atom, PortValuation):
            args += atom.terms
        return resolve(event_name(ct.name, port.name, kind), args)
    if isinstance(atom, Connected):
        receiver = ctype(atom.dst)
        sender = ctype(atom.src)
        if atom.src_port != atom.dst_port:
            raise AtomUnresolved(f"{a.name}: {atom} joins differently named ports")
        name = event_name(receiver.name, atom.dst_port, CONNECTION_CALL, sender.name)
        return resolve(name, (Var(atom.dst), Var(atom.src)))
    if isinstance(atom, EventAtom):
        return atom
    raise AtomUnresolved(f"{a.name}: cannot translate atom {atom!r}")


def print_ltl(f: Formula) -> str:
    return fm.render(f, str)


class _LtlParser:
    def __init__(self, text: str):
        self.ts = TokenStream(text)

    def formula(self) -> Formula:
        left = self.disj()
        if self.ts.at("->"):
            self.ts.advance()
            return fm.Implies(left, self.formula())
        return left

    def disj(self) -> Formula:
        out = self.conj()
        while self.ts.at("|"):
            self.ts.advance()
            out = fm.Or(out, self.conj())
        return out

    def conj(self) -> Formula:
        out = self.until()
        while self.ts.at("&"):
            self.ts.advance()
            out = fm.And(out, self.until())
        return out

    def until(self) -> Formula:
        left = self.unary()
        if self.ts.at("U", "W"):
            op = fm.Until if self.ts.advance().text == "U" else fm.WeakUntil
            return op(left, self.until())
        return left

    def unary(self) -> Formula:
        ops = {"G": fm.Globally, "F": fm.Eventually, "X": fm.Next, "!": fm.Not}
        tok = self.ts.tok
        if self.ts.at(*ops):
            self.ts.advance()
            return ops[tok.text](self.unary())
        if self.ts.at("true", "false"):
            return fm.Const(self.ts.advance().text == "true")
        if self.ts.at("("):
            self.ts.advance()
            inner = self.formula()
            self.ts.expect(")")
            return inner
        if tok.kind != "ident" or tok.text in ("U", "W"):
            raise self.ts.error(["atom", "'('", "'!'", "'G'", "'F'", "'X'", "'true'", "'false'"])
        name = self.ts.advance().text
        args: list[Term] = []
        if self.ts.at("("):
            self.ts.advance()
            while True:
                t = self.ts.tok
                if t.kind == "int":
                    args.append(Lit(str(int(self.ts.advance().text)), True))
                elif t.kind == "str":
                    args.append(Lit(unescape(self.ts.advance().text[1:-1])))
                elif t.kind == "ident":
                    args.append(Var(self.ts.advance().text))
                else:
                    raise self.ts.error(["argument"])
                if not self.ts.at(","):
                    break
                self.ts.advance()
            self.ts.expect(")")
        return EventAtom(name, tuple(args))


def parse_ltl(text: str) -> Formula:
    """Parse the canonical LTL text produced by :func:`print_ltl`."""
    p = _LtlParser(text)
    f = p.formula()
    if p.ts.tok.kind != "eof":
        raise p.ts.error(["end of input"])
    return f
