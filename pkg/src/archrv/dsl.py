"""Textual architecture specifications: parser, typechecker, printer.

Grammar::

    spec       := decl*
    decl       := "sort" NAME ";"
                | "component" NAME "{" port* "}"
                | "assertion" NAME ["vars" var ("," var)*] ["trigger" atom] "{" formula "}"
    port       := ("in" | "out") NAME "(" NAME ("," NAME)* ")" ";"
    var        := NAME ":" NAME
    formula    := or ["->" formula]
    or         := and ("|" and)*
    and        := until ("&" until)*
    until      := unary [("U" | "W") until]
    unary      := ("G" | "F" | "X" | "!") unary | primary
    primary    := "true" | "false" | "(" formula ")" | atom
    atom       := "val" "(" NAME "." NAME ")"
                | "active" "(" NAME ")"
                | "conn" "(" NAME "." NAME "->" NAME "." NAME ")"
                | NAME "." NAME "=" (term | "(" term ("," term)* ")")
    term       := NAME | INT | STRING
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from . import formula as fm
from ._lex import SyntaxErrorDiag, TokenStream, unescape
from .diagnostics import Diagnostic
from .formula import Formula, Lit, Term, Var
from .model import BUILTIN_SORTS, IN, OUT, ComponentType, PortDecl, canonical_literal

KEYWORDS = {
    "sort", "component", "assertion", "vars", "trigger", "in", "out",
    "G", "F", "X", "U", "W", "true", "false", "val", "active", "conn",
}  # fmt: skip
PAST_OPERATORS = {"Y", "Z", "H", "O", "S"}


def _term_str(t: Term) -> str:
    return str(t)


@dataclass(frozen=True)
class PortActive(Formula):
    comp: str
    port: str
    pos: Optional[tuple] = field(default=None, compare=False, repr=False)

    def variables(self):
        return (self.comp,)

    def __str__(self) -> str:
        return f"val({self.comp}.{self.port})"


@dataclass(frozen=True)
class PortValuation(Formula):
    comp: str
    port: str
    terms: tuple[Term, ...]
    pos: Optional[tuple] = field(default=None, compare=False, repr=False)

    def variables(self):
        return (self.comp, *(t.name for t in self.terms if isinstance(t, Var)))

    def __str__(self) -> str:
        return f"{self.comp}.{self.port} = ({', '.join(map(_term_str, self.terms))})"


@dataclass(frozen=True)
class ComponentActive(Formula):
    comp: str
    pos: Optional[tuple] = field(default=None, compare=False, repr=False)

    def variables(self):
        return (self.comp,)

    def __str__(self) -> str:
        return f"active({self.comp})"


@dataclass(frozen=True)
class Connected(Formula):
    """Output port ``src_port`` of ``src`` is connected to input ``dst_port`` of ``dst``."""

    src: str
    src_port: str
    dst: str
    dst_port: str
    pos: Optional[tuple] = field(default=None, compare=False, repr=False)

    def variables(self):
        return (self.src, self.dst)

    def __str__(self) -> str:
        return f"conn({self.src}.{self.src_port} -> {self.dst}.{self.dst_port})"


@dataclass(frozen=True)
class AssertionDecl:
    name: str
    variables: tuple[tuple[str, str], ...]
    body: Formula
    trigger: Optional[Formula] = None
    pos: Optional[tuple] = field(default=None, compare=False, repr=False)

    def sort_of(self, var: str) -> Optional[str]:
        for name, sort in self.variables:
            if name == var:
                return sort
        return None


@dataclass(frozen=True)
class SpecDocument:
    sorts: tuple[str, ...] = ()
    component_types: tuple[ComponentType, ...] = ()
    assertions: tuple[AssertionDecl, ...] = ()

    def component_type(self, name: str) -> Optional[ComponentType]:
        for ct in self.component_types:
            if ct.name == name:
                return ct
        return None

    def assertion(self, name: str) -> Optional[AssertionDecl]:
        for a in self.assertions:
            if a.name == name:
                return a
        return None

    def known_sorts(self) -> set[str]:
        return set(BUILTIN_SORTS) | set(self.sorts) | {ct.name for ct in self.component_types}


SpecSyntaxError = SyntaxErrorDiag


# --- parser ------------------------------------------------------------------


class _Parser:
    def __init__(self, text: str):
        self.ts = TokenStream(text)

    def name(self, what: str = "identifier") -> str:
        tok = self.ts.tok
        if tok.kind != "ident":
            raise self.ts.error([what])
        if tok.text in PAST_OPERATORS:
            raise self.ts.error([what], "PAST_OPERATOR")
        if tok.text in KEYWORDS:
            raise self.ts.error([what])
        return self.ts.advance().text

    def spec(self) -> SpecDocument:
        sorts, comps, asserts = [], [], []
        while self.ts.tok.kind != "eof":
            if self.ts.at("sort"):
                self.ts.advance()
                sorts.append(self.name("sort name"))
                self.ts.expect(";")
            elif self.ts.at("component"):
                comps.append(self.component())
            elif self.ts.at("assertion"):
                asserts.append(self.assertion())
            else:
                raise self.ts.error(["'sort'", "'component'", "'assertion'", "end of input"])
        return SpecDocument(tuple(sorts), tuple(comps), tuple(asserts))

    def component(self) -> ComponentType:
        self.ts.expect("component")
        name = self.name("component name")
        self.ts.expect("{")
        ports = []
        while not self.ts.at("}"):
            if not self.ts.at("in", "out"):
                raise self.ts.error(["'in'", "'out'", "'}'"])
            direction = IN if self.ts.advance().text == "in" else OUT
            pname = self.name("port name")
            self.ts.expect("(")
            sig = [self.name("sort name")]
            while self.ts.at(","):
                self.ts.advance()
                sig.append(self.name("sort name"))
            self.ts.expect(")")
            self.ts.expect(";")
            ports.append(PortDecl(pname, direction, tuple(sig)))
        self.ts.expect("}")
        return ComponentType(name, tuple(ports))

    def assertion(self) -> AssertionDecl:
        start = self.ts.expect("assertion")
        name = self.name("assertion name")
        variables = []
        if self.ts.at("vars"):
            self.ts.advance()
            while True:
                v = self.name("variable name")
                self.ts.expect(":")
                variables.append((v, self.name("sort name")))
                if not self.ts.at(","):
                    break
                self.ts.advance()
        trigger = None
        if self.ts.at("trigger"):
            self.ts.advance()
            trigger = self.atom()
        self.ts.expect("{")
        body = self.formula()
        self.ts.expect("}")
        return AssertionDecl(name, tuple(variables), body, trigger, (start.line, start.col))

    # formulas, lowest precedence first
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
        tok = self.ts.tok
        if tok.kind == "ident" and tok.text in PAST_OPERATORS:
            raise self.ts.error(["future-time formula"], "PAST_OPERATOR")
        ops = {"G": fm.Globally, "F": fm.Eventually, "X": fm.Next, "!": fm.Not}
        if self.ts.at(*ops):
            self.ts.advance()
            return ops[tok.text](self.unary())
        return self.primary()

    def primary(self) -> Formula:
        if self.ts.at("true", "false"):
            return fm.Const(self.ts.advance().text == "true")
        if self.ts.at("("):
            self.ts.advance()
            inner = self.formula()
            self.ts.expect(")")
            return inner
        return self.atom()

    def atom(self) -> Formula:
        tok = self.ts.tok
        pos = (tok.line, tok.col)
        if self.ts.at("val"):
            self.ts.advance()
            self.ts.expect("(")
            c = self.name("component variable")
            self.ts.expect(".")
            p = self.name("port name")
            self.ts.expect(")")
            return PortActive(c, p, pos)
        if self.ts.at("active"):
            self.ts.advance()
            self.ts.expect("(")
            c = self.name("component variable")
            self.ts.expect(")")
            return ComponentActive(c, pos)
        if self.ts.at("conn"):
            self.ts.advance()
            self.ts.expect("(")
            src = self.name("component variable")
            self.ts.expect(".")
            sp = self.name("port name")
            self.ts.expect("->")
            dst = self.name("component variable")
            self.ts.expect(".")
            dp = self.name("port name")
            self.ts.expect(")")
            return Connected(src, sp, dst, dp, pos)
        if tok.kind == "ident" and tok.text not in KEYWORDS and tok.text not in PAST_OPERATORS:
            c = self.name()
            self.ts.expect(".")
            p = self.name("port name")
            self.ts.expect("=")
            if self.ts.at("("):
                self.ts.advance()
                terms = [self.term()]
                while self.ts.at(","):
                    self.ts.advance()
                    terms.append(self.term())
                self.ts.expect(")")
            else:
                terms = [self.term()]
            return PortValuation(c, p, tuple(terms), pos)
        raise self.ts.error(["'val'", "'active'", "'conn'", "'true'", "'false'", "'('", "'G'", "'F'", "'X'", "'!'", "component variable"])

    def term(self) -> Term:
        tok = self.ts.tok
        if tok.kind == "int":
            self.ts.advance()
            return Lit(str(int(tok.text)), True)
        if tok.kind == "str":
            self.ts.advance()
            return Lit(unescape(tok.text[1:-1]))
        if self.ts.at("true", "false"):
            return Lit(self.ts.advance().text)
        return Var(self.name("term"))


def parse_spec(text: str) -> SpecDocument:
    """Parse specification text; raises SpecSyntaxError with a positioned
    diagnostic on malformed input."""
    return _Parser(text).spec()


def parse_formula(text: str) -> Formula:
    p = _Parser(text)
    f = p.formula()
    if p.ts.tok.kind != "eof":
        raise p.ts.error(["end of input"])
    return f


# --- typechecker -------------------------------------------------------------


def typecheck_spec(doc: SpecDocument) -> list[Diagnostic]:
    diags: list[Diagnostic] = []
    known = doc.known_sorts()
    types = {ct.name: ct for ct in doc.component_types}

    def dup(kind: str, names) -> None:
        seen = set()
        for n in names:
            if n in seen:
                diags.append(Diagnostic("DUP_NAME", f"duplicate {kind} name {n}"))
            seen.add(n)

    dup("sort", list(doc.sorts) + [ct.name for ct in doc.component_types])
    dup("assertion", [a.name for a in doc.assertions])
    for ct in doc.component_types:
        seen: set[str] = set()
        for p in ct.ports:
            if p.name in seen:
                diags.append(Diagnostic("DUP_PORT", f"{ct.name} declares port {p.name} more than once"))
            seen.add(p.name)
            if not p.signature:
                diags.append(Diagnostic("ARITY_MISMATCH", f"port {ct.name}.{p.name} has an empty signature"))
            for s in p.signature:
                if s not in known:
                    diags.append(Diagnostic("UNKNOWN_SORT", f"port {ct.name}.{p.name} uses undeclared sort {s}"))

    for a in doc.assertions:
        diags.extend(_check_assertion(a, known, types))
    return diags


def _check_assertion(a: AssertionDecl, known: set, types: dict) -> list[Diagnostic]:
    diags: list[Diagnostic] = []
    env: dict[str, str] = {}
    for v, s in a.variables:
        if v in env:
            diags.append(Diagnostic("DUP_NAME", f"{a.name}: variable {v} declared twice", *(a.pos or (None, None))))
        if s not in known:
            diags.append(Diagnostic("UNKNOWN_SORT", f"{a.name}: variable {v} has undeclared sort {s}", *(a.pos or (None, None))))
        env[v] = s

    def report(atom, code: str, msg: str) -> None:
        line, col = atom.pos or a.pos or (None, None)
        diags.append(Diagnostic(code, f"{a.name}: {msg}", line, col))

    def component(atom, var: str) -> Optional[ComponentType]:
        if var not in env:
            report(atom, "UNDECLARED_VAR", f"undeclared variable {var}")
            return None
        ct = types.get(env[var])
        if ct is None:
            report(atom, "SORT_MISMATCH", f"variable {var} of sort {env[var]} is not a component")
        return ct

    def port(atom, ct: ComponentType, var: str, name: str):
        p = ct.port(name)
        if p is None:
            report(atom, "PORT_NOT_DECLARED", f"{ct.name} (variable {var}) has no port {name}")
        return p

    atoms = list(fm.atoms(a.body))
    if a.trigger is not None:
        atoms.append(a.trigger)
    for atom in atoms:
        if isinstance(atom, ComponentActive):
            component(atom, atom.comp)
        elif isinstance(atom, PortActive):
            ct = component(atom, atom.comp)
            if ct is not None:
                port(atom, ct, atom.comp, atom.port)
        elif isinstance(atom, PortValuation):
            ct = component(atom, atom.comp)
            undeclared = [t.name for t in atom.terms if isinstance(t, Var) and t.name not in env]
            for name in undeclared:
                report(atom, "UNDECLARED_VAR", f"undeclared variable {name}")
            if ct is None:
                continue
            p = port(atom, ct, atom.comp, atom.port)
            if p is None:
                continue
            if len(atom.terms) != len(p.signature):
                report(atom, "ARITY_MISMATCH", f"{ct.name}.{p.name} carries {len(p.signature)} values, got {len(atom.terms)}")
                continue
            for t, want in zip(atom.terms, p.signature):
                if isinstance(t, Var):
                    if t.name in env and env[t.name] != want:
                        report(atom, "SORT_MISMATCH", f"{t.name} has sort {env[t.name]}, {ct.name}.{p.name} expects {want}")
                elif t.integer != (want == "Integer"):
                    report(atom, "SORT_MISMATCH", f"literal {t} does not fit sort {want}")
                else:
                    try:
                        canonical_literal(want, t.text)
                    except ValueError:
                        report(atom, "SORT_MISMATCH", f"literal {t} does not fit sort {want}")
        elif isinstance(atom, Connected):
            src = component(atom, atom.src)
            dst = component(atom, atom.dst)
            if src is None or dst is None:
                continue
            sp = port(atom, src, atom.src, atom.src_port)
            dp = port(atom, dst, atom.dst, atom.dst_port)
            if sp is None or dp is None:
                continue
            bad = False
            if sp.direction != OUT:
                report(atom, "PORT_DIRECTION", f"connection source {src.name}.{sp.name} is not an output port")
                bad = True
            if dp.direction != IN:
                report(atom, "PORT_DIRECTION", f"connection target {dst.name}.{dp.name} is not an input port")
                bad = True
            if bad:
                continue
            if sp.signature != dp.signature:
                report(atom, "SORT_MISMATCH", f"{src.name}.{sp.name} and {dst.name}.{dp.name} have different signatures")
            if sp.name != dp.name or src.name == dst.name:
                report(
                    atom,
                    "CONN_UNMONITORABLE",
                    "only connections between same-named ports of different component types have a call event",
                )
        elif isinstance(atom, Formula) and fm.is_atom(atom):
            report(atom, "SYNTAX", f"unexpected atom {atom!r}")
    if a.trigger is not None and not fm.is_atom(a.trigger):
        diags.append(Diagnostic("SYNTAX", f"{a.name}: trigger must be an atom"))
    return diags


# --- printer -----------------------------------------------------------------


def print_formula(f: Formula) -> str:
    return fm.render(f, str)


def print_spec(doc: SpecDocument) -> str:
    blocks = [f"sort {s};" for s in doc.sorts]
    for ct in doc.component_types:
        lines = [f"component {ct.name} {{"]
        for p in ct.ports:
            lines.append(f"  {p.direction} {p.name}({', '.join(p.signature)});")
        lines.append("}")
        blocks.append("\n".join(lines))
    for a in doc.assertions:
        head = f"assertion {a.name}"
        if a.variables:
            head += " vars " + ", ".join(f"{v}: {s}" for v, s in a.variables)
        if a.trigger is not None:
            head += f" trigger {a.trigger}"
        blocks.append(f"{head} {{\n  {print_formula(a.body)}\n}}")
    if not blocks:
        return ""
    return "\n\n".join(blocks) + "\n"
