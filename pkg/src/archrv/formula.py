"""Temporal-logic syntax trees shared by assertions and ground LTL formulas.

Atoms are any :class:`Formula` subclass that is not one of the operator
classes defined here; architecture atoms live in :mod:`archrv.dsl` and event
atoms in :mod:`archrv.ltl`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterator, Sequence, Union


@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Lit:
    """A canonical literal; ``integer`` only affects printing."""

    text: str
    integer: bool = False

    def __str__(self) -> str:
        if self.integer:
            return self.text
        return quote(self.text)


Term = Union[Var, Lit]


def quote(text: str) -> str:
    out = text.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n")
    return f'"{out}"'


class Formula:
    __slots__ = ()


@dataclass(frozen=True)
class Const(Formula):
    value: bool


TRUE = Const(True)
FALSE = Const(False)


@dataclass(frozen=True)
class Not(Formula):
    operand: Formula


@dataclass(frozen=True)
class Next(Formula):
    operand: Formula


@dataclass(frozen=True)
class Globally(Formula):
    operand: Formula


@dataclass(frozen=True)
class Eventually(Formula):
    operand: Formula


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Implies(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Until(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class WeakUntil(Formula):
    left: Formula
    right: Formula


UNARY = {Not: "!", Next: "X", Globally: "G", Eventually: "F"}
BINARY = {And: "&", Or: "|", Implies: "->", Until: "U", WeakUntil: "W"}
OPERATORS = (Const, *UNARY, *BINARY)


def is_atom(f: Formula) -> bool:
    return not isinstance(f, OPERATORS)


def children(f: Formula) -> tuple[Formula, ...]:
    if type(f) in UNARY:
        return (f.operand,)
    if type(f) in BINARY:
        return (f.left, f.right)
    return ()


def atoms(f: Formula) -> Iterator[Formula]:
    """Atoms in syntactic pre-order, left to right, duplicates included."""
    stack = [f]
    while stack:
        g = stack.pop()
        if is_atom(g):
            yield g
        else:
            stack.extend(reversed(children(g)))


def unique_atoms(f: Formula) -> list[Formula]:
    return list(dict.fromkeys(atoms(f)))


def map_atoms(f: Formula, fn: Callable[[Formula], Formula]) -> Formula:
    if is_atom(f):
        return fn(f)
    t = type(f)
    if t in UNARY:
        return t(map_atoms(f.operand, fn))
    if t in BINARY:
        return t(map_atoms(f.left, fn), map_atoms(f.right, fn))
    return f


def skeleton(f: Formula) -> Formula:
    """The operator tree with every atom replaced by a placeholder."""
    return map_atoms(f, lambda _: _HOLE)


@dataclass(frozen=True)
class _Hole(Formula):
    pass


_HOLE = _Hole()


def depth(f: Formula) -> int:
    """Tree height; an atom or constant has depth 1."""
    kids = children(f)
    return 1 + max((depth(k) for k in kids), default=0)


def term_vars(f: Formula) -> set[str]:
    """Names of variables occurring in atom argument positions."""
    out: set[str] = set()
    for a in atoms(f):
        for t in getattr(a, "variables", lambda: ())():
            out.add(t)
    return out


def render(f: Formula, atom: Callable[[Formula], str] = str) -> str:
    """Canonical fully parenthesised infix text."""
    t = type(f)
    if t is Const:
        return "true" if f.value else "false"
    if t in UNARY:
        return f"{UNARY[t]} ({render(f.operand, atom)})"
    if t in BINARY:
        return f"({render(f.left, atom)} {BINARY[t]} {render(f.right, atom)})"
    return atom(f)


def conj(parts: Sequence[Formula]) -> Formula:
    if not parts:
        return TRUE
    out = parts[0]
    for p in parts[1:]:
        out = And(out, p)
    return out


def evaluate_lasso(
    f: Formula,
    length: int,
    loop_start: int,
    holds: Callable[[Formula, int], bool],
) -> list[bool]:
    """Truth of ``f`` at every position of a lasso word.

    Positions are ``0..length-1``; the successor of the last position is
    ``loop_start``. ``holds(atom, i)`` decides atoms. Each subformula is
    evaluated once into a per-position table; fixpoint operators iterate
    backwards over the lasso until stable.
    """
    if length <= 0 or not 0 <= loop_start < length:
        raise ValueError("lasso needs 0 <= loop_start < length")
    succ = list(range(1, length)) + [loop_start]
    memo: dict[int, list[bool]] = {}

    def fix(init: bool, step: Callable[[int, list[bool]], bool]) -> list[bool]:
        cur = [init] * length
        changed = True
        while changed:
            changed = False
            for i in reversed(range(length)):
                v = step(i, cur)
                if v != cur[i]:
                    cur[i] = v
                    changed = True
        return cur

    def ev(g: Formula) -> list[bool]:
        key = id(g)
        if key in memo:
            return memo[key]
        t = type(g)
        if t is Const:
            r = [g.value] * length
        elif t is Not:
            r = [not v for v in ev(g.operand)]
        elif t is And:
            a, b = ev(g.left), ev(g.right)
            r = [x and y for x, y in zip(a, b)]
        elif t is Or:
            a, b = ev(g.left), ev(g.right)
            r = [x or y for x, y in zip(a, b)]
        elif t is Implies:
            a, b = ev(g.left), ev(g.right)
            r = [(not x) or y for x, y in zip(a, b)]
        elif t is Next:
            a = ev(g.operand)
            r = [a[succ[i]] for i in range(length)]
        elif t is Globally:
            a = ev(g.operand)
            r = fix(True, lambda i, cur: a[i] and cur[succ[i]])
        elif t is Eventually:
            a = ev(g.operand)
            r = fix(False, lambda i, cur: a[i] or cur[succ[i]])
        elif t is Until:
            a, b = ev(g.left), ev(g.right)
            r = fix(False, lambda i, cur: b[i] or (a[i] and cur[succ[i]]))
        elif t is WeakUntil:
            a, b = ev(g.left), ev(g.right)
            r = fix(True, lambda i, cur: b[i] or (a[i] and cur[succ[i]]))
        else:
            r = [bool(holds(g, i)) for i in range(length)]
        memo[key] = r
        return r

    return ev(f)
