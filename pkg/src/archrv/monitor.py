"""Three-valued (LTL3) monitor synthesis.

The formula and its negation are each turned into a transition-based
generalised Büchi automaton by tableau expansion. States whose language is
empty are pruned, and the pair of automata is subset-determinised over
letters, i.e. sets of atoms that hold at one step. A determinised state whose
formula side is empty can never be extended into a model (BOTTOM); one whose
negation side is empty can never be extended into a counterexample (TOP).

Transition guards are kept as disjoint cubes of positive/negative atom
constraints. Letter tables (one entry per subset of the alphabet) are only
materialised transiently with numpy while determinising and minimising.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from . import formula as fm
from .diagnostics import ArchError
from .formula import Formula

DEFAULT_MAX_ATOMS = 16


class Verdict(str, Enum):
    TOP = "TOP"
    BOTTOM = "BOTTOM"
    INCONCLUSIVE = "INCONCLUSIVE"

    @property
    def final(self) -> bool:
        return self is not Verdict.INCONCLUSIVE


class AtomBudgetExceeded(ArchError):
    code = "ATOM_BUDGET_EXCEEDED"


@dataclass(frozen=True)
class Cube:
    """Conjunction of atoms that must hold (``pos``) and must not (``neg``),
    as bitmasks over the automaton's atom indices."""

    pos: int = 0
    neg: int = 0

    def matches(self, letter: int) -> bool:
        return letter & self.pos == self.pos and not letter & self.neg


Guard = tuple  # tuple[Cube, ...], a disjunction


@dataclass(frozen=True)
class MonitorAutomaton:
    atoms: tuple
    initial: int
    verdicts: tuple
    transitions: tuple  # per state: tuple of (Guard, target)
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def num_states(self) -> int:
        return len(self.verdicts)

    def atom_index(self) -> dict:
        idx = self._cache.get("atoms")
        if idx is None:
            idx = self._cache["atoms"] = {a: i for i, a in enumerate(self.atoms)}
        return idx

    def letter(self, true_atoms: Iterable) -> int:
        idx = self.atom_index()
        mask = 0
        for a in true_atoms:
            i = idx.get(a)
            if i is not None:
                mask |= 1 << i
        return mask

    def step(self, state: int, letter) -> int:
        if not isinstance(letter, int):
            letter = self.letter(letter)
        key = (state, letter)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        for guard, target in self.transitions[state]:
            if any(c.matches(letter) for c in guard):
                self._cache[key] = target
                return target
        raise ValueError(f"state {state} has no transition for letter {letter:b}")

    def run(self, word: Iterable, state: Optional[int] = None) -> list[Verdict]:
        """Verdicts after each letter of ``word`` (not including the start)."""
        s = self.initial if state is None else state
        out = []
        for letter in word:
            s = self.step(s, letter)
            out.append(self.verdicts[s])
        return out

    def verdict_after(self, word: Iterable) -> Verdict:
        s = self.initial
        for letter in word:
            s = self.step(s, letter)
        return self.verdicts[s]

    def table(self) -> np.ndarray:
        """Dense successor table, shape (states, 2**atoms)."""
        letters = _letters(len(self.atoms))
        tab = np.full((self.num_states, len(letters)), -1, dtype=np.int64)
        for s, edges in enumerate(self.transitions):
            for guard, target in edges:
                for cube in guard:
                    tab[s, _cube_mask(letters, cube.pos, cube.neg)] = target
        return tab


# --- negation normal form -------------------------------------------------------

TT = ("tt",)
FF = ("ff",)


def _and(a, b):
    if a == FF or b == FF:
        return FF
    if a == TT:
        return b
    if b == TT or a == b:
        return a
    return ("and", a, b)


def _or(a, b):
    if a == TT or b == TT:
        return TT
    if a == FF:
        return b
    if b == FF or a == b:
        return a
    return ("or", a, b)


def _nnf(f: Formula, neg: bool, index: dict):
    t = type(f)
    if t is fm.Const:
        return TT if f.value != neg else FF
    if t is fm.Not:
        return _nnf(f.operand, not neg, index)
    if t is fm.And:
        a, b = _nnf(f.left, neg, index), _nnf(f.right, neg, index)
        return _or(a, b) if neg else _and(a, b)
    if t is fm.Or:
        a, b = _nnf(f.left, neg, index), _nnf(f.right, neg, index)
        return _and(a, b) if neg else _or(a, b)
    if t is fm.Implies:
        a, b = _nnf(f.left, not neg, index), _nnf(f.right, neg, index)
        return _and(a, b) if neg else _or(a, b)
    if t is fm.Next:
        return ("X", _nnf(f.operand, neg, index))
    if t is fm.Globally:
        g = _nnf(f.operand, neg, index)
        return ("U", TT, g) if neg else ("R", FF, g)
    if t is fm.Eventually:
        g = _nnf(f.operand, neg, index)
        return ("R", FF, g) if neg else ("U", TT, g)
    if t is fm.Until:
        a, b = _nnf(f.left, neg, index), _nnf(f.right, neg, index)
        return ("R", a, b) if neg else ("U", a, b)
    if t is fm.WeakUntil:
        # a W b == b R (a | b); its negation is !b U (!a & !b)
        a, b = _nnf(f.left, neg, index), _nnf(f.right, neg, index)
        return ("U", b, _and(a, b)) if neg else ("R", b, _or(a, b))
    return ("nap", index[f]) if neg else ("ap", index[f])


def _untils(root) -> list:
    out, stack, seen = [], [root], set()
    while stack:
        f = stack.pop()
        if f in seen:
            continue
        seen.add(f)
        if f[0] == "U":
            out.append(f)
        stack.extend(x for x in f[1:] if isinstance(x, tuple))
    return sorted(out, key=repr)


# --- tableau ------------------------------------------------------------------


def _expand(formulas) -> set:
    """Split a conjunction of obligations into (pos, neg, next, postponed)
    alternatives; ``postponed`` holds the untils deferred to the next step."""
    results = set()
    stack = [(list(formulas), 0, 0, frozenset(), frozenset(), frozenset())]
    while stack:
        todo, pos, neg, nxt, post, done = stack.pop()
        alive = True
        while todo and alive:
            f = todo.pop()
            if f in done:
                continue
            done = done | {f}
            tag = f[0]
            if tag == "tt":
                continue
            if tag == "ff":
                alive = False
            elif tag == "ap":
                pos |= 1 << f[1]
                alive = not pos & neg
            elif tag == "nap":
                neg |= 1 << f[1]
                alive = not pos & neg
            elif tag == "and":
                todo += [f[2], f[1]]
            elif tag == "or":
                stack.append((todo + [f[2]], pos, neg, nxt, post, done))
                todo.append(f[1])
            elif tag == "X":
                nxt = nxt | {f[1]}
            elif tag == "U":
                stack.append((todo + [f[1]], pos, neg, nxt | {f}, post | {f}, done))
                todo.append(f[2])
            elif tag == "R":
                stack.append((todo + [f[2]], pos, neg, nxt | {f}, post, done))
                todo += [f[2], f[1]]
        if alive:
            results.add((pos, neg, nxt, post))
    # drop alternatives subsumed by a weaker-guarded, fewer-obligation,
    # no-more-postponing sibling
    res = list(results)
    keep = []
    for r in res:
        dominated = False
        for o in res:
            if o is r:
                continue
            if (
                o[0] & ~r[0] == 0
                and o[1] & ~r[1] == 0
                and o[2] <= r[2]
                and o[3] <= r[3]
                and (o[0], o[1], o[2], o[3]) != (r[0], r[1], r[2], r[3])
            ):
                dominated = True
                break
        if not dominated:
            keep.append(r)
    return keep


@dataclass
class _Nba:
    states: list  # frozensets of obligations
    edges: list  # per state: list of (pos, neg, target, acc)
    full: int

    def successors(self, v: int) -> list[int]:
        return [t for _, _, t, _ in self.edges[v]]


def _build_nba(root) -> _Nba:
    untils = _untils(root)
    uidx = {u: k for k, u in enumerate(untils)}
    full = (1 << len(untils)) - 1
    start = frozenset([root])
    states, index, edges = [start], {start: 0}, []
    i = 0
    while i < len(states):
        out = []
        for pos, neg, nxt, post in sorted(_expand(states[i]), key=repr):
            tgt = index.get(nxt)
            if tgt is None:
                tgt = index[nxt] = len(states)
                states.append(nxt)
            acc = full
            for u in post:
                acc &= ~(1 << uidx[u])
            out.append((pos, neg, tgt, acc))
        edges.append(out)
        i += 1
    return _Nba(states, edges, full)


def _sccs(n: int, succ: Callable[[int], list[int]]) -> list[list[int]]:
    """Tarjan's algorithm, iterative."""
    index, low, on, stack, out = {}, {}, set(), [], []
    counter = 0
    for root in range(n):
        if root in index:
            continue
        work = [(root, iter(succ(root)))]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on.add(root)
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on.add(w)
                    work.append((w, iter(succ(w))))
                    advanced = True
                    break
                if w in on:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                u = work[-1][0]
                low[u] = min(low[u], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                out.append(comp)
    return out


def _nonempty(nba: _Nba) -> set[int]:
    """States from which some accepting lasso exists."""
    n = len(nba.states)
    good: set[int] = set()
    for comp in _sccs(n, nba.successors):
        members = set(comp)
        acc, internal = 0, False
        for v in comp:
            for _, _, t, a in nba.edges[v]:
                if t in members:
                    internal = True
                    acc |= a
        if internal and acc == nba.full:
            good |= members
    rev: list[list[int]] = [[] for _ in range(n)]
    for v in range(n):
        for t in nba.successors(v):
            rev[t].append(v)
    seen, todo = set(good), list(good)
    while todo:
        v = todo.pop()
        for u in rev[v]:
            if u not in seen:
                seen.add(u)
                todo.append(u)
    return seen


# --- letter tables -------------------------------------------------------------

_LETTERS: dict[int, np.ndarray] = {}


def _letters(n: int) -> np.ndarray:
    arr = _LETTERS.get(n)
    if arr is None:
        arr = _LETTERS[n] = np.arange(1 << n, dtype=np.int64)
    return arr


def _cube_mask(letters: np.ndarray, pos: int, neg: int) -> np.ndarray:
    return ((letters & pos) == pos) & ((letters & neg) == 0)


def mask_to_guard(mask: np.ndarray, n: int) -> Guard:
    """Disjoint cubes covering exactly the letters set in ``mask``."""
    out: list[Cube] = []
    arr = mask.reshape((2,) * n) if n else mask.reshape(())
    # axis k of the C-ordered reshape holds bit n-1-k
    _shannon(arr, [n - 1 - k for k in range(n)], 0, 0, out)
    return tuple(out)


def _shannon(arr: np.ndarray, bits: list[int], pos: int, neg: int, out: list) -> None:
    if not arr.any():
        return
    if arr.all():
        out.append(Cube(pos, neg))
        return
    k = 0
    while k < len(bits):
        lo, hi = np.take(arr, 0, axis=k), np.take(arr, 1, axis=k)
        if np.array_equal(lo, hi):
            arr, bits = lo, bits[:k] + bits[k + 1 :]
        else:
            k += 1
    k = min(range(len(bits)), key=bits.__getitem__)
    lo, hi = np.take(arr, 0, axis=k), np.take(arr, 1, axis=k)
    rest = bits[:k] + bits[k + 1 :]
    _shannon(lo, rest, pos, neg | 1 << bits[k], out)
    _shannon(hi, rest, pos | 1 << bits[k], neg, out)


# --- synthesis -------------------------------------------------------------------


def formula_atoms(f: Formula) -> list:
    return sorted(fm.unique_atoms(f), key=str)


def synthesize_monitor(f: Formula, max_atoms: int = DEFAULT_MAX_ATOMS) -> MonitorAutomaton:
    """Deterministic three-valued monitor for ``f``; not minimised."""
    atoms = formula_atoms(f)
    if len(atoms) > max_atoms:
        raise AtomBudgetExceeded(f"formula has {len(atoms)} atoms, budget is {max_atoms}")
    n = len(atoms)
    index = {a: i for i, a in enumerate(atoms)}
    pos_nba = _build_nba(_nnf(f, False, index))
    neg_nba = _build_nba(_nnf(f, True, index))
    letters = _letters(n)
    masks: dict = {}

    def side(nba: _Nba):
        live = _nonempty(nba)
        out = []
        for v in range(len(nba.states)):
            row = []
            for pos, neg, t, _ in nba.edges[v]:
                if t in live:
                    m = masks.get((pos, neg))
                    if m is None:
                        m = masks[(pos, neg)] = _cube_mask(letters, pos, neg)
                    row.append((m, t))
            out.append(row)
        return live, out

    live_p, edges_p = side(pos_nba)
    live_n, edges_n = side(neg_nba)
    width_p = len(pos_nba.states)

    def key_of(a: frozenset, b: frozenset):
        if not a:
            return "BOTTOM"
        if not b:
            return "TOP"
        return (a, b)

    init = key_of(frozenset({0}) & live_p, frozenset({0}) & live_n)
    keys, order, trans = {init: 0}, [init], []
    i = 0
    while i < len(order):
        key = order[i]
        i += 1
        if key in ("BOTTOM", "TOP"):
            trans.append((((Cube(),), keys[key]),))
            continue
        a, b = key
        mat = np.zeros((len(letters), width_p + len(neg_nba.states)), dtype=bool)
        for v in a:
            for m, t in edges_p[v]:
                mat[:, t] |= m
        for v in b:
            for m, t in edges_n[v]:
                mat[:, width_p + t] |= m
        uniq, inverse = np.unique(mat, axis=0, return_inverse=True)
        inverse = inverse.ravel()
        grouped: dict = {}
        first: dict = {}
        for k, row in enumerate(uniq):
            cols = np.flatnonzero(row)
            tk = key_of(
                frozenset(int(c) for c in cols if c < width_p),
                frozenset(int(c) - width_p for c in cols if c >= width_p),
            )
            m = inverse == k
            grouped[tk] = grouped[tk] | m if tk in grouped else m
            first[tk] = min(first.get(tk, len(letters)), int(np.argmax(m)))
        edges = []
        for tk in sorted(grouped, key=first.__getitem__):
            if tk not in keys:
                keys[tk] = len(order)
                order.append(tk)
            edges.append((mask_to_guard(grouped[tk], n), keys[tk]))
        trans.append(tuple(edges))
    verdicts = tuple(
        Verdict.BOTTOM if k == "BOTTOM" else Verdict.TOP if k == "TOP" else Verdict.INCONCLUSIVE for k in order
    )
    return MonitorAutomaton(tuple(atoms), 0, verdicts, tuple(trans))


def minimize(m: MonitorAutomaton) -> MonitorAutomaton:
    """Moore partition refinement seeded with the verdict colouring."""
    n = len(m.atoms)
    table = m.table()
    reach, todo = {m.initial}, [m.initial]
    while todo:
        s = todo.pop()
        for t in np.unique(table[s]):
            t = int(t)
            if t not in reach:
                reach.add(t)
                todo.append(t)
    states = sorted(reach)
    colour = {Verdict.TOP: 0, Verdict.BOTTOM: 1, Verdict.INCONCLUSIVE: 2}
    cls = np.full(m.num_states, -1, dtype=np.int64)
    for s in states:
        cls[s] = colour[m.verdicts[s]]
    count = len({int(cls[s]) for s in states})
    while True:
        sigs: dict = {}
        new = cls.copy()
        for s in states:
            sig = (int(cls[s]), cls[table[s]].tobytes())
            new[s] = sigs.setdefault(sig, len(sigs))
        cls = new
        if len(sigs) == count:
            break
        count = len(sigs)
    # renumber classes in breadth-first order from the initial state
    rep = {}
    for s in states:
        rep.setdefault(int(cls[s]), s)
    number = {int(cls[m.initial]): 0}
    queue = deque([int(cls[m.initial])])
    order = []
    while queue:
        c = queue.popleft()
        order.append(c)
        row = cls[table[rep[c]]]
        for d in dict.fromkeys(int(x) for x in row):
            if d not in number:
                number[d] = len(number)
                queue.append(d)
    transitions = []
    verdicts = []
    for c in order:
        s = rep[c]
        row = cls[table[s]]
        edges = []
        for d in dict.fromkeys(int(x) for x in row):
            edges.append((mask_to_guard(row == d, n), number[d]))
        transitions.append(tuple(edges))
        verdicts.append(m.verdicts[s])
    return MonitorAutomaton(m.atoms, 0, tuple(verdicts), tuple(transitions))


def compile_monitor(f: Formula, max_atoms: int = DEFAULT_MAX_ATOMS) -> MonitorAutomaton:
    return minimize(synthesize_monitor(f, max_atoms))


# --- export ---------------------------------------------------------------------


def guard_label(guard: Guard, atoms: Sequence, atom_str: Callable = str) -> str:
    parts = []
    for cube in guard:
        lits = []
        for i, a in enumerate(atoms):
            if cube.pos >> i & 1:
                lits.append(atom_str(a))
            elif cube.neg >> i & 1:
                lits.append("!" + atom_str(a))
        parts.append(" & ".join(lits) if lits else "true")
    return " | ".join(parts) if parts else "false"


def to_json(m: MonitorAutomaton) -> dict:
    def bits(mask: int) -> list[int]:
        return [i for i in range(len(m.atoms)) if mask >> i & 1]

    return {
        "atoms": [str(a) for a in m.atoms],
        "initial": m.initial,
        "states": [{"id": s, "verdict": v.value} for s, v in enumerate(m.verdicts)],
        "edges": [
            {
                "from": s,
                "to": t,
                "guard": [{"pos": bits(c.pos), "neg": bits(c.neg)} for c in guard],
                "label": guard_label(guard, m.atoms),
            }
            for s, edges in enumerate(m.transitions)
            for guard, t in edges
        ],
    }


def from_json(doc: dict, parse_atom: Optional[Callable[[str], Formula]] = None) -> MonitorAutomaton:
    if parse_atom is None:
        from .ltl import parse_ltl as parse_atom
    atoms = tuple(parse_atom(a) for a in doc["atoms"])
    verdicts = tuple(Verdict(s["verdict"]) for s in sorted(doc["states"], key=lambda s: s["id"]))
    trans: list[list] = [[] for _ in verdicts]
    for e in doc["edges"]:
        guard = tuple(Cube(sum(1 << i for i in c["pos"]), sum(1 << i for i in c["neg"])) for c in e["guard"])
        trans[e["from"]].append((guard, e["to"]))
    return MonitorAutomaton(atoms, doc["initial"], verdicts, tuple(tuple(t) for t in trans))


def to_dot(m: MonitorAutomaton, name: str = "monitor") -> str:
    lines = [f"digraph {json.dumps(name)} {{", "  rankdir=LR;"]
    for s, v in enumerate(m.verdicts):
        attrs = [f'label="s{s}\\n{v.value}"']
        if v is Verdict.BOTTOM:
            attrs.append("color=red")
        elif v is Verdict.TOP:
            attrs.append("color=green")
        if s == m.initial:
            attrs.append("style=bold")
        lines.append(f"  s{s} [{', '.join(attrs)}];")
    for s, edges in enumerate(m.transitions):
        for guard, t in edges:
            lines.append(f"  s{s} -> s{t} [label={json.dumps(guard_label(guard, m.atoms))}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def export_automaton(m: MonitorAutomaton, format: str = "dot") -> str:
    if format == "dot":
        return to_dot(m)
    if format == "json":
        return json.dumps(to_json(m), indent=2) + "\n"
    raise ValueError(f"unknown format {format!r}")
