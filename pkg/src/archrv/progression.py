"""Formula progression and a closure-tableau satisfiability check.

Together these give an independent reference for three-valued verdicts:
after a finite word ``u`` the verdict is BOTTOM iff the formula progressed
through ``u`` has no model, and TOP iff the progressed negation has none.
Constant folding alone cannot decide that (``X a & X !a`` folds to nothing
yet is unsatisfiable), so emptiness is decided by a Lichtenstein-Pnueli
style tableau over truth assignments to the elementary formulas.

Formulas are handled internally as nested tuples; conjunctions and
disjunctions are flattened and deduplicated, which is the only
simplification beyond constant folding.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Collection, Iterable, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import breadth_first_order, connected_components

from . import formula as fm
from .formula import Formula

TT = ("tt",)
FF = ("ff",)


# --- conversion -------------------------------------------------------------


def to_tuple(f: Formula) -> tuple:
    t = type(f)
    if t is fm.Const:
        return TT if f.value else FF
    if t is fm.Not:
        return neg(to_tuple(f.operand))
    if t is fm.And:
        return conj([to_tuple(f.left), to_tuple(f.right)])
    if t is fm.Or:
        return disj([to_tuple(f.left), to_tuple(f.right)])
    if t is fm.Implies:
        return disj([neg(to_tuple(f.left)), to_tuple(f.right)])
    if t is fm.Next:
        return ("X", to_tuple(f.operand))
    if t is fm.Globally:
        return ("G", to_tuple(f.operand))
    if t is fm.Eventually:
        return ("F", to_tuple(f.operand))
    if t is fm.Until:
        return ("U", to_tuple(f.left), to_tuple(f.right))
    if t is fm.WeakUntil:
        return ("W", to_tuple(f.left), to_tuple(f.right))
    return ("ap", f)


def from_tuple(p: tuple) -> Formula:
    tag = p[0]
    if tag == "tt":
        return fm.TRUE
    if tag == "ff":
        return fm.FALSE
    if tag == "ap":
        return p[1]
    if tag == "not":
        return fm.Not(from_tuple(p[1]))
    if tag == "and":
        return fm.conj([from_tuple(x) for x in p[1]])
    if tag == "or":
        parts = [from_tuple(x) for x in p[1]]
        out = parts[0]
        for x in parts[1:]:
            out = fm.Or(out, x)
        return out
    if tag == "X":
        return fm.Next(from_tuple(p[1]))
    if tag == "G":
        return fm.Globally(from_tuple(p[1]))
    if tag == "F":
        return fm.Eventually(from_tuple(p[1]))
    if tag == "U":
        return fm.Until(from_tuple(p[1]), from_tuple(p[2]))
    return fm.WeakUntil(from_tuple(p[1]), from_tuple(p[2]))


# --- folding constructors ----------------------------------------------------


def neg(p: tuple) -> tuple:
    if p == TT:
        return FF
    if p == FF:
        return TT
    if p[0] == "not":
        return p[1]
    return ("not", p)


def _nary(tag: str, unit: tuple, zero: tuple, parts: Iterable[tuple]) -> tuple:
    out: dict = {}
    for p in parts:
        if p == zero:
            return zero
        if p == unit:
            continue
        for q in p[1] if p[0] == tag else (p,):
            out[q] = None
    if not out:
        return unit
    if len(out) == 1:
        return next(iter(out))
    return (tag, tuple(out))


def conj(parts: Iterable[tuple]) -> tuple:
    return _nary("and", TT, FF, parts)


def disj(parts: Iterable[tuple]) -> tuple:
    return _nary("or", FF, TT, parts)


# --- progression --------------------------------------------------------------


def progress(p: tuple, letter: Collection) -> tuple:
    tag = p[0]
    if tag in ("tt", "ff"):
        return p
    if tag == "ap":
        return TT if p[1] in letter else FF
    if tag == "not":
        return neg(progress(p[1], letter))
    if tag == "and":
        return conj(progress(q, letter) for q in p[1])
    if tag == "or":
        return disj(progress(q, letter) for q in p[1])
    if tag == "X":
        return p[1]
    if tag == "G":
        return conj([progress(p[1], letter), p])
    if tag == "F":
        return disj([progress(p[1], letter), p])
    # U and W share the expansion a U b == b | (a & X(a U b))
    return disj([progress(p[2], letter), conj([progress(p[1], letter), p])])


def progress_formula(f: Formula, letter: Collection) -> Formula:
    """Obligation left for the suffix after reading one letter."""
    return from_tuple(progress(to_tuple(f), letter))


# --- satisfiability -----------------------------------------------------------


def _closure(p: tuple, out: dict) -> None:
    if p in out:
        return
    tag = p[0]
    if tag == "and" or tag == "or":
        for q in p[1]:
            _closure(q, out)
    elif tag in ("not", "X", "G", "F"):
        _closure(p[1], out)
    elif tag in ("U", "W"):
        _closure(p[1], out)
        _closure(p[2], out)
    out[p] = None


@lru_cache(maxsize=None)
def satisfiable(p: tuple) -> bool:
    """Whether some infinite word satisfies ``p``.

    States are truth assignments to the elementary formulas: atoms and
    ``X q`` for every ``q`` that is an X-operand or a G/F/U/W subformula. A
    state may step to any state in which each ``X q`` it asserts agrees with
    the truth of ``q``. Every G/F/U/W subformula must have its fulfilment
    condition met infinitely often, so a model exists iff a state satisfying
    ``p`` reaches a strongly connected set that meets all of them.
    """
    if p == TT:
        return True
    if p == FF:
        return False
    closure: dict = {}
    _closure(p, closure)
    subs = list(closure)
    aps = [q for q in subs if q[0] == "ap"]
    nexts = list(dict.fromkeys([q[1] for q in subs if q[0] == "X"] + [q for q in subs if q[0] in ("G", "F", "U", "W")]))
    n_el = len(aps) + len(nexts)
    if n_el > 22:
        raise ValueError("formula too large for the reference tableau")
    size = 1 << n_el
    states = np.arange(size, dtype=np.int64)
    bit = {}
    for k, q in enumerate(aps):
        bit[("ap", q)] = (states >> k) & 1 == 1
    for k, q in enumerate(nexts):
        bit[("X", q)] = (states >> (len(aps) + k)) & 1 == 1
    truth: dict = {}
    for q in subs:
        tag = q[0]
        if tag == "ap":
            v = bit[("ap", q)]
        elif tag in ("tt", "ff"):
            v = np.full(size, tag == "tt")
        elif tag == "not":
            v = ~truth[q[1]]
        elif tag == "and":
            v = np.logical_and.reduce([truth[x] for x in q[1]])
        elif tag == "or":
            v = np.logical_or.reduce([truth[x] for x in q[1]])
        elif tag == "X":
            v = bit[("X", q[1])]
        elif tag == "G":
            v = truth[q[1]] & bit[("X", q)]
        elif tag == "F":
            v = truth[q[1]] | bit[("X", q)]
        else:
            v = truth[q[2]] | (truth[q[1]] & bit[("X", q)])
        truth[q] = v
    start = truth[p]
    if not start.any():
        return False
    # successor constraint: what a state requires of the next one, and what
    # each state offers, both as integers over the ``nexts`` positions
    required = states >> len(aps)
    offered = np.zeros(size, dtype=np.int64)
    for k, q in enumerate(nexts):
        offered |= truth[q].astype(np.int64) << k
    buckets = 1 << len(nexts)
    # bipartite graph: state -> bucket(required) -> every state offering it
    src = np.concatenate([states, size + offered])
    dst = np.concatenate([size + required, states])
    total = size + buckets
    graph = csr_matrix((np.ones(len(src), dtype=np.int8), (src, dst)), shape=(total, total))
    _, labels = connected_components(graph, directed=True, connection="strong")
    sizes = np.bincount(labels)
    fair = sizes[labels[:size]] > 1
    for q in nexts:
        tag = q[0]
        if tag == "F":
            ok = ~truth[q] | truth[q[1]]
        elif tag == "U":
            ok = ~truth[q] | truth[q[2]]
        elif tag == "G":
            ok = truth[q] | ~truth[q[1]]
        elif tag == "W":
            ok = truth[q] | (~truth[q[1]] & ~truth[q[2]])
        else:
            continue
        hit = np.zeros(len(sizes), dtype=bool)
        hit[labels[:size][ok]] = True
        fair &= hit[labels[:size]]
    if not fair.any():
        return False
    # backward reachability from fair states through a virtual root
    root = total
    rsrc = np.concatenate([dst, np.full(int(fair.sum()), root)])
    rdst = np.concatenate([src, states[fair]])
    rev = csr_matrix((np.ones(len(rsrc), dtype=np.int8), (rsrc, rdst)), shape=(total + 1, total + 1))
    reach = np.zeros(total + 1, dtype=bool)
    reach[breadth_first_order(rev, root, directed=True, return_predecessors=False)] = True
    return bool((reach[:size] & start).any())


def verdict_of(phi: tuple, psi: tuple) -> str:
    """Verdict given the progressed formula and the progressed negation."""
    if not satisfiable(phi):
        return "BOTTOM"
    if not satisfiable(psi):
        return "TOP"
    return "INCONCLUSIVE"


def reference_verdicts(f: Formula, word: Sequence[Collection]) -> list[str]:
    """Reference verdict after every prefix of ``word`` (nonempty prefixes)."""
    phi = to_tuple(f)
    psi = neg(phi)
    out = []
    for letter in word:
        phi, psi = progress(phi, letter), progress(psi, letter)
        out.append(verdict_of(phi, psi))
    return out


def reference_verdict(f: Formula, word: Sequence[Collection]) -> str:
    phi = to_tuple(f)
    psi = neg(phi)
    for letter in word:
        phi, psi = progress(phi, letter), progress(psi, letter)
    return verdict_of(phi, psi)


def folding_verdict(f: Formula, word: Sequence[Collection]) -> str:
    """Verdict from constant folding only; weaker than :func:`reference_verdict`."""
    phi = to_tuple(f)
    psi = neg(phi)
    for letter in word:
        phi, psi = progress(phi, letter), progress(psi, letter)
    if phi == FF:
        return "BOTTOM"
    if psi == FF:
        return "TOP"
    return "INCONCLUSIVE"
