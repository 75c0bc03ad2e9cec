"""Direct evaluation of architectural assertions over lasso architecture traces."""

from __future__ import annotations

from itertools import product
from typing import Mapping, Optional

from . import formula as fm
from .diagnostics import ArchError
from .dsl import AssertionDecl, ComponentActive, Connected, PortActive, PortValuation, SpecDocument
from .model import ArchTrace, PortRef

DEFAULT_BINDING_CAP = 100_000


class OpenTrace(ArchError):
    code = "OPEN_TRACE"


class BudgetExceeded(ArchError):
    code = "BUDGET_EXCEEDED"


def _term(t, binding: Mapping[str, str]) -> str:
    return binding[t.name] if isinstance(t, fm.Var) else t.text


def atom_holds(atom: fm.Formula, snap, binding: Mapping[str, str]) -> bool:
    """Truth of one architecture atom in one snapshot."""
    if isinstance(atom, ComponentActive):
        return snap.component(binding[atom.comp]) is not None
    if isinstance(atom, PortActive):
        return bool(snap.value_of(PortRef(binding[atom.comp], atom.port)))
    if isinstance(atom, PortValuation):
        want = tuple(_term(t, binding) for t in atom.terms)
        msgs = snap.value_of(PortRef(binding[atom.comp], atom.port))
        return any(tuple(lit for _, lit in m) == want for m in msgs)
    if isinstance(atom, Connected):
        dst = PortRef(binding[atom.dst], atom.dst_port)
        return PortRef(binding[atom.src], atom.src_port) in snap.connected(dst)
    raise TypeError(f"not an architecture atom: {atom!r}")


def eval_assertion_all(a: AssertionDecl, trace: ArchTrace, binding: Mapping[str, str]) -> list[bool]:
    """Truth of ``a`` at every position of the lasso."""
    if trace.loop_start is None:
        raise OpenTrace("assertion evaluation needs a lasso trace (loopStart missing)")
    missing = [v for v, _ in a.variables if v not in binding]
    if missing:
        raise ValueError(f"binding leaves {', '.join(missing)} unassigned")
    steps = trace.steps
    return fm.evaluate_lasso(a.body, len(steps), trace.loop_start, lambda atom, i: atom_holds(atom, steps[i], binding))


def eval_assertion(a: AssertionDecl, trace: ArchTrace, binding: Mapping[str, str], at: int = 0) -> bool:
    if trace.loop_start is None:
        raise OpenTrace("assertion evaluation needs a lasso trace (loopStart missing)")
    n, k = len(trace.steps), trace.loop_start
    if at >= n:
        at = k + (at - k) % (n - k)
    return eval_assertion_all(a, trace, binding)[at]


def candidate_values(sort: str, trace: ArchTrace, spec: Optional[SpecDocument] = None) -> list[str]:
    """Values of ``sort`` occurring in ``trace``: instance ids for component
    types, literals carried in port valuations for data sorts."""
    values: set[str] = set()
    is_type = spec.component_type(sort) is not None if spec is not None else None
    for snap in trace.steps:
        if is_type is not False:
            values.update(c.id for c in snap.active if c.type == sort)
        if is_type is not True:
            for msgs in snap.valuations.values():
                for msg in msgs:
                    values.update(lit for s, lit in msg if s == sort)
    return sorted(values)


def enumerate_bindings(
    a: AssertionDecl,
    trace: ArchTrace,
    spec: Optional[SpecDocument] = None,
    cap: int = DEFAULT_BINDING_CAP,
) -> list[dict]:
    names = [v for v, _ in a.variables]
    pools = [candidate_values(s, trace, spec) for _, s in a.variables]
    total = 1
    for p in pools:
        total *= len(p)
    if total > cap:
        raise BudgetExceeded(f"{a.name}: {total} bindings exceed the cap of {cap}")
    return [dict(zip(names, combo)) for combo in product(*pools)]
