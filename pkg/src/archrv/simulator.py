"""Seeded generation of valid architecture traces, plus erosion injection.

Random generation picks active components, connects input ports to output
ports of other component types with the same signature, valuates outputs,
and derives every connected input as the union of its connected outputs, so
valuation consistency holds by construction.

Guided generation (``SimConfig.scenario``) additionally plays out episodes
of an assertion of the form ``G (trigger -> X^k1 (...) & X^k2 (...) & ...)``:
each episode fires the trigger with fresh data and then makes every
obligation true at its offset. Ports and component types mentioned by the
assertion are left alone by the random part so that it cannot interfere.
"""

from __future__ import annotations

import json
import random
from dataclasses import asdict, dataclass, field
from typing import Iterable, Mapping, Optional, Sequence, Union

from . import formula as fm
from .diagnostics import ArchError
from .dsl import AssertionDecl, ComponentActive, Connected, PortActive, PortValuation, SpecDocument
from .model import ArchSnapshot, ArchTrace, ComponentId, ComponentType, PortRef, first_lower


class SimulationError(ArchError):
    code = "SIMULATION_ERROR"


class SelectorMiss(ArchError):
    code = "SELECTOR_MISS"


@dataclass(frozen=True)
class SimConfig:
    seed: int = 0
    steps: int = 10
    max_instances_per_type: int = 2
    activation_rate: float = 0.6
    message_rate: float = 0.4
    connect_rate: float = 0.4
    lasso: bool = True
    scenario: Optional[str] = None
    episode_rate: float = 0.5

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be at least 1")
        if self.max_instances_per_type < 1:
            raise ValueError("maxInstancesPerType must be at least 1")
        for name in ("activation_rate", "message_rate", "connect_rate", "episode_rate"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")

    _JSON = {
        "seed": "seed",
        "steps": "steps",
        "maxInstancesPerType": "max_instances_per_type",
        "activationRate": "activation_rate",
        "messageRate": "message_rate",
        "connectRate": "connect_rate",
        "lasso": "lasso",
        "scenario": "scenario",
        "episodeRate": "episode_rate",
    }

    @classmethod
    def from_json(cls, doc: Mapping) -> "SimConfig":
        unknown = set(doc) - set(cls._JSON)
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
        return cls(**{cls._JSON[k]: v for k, v in doc.items()})

    def to_json(self) -> dict:
        values = asdict(self)
        return {k: values[attr] for k, attr in self._JSON.items()}


# --- mutable snapshot scratchpad -----------------------------------------------


@dataclass
class _Snap:
    active: set = field(default_factory=set)
    conns: dict = field(default_factory=dict)
    vals: dict = field(default_factory=dict)

    def freeze(self) -> ArchSnapshot:
        return ArchSnapshot(
            frozenset(self.active),
            {k: frozenset(v) for k, v in self.conns.items() if v},
            {k: frozenset(v) for k, v in self.vals.items() if v},
        )

    @classmethod
    def thaw(cls, s: ArchSnapshot) -> "_Snap":
        return cls(
            set(s.active),
            {k: set(v) for k, v in s.connections.items()},
            {k: set(v) for k, v in s.valuations.items()},
        )

    def repair_inputs(self) -> None:
        for ci, outs in self.conns.items():
            if outs:
                union: set = set()
                for co in outs:
                    union |= self.vals.get(co, set())
                self.vals[ci] = union


# --- scenario shape ---------------------------------------------------------------


@dataclass(frozen=True)
class Scenario:
    assertion: AssertionDecl
    trigger: tuple  # atoms at offset 0 that form the trigger
    obligations: tuple  # (offset, atom) pairs

    @property
    def length(self) -> int:
        return 1 + max((k for k, _ in self.obligations), default=0)


def _conjuncts(f: fm.Formula) -> list:
    if isinstance(f, fm.And):
        return _conjuncts(f.left) + _conjuncts(f.right)
    return [f]


def _offset_atoms(f: fm.Formula, k: int = 0) -> list:
    if isinstance(f, fm.Next):
        return _offset_atoms(f.operand, k + 1)
    out = []
    for part in _conjuncts(f):
        if isinstance(part, fm.Next):
            out += _offset_atoms(part, k)
        elif fm.is_atom(part):
            out.append((k, part))
        else:
            raise SimulationError(f"obligation {fm.render(part)} is not a conjunction of atoms", "SCENARIO_UNSUPPORTED")
    return out


def scenario_of(a: AssertionDecl) -> Scenario:
    body = a.body
    if not (isinstance(body, fm.Globally) and isinstance(body.operand, fm.Implies)):
        raise SimulationError(f"assertion {a.name} is not of the form G (trigger -> ...)", "SCENARIO_UNSUPPORTED")
    trig = _offset_atoms(body.operand.left)
    if any(k for k, _ in trig):
        raise SimulationError(f"trigger of {a.name} must not contain X", "SCENARIO_UNSUPPORTED")
    return Scenario(a, tuple(t for _, t in trig), tuple(_offset_atoms(body.operand.right)))


# --- generation -------------------------------------------------------------------


def _pool(sort: str, types: Mapping[str, ComponentType], ids: Mapping[str, list]) -> list[str]:
    if sort in types:
        return ids[sort]
    if sort == "Integer":
        return ["0", "1", "2"]
    if sort == "Boolean":
        return ["false", "true"]
    return [f"{first_lower(sort)}{k}" for k in range(3)]


class _Generator:
    def __init__(self, spec: SpecDocument, cfg: SimConfig):
        self.spec, self.cfg = spec, cfg
        self.rng = random.Random(cfg.seed)
        self.types = {ct.name: ct for ct in spec.component_types}
        self.ids = {
            ct.name: [f"{first_lower(ct.name)}{k}" for k in range(cfg.max_instances_per_type)]
            for ct in spec.component_types
        }
        self.quiet_ports: set = set()  # (type, port) left to the scenario
        self.quiet_types: set = set()  # types only activated by the scenario
        self.scenario: Optional[Scenario] = None
        if cfg.scenario is not None:
            a = spec.assertion(cfg.scenario)
            if a is None:
                raise SimulationError(f"no assertion named {cfg.scenario}", "UNKNOWN_ASSERTION")
            self.scenario = scenario_of(a)
            self._quiet(a)

    def _quiet(self, a: AssertionDecl) -> None:
        for atom in fm.atoms(a.body):
            if isinstance(atom, (PortActive, PortValuation)):
                self.quiet_ports.add((a.sort_of(atom.comp), atom.port))
            elif isinstance(atom, Connected):
                self.quiet_ports.add((a.sort_of(atom.src), atom.src_port))
                self.quiet_ports.add((a.sort_of(atom.dst), atom.dst_port))
            elif isinstance(atom, ComponentActive):
                self.quiet_types.add(a.sort_of(atom.comp))

    def message(self, signature: Sequence[str]) -> tuple:
        return tuple((s, self.rng.choice(_pool(s, self.types, self.ids))) for s in signature)

    def random_snapshot(self, active: Optional[set] = None, pinned: Iterable = ()) -> _Snap:
        rng, cfg = self.rng, self.cfg
        snap = _Snap()
        if active is None:
            for ct in self.spec.component_types:
                if ct.name in self.quiet_types:
                    continue
                for cid in self.ids[ct.name]:
                    if rng.random() < cfg.activation_rate:
                        snap.active.add(ComponentId(ct.name, cid))
        else:
            snap.active = set(active)
        snap.active |= set(pinned)
        comps = sorted(snap.active)
        for c in comps:
            ct = self.types[c.type]
            for p in ct.outputs:
                if (c.type, p.name) in self.quiet_ports:
                    continue
                if rng.random() < cfg.message_rate:
                    snap.vals[PortRef(c.id, p.name)] = {self.message(p.signature) for _ in range(rng.randint(1, 2))}
        for c in comps:
            ct = self.types[c.type]
            for p in ct.inputs:
                if (c.type, p.name) in self.quiet_ports:
                    continue
                ref = PortRef(c.id, p.name)
                outs = set()
                for d in comps:
                    if d.type == c.type:
                        continue
                    for q in self.types[d.type].outputs:
                        if q.signature == p.signature and (d.type, q.name) not in self.quiet_ports:
                            if rng.random() < cfg.connect_rate:
                                outs.add(PortRef(d.id, q.name))
                if outs:
                    snap.conns[ref] = outs
                elif rng.random() < cfg.message_rate:
                    snap.vals[ref] = {self.message(p.signature)}
        snap.repair_inputs()
        return snap

    # --- episodes ---------------------------------------------------------------

    def plan_episodes(self, usable: int) -> list[int]:
        """Start steps of non-overlapping episodes ending before ``usable``."""
        sc = self.scenario
        starts, s = [], 0
        while s + sc.length <= usable:
            if self.rng.random() < self.cfg.episode_rate:
                starts.append(s)
                s += sc.length
            else:
                s += 1
        return starts

    def episode_binding(self, n: int, start: int) -> tuple[dict, set]:
        """Binding for episode ``n`` and the variables that get fresh instances."""
        sc = self.scenario
        a = sc.assertion
        fresh_vars = {atom.comp for _, atom in sc.obligations if isinstance(atom, ComponentActive)}
        fresh_vars |= {atom.comp for atom in sc.trigger if isinstance(atom, ComponentActive)}
        binding = {}
        for var, sort in a.variables:
            if sort in self.types:
                if var in fresh_vars:
                    binding[var] = f"{first_lower(sort)}_e{n}_{var}"
                else:
                    binding[var] = self.rng.choice(self.ids[sort])
            elif sort == "Integer":
                binding[var] = str(100 + n)
            elif sort == "Boolean":
                binding[var] = self.rng.choice(["false", "true"])
            else:
                binding[var] = f"{var}{n}"
        return binding, fresh_vars

    def apply_atom(self, snap: _Snap, atom, binding: dict, a: AssertionDecl) -> None:
        def comp(var: str) -> ComponentId:
            return ComponentId(a.sort_of(var), binding[var])

        if isinstance(atom, ComponentActive):
            snap.active.add(comp(atom.comp))
        elif isinstance(atom, PortActive):
            c = comp(atom.comp)
            snap.active.add(c)
            ref = PortRef(c.id, atom.port)
            if not snap.vals.get(ref):
                sig = self.types[c.type].port(atom.port).signature
                snap.vals.setdefault(ref, set()).add(self.message(sig))
        elif isinstance(atom, PortValuation):
            c = comp(atom.comp)
            snap.active.add(c)
            sig = self.types[c.type].port(atom.port).signature
            msg = tuple(
                (s, binding[t.name] if isinstance(t, fm.Var) else t.text) for s, t in zip(sig, atom.terms)
            )
            snap.vals.setdefault(PortRef(c.id, atom.port), set()).add(msg)
        elif isinstance(atom, Connected):
            src, dst = comp(atom.src), comp(atom.dst)
            snap.active |= {src, dst}
            out = PortRef(src.id, atom.src_port)
            if not snap.vals.get(out):
                sig = self.types[src.type].port(atom.src_port).signature
                snap.vals.setdefault(out, set()).add(self.message(sig))
            snap.conns.setdefault(PortRef(dst.id, atom.dst_port), set()).add(out)

    # --- whole trace --------------------------------------------------------------

    def run(self) -> ArchTrace:
        cfg = self.cfg
        n = cfg.steps
        tail = 1 if cfg.lasso else 0
        # pinned[i]: components the scenario needs at step i; fresh[i]: fresh ones
        pinned: list[set] = [set() for _ in range(n)]
        duties: list[list] = [[] for _ in range(n)]
        if self.scenario is not None:
            sc = self.scenario
            for e, s in enumerate(self.plan_episodes(n - tail)):
                binding, fresh_vars = self.episode_binding(e, s)
                items = [(0, atom) for atom in sc.trigger] + list(sc.obligations)
                first_use: dict = {}
                for k, atom in items:
                    for v in atom.variables():
                        if v in binding and sc.assertion.sort_of(v) in self.types:
                            first_use[v] = min(first_use.get(v, k), k)
                for v, k0 in first_use.items():
                    c = ComponentId(sc.assertion.sort_of(v), binding[v])
                    lo = k0 if v in fresh_vars else 0
                    for k in range(lo, sc.length):
                        pinned[s + k].add(c)
                for k, atom in items:
                    duties[s + k].append((atom, binding))
        steps: list[ArchSnapshot] = []
        for i in range(n):
            if tail and i == n - 1:
                break
            snap = self.random_snapshot(pinned=pinned[i])
            for atom, binding in duties[i]:
                self.apply_atom(snap, atom, binding, self.scenario.assertion)
            snap.repair_inputs()
            steps.append(snap.freeze())
        if not cfg.lasso:
            return ArchTrace(tuple(steps), None)
        # The last step loops back to ``loop``; repeating the active set of the
        # step before ``loop`` keeps activation events identical on every lap.
        if self.scenario is not None:
            loop = n - 1
        else:
            loop = self.rng.randrange(n)
        before = steps[loop - 1].active if loop > 0 else frozenset()
        last = self.random_snapshot(active=set(before))
        steps.append(last.freeze())
        return ArchTrace(tuple(steps), loop)


def simulate(spec: SpecDocument, cfg: SimConfig) -> ArchTrace:
    """A valid architecture trace, determined entirely by ``(spec, cfg)``."""
    return _Generator(spec, cfg).run()


# --- erosion ----------------------------------------------------------------------

EROSION_KINDS = ("swap-order", "drop-event", "duplicate-event", "rewire-connection")


@dataclass(frozen=True)
class ErosionOp:
    """One trace mutation.

    Selectors: ``steps`` (comma-separated step indices) or ``ports``/``port``
    (port names; the first step valuating each named port is used). Drop and
    rewire also accept ``id`` to restrict the affected component.
    """

    kind: str
    selector: tuple = ()  # sorted (key, value) pairs
    seed: int = 0

    def __post_init__(self):
        if self.kind not in EROSION_KINDS:
            raise ValueError(f"unknown erosion kind {self.kind!r}; expected one of {', '.join(EROSION_KINDS)}")

    def get(self, key: str) -> Optional[str]:
        return dict(self.selector).get(key)

    @classmethod
    def make(cls, kind: str, seed: int = 0, **selector) -> "ErosionOp":
        return cls(kind, tuple(sorted((k, str(v)) for k, v in selector.items())), seed)


def parse_erosion(text: str) -> ErosionOp:
    """``kind[:key=value;key=value...]``, e.g. ``swap-order:ports=setPrice,setName``."""
    kind, _, rest = text.partition(":")
    sel, seed = {}, 0
    for part in filter(None, (p.strip() for p in rest.split(";"))):
        key, eq, value = part.partition("=")
        if not eq:
            raise ValueError(f"selector part {part!r} is not key=value")
        if key.strip() == "seed":
            seed = int(value)
        else:
            sel[key.strip()] = value.strip()
    return ErosionOp.make(kind.strip(), seed, **sel)


def _first_step_with_port(trace: ArchTrace, port: str, after: int = -1, comp: Optional[str] = None) -> int:
    for i, snap in enumerate(trace.steps):
        if i <= after:
            continue
        if any(ref.port == port and (comp is None or ref.component == comp) for ref in snap.valuations):
            return i
    raise SelectorMiss(f"no step valuates port {port}")


def _steps_selector(op: ErosionOp, trace: ArchTrace, want: int) -> list[int]:
    n = len(trace.steps)
    if op.get("steps") is not None:
        try:
            idx = [int(x) for x in op.get("steps").split(",")]
        except ValueError as exc:
            raise SelectorMiss(f"bad step list {op.get('steps')!r}") from exc
    else:
        names = op.get("ports") or op.get("port")
        if names is None:
            raise SelectorMiss(f"{op.kind} needs a 'steps' or 'ports' selector")
        idx, after = [], -1
        for name in names.split(","):
            i = _first_step_with_port(trace, name.strip(), comp=op.get("id"))
            if i in idx:
                i = _first_step_with_port(trace, name.strip(), after=i, comp=op.get("id"))
            idx.append(i)
    if len(idx) != want or any(not 0 <= i < n for i in idx) or len(set(idx)) != len(idx):
        raise SelectorMiss(f"{op.kind} needs {want} distinct steps within 0..{n - 1}, got {idx}")
    return idx


def _target_step(op: ErosionOp, trace: ArchTrace, port: str) -> int:
    if op.get("steps") is not None:
        return _steps_selector(op, trace, 1)[0]
    return _first_step_with_port(trace, port, comp=op.get("id"))


def inject_erosion(trace: ArchTrace, op: Union[ErosionOp, Sequence[ErosionOp]], spec: Optional[SpecDocument] = None) -> ArchTrace:
    """Apply one erosion op, or a list of them in order."""
    if not isinstance(op, ErosionOp):
        for o in op:
            trace = inject_erosion(trace, o, spec)
        return trace
    steps = list(trace.steps)
    loop = trace.loop_start
    if op.kind == "swap-order":
        i, j = _steps_selector(op, trace, 2)
        steps[i], steps[j] = steps[j], steps[i]
        return ArchTrace(tuple(steps), loop)
    if op.kind == "duplicate-event":
        if op.get("steps") is not None:
            i = _steps_selector(op, trace, 1)[0]
        else:
            port = op.get("port") or op.get("ports")
            if port is None:
                raise SelectorMiss("duplicate-event needs a 'steps' or 'port' selector")
            i = _first_step_with_port(trace, port, comp=op.get("id"))
        steps.insert(i + 1, steps[i])
        if loop is not None and loop > i:
            loop += 1
        return ArchTrace(tuple(steps), loop)
    port = op.get("port")
    if port is None:
        raise SelectorMiss(f"{op.kind} needs a 'port' selector")
    if op.kind == "drop-event":
        i = _target_step(op, trace, port)
        snap = _Snap.thaw(steps[i])
        hit = [r for r in snap.vals if r.port == port and (op.get("id") is None or r.component == op.get("id"))]
        if not hit:
            raise SelectorMiss(f"step {i} does not valuate port {port}")
        for ref in hit:
            snap.vals.pop(ref)
            snap.conns.pop(ref, None)  # an emptied input must not stay connected
        snap.repair_inputs()
        steps[i] = snap.freeze()
        return ArchTrace(tuple(steps), loop)
    # rewire-connection
    if spec is None:
        raise SimulationError("rewire-connection needs the specification", "SPEC_REQUIRED")
    types = {ct.name: ct for ct in spec.component_types}
    rng = random.Random(op.seed)
    only = _steps_selector(op, trace, 1)[0] if op.get("steps") is not None else None
    for i, snap0 in enumerate(steps):
        if only is not None and i != only:
            continue
        targets = [
            ci for ci in sorted(snap0.connections)
            if ci.port == port and snap0.connections[ci] and (op.get("id") is None or ci.component == op.get("id"))
        ]
        if not targets:
            continue
        snap = _Snap.thaw(snap0)
        ci = targets[0]
        cin = snap0.component(ci.component)
        sig = types[cin.type].port(ci.port).signature
        current = snap.conns[ci]
        options = sorted(
            PortRef(d.id, q.name)
            for d in snap.active
            if d.id != cin.id
            for q in types[d.type].outputs
            if q.signature == sig and PortRef(d.id, q.name) not in current
        )
        if options:
            snap.conns[ci] = {rng.choice(options)}
            snap.repair_inputs()
        else:
            # no alternative sender: the input is now fed directly, unconnected
            snap.conns.pop(ci)
        steps[i] = snap.freeze()
        return ArchTrace(tuple(steps), loop)
    raise SelectorMiss(f"no step connects an input port named {port}")


def dump_trace(trace: ArchTrace) -> str:
    from .model import trace_to_json

    return json.dumps(trace_to_json(trace), indent=2, ensure_ascii=False) + "\n"
