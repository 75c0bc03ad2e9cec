"""Runtime verification of architectural assertions for dynamic architectures.

Pipeline: a textual specification of component types and assertions
(:mod:`archrv.dsl`) yields an event vocabulary (:mod:`archrv.events`) and LTL
formulas over events (:mod:`archrv.ltl`), which are compiled into
three-valued monitors (:mod:`archrv.monitor`) and run over event logs by a
parametric engine (:mod:`archrv.engine`). :mod:`archrv.oracle` evaluates
assertions directly on architecture traces and :mod:`archrv.simulator`
generates such traces.
"""

from .dsl import parse_spec, print_spec, typecheck_spec
from .engine import Engine, run_log, run_stream
from .events import generate_events, generate_instrumentation_manifest
from .ltl import parse_ltl, print_ltl, translate_assertion
from .model import abstract_trace, validate_snapshot, validate_trace
from .monitor import Verdict, compile_monitor, export_automaton, minimize, synthesize_monitor
from .oracle import enumerate_bindings, eval_assertion
from .progression import progress_formula
from .simulator import ErosionOp, SimConfig, inject_erosion, simulate

__version__ = "0.1.0"

__all__ = [
    "Engine",
    "ErosionOp",
    "SimConfig",
    "Verdict",
    "abstract_trace",
    "compile_monitor",
    "enumerate_bindings",
    "eval_assertion",
    "export_automaton",
    "generate_events",
    "generate_instrumentation_manifest",
    "inject_erosion",
    "minimize",
    "parse_ltl",
    "parse_spec",
    "print_ltl",
    "print_spec",
    "progress_formula",
    "run_log",
    "run_stream",
    "simulate",
    "synthesize_monitor",
    "translate_assertion",
    "typecheck_spec",
    "validate_snapshot",
    "validate_trace",
]
