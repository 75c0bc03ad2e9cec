"""Helpers that run the simulate, abstract and monitor stages in-process."""

from __future__ import annotations

from archrv.engine import LogMeta, run_log
from archrv.model import abstract_trace


def monitor_trace(trace, spec, **kw) -> dict:
    log = abstract_trace(trace, spec).records()
    if trace.loop_start is not None:
        log.append(LogMeta(len(trace.steps), trace.loop_start))
    return run_log(log, spec, **kw)
