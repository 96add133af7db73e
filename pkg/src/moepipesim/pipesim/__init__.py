"""Discrete-event pipeline simulator: schedule building, execution, metrics."""

from .schedule import (
    ACTIVATION,
    BACKWARD,
    BOTH,
    COMBINE,
    DISPATCH,
    EXPERT_COMPUTE,
    FORWARD,
    GRADIENT,
    GRAD_COMPUTE,
    OFFLOAD_COPY,
    OpNode,
    PREFETCH_COPY,
    PoolSpec,
    RECOMMUNICATE,
    RECOMPUTE,
    ScheduleDag,
    ScheduleError,
    SlotSpec,
    build_schedule,
)
from .engine import (
    MemoryComponents,
    OracleSizeError,
    ScheduleTrace,
    SlotInterval,
    TraceEvent,
    TraceInvariantError,
    brute_force_makespan,
    makespan,
    memory_components,
    peak_memory,
    replay_validate,
    simulate,
)
from .export import event_rows, to_jsonl, to_trace_event, write_trace

__all__ = [
    "ACTIVATION",
    "BACKWARD",
    "BOTH",
    "COMBINE",
    "DISPATCH",
    "EXPERT_COMPUTE",
    "FORWARD",
    "GRADIENT",
    "GRAD_COMPUTE",
    "MemoryComponents",
    "OFFLOAD_COPY",
    "OpNode",
    "OracleSizeError",
    "PREFETCH_COPY",
    "PoolSpec",
    "RECOMMUNICATE",
    "RECOMPUTE",
    "ScheduleDag",
    "ScheduleError",
    "ScheduleTrace",
    "SlotInterval",
    "SlotSpec",
    "TraceEvent",
    "TraceInvariantError",
    "brute_force_makespan",
    "build_schedule",
    "event_rows",
    "makespan",
    "memory_components",
    "peak_memory",
    "replay_validate",
    "simulate",
    "to_jsonl",
    "to_trace_event",
    "write_trace",
]
