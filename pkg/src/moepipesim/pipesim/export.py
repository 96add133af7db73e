"""Trace serialization: JSON-lines events and browser trace-event JSON.

Timestamps are integer microseconds, rounded half-up, so exports are
bit-exact across runs of the same configuration.
"""

from __future__ import annotations

import json
import math

from ..core import STREAMS
from .engine import ScheduleTrace


def us(seconds: float) -> int:
    """Integer microseconds, half-up."""
    return int(math.floor(seconds * 1e6 + 0.5))


def event_rows(trace: ScheduleTrace) -> list[dict]:
    return [
        {
            "op": e.op_id,
            "kind": e.kind,
            "partition": e.partition,
            "stream": e.stream,
            "start_us": us(e.start),
            "end_us": us(e.end),
        }
        for e in trace.events
    ]


def to_jsonl(trace: ScheduleTrace) -> str:
    lines = [json.dumps(row, sort_keys=True) for row in event_rows(trace)]
    return "\n".join(lines) + ("\n" if lines else "")


def to_trace_event(trace: ScheduleTrace) -> dict:
    """The de-facto browser trace format: complete ("X") events per op."""
    tids = {stream: i for i, stream in enumerate(STREAMS)}
    events = []
    for e in trace.events:
        start = us(e.start)
        events.append(
            {
                "name": e.op_id,
                "cat": e.kind,
                "ph": "X",
                "ts": start,
                "dur": us(e.end) - start,
                "pid": 0,
                "tid": tids[e.stream],
                "args": {"partition": e.partition, "stream": e.stream},
            }
        )
    return {
        "traceEvents": events,
        "displayTimeUnit": "ms",
    }


def write_trace(trace: ScheduleTrace, path: str, fmt: str = "jsonl") -> None:
    if fmt == "jsonl":
        payload = to_jsonl(trace)
    elif fmt == "trace-event":
        payload = json.dumps(to_trace_event(trace), sort_keys=True)
    else:
        raise ValueError(f"unknown trace format {fmt!r}; use jsonl or trace-event")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(payload)
