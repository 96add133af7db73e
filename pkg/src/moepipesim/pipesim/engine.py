"""Event-driven execution of a schedule DAG over a hardware profile.

Streams run their ops FIFO in issue order.  Every running op progresses at
its stream's base speed scaled by the interference factor for the set of
kinds concurrently active on the other streams (and, on the compute stream,
by the micro-batch saturation factor).  Rates are piecewise constant and
re-evaluated at every op start/finish boundary; each op first pays its
stream's launch overhead, during which it occupies the stream but does not
interfere with the others.

The simulation is a pure function of (dag, profile): repeated runs produce
identical traces.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from ..core import (
    STREAM_KIND,
    STREAMS,
    BatchSpec,
    HardwareProfile,
    ModelSpec,
    ReuseStrategy,
)
from ..memmodel import mem_model_states
from .schedule import (
    ACTIVATION,
    GRADIENT,
    ScheduleDag,
    ScheduleError,
)

_MAX_IDLE_GUARD = 1_000


class OracleSizeError(ValueError):
    """The DAG is too large for exhaustive issue-order enumeration."""


class TraceInvariantError(AssertionError):
    """A replayed trace violated a schedule or conservation invariant."""


@dataclass(frozen=True)
class TraceEvent:
    op_id: str
    kind: str
    partition: int
    stream: str
    start: float
    end: float
    # (t0, t1, rate) pieces; the launch-overhead prefix has rate 0.
    segments: tuple[tuple[float, float, float], ...]

    @property
    def duration(self) -> float:
        return self.end - self.start


@dataclass(frozen=True)
class SlotInterval:
    pool: str
    acquired: float
    released: float | None  # None: held to end of trace


@dataclass(frozen=True)
class ScheduleTrace:
    dag: ScheduleDag
    events: tuple[TraceEvent, ...]
    slot_intervals: tuple[SlotInterval, ...]

    @property
    def makespan(self) -> float:
        return max((e.end for e in self.events), default=0.0)

    def busy_time(self, stream: str) -> float:
        return sum(e.duration for e in self.events if e.stream == stream)

    def by_op(self) -> dict[str, TraceEvent]:
        return {e.op_id: e for e in self.events}

    def bottleneck_stream(self) -> str:
        return max(STREAMS, key=self.busy_time)

    def memory_curve(self) -> list[tuple[float, int]]:
        """In-use buffer occupancy (elements) at every slot boundary.

        This is the instantaneous liveness view; the peak-memory report uses
        the allocated-capacity convention instead (see memory_components).
        """
        pools = self.dag.pools
        deltas: list[tuple[float, int, int]] = []
        end = self.makespan
        for iv in self.slot_intervals:
            size = pools[iv.pool].slot_elements
            deltas.append((iv.acquired, 1, size))
            deltas.append((end if iv.released is None else iv.released, 0, -size))
        # At equal times apply releases before acquisitions.
        deltas.sort(key=lambda d: (d[0], d[1]))
        curve: list[tuple[float, int]] = []
        level = 0
        for t, _, d in deltas:
            level += d
            if curve and curve[-1][0] == t:
                curve[-1] = (t, level)
            else:
                curve.append((t, level))
        return curve


def simulate(dag: ScheduleDag, hw: HardwareProfile) -> ScheduleTrace:
    """Run the DAG to completion and return the full trace."""
    ops = dag.ops
    if not ops:
        return ScheduleTrace(dag, (), ())
    order = dag.issue_order

    deps_left = {op_id: len(op.deps) for op_id, op in ops.items()}
    dependents: dict[str, list[str]] = {op_id: [] for op_id in ops}
    for op in ops.values():
        for dep in op.deps:
            dependents[dep].append(op.op_id)

    # Slot bookkeeping: acquisition at op start, release when every reader
    # finished.  Slots acquired by None are live from t=0.
    acquires: dict[str, list[int]] = {}
    release_of: dict[str, list[int]] = {}
    pending = []
    acquired_at: list[float | None] = []
    released_at: list[float | None] = []
    prereleased: list[bool] = []
    in_use = {name: 0 for name in dag.pools}
    for idx, slot in enumerate(dag.slots):
        pending.append(len(slot.releases))
        acquired_at.append(0.0 if slot.acquire is None else None)
        released_at.append(None)
        prereleased.append(False)
        if slot.acquire is None:
            in_use[slot.pool] += 1
        else:
            acquires.setdefault(slot.acquire, []).append(idx)
        for rel in slot.releases:
            release_of.setdefault(rel, []).append(idx)

    stream_pos = {s: 0 for s in STREAMS}
    stream_busy: dict[str, str | None] = {s: None for s in STREAMS}
    launching: dict[str, float] = {}      # op_id -> absolute launch end
    running: dict[str, float] = {}        # op_id -> remaining work
    started: dict[str, float] = {}
    segments: dict[str, list[list[float]]] = {}
    finished: dict[str, float] = {}
    factor_cache: dict[tuple[str, frozenset[str]], float] = {}

    def can_start(op_id: str) -> bool:
        if deps_left[op_id]:
            return False
        want: dict[str, int] = {}
        for idx in acquires.get(op_id, ()):
            want[dag.slots[idx].pool] = want.get(dag.slots[idx].pool, 0) + 1
        return all(
            in_use[pool] + cnt <= dag.pools[pool].capacity for pool, cnt in want.items()
        )

    def start(op_id: str, now: float) -> None:
        op = ops[op_id]
        for idx in acquires.get(op_id, ()):
            acquired_at[idx] = now
            if prereleased[idx]:
                released_at[idx] = now  # every releaser already finished
            else:
                in_use[dag.slots[idx].pool] += 1
        started[op_id] = now
        segments[op_id] = []
        stream_busy[op.stream] = op_id
        stream_pos[op.stream] += 1
        eps = hw.launch_overhead_for(op.stream)
        if eps > 0.0:
            launching[op_id] = now + eps
        else:
            running[op_id] = float(op.work)

    def finish(op_id: str, now: float) -> None:
        op = ops[op_id]
        finished[op_id] = now
        running.pop(op_id, None)
        stream_busy[op.stream] = None
        for nxt in dependents[op_id]:
            deps_left[nxt] -= 1
        for idx in release_of.get(op_id, ()):
            pending[idx] -= 1
            if pending[idx] == 0:
                if acquired_at[idx] is None:
                    prereleased[idx] = True
                else:
                    in_use[dag.slots[idx].pool] -= 1
                    released_at[idx] = now

    def rate_of(op_id: str, active_kinds: frozenset[str]) -> float:
        op = ops[op_id]
        kind = STREAM_KIND[op.stream]
        key = (kind, active_kinds - {kind})
        f = factor_cache.get(key)
        if f is None:
            f = hw.slowdown.factor(*key)
            factor_cache[key] = f
        return hw.base_rate(op.stream, op.tokens) * f

    def diagnose() -> str:
        notes = []
        for stream in STREAMS:
            pos = stream_pos[stream]
            if pos >= len(order[stream]):
                continue
            head = order[stream][pos]
            why = []
            if deps_left[head]:
                waiting = [d for d in ops[head].deps if d not in finished]
                why.append(f"deps unfinished: {waiting}")
            for idx in acquires.get(head, ()):
                pool = dag.slots[idx].pool
                if in_use[pool] >= dag.pools[pool].capacity:
                    why.append(f"pool {pool} full ({in_use[pool]}/{dag.pools[pool].capacity})")
            notes.append(f"{stream} head {head}: {'; '.join(why) or 'unknown'}")
        return "buffer-capacity deadlock: " + " | ".join(notes)

    t = 0.0
    idle_iterations = 0
    total = len(ops)
    while len(finished) < total:
        while True:
            any_started = False
            for stream in STREAMS:
                if stream_busy[stream] is not None:
                    continue
                pos = stream_pos[stream]
                if pos < len(order[stream]) and can_start(order[stream][pos]):
                    start(order[stream][pos], t)
                    any_started = True
            if not any_started:
                break

        if not launching and not running:
            if len(finished) == total:
                break
            raise ScheduleError(diagnose())

        active_kinds = frozenset(STREAM_KIND[ops[o].stream] for o in running)
        rates = {o: rate_of(o, active_kinds) for o in running}

        t_next = None
        for op_id, launch_end in launching.items():
            if t_next is None or launch_end < t_next:
                t_next = launch_end
        fin_candidates: dict[str, float] = {}
        for op_id, remaining in running.items():
            cand = t if remaining <= 0.0 else t + remaining / rates[op_id]
            fin_candidates[op_id] = cand
            if t_next is None or cand < t_next:
                t_next = cand
        assert t_next is not None
        if t_next < t:
            t_next = t

        for op_id in list(running):
            rate = rates[op_id]
            cand = fin_candidates[op_id]
            segs = segments[op_id]
            if cand <= t_next:
                # Record the closing segment at the rate that integrates to
                # exactly the remaining work; the division below cancels the
                # rounding of t_next = t + remaining/rate, which otherwise
                # loses precision when the op is much shorter than the
                # absolute time it runs at.
                remaining = running[op_id]
                if t_next > t:
                    segs.append([t, t_next, remaining / (t_next - t)])
                elif remaining > 0.0 and segs:
                    a, b, r = segs[-1]
                    segs[-1] = [a, b, r + remaining / (b - a)]
                running[op_id] = 0.0
                finish(op_id, t_next)
            elif t_next > t and rate > 0.0:
                if segs and segs[-1][2] == rate and segs[-1][1] == t:
                    segs[-1][1] = t_next
                else:
                    segs.append([t, t_next, rate])
                running[op_id] -= rate * (t_next - t)

        for op_id in [o for o, le in launching.items() if le <= t_next]:
            del launching[op_id]
            segments[op_id].append([started[op_id], t_next, 0.0])
            work = float(ops[op_id].work)
            if work <= 0.0:
                finish(op_id, t_next)
            else:
                running[op_id] = work

        if t_next == t:
            idle_iterations += 1
            if idle_iterations > _MAX_IDLE_GUARD:
                raise ScheduleError("simulator made no progress; check op work values")
        else:
            idle_iterations = 0
        t = t_next

    events = []
    for op_id, op in ops.items():
        segs = tuple((s[0], s[1], s[2]) for s in segments[op_id])
        events.append(
            TraceEvent(op_id, op.kind, op.partition, op.stream,
                       started[op_id], finished[op_id], segs)
        )
    events.sort(key=lambda e: (e.start, e.stream, e.op_id))
    intervals = tuple(
        SlotInterval(dag.slots[i].pool, acquired_at[i], released_at[i])
        for i in range(len(dag.slots))
        if acquired_at[i] is not None
    )
    return ScheduleTrace(dag, tuple(events), intervals)


def makespan(trace: ScheduleTrace) -> float:
    return trace.makespan


@dataclass(frozen=True)
class MemoryComponents:
    """Peak device memory (elements) under the allocated-capacity convention.

    Pools are preallocated at full capacity (reuse mode sizes its fixed
    slots up front; without reuse each tensor is allocated whole), so the
    activation and buffer components are capacity sums.  The one exception
    is the unpipelined (n=1) backward pass, whose gradient scratch is
    recycled pairwise and therefore measured from the trace's actual slot
    liveness.  Host-side memory holds the offloaded slices and is reported
    separately from the device total.
    """

    model_states: int
    activations: int
    buffers: int
    host: int
    element_bytes: int

    @property
    def total(self) -> int:
        return self.model_states + self.activations + self.buffers

    def to_dict(self) -> dict:
        return {
            "model_states_elements": self.model_states,
            "activations_elements": self.activations,
            "buffers_elements": self.buffers,
            "total_elements": self.total,
            "host_elements": self.host,
            "total_bytes": self.total * self.element_bytes,
            "host_bytes": self.host * self.element_bytes,
        }


def _liveness_peak(trace: ScheduleTrace, category: str) -> int:
    pools = trace.dag.pools
    deltas: list[tuple[float, int, int]] = []
    end = trace.makespan
    for iv in trace.slot_intervals:
        pool = pools[iv.pool]
        if pool.category != category:
            continue
        deltas.append((iv.acquired, 1, pool.slot_elements))
        deltas.append((end if iv.released is None else iv.released, 0, -pool.slot_elements))
    deltas.sort(key=lambda d: (d[0], d[1]))
    level = peak = 0
    for _, _, d in deltas:
        level += d
        peak = max(peak, level)
    return peak


def memory_components(trace: ScheduleTrace) -> MemoryComponents:
    dag = trace.dag
    act = sum(p.capacity * p.slot_elements for p in dag.pools.values()
              if p.category == ACTIVATION)
    if not dag.includes_backward:
        buf = 0
    elif dag.batch.partitions == 1:
        buf = _liveness_peak(trace, GRADIENT)
    else:
        buf = sum(p.capacity * p.slot_elements for p in dag.pools.values()
                  if p.category == GRADIENT)
    host = sum(s.elements for s in dag.host_slices)
    return MemoryComponents(
        model_states=mem_model_states(dag.spec),
        activations=act,
        buffers=buf,
        host=host,
        element_bytes=dag.spec.element_bytes,
    )


def peak_memory(
    trace: ScheduleTrace,
    spec: ModelSpec | None = None,
    batch: BatchSpec | None = None,
    strategy: ReuseStrategy | None = None,
    reuse_enabled: bool | None = None,
) -> int:
    """Peak device memory of the traced run, in elements.

    The optional arguments cross-check the trace against the configuration
    the caller believes was simulated.
    """
    dag = trace.dag
    if spec is not None and spec != dag.spec:
        raise ValueError("trace was produced for a different model spec")
    if batch is not None and batch != dag.batch:
        raise ValueError("trace was produced for a different batch spec")
    if strategy is not None and strategy.name != dag.strategy.name:
        raise ValueError("trace was produced for a different strategy")
    if reuse_enabled is not None and reuse_enabled != dag.reuse_enabled:
        raise ValueError("trace reuse flag mismatch")
    return memory_components(trace).total


def replay_validate(trace: ScheduleTrace, rel_tol: float = 1e-9) -> None:
    """Re-check every schedule invariant directly on the trace.

    Verifies per-stream FIFO order and non-overlap, dependency-respecting
    start times, pool capacities at every acquisition boundary, launch
    charges, and per-op work conservation against the integrated rate
    segments.  Raises TraceInvariantError on the first violation.
    """
    dag = trace.dag
    by_op = trace.by_op()
    if set(by_op) != set(dag.ops):
        raise TraceInvariantError("trace does not cover the DAG's ops exactly")
    slack = rel_tol * max(1.0, trace.makespan)

    for stream, order in dag.issue_order.items():
        events = [by_op[op_id] for op_id in order]
        for prev, nxt in zip(events, events[1:]):
            if nxt.start + slack < prev.end:
                raise TraceInvariantError(
                    f"{stream}: {nxt.op_id} starts before {prev.op_id} ends"
                )
        starts = [e.start for e in events]
        if starts != sorted(starts):
            raise TraceInvariantError(f"{stream}: starts out of issue order")

    for op_id, op in dag.ops.items():
        ev = by_op[op_id]
        for dep in op.deps:
            if ev.start + slack < by_op[dep].end:
                raise TraceInvariantError(f"{op_id} started before dependency {dep} ended")
        eps = 0.0
        if ev.segments and ev.segments[0][2] == 0.0:
            eps = ev.segments[0][1] - ev.segments[0][0]
        worked = sum((t1 - t0) * r for t0, t1, r in ev.segments)
        scale = max(abs(op.work), 1.0)
        if abs(worked - op.work) > rel_tol * scale:
            raise TraceInvariantError(
                f"{op_id}: integrated work {worked} != {op.work}"
            )
        for (a0, a1, _), (b0, b1, _) in zip(ev.segments, ev.segments[1:]):
            if b0 + slack < a1:
                raise TraceInvariantError(f"{op_id}: overlapping rate segments")
        if ev.segments:
            if ev.segments[0][0] < ev.start - slack or ev.segments[-1][1] > ev.end + slack:
                raise TraceInvariantError(f"{op_id}: segments outside [start, end]")
        if ev.end - ev.start + slack < eps:
            raise TraceInvariantError(f"{op_id}: shorter than its launch overhead")

    counts = {name: 0 for name in dag.pools}
    boundary: list[tuple[float, int, str]] = []
    end = trace.makespan
    for iv in trace.slot_intervals:
        boundary.append((iv.acquired, 1, iv.pool))
        boundary.append((end if iv.released is None else iv.released, 0, iv.pool))
    boundary.sort(key=lambda b: (b[0], b[1]))
    for _, is_acquire, pool in boundary:
        counts[pool] += 1 if is_acquire else -1
        if counts[pool] > dag.pools[pool].capacity:
            raise TraceInvariantError(
                f"pool {pool} exceeded capacity {dag.pools[pool].capacity}"
            )


def _stream_orders(dag: ScheduleDag, stream: str) -> list[tuple[str, ...]]:
    members = dag.issue_order[stream]
    if len(members) <= 1:
        return [tuple(members)]
    ancestors: dict[str, set[str]] = {}

    def collect(op_id: str) -> set[str]:
        got = ancestors.get(op_id)
        if got is None:
            got = set()
            for dep in dag.ops[op_id].deps:
                got.add(dep)
                got |= collect(dep)
            ancestors[op_id] = got
        return got

    member_set = set(members)
    orders = []
    for perm in itertools.permutations(members):
        seen: set[str] = set()
        ok = True
        for op_id in perm:
            if collect(op_id) & member_set - seen:
                ok = False
                break
            seen.add(op_id)
        if ok:
            orders.append(perm)
    return orders


def brute_force_makespan(
    dag: ScheduleDag,
    hw: HardwareProfile,
    max_ops: int = 12,
    max_orders: int = 200_000,
) -> float:
    """Minimum makespan over every stream-consistent issue order.

    Exhaustively permutes each stream's issue order (keeping orders that
    respect same-stream dependencies), simulates each combination under the
    same rate semantics, and returns the best makespan.  Orders that
    deadlock through buffer-capacity cycles are skipped.  Only meant for
    oracle-sized DAGs; larger inputs raise OracleSizeError.
    """
    if dag.n_ops > max_ops:
        raise OracleSizeError(f"{dag.n_ops} ops exceeds the oracle limit of {max_ops}")
    per_stream = [_stream_orders(dag, s) for s in STREAMS]
    n_orders = 1
    for choices in per_stream:
        n_orders *= len(choices)
    if n_orders > max_orders:
        raise OracleSizeError(f"{n_orders} issue orders exceed the oracle limit")
    best = None
    for combo in itertools.product(*per_stream):
        candidate = replace(
            dag, issue_order={s: combo[i] for i, s in enumerate(STREAMS)}
        )
        try:
            span = simulate(candidate, hw).makespan
        except ScheduleError:
            continue
        if best is None or span < best:
            best = span
    if best is None:
        raise ScheduleError("every enumerated issue order deadlocked")
    return best
