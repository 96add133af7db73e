"""Schedule construction for one MoE layer's forward/backward pipeline.

A schedule is a DAG of stream-bound operations plus the buffer pools they
cycle through.  Per partition i the forward pass is

    dispatch  S_i   (collective)  ->  expert compute  C_i  (compute, 2 GeMMs)
                                  ->  combine        R_i   (collective)

and the backward pass mirrors it: gradient dispatch, two gradient GeMM
nodes (second linear layer, then first), gradient combine.  Reuse
strategies add host copies in the forward pass and prefetch / re-dispatch /
recompute nodes in the backward pass to rebuild the pooled tensors their
consumers need.

Issue order on the collective stream alternates dispatches and combines
(one dispatch ahead) for locality; all streams execute FIFO in issue order.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..core import (
    COLLECTIVE_STREAM,
    COMPUTE_STREAM,
    COPY_STREAM,
    BatchSpec,
    ModelSpec,
    RestoreMethod,
    ReuseNotApplicableError,
    ReuseStrategy,
)

FORWARD = "forward"
BACKWARD = "backward"
BOTH = "both"
DIRECTIONS = (FORWARD, BACKWARD, BOTH)

# Operation kinds.
DISPATCH = "dispatch"
EXPERT_COMPUTE = "expert_compute"
COMBINE = "combine"
OFFLOAD_COPY = "offload_copy"
PREFETCH_COPY = "prefetch_copy"
RECOMPUTE = "recompute"
RECOMMUNICATE = "recommunicate"
GRAD_COMPUTE = "grad_compute"

ACTIVATION = "activation"
GRADIENT = "gradient"


class ScheduleError(RuntimeError):
    """Schedule cannot be built or cannot make progress (buffer deadlock)."""


@dataclass(frozen=True)
class OpNode:
    """One stream-bound operation with its work volume and dependencies."""

    op_id: str
    kind: str
    partition: int
    stream: str
    work: float          # element-operations (compute) or elements (comm/copy)
    tokens: int          # micro-batch size, drives compute saturation
    deps: tuple[str, ...] = ()


@dataclass(frozen=True)
class PoolSpec:
    """A buffer pool: `capacity` slots of `slot_elements` elements each."""

    name: str
    category: str  # ACTIVATION or GRADIENT
    capacity: int
    slot_elements: int


@dataclass(frozen=True)
class SlotSpec:
    """One slot acquisition: taken at `acquire`'s start, freed when every op
    in `releases` has finished.  acquire=None means live from trace start;
    empty releases means held to trace end."""

    pool: str
    acquire: str | None
    releases: tuple[str, ...] = ()


@dataclass(frozen=True)
class HostSlice:
    """A tensor slice offloaded to host memory by `producer` (None when the
    slice was offloaded before this trace begins, e.g. a backward-only run)."""

    elements: int
    producer: str | None


@dataclass(frozen=True)
class ScheduleDag:
    spec: ModelSpec
    batch: BatchSpec
    strategy: ReuseStrategy
    reuse_enabled: bool
    direction: str
    ops: dict[str, OpNode]
    issue_order: dict[str, tuple[str, ...]]
    pools: dict[str, PoolSpec]
    slots: tuple[SlotSpec, ...]
    host_slices: tuple[HostSlice, ...] = ()

    def __post_init__(self) -> None:
        self._validate()

    @property
    def n_ops(self) -> int:
        return len(self.ops)

    @property
    def includes_forward(self) -> bool:
        return self.direction in (FORWARD, BOTH)

    @property
    def includes_backward(self) -> bool:
        return self.direction in (BACKWARD, BOTH)

    def predecessors(self) -> dict[str, tuple[str, ...]]:
        return {op_id: op.deps for op_id, op in self.ops.items()}

    def _validate(self) -> None:
        seen: set[str] = set()
        for stream, order in self.issue_order.items():
            for op_id in order:
                op = self.ops.get(op_id)
                if op is None:
                    raise ScheduleError(f"issue order names unknown op {op_id!r}")
                if op.stream != stream:
                    raise ScheduleError(f"{op_id} issued on {stream} but bound to {op.stream}")
                if op_id in seen:
                    raise ScheduleError(f"{op_id} issued twice")
                seen.add(op_id)
        if seen != set(self.ops):
            missing = set(self.ops) - seen
            raise ScheduleError(f"ops never issued: {sorted(missing)}")
        for op in self.ops.values():
            for dep in op.deps:
                if dep not in self.ops:
                    raise ScheduleError(f"{op.op_id} depends on unknown op {dep!r}")
        self._check_acyclic()
        for slot in self.slots:
            if slot.pool not in self.pools:
                raise ScheduleError(f"slot references unknown pool {slot.pool!r}")
            if slot.acquire is not None and slot.acquire not in self.ops:
                raise ScheduleError(f"slot acquired by unknown op {slot.acquire!r}")
            for rel in slot.releases:
                if rel not in self.ops:
                    raise ScheduleError(f"slot released by unknown op {rel!r}")

    def _check_acyclic(self) -> None:
        indeg = {op_id: len(op.deps) for op_id, op in self.ops.items()}
        dependents: dict[str, list[str]] = {op_id: [] for op_id in self.ops}
        for op in self.ops.values():
            for dep in op.deps:
                dependents[dep].append(op.op_id)
        ready = [op_id for op_id, d in indeg.items() if d == 0]
        popped = 0
        while ready:
            op_id = ready.pop()
            popped += 1
            for nxt in dependents[op_id]:
                indeg[nxt] -= 1
                if indeg[nxt] == 0:
                    ready.append(nxt)
        if popped != len(self.ops):
            stuck = sorted(op_id for op_id, d in indeg.items() if d > 0)
            raise ScheduleError(f"dependency cycle through {stuck}")


def _alternating(first: list[list[str]], second: list[str]) -> tuple[str, ...]:
    """Collective-stream pattern: run one dispatch ahead, then alternate.

    `first` holds per-partition dispatch groups (a dispatch plus an optional
    re-dispatch), `second` the combines.  n=1 degenerates to first + second.
    """
    n = len(second)
    out: list[str] = []
    if n == 1:
        return tuple(first[0] + second)
    out += first[0] + first[1]
    for i in range(2, n):
        out.append(second[i - 2])
        out += first[i]
    out += [second[n - 2], second[n - 1]]
    return tuple(out)


def build_schedule(
    spec: ModelSpec,
    batch: BatchSpec,
    strategy: ReuseStrategy,
    reuse_enabled: bool = False,
    direction: str = FORWARD,
) -> ScheduleDag:
    """Build the operation DAG for one pass (or both) of the MoE layer.

    With reuse enabled the pooled tensors get capacity 2 (dispatched
    input/output) and 1 (hidden activation) and the strategy's restore
    machinery is scheduled; without it every pool holds all n partition
    slices and no copies are emitted.  Reuse requires n >= 2.
    """
    if direction not in DIRECTIONS:
        raise ValueError(f"direction must be one of {DIRECTIONS}, got {direction!r}")
    if reuse_enabled:
        if batch.partitions < 2:
            raise ReuseNotApplicableError(
                f"memory reuse needs at least 2 partitions, got {batch.partitions}"
            )
        if not strategy.saves_memory:
            raise ValueError("reuse_enabled requires a memory-saving strategy (s1..s4)")

    n = batch.partitions
    sizes = batch.partition_sizes()
    M, H = spec.model_dim, spec.hidden_dim
    b_slot = batch.micro_batch
    B = batch.tokens

    offload_tdi = reuse_enabled and strategy.restore_dispatched_input is RestoreMethod.OFFLOAD
    offload_tm = reuse_enabled and strategy.restore_middle is RestoreMethod.OFFLOAD
    recomm_tdi = reuse_enabled and strategy.restore_dispatched_input is RestoreMethod.COMMUNICATE
    recompute_tm = reuse_enabled and strategy.restore_middle is RestoreMethod.RECOMPUTE

    ops: dict[str, OpNode] = {}
    slots: list[SlotSpec] = []
    host: list[HostSlice] = []
    order_collective: tuple[str, ...] = ()
    order_compute: list[str] = []
    order_copy: list[str] = []

    def add(op: OpNode) -> str:
        ops[op.op_id] = op
        return op.op_id

    fw_combines: list[str] = []

    if direction in (FORWARD, BOTH):
        dispatch_groups: list[list[str]] = []
        combines: list[str] = []
        for i, b in enumerate(sizes):
            v_comm = b * M
            v_comp = b * H * M
            s = add(OpNode(f"S{i}", DISPATCH, i, COLLECTIVE_STREAM, v_comm, b))
            c = add(OpNode(f"C{i}", EXPERT_COMPUTE, i, COMPUTE_STREAM, 2 * v_comp, b, (s,)))
            r = add(OpNode(f"R{i}", COMBINE, i, COLLECTIVE_STREAM, v_comm, b, (c,)))
            dispatch_groups.append([s])
            combines.append(r)
            order_compute.append(c)

            tdi_releases = [c]
            tm_releases = [c]
            if offload_tdi:
                d = add(OpNode(f"Ddi{i}", OFFLOAD_COPY, i, COPY_STREAM, b * M, b, (s,)))
                order_copy.append(d)
                tdi_releases.append(d)
                host.append(HostSlice(b * M, d))
            if offload_tm:
                d = add(OpNode(f"Dm{i}", OFFLOAD_COPY, i, COPY_STREAM, 4 * b * M, b, (c,)))
                order_copy.append(d)
                tm_releases.append(d)
                host.append(HostSlice(b * H, d))

            if reuse_enabled:
                slots.append(SlotSpec("t_di", s, tuple(tdi_releases)))
                slots.append(SlotSpec("t_m", c, tuple(tm_releases)))
                slots.append(SlotSpec("t_do", c, (r,)))
            else:
                # Kept for the backward pass; never recycled within the trace.
                slots.append(SlotSpec("t_di", s))
                slots.append(SlotSpec("t_m", c))
                slots.append(SlotSpec("t_do", c))

        order_collective = _alternating(dispatch_groups, combines)
        fw_combines = combines
        slots.append(SlotSpec("t_i", None))
        slots.append(SlotSpec("t_o", combines[0]))

    if direction in (BACKWARD, BOTH):
        gate = tuple(fw_combines)  # backward waits for the whole forward pass
        grad_dispatch_groups: list[list[str]] = []
        grad_combines: list[str] = []
        bw_compute: list[str] = []
        bw_copy: list[str] = []
        recycle_grads = reuse_enabled or n == 1
        first_bs: str | None = None
        first_br: str | None = None
        for i, b in enumerate(sizes):
            v_comm = b * M
            v_comp = b * H * M
            group: list[str] = []
            bs = add(OpNode(f"BS{i}", DISPATCH, i, COLLECTIVE_STREAM, v_comm, b, gate))
            group.append(bs)
            first_bs = first_bs or bs

            tdi_restore: str | None = None
            tm_restore: str | None = None
            if recomm_tdi:
                tdi_restore = add(
                    OpNode(f"RC{i}", RECOMMUNICATE, i, COLLECTIVE_STREAM, v_comm, b, gate)
                )
                group.append(tdi_restore)
            if offload_tdi:
                tdi_restore = add(
                    OpNode(f"Hdi{i}", PREFETCH_COPY, i, COPY_STREAM, b * M, b,
                           gate + (f"Ddi{i}",) if direction == BOTH else gate)
                )
                bw_copy.append(tdi_restore)
                if direction == BACKWARD:  # offloaded before this trace began
                    host.append(HostSlice(b * M, None))
            if offload_tm:
                tm_restore = add(
                    OpNode(f"Hm{i}", PREFETCH_COPY, i, COPY_STREAM, 4 * b * M, b,
                           gate + (f"Dm{i}",) if direction == BOTH else gate)
                )
                bw_copy.append(tm_restore)
                if direction == BACKWARD:
                    host.append(HostSlice(b * H, None))
            if recompute_tm:
                assert tdi_restore is not None
                tm_restore = add(
                    OpNode(f"RE{i}", RECOMPUTE, i, COMPUTE_STREAM, v_comp, b, (tdi_restore,))
                )
                bw_compute.append(tm_restore)

            g2_deps = [bs] + ([tm_restore] if tm_restore else [])
            g2 = add(OpNode(f"G2_{i}", GRAD_COMPUTE, i, COMPUTE_STREAM, 2 * v_comp, b,
                            tuple(g2_deps)))
            g1_deps = [g2] + ([tdi_restore] if tdi_restore else [])
            g1 = add(OpNode(f"G1_{i}", GRAD_COMPUTE, i, COMPUTE_STREAM, 2 * v_comp, b,
                            tuple(g1_deps)))
            br = add(OpNode(f"BR{i}", COMBINE, i, COLLECTIVE_STREAM, v_comm, b, (g1,)))
            first_br = first_br or br
            bw_compute += [g2, g1]
            grad_dispatch_groups.append(group)
            grad_combines.append(br)

            if reuse_enabled:
                if tm_restore:
                    slots.append(SlotSpec("t_m", tm_restore, (g2,)))
                if tdi_restore:
                    readers = (g1,) if not recompute_tm else (f"RE{i}", g1)
                    slots.append(SlotSpec("t_di", tdi_restore, readers))
            slots.append(SlotSpec("g_do", bs, (g2,) if recycle_grads else ()))
            slots.append(SlotSpec("g_m", g2, (g1,) if recycle_grads else ()))
            slots.append(SlotSpec("g_di", g1, (br,) if recycle_grads else ()))

        bw_collective = _alternating(grad_dispatch_groups, grad_combines)
        order_collective = order_collective + bw_collective
        order_compute += bw_compute
        order_copy += bw_copy
        slots.append(SlotSpec("g_o", first_bs, (f"BS{n - 1}",) if n == 1 else ()))
        slots.append(SlotSpec("g_i", first_br))

    pools: dict[str, PoolSpec] = {}
    cap_pair = 2 if reuse_enabled else n
    cap_mid = 1 if reuse_enabled else n
    pools["t_i"] = PoolSpec("t_i", ACTIVATION, 1, B * M)
    pools["t_o"] = PoolSpec("t_o", ACTIVATION, 1, B * M)
    pools["t_di"] = PoolSpec("t_di", ACTIVATION, cap_pair, b_slot * M)
    pools["t_m"] = PoolSpec("t_m", ACTIVATION, cap_mid, b_slot * H)
    pools["t_do"] = PoolSpec("t_do", ACTIVATION, cap_pair, b_slot * M)
    if direction in (BACKWARD, BOTH):
        pools["g_o"] = PoolSpec("g_o", GRADIENT, 1, B * M)
        pools["g_i"] = PoolSpec("g_i", GRADIENT, 1, B * M)
        pools["g_do"] = PoolSpec("g_do", GRADIENT, cap_pair, b_slot * M)
        pools["g_m"] = PoolSpec("g_m", GRADIENT, cap_mid, b_slot * H)
        pools["g_di"] = PoolSpec("g_di", GRADIENT, cap_pair, b_slot * M)
    if direction == BACKWARD:
        # Resident input/output are still on device while the gradients flow.
        slots.append(SlotSpec("t_i", None))
        slots.append(SlotSpec("t_o", None))

    issue_order = {
        COMPUTE_STREAM: tuple(order_compute),
        COLLECTIVE_STREAM: tuple(order_collective),
        COPY_STREAM: tuple(order_copy),
    }
    return ScheduleDag(
        spec=spec,
        batch=batch,
        strategy=strategy,
        reuse_enabled=reuse_enabled,
        direction=direction,
        ops=ops,
        issue_order=issue_order,
        pools=pools,
        slots=tuple(slots),
        host_slices=tuple(host),
    )
