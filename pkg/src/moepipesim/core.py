"""Shared domain types for MoE pipeline planning and simulation.

Everything downstream (memory model, cost model, simulator, autotuner) is
expressed over the types in this module: model/batch geometry, hardware rate
profiles with cross-stream interference factors, the memory-reuse strategy
table, and the tensor roles of one MoE layer's data flow.

All types are immutable value objects, validated on construction, and safe to
share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping

# Interference kinds, one per hardware stream.
COMP = "comp"
COMM = "comm"
MEM = "mem"
KINDS = (COMP, COMM, MEM)

# Stream names used by the simulator; each stream carries one kind of work.
COMPUTE_STREAM = "compute"
COLLECTIVE_STREAM = "collective"
COPY_STREAM = "copy"
STREAMS = (COMPUTE_STREAM, COLLECTIVE_STREAM, COPY_STREAM)

STREAM_KIND = {
    COMPUTE_STREAM: COMP,
    COLLECTIVE_STREAM: COMM,
    COPY_STREAM: MEM,
}


class InvalidPartitioningError(ValueError):
    """Raised when a batch cannot be split into the requested partitions."""


class ReuseNotApplicableError(ValueError):
    """Raised when memory reuse is requested without pipelining (n < 2)."""


def micro_batch_size(tokens: int, partitions: int) -> int:
    """Largest micro-batch produced by splitting `tokens` into `partitions`.

    Uses ceiling division; the scheduler tracks the (smaller) remainder
    partitions separately.  Raises InvalidPartitioningError unless
    1 <= partitions <= tokens.
    """
    if tokens < 1:
        raise InvalidPartitioningError(f"tokens must be >= 1, got {tokens}")
    if partitions < 1 or partitions > tokens:
        raise InvalidPartitioningError(
            f"partitions must be in [1, {tokens}], got {partitions}"
        )
    return -(-tokens // partitions)


@dataclass(frozen=True)
class ModelSpec:
    """Dimensions of one MoE layer and the cluster it is sharded over.

    model_dim and hidden_dim are the widths of the expert FFN's two linear
    layers; num_experts experts are spread evenly over num_nodes devices.
    """

    model_dim: int
    hidden_dim: int
    num_experts: int
    num_nodes: int = 1
    element_bytes: int = 2

    def __post_init__(self) -> None:
        for name in ("model_dim", "hidden_dim", "num_experts", "num_nodes"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.num_experts % self.num_nodes != 0:
            raise ValueError(
                f"num_experts ({self.num_experts}) must be divisible by "
                f"num_nodes ({self.num_nodes})"
            )
        if self.element_bytes not in (1, 2, 4, 8):
            raise ValueError(f"element_bytes must be 1, 2, 4 or 8, got {self.element_bytes}")


@dataclass(frozen=True)
class BatchSpec:
    """A token batch and the pipeline granularity it is split into."""

    tokens: int
    partitions: int = 1

    def __post_init__(self) -> None:
        micro_batch_size(self.tokens, self.partitions)  # validates both fields

    @property
    def micro_batch(self) -> int:
        return micro_batch_size(self.tokens, self.partitions)

    def partition_sizes(self) -> list[int]:
        """Balanced split: sizes differ by at most one, max equals micro_batch."""
        base, extra = divmod(self.tokens, self.partitions)
        return [base + 1] * extra + [base] * (self.partitions - extra)


@dataclass(frozen=True)
class SlowdownTable:
    """Multiplicative rate factors under cross-stream interference.

    Entries map (kind, frozenset of other concurrently active kinds) to a
    factor in (0, 1].  The empty active set is always 1.0 (full speed).  A
    missing combination falls back to the minimum over entries whose active
    set is a non-empty subset of the query, and finally to 1.0; unprofiled
    hardware therefore defaults to interference-free execution.
    """

    entries: Mapping[tuple[str, frozenset[str]], float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        normalized = {}
        for (kind, others), value in dict(self.entries).items():
            others = frozenset(others)
            if kind not in KINDS:
                raise ValueError(f"unknown kind {kind!r}")
            if not others:
                raise ValueError("the empty concurrent set is implicitly 1.0; do not override")
            if not others <= set(KINDS) or kind in others:
                raise ValueError(f"bad concurrent set {sorted(others)} for kind {kind!r}")
            if not 0.0 < value <= 1.0:
                raise ValueError(f"slowdown factor must be in (0, 1], got {value}")
            normalized[(kind, others)] = float(value)
        object.__setattr__(self, "entries", normalized)

    def factor(self, kind: str, others: Iterable[str]) -> float:
        others = frozenset(others) - {kind}
        if not others:
            return 1.0
        exact = self.entries.get((kind, others))
        if exact is not None:
            return exact
        best = 1.0
        for (k, active), value in self.entries.items():
            if k == kind and active <= others:
                best = min(best, value)
        return best

    @classmethod
    def from_factors(
        cls,
        *,
        mu_comp: float | None = None,
        mu_mem: float | None = None,
        mu_all: float | None = None,
        sigma_comm: float | None = None,
        sigma_mem: float | None = None,
        sigma_all: float | None = None,
        eta_comm: float | None = None,
        eta_comp: float | None = None,
        eta_all: float | None = None,
    ) -> "SlowdownTable":
        """Build a table from the named factors.

        mu_* slow the all-to-all stream, sigma_* the compute stream and
        eta_* the host-copy stream; the suffix names the interfering kind(s),
        `all` meaning both other kinds active at once.
        """
        spec = {
            (COMM, frozenset({COMP})): mu_comp,
            (COMM, frozenset({MEM})): mu_mem,
            (COMM, frozenset({COMP, MEM})): mu_all,
            (COMP, frozenset({COMM})): sigma_comm,
            (COMP, frozenset({MEM})): sigma_mem,
            (COMP, frozenset({COMM, MEM})): sigma_all,
            (MEM, frozenset({COMM})): eta_comm,
            (MEM, frozenset({COMP})): eta_comp,
            (MEM, frozenset({COMM, COMP})): eta_all,
        }
        return cls({k: v for k, v in spec.items() if v is not None})


@dataclass(frozen=True)
class HardwareProfile:
    """Base stream speeds, interference table, and per-op launch overhead.

    w_comp is consumed by GeMM work units (element-operations/second);
    w_comm and w_mem are element throughputs of the all-to-all and
    host-copy streams.  Compute only reaches w_comp once the micro-batch
    has at least compute_saturation tokens; below that the effective rate
    is w_comp * b / compute_saturation.
    """

    w_comp: float
    w_comm: float
    w_mem: float
    slowdown: SlowdownTable = field(default_factory=SlowdownTable)
    launch_overhead: float = 0.0
    launch_overhead_overrides: Mapping[str, float] = field(default_factory=dict)
    compute_saturation: int = 1

    def __post_init__(self) -> None:
        for name in ("w_comp", "w_comm", "w_mem"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.launch_overhead < 0:
            raise ValueError(f"launch_overhead must be >= 0, got {self.launch_overhead}")
        for stream, value in dict(self.launch_overhead_overrides).items():
            if stream not in STREAMS:
                raise ValueError(f"unknown stream {stream!r} in launch_overhead_overrides")
            if value < 0:
                raise ValueError(f"launch overhead for {stream} must be >= 0, got {value}")
        if self.compute_saturation < 1:
            raise ValueError(f"compute_saturation must be >= 1, got {self.compute_saturation}")
        object.__setattr__(
            self, "launch_overhead_overrides", dict(self.launch_overhead_overrides)
        )

    @property
    def alpha(self) -> float:
        """Compute-to-communication speed ratio."""
        return self.w_comp / self.w_comm

    @property
    def beta(self) -> float:
        """Compute-to-host-copy speed ratio."""
        return self.w_comp / self.w_mem

    def compute_rate(self, tokens: int) -> float:
        """Effective compute speed for a micro-batch of `tokens`."""
        return self.w_comp * min(1.0, tokens / self.compute_saturation)

    def base_rate(self, stream: str, tokens: int) -> float:
        if stream == COMPUTE_STREAM:
            return self.compute_rate(tokens)
        if stream == COLLECTIVE_STREAM:
            return self.w_comm
        if stream == COPY_STREAM:
            return self.w_mem
        raise ValueError(f"unknown stream {stream!r}")

    def launch_overhead_for(self, stream: str) -> float:
        return self.launch_overhead_overrides.get(stream, self.launch_overhead)


class TensorRole(str, Enum):
    """The five tensors of one MoE layer's data flow.

    All have shape (tokens, model_dim) except MIDDLE, the expert FFN's
    hidden activation, which is (tokens, hidden_dim).
    """

    INPUT = "input"
    DISPATCHED_INPUT = "dispatched_input"
    MIDDLE = "middle"
    DISPATCHED_OUTPUT = "dispatched_output"
    OUTPUT = "output"

    def width(self, spec: ModelSpec) -> int:
        return spec.hidden_dim if self is TensorRole.MIDDLE else spec.model_dim

    def elements(self, spec: ModelSpec, tokens: int) -> int:
        return tokens * self.width(spec)

    def partition_elements(self, spec: ModelSpec, tokens: int, partitions: int) -> int:
        return micro_batch_size(tokens, partitions) * self.width(spec)


class RestoreMethod(str, Enum):
    """How an overwritten tensor is brought back for the backward pass."""

    KEPT = "kept"            # never overwritten, no reuse
    OFFLOAD = "offload"      # copied to host in forward, prefetched back
    COMMUNICATE = "communicate"  # re-dispatched from the resident input tensor
    RECOMPUTE = "recompute"  # recomputed from the dispatched input


@dataclass(frozen=True)
class ReuseStrategy:
    """One row of the memory-reuse strategy table.

    q_fw/q_bw are per-micro-batch workload multipliers for the
    (compute, collective, copy) streams; comm_slowdown_mode and
    copy_slowdown_mode say which interference factors the analytical cost
    model applies for this strategy (strategies without copy traffic leave
    the copy stream idle, so communication only contends with compute).
    """

    name: str
    restore_dispatched_input: RestoreMethod
    restore_middle: RestoreMethod
    q_fw: tuple[int, int, int]
    q_bw: tuple[int, int, int]
    comm_slowdown_mode: str  # "mu_comp" or "mu_all"
    copy_slowdown_mode: str | None  # None (no copy stream) or "eta_all"

    @property
    def uses_copy_stream(self) -> bool:
        return self.q_fw[2] > 0 or self.q_bw[2] > 0

    @property
    def saves_memory(self) -> bool:
        return self.name != "none"

    @staticmethod
    def by_name(name: str) -> "ReuseStrategy":
        try:
            return STRATEGIES[name.lower()]
        except KeyError:
            raise KeyError(
             f"unknown strategy {name!r}; expected one of {', '.join(STRATEGIES)}"
            ) from None


NO_REUSE = ReuseStrategy(
    "none", RestoreMethod.KEPT, RestoreMethod.KEPT,
    (2, 2, 0), (4, 2, 0), "mu_comp", None,
)
S1 = ReuseStrategy(
    "s1", RestoreMethod.OFFLOAD, RestoreMethod.OFFLOAD,
    (2, 2, 5), (4, 2, 5), "mu_all", "eta_all",
)
S2 = ReuseStrategy(
    "s2", RestoreMethod.COMMUNICATE, RestoreMethod.OFFLOAD,
    (2, 2, 4), (4, 3, 4), "mu_all", "eta_all",
)
S3 = ReuseStrategy(
    "s3", RestoreMethod.OFFLOAD, RestoreMethod.RECOMPUTE,
    (2, 2, 1), (5, 2, 1), "mu_all", "eta_all",
)
S4 = ReuseStrategy(
    "s4", RestoreMethod.COMMUNICATE, RestoreMethod.RECOMPUTE,
    (2, 2, 0), (5, 3, 0), "mu_comp", None,
)

STRATEGIES: dict[str, ReuseStrategy] = {
    s.name: s for s in (NO_REUSE, S1, S2, S3, S4)
}
REUSE_STRATEGIES = (S1, S2, S3, S4)
