"""Closed-form memory footprint model for one MoE layer.

Three components are tracked, all in element counts (bytes are a reporting
concern): model states (parameters, gradients and Adam moments of the gating
network plus one expert FFN), activations (the five data-flow tensors held
for the backward pass), and temporary buffers (the activation gradients of
the backward pass).  Small routing tensors are excluded throughout; the
simulator uses the same convention so the two agree exactly.

Pipelined execution keeps per-partition slices of the three middle tensors
in flight concurrently, which lifts the temporary-buffer peak to the
activation footprint.  Memory reuse cycles a fixed pool (two slots for the
dispatched input/output, one for the hidden activation) across partitions,
and the savings have a closed form evaluated here in exact rational
arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .core import ModelSpec, ReuseNotApplicableError, micro_batch_size


def _check_tokens(tokens: int) -> None:
    if tokens < 1:
        raise ValueError(f"tokens must be >= 1, got {tokens}")


def _check_partitions(partitions: int) -> None:
    if partitions < 2:
        raise ReuseNotApplicableError(
            f"memory reuse needs at least 2 partitions, got {partitions}; "
            "use the pipeline/baseline figures for an unpartitioned run"
        )


def mem_model_states(spec: ModelSpec) -> int:
    """Parameters, gradients and two Adam moments: 4x the parameter count.

    Parameters are the token router (num_experts * model_dim) plus one
    expert FFN (two model_dim x hidden_dim weight matrices).
    """
    params = spec.num_experts * spec.model_dim + 2 * spec.hidden_dim * spec.model_dim
    return 4 * params


def mem_activations_baseline(spec: ModelSpec, tokens: int) -> int:
    """Forward activations: four (B, M) tensors plus the (B, H) hidden one."""
    _check_tokens(tokens)
    return 4 * tokens * spec.model_dim + tokens * spec.hidden_dim


def mem_buffers_baseline(spec: ModelSpec, tokens: int) -> int:
    """Peak gradient scratch for strictly sequential execution.

    Gradients are discarded as soon as consumed, so only two adjacent
    tensors coexist; the peak pair is one (B, M) and the (B, H) gradient
    (assumes hidden_dim >= model_dim, true for every FFN of interest).
    """
    _check_tokens(tokens)
    return tokens * spec.model_dim + tokens * spec.hidden_dim


def mem_pipeline(spec: ModelSpec, tokens: int) -> tuple[int, int]:
    """(activations, buffers) under pipelining without reuse; the two are equal.

    Overlapping partitions keep every per-partition gradient slice alive at
    the peak, so temporary buffers grow to match the activation footprint.
    """
    _check_tokens(tokens)
    act = mem_activations_baseline(spec, tokens)
    return act, act


def mem_reuse_savings(spec: ModelSpec, tokens: int, partitions: int) -> int:
    """Elements saved per category (activations, and equally buffers) by reuse.

    The dispatched input/output shrink from full tensors to two
    partition-sized slots each, the hidden activation to one slot:

        B * (2M * (n-2)/n + H * (n-1)/n)

    Evaluated as exact rationals with a final floor; for n | B the value is
    integral and the floor is a no-op.
    """
    _check_tokens(tokens)
    _check_partitions(partitions)
    n = partitions
    per_token = 2 * spec.model_dim * Fraction(n - 2, n) + spec.hidden_dim * Fraction(n - 1, n)
    return int(tokens * per_token)


def mem_saving_ratio(spec: ModelSpec, tokens: int, partitions: int) -> float:
    """Fraction of the pipelined footprint reclaimed by memory reuse.

    Savings from both categories over model states plus the two pipelined
    components; strictly increasing in the partition count and < 1 always.
    """
    saved = 2 * mem_reuse_savings(spec, tokens, partitions)
    act, buf = mem_pipeline(spec, tokens)
    return saved / (mem_model_states(spec) + act + buf)


@dataclass(frozen=True)
class MemoryReport:
    """Element counts per component for one configuration."""

    model_states: int
    activations: int
    buffers: int
    element_bytes: int
    saving_ratio: float | None = None

    def __post_init__(self) -> None:
        for name in ("model_states", "activations", "buffers"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")

    @property
    def total(self) -> int:
        return self.model_states + self.activations + self.buffers

    def to_dict(self) -> dict:
        d = {
            "model_states_elements": self.model_states,
            "activations_elements": self.activations,
            "buffers_elements": self.buffers,
            "total_elements": self.total,
            "model_states_bytes": self.model_states * self.element_bytes,
            "activations_bytes": self.activations * self.element_bytes,
            "buffers_bytes": self.buffers * self.element_bytes,
            "total_bytes": self.total * self.element_bytes,
        }
        if self.saving_ratio is not None:
            d["saving_ratio"] = self.saving_ratio
        return d

    def as_table(self) -> str:
        rows = [
            ("model states", self.model_states),
            ("activations", self.activations),
            ("buffers", self.buffers),
            ("total", self.total),
        ]
        width = max(len(name) for name, _ in rows)
        lines = [
            f"{'component':<{width}}  {'elements':>16}  {'bytes':>16}",
        ]
        for name, elems in rows:
            lines.append(f"{name:<{width}}  {elems:>16,}  {elems * self.element_bytes:>16,}")
        if self.saving_ratio is not None:
            lines.append(f"{'saving ratio':<{width}}  {self.saving_ratio:>16.4f}")
        return "\n".join(lines)


def build_report(
    spec: ModelSpec,
    tokens: int,
    partitions: int = 1,
    reuse: bool = False,
) -> MemoryReport:
    """Evaluate the model for one configuration.

    partitions == 1 gives the sequential baseline; partitions >= 2 the
    pipelined footprint, minus the reuse savings when `reuse` is set.
    """
    micro_batch_size(tokens, partitions)  # validates the pair
    ms = mem_model_states(spec)
    if partitions == 1:
        if reuse:
            _check_partitions(partitions)  # raises ReuseNotApplicableError
        act = mem_activations_baseline(spec, tokens)
        buf = mem_buffers_baseline(spec, tokens)
        return MemoryReport(ms, act, buf, spec.element_bytes)
    act, buf = mem_pipeline(spec, tokens)
    ratio = None
    if reuse:
        saved = mem_reuse_savings(spec, tokens, partitions)
        act -= saved
        buf -= saved
        ratio = mem_saving_ratio(spec, tokens, partitions)
    return MemoryReport(ms, act, buf, spec.element_bytes, saving_ratio=ratio)
