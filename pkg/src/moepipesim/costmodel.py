"""Analytical per-micro-batch cost model and reuse-strategy selection.

A pipeline stage processes one micro-batch of b tokens on three concurrent
streams.  Base volumes per unit of work:

    compute   b * hidden_dim * model_dim   element-operations per GeMM
    collective b * model_dim               elements per all-to-all
    copy      b * model_dim                elements per dispatched-input move

Each strategy multiplies these by its (q1, q2, q3) workload vector, and the
stage cost is the slowest stream's time.  Copying the hidden activation
counts four work units on the copy stream (it is four times wider in every
model family considered), which is already folded into the q3 entries.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import (
    COMM,
    COMP,
    MEM,
    HardwareProfile,
    ModelSpec,
    ReuseStrategy,
    STRATEGIES,
)

FORWARD = "forward"
BACKWARD = "backward"


@dataclass(frozen=True)
class BaseVolumes:
    """Per-unit work volumes for a micro-batch of b tokens."""

    v_comp: int
    v_comm: int
    v_mem: int


def base_volumes(spec: ModelSpec, micro_batch: int) -> BaseVolumes:
    if micro_batch < 1:
        raise ValueError(f"micro_batch must be >= 1, got {micro_batch}")
    return BaseVolumes(
        v_comp=micro_batch * spec.hidden_dim * spec.model_dim,
        v_comm=micro_batch * spec.model_dim,
        v_mem=micro_batch * spec.model_dim,
    )


@dataclass(frozen=True)
class CostBreakdown:
    """Per-stream time of one pipeline stage; the stage takes the max."""

    t_comp: float
    t_comm: float
    t_mem: float
    direction: str

    @property
    def c_total(self) -> float:
        return max(self.t_comp, self.t_comm, self.t_mem)

    def to_dict(self) -> dict:
        return {
            "t_comp": self.t_comp,
            "t_comm": self.t_comm,
            "t_mem": self.t_mem,
            "c_total": self.c_total,
            "direction": self.direction,
        }


def _strategy_factors(hw: HardwareProfile, strategy: ReuseStrategy) -> tuple[float, float, float]:
    """(sigma, mu, eta) for the streams this strategy keeps concurrently busy."""
    if strategy.comm_slowdown_mode == "mu_all":
        active_with_comm = frozenset({COMP, MEM})
        active_with_comp = frozenset({COMM, MEM})
    else:
        active_with_comm = frozenset({COMP})
        active_with_comp = frozenset({COMM})
    sigma = hw.slowdown.factor(COMP, active_with_comp)
    mu = hw.slowdown.factor(COMM, active_with_comm)
    eta = hw.slowdown.factor(MEM, frozenset({COMP, COMM})) if strategy.copy_slowdown_mode else 1.0
    return sigma, mu, eta


def stage_cost(
    spec: ModelSpec,
    hw: HardwareProfile,
    micro_batch: int,
    strategy: ReuseStrategy,
    direction: str = FORWARD,
) -> CostBreakdown:
    """Evaluate one stage of the given strategy and direction.

    Compute speed includes the saturation factor min(1, b / b_sat); the
    communication and copy factors are the ones this strategy's concurrency
    pattern induces (no copy stream -> communication only contends with
    compute).
    """
    if direction not in (FORWARD, BACKWARD):
        raise ValueError(f"direction must be forward or backward, got {direction!r}")
    v = base_volumes(spec, micro_batch)
    q1, q2, q3 = strategy.q_fw if direction == FORWARD else strategy.q_bw
    sigma, mu, eta = _strategy_factors(hw, strategy)
    t_comp = q1 * v.v_comp / (sigma * hw.compute_rate(micro_batch))
    t_comm = q2 * v.v_comm / (mu * hw.w_comm)
    t_mem = q3 * v.v_mem / (eta * hw.w_mem) if q3 else 0.0
    return CostBreakdown(t_comp, t_comm, t_mem, direction)


@dataclass(frozen=True)
class StrategySelection:
    """Result of ranking the reuse strategies for one configuration."""

    strategy: ReuseStrategy
    forward: CostBreakdown
    backward: CostBreakdown
    costs: dict[str, tuple[CostBreakdown, CostBreakdown]]  # includes "none"
    alpha: float
    beta: float

    @property
    def total(self) -> float:
        return self.forward.c_total + self.backward.c_total

    def to_dict(self) -> dict:
        return {
            "chosen": self.strategy.name,
            "total": self.total,
            "alpha": self.alpha,
            "beta": self.beta,
            "strategies": {
                name: {
                    "forward": fw.to_dict(),
                    "backward": bw.to_dict(),
                    "total": fw.c_total + bw.c_total,
                }
                for name, (fw, bw) in self.costs.items()
            },
        }


# Tie-break preference: no host-copy traffic first (PCIe contention is the
# risk), then less copy volume.
_PREFERENCE = ("s4", "s3", "s2", "s1")


def select_strategy(
    spec: ModelSpec,
    hw: HardwareProfile,
    micro_batch: int,
) -> StrategySelection:
    """Pick the cheapest memory-saving strategy (forward + backward).

    The no-reuse row is evaluated for comparison but never selected since it
    saves nothing.  Exact ties go to the strategy with the least host-copy
    traffic (s4, then s3, s2, s1).
    """
    costs = {
        s.name: (
            stage_cost(spec, hw, micro_batch, s, FORWARD),
            stage_cost(spec, hw, micro_batch, s, BACKWARD),
        )
        for s in STRATEGIES.values()
    }
    best_name = None
    best_total = None
    for name in _PREFERENCE:
        fw, bw = costs[name]
        total = fw.c_total + bw.c_total
        if best_total is None or total < best_total:
            best_name, best_total = name, total
    fw, bw = costs[best_name]
    return StrategySelection(
        strategy=STRATEGIES[best_name],
        forward=fw,
        backward=bw,
        costs=costs,
        alpha=hw.alpha,
        beta=hw.beta,
    )


__all__ = [
    "BACKWARD",
    "BaseVolumes",
    "CostBreakdown",
    "FORWARD",
    "StrategySelection",
    "base_volumes",
    "select_strategy",
    "stage_cost",
]
