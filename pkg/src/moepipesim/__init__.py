"""Desk-scale planner and discrete-event simulator for MoE training pipelines.

The package models one MoE layer's forward/backward step: its memory
footprint (closed forms and simulator-measured), a three-stream cost model
with cross-stream interference, a discrete-event pipeline simulator with
shared-buffer constraints, and an online adaptive search for the pipeline
granularity.
"""

from .core import (
    BatchSpec,
    HardwareProfile,
    InvalidPartitioningError,
    ModelSpec,
    NO_REUSE,
    REUSE_STRATEGIES,
    RestoreMethod,
    ReuseNotApplicableError,
    ReuseStrategy,
    S1,
    S2,
    S3,
    S4,
    STRATEGIES,
    SlowdownTable,
    TensorRole,
    micro_batch_size,
)
from .memmodel import (
    MemoryReport,
    build_report,
    mem_activations_baseline,
    mem_buffers_baseline,
    mem_model_states,
    mem_pipeline,
    mem_reuse_savings,
    mem_saving_ratio,
)
from .costmodel import (
    BaseVolumes,
    CostBreakdown,
    StrategySelection,
    base_volumes,
    select_strategy,
    stage_cost,
)
from .pipesim import (
    ScheduleDag,
    ScheduleError,
    ScheduleTrace,
    brute_force_makespan,
    build_schedule,
    makespan,
    memory_components,
    peak_memory,
    replay_validate,
    simulate,
)
from .autotune import (
    AdaptiveController,
    GranularityIndex,
    NoCandidateError,
    TrialBudget,
    generate_workload,
    noisy_adapter,
    search_best_gran,
    simulator_adapter,
)

__version__ = "0.1.0"
