"""Online adaptive pipeline-granularity search.

Training batch sizes vary step to step, and trialing every candidate
partition count for every batch size is too expensive.  The controller here
exploits that the optimal partition count grows monotonically with the
batch size: discovered optima are stored as disjoint batch-size ranges
mapped to a partition count, plus an exact-match cache.  A lookup that hits
the cache or a range costs no trials; a miss runs the measurement adapter
over the candidate set once and then grows the matching range so nearby
batch sizes are covered for free.
"""

from __future__ import annotations

import logging
from bisect import insort
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import BatchSpec, HardwareProfile, ModelSpec, ReuseStrategy, micro_batch_size
from .pipesim import BOTH, build_schedule, simulate


logger = logging.getLogger(__name__)


class NoCandidateError(ValueError):
    """No feasible partition count for the requested batch size."""


# adapter(spec, hw, strategy, tokens, partitions) -> measured seconds
MeasurementAdapter = Callable[[ModelSpec, HardwareProfile, ReuseStrategy, int, int], float]


def simulator_adapter(direction: str = BOTH, reuse: bool = True) -> MeasurementAdapter:
    """Noiseless measurement: simulate the pass(es) and return the makespan.

    Reuse is only meaningful for a memory-saving strategy with n >= 2;
    other configurations fall back to the plain pipeline.
    """

    def measure(spec: ModelSpec, hw: HardwareProfile, strategy: ReuseStrategy,
                tokens: int, partitions: int) -> float:
        enabled = reuse and strategy.saves_memory and partitions >= 2
        dag = build_schedule(spec, BatchSpec(tokens, partitions), strategy,
                             reuse_enabled=enabled, direction=direction)
        return simulate(dag, hw).makespan

    return measure


def noisy_adapter(base: MeasurementAdapter, seed: int, rel_scale: float) -> MeasurementAdapter:
    """Wrap an adapter with multiplicative lognormal measurement noise."""
    rng = np.random.default_rng(seed)

    def measure(spec, hw, strategy, tokens, partitions):
        return base(spec, hw, strategy, tokens, partitions) * float(
            rng.lognormal(mean=0.0, sigma=rel_scale)
        )

    return measure


@dataclass(frozen=True)
class TrialBudget:
    """Search configuration: candidate partition counts and trial effort."""

    candidates: tuple[int, ...] = (1, 2, 4, 8, 16)
    trials_per_candidate: int = 1
    adapter: MeasurementAdapter = field(default_factory=simulator_adapter)
    min_micro_batch: int = 1

    def __post_init__(self) -> None:
        if not self.candidates:
            raise ValueError("candidate set must not be empty")
        if list(self.candidates) != sorted(self.candidates):
            raise ValueError("candidates must be sorted ascending")
        if any(n < 1 for n in self.candidates):
            raise ValueError("candidates must be >= 1")
        if self.trials_per_candidate < 1:
            raise ValueError("trials_per_candidate must be >= 1")

    def feasible(self, tokens: int) -> list[int]:
        return [
            n for n in self.candidates
            if n <= tokens and micro_batch_size(tokens, n) >= self.min_micro_batch
        ]


def search_best_gran(
    tokens: int,
    spec: ModelSpec,
    hw: HardwareProfile,
    strategy: ReuseStrategy,
    budget: TrialBudget,
) -> int:
    """Trial every feasible candidate and return the fastest partition count.

    Trial makespans are averaged per candidate; exact ties go to the
    smaller count (fewer launches).
    """
    feasible = budget.feasible(tokens)
    if not feasible:
        raise NoCandidateError(
            f"no candidate in {budget.candidates} is feasible for B={tokens} "
            f"with min_micro_batch={budget.min_micro_batch}"
        )
    best_n = None
    best_time = None
    for n in feasible:
        total = 0.0
        for _ in range(budget.trials_per_candidate):
            total += budget.adapter(spec, hw, strategy, tokens, n)
        mean = total / budget.trials_per_candidate
        if best_time is None or mean < best_time:
            best_n, best_time = n, mean
    return best_n


class GranularityIndex:
    """Disjoint inclusive batch-size ranges -> partition count, plus a cache.

    Ranges are kept sorted by lower bound; find() is a hand-rolled binary
    search so probe counts can be asserted logarithmic.  Extending a range
    toward a new batch size clips at the nearest neighboring range rather
    than overlapping it, counting the conflict (this only happens when the
    monotonicity hypothesis is violated by noisy measurements).
    """

    def __init__(self) -> None:
        self.ranges: list[tuple[int, int, int]] = []  # (lo, hi, n), sorted by lo
        self.range_of_n: dict[int, tuple[int, int]] = {}
        self.cache: dict[int, int] = {}
        self.find_calls = 0
        self.find_probes = 0
        self.max_probes_per_find = 0
        self.conflicts = 0

    def __len__(self) -> int:
        return len(self.ranges)

    def find(self, tokens: int) -> tuple[int, int, int] | None:
        """The unique range containing `tokens`, or None."""
        self.find_calls += 1
        probes = 0
        lo, hi = 0, len(self.ranges)
        while lo < hi:
            probes += 1
            mid = (lo + hi) // 2
            if self.ranges[mid][0] <= tokens:
                lo = mid + 1
            else:
                hi = mid
        self.find_probes += probes
        self.max_probes_per_find = max(self.max_probes_per_find, probes)
        if lo == 0:
            return None
        cand = self.ranges[lo - 1]
        return cand if cand[0] <= tokens <= cand[1] else None

    def _neighbors(self, lo: int) -> tuple[tuple[int, int, int] | None, tuple[int, int, int] | None]:
        idx = 0
        while idx < len(self.ranges) and self.ranges[idx][0] < lo:
            idx += 1
        left = self.ranges[idx - 1] if idx > 0 else None
        right = self.ranges[idx] if idx < len(self.ranges) else None
        return left, right

    def insert(self, lo: int, hi: int, n: int) -> None:
        if lo > hi:
            raise ValueError(f"empty range [{lo}, {hi}]")
        left, right = self._neighbors(lo)
        if (left and left[1] >= lo) or (right and right[0] <= hi):
            raise ValueError(f"range [{lo}, {hi}] overlaps an existing range")
        insort(self.ranges, (lo, hi, n))
        self.range_of_n[n] = (lo, hi)

    def extend(self, n: int, tokens: int) -> None:
        """Grow n's range to cover `tokens`, clipping at neighbors."""
        lo, hi = self.range_of_n[n]
        new_lo, new_hi = min(tokens, lo), max(tokens, hi)
        idx = self.ranges.index((lo, hi, n))
        if idx > 0 and self.ranges[idx - 1][1] >= new_lo:
            new_lo = self.ranges[idx - 1][1] + 1
            self.conflicts += 1
            logger.warning(
                "range for n=%d clipped at %d: B=%d contradicts the "
                "monotonicity hypothesis", n, new_lo, tokens)
        if idx + 1 < len(self.ranges) and self.ranges[idx + 1][0] <= new_hi:
            new_hi = self.ranges[idx + 1][0] - 1
            self.conflicts += 1
            logger.warning(
                "range for n=%d clipped at %d: B=%d contradicts the "
                "monotonicity hypothesis", n, new_hi, tokens)
        self.ranges[idx] = (new_lo, new_hi, n)
        self.range_of_n[n] = (new_lo, new_hi)

    def check_integrity(self) -> None:
        for (a_lo, a_hi, _), (b_lo, b_hi, _) in zip(self.ranges, self.ranges[1:]):
            if a_lo > a_hi or b_lo > b_hi or a_hi >= b_lo:
                raise AssertionError(f"ranges not disjoint/sorted: {self.ranges}")
        for tokens, n in self.cache.items():
            hit = None
            for lo, hi, rn in self.ranges:
                if lo <= tokens <= hi:
                    hit = rn
                    break
            if hit is not None and hit != n:
                raise AssertionError(
                    f"cache maps B={tokens} to n={n} but its range holds n={hit}"
                )


@dataclass
class SearchStats:
    calls: int = 0
    cache_hits: int = 0
    range_hits: int = 0
    searches: int = 0
    trials: int = 0

    @property
    def hit_rate(self) -> float:
        return (self.cache_hits + self.range_hits) / self.calls if self.calls else 0.0


class AdaptiveController:
    """Serialized granularity decisions for one training loop."""

    def __init__(
        self,
        spec: ModelSpec,
        hw: HardwareProfile,
        strategy: ReuseStrategy,
        budget: TrialBudget,
    ) -> None:
        self.spec = spec
        self.hw = hw
        self.strategy = strategy
        self.budget = budget
        self.index = GranularityIndex()
        self.stats = SearchStats()

    def adaptive_granularity(self, tokens: int) -> int:
        """Resolve the partition count for one batch.

        Cache hit and range hit cost zero trials; a miss searches and then
        records a singleton range or extends the matching one.
        """
        if tokens < 1:
            raise ValueError(f"tokens must be >= 1, got {tokens}")
        self.stats.calls += 1
        cached = self.index.cache.get(tokens)
        if cached is not None:
            self.stats.cache_hits += 1
            return cached
        hit = self.index.find(tokens)
        if hit is not None:
            n = hit[2]
            self.stats.range_hits += 1
        else:
            n = search_best_gran(tokens, self.spec, self.hw, self.strategy, self.budget)
            self.stats.searches += 1
            self.stats.trials += len(self.budget.feasible(tokens)) * self.budget.trials_per_candidate
            if n in self.index.range_of_n:
                self.index.extend(n, tokens)
            else:
                self.index.insert(tokens, tokens, n)
        self.index.cache[tokens] = n
        return n


def generate_workload(
    seed: int,
    iterations: int,
    b_min: int,
    b_max: int,
    distribution: str = "uniform",
    *,
    step: int = 1,
    tail_exponent: float = 1.5,
) -> list[int]:
    """Deterministic batch-size sequence on the grid {b_min, b_min+step, ...}.

    "uniform" draws every grid point equally; "zipf" draws grid point k
    (ascending) with probability proportional to (k+1)**-tail_exponent, so
    small batches dominate with a polynomial tail of large ones.
    """
    if iterations < 1:
        raise ValueError(f"iterations must be >= 1, got {iterations}")
    if b_min < 1 or b_min > b_max:
        raise ValueError(f"need 1 <= b_min <= b_max, got [{b_min}, {b_max}]")
    if step < 1:
        raise ValueError(f"step must be >= 1, got {step}")
    grid = np.arange(b_min, b_max + 1, step, dtype=np.int64)
    rng = np.random.default_rng(seed)
    if distribution == "uniform":
        picks = rng.integers(0, len(grid), size=iterations)
    elif distribution == "zipf":
        weights = (np.arange(len(grid)) + 1.0) ** -tail_exponent
        weights /= weights.sum()
        picks = rng.choice(len(grid), size=iterations, p=weights)
    else:
        raise ValueError(f"unknown distribution {distribution!r}; use uniform or zipf")
    return [int(grid[i]) for i in picks]
