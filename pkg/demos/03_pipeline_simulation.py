#!/usr/bin/env python3
"""Watching the pipeline run: overlap, granularity, launch overhead.

Simulates one MoE layer step (forward + backward) on a synthetic
communication-bound profile and shows:

1. how splitting the batch overlaps the all-to-all with expert compute,
2. the makespan across granularities, including the overhead-driven
   sweet spot in the middle,
3. an ASCII timeline of the three streams for a small forward pass.

Run:  python demos/03_pipeline_simulation.py
"""

from moepipesim import (
    BatchSpec,
    HardwareProfile,
    ModelSpec,
    NO_REUSE,
    ReuseStrategy,
    SlowdownTable,
    build_schedule,
    simulate,
)
from moepipesim.pipesim import memory_components

spec = ModelSpec(768, 3072, 64, 8)
table = SlowdownTable.from_factors(mu_comp=0.8, mu_all=0.6, sigma_comm=0.9,
                                   eta_all=0.7)
hw = HardwareProfile(1.5e14, 1.25e10, 8e9, slowdown=table,
                     launch_overhead=2e-5, compute_saturation=512)

print("=" * 72)
print("1. Granularity sweep at B=16384 (communication-bound profile)")
print("=" * 72)


def run(n, strategy_name, reuse):
    dag = build_schedule(spec, BatchSpec(16384, n),
                         ReuseStrategy.by_name(strategy_name),
                         reuse_enabled=reuse, direction="both")
    trace = simulate(dag, hw)
    peak = memory_components(trace).total * spec.element_bytes / 2**30
    return trace.makespan * 1e3, peak


print(f"\n  {'':>3}  {'plain pipeline':>22}  {'with reuse (s4)':>22}")
print(f"  {'n':>3}  {'ms':>10}  {'peak GiB':>10}  {'ms':>10}  {'peak GiB':>10}")
for n in (1, 2, 4, 8, 16, 32):
    ms_plain, peak_plain = run(n, "none", False)
    if n == 1:
        print(f"  {n:>3}  {ms_plain:>10.3f}  {peak_plain:>10.3f}  "
              f"{'-':>10}  {'-':>10}")
    else:
        ms_reuse, peak_reuse = run(n, "s4", True)
        print(f"  {n:>3}  {ms_plain:>10.3f}  {peak_plain:>10.3f}  "
              f"{ms_reuse:>10.3f}  {peak_reuse:>10.3f}")
print("\nThe plain pipeline dips at a middle granularity: a single partition"
      "\nserializes the all-to-alls against the GeMMs, while very fine splits"
      "\ndrown in per-op launch overhead.  Reuse pays some time back for the"
      "\nrestore work but keeps shrinking the peak as n grows.")

print()
print("=" * 72)
print("2. ASCII timeline, forward pass, n=4, no reuse")
print("=" * 72)
dag = build_schedule(spec, BatchSpec(4096, 4), NO_REUSE, False, "forward")
trace = simulate(dag, hw)
span = trace.makespan
width = 64
print(f"\n  one column = {span / width * 1e6:.0f} us")
for stream in ("collective", "compute", "copy"):
    cells = [" "] * width
    for e in trace.events:
        if e.stream != stream:
            continue
        lo = min(int(e.start / span * width), width - 1)
        hi = max(min(int(e.end / span * width), width), lo + 1)
        label = e.op_id[0] if e.op_id[0] != "D" else "d"
        for i in range(lo, hi):
            cells[i] = str(e.partition) if cells[i] == " " else cells[i]
        cells[lo] = label
    print(f"  {stream:>10} |{''.join(cells)}|")
print("\nS/R mark the two all-to-alls, C the expert GeMMs; digits are the"
      "\npartition indices filling the gaps.  Dispatches run one partition"
      "\nahead so the combine of partition i overlaps the compute of i+1.")

print()
print("=" * 72)
print("3. Exporting timelines")
print("=" * 72)
print("""
The same trace serializes to JSON lines or to the browser trace-event
format (chrome://tracing, Perfetto):

    moepipesim simulate --preset moe-gpt3-s --batch 4096 --n 4 \\
        --out trace.json --trace-format trace-event
""")
