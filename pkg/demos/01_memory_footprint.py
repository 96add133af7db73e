#!/usr/bin/env python3
"""Where the memory goes in one MoE layer, and what reuse buys back.

Walks the closed-form model over the three bundled layer presets:

1. the baseline breakdown (model states / activations / temporary buffers)
   and how activations take over as the token batch grows,
2. the pipelined footprint, where overlapping partitions push temporary
   buffers up to the activation footprint,
3. the reuse savings and the saving ratio as the partition count grows.

Run:  python demos/01_memory_footprint.py
"""

from moepipesim import (
    ModelSpec,
    build_report,
    mem_pipeline,
    mem_reuse_savings,
    mem_saving_ratio,
)

PRESETS = {
    "moe-gpt3-s": ModelSpec(768, 3072, 64, 8),
    "moe-bert-l": ModelSpec(1024, 4096, 64, 8),
    "moe-gpt3-xl": ModelSpec(2048, 8192, 64, 8),
}

GIB = 1024 ** 3


def gib(elements: int, spec: ModelSpec) -> float:
    return elements * spec.element_bytes / GIB


print("=" * 72)
print("1. Baseline breakdown: activations dominate at large batch sizes")
print("=" * 72)
for name, spec in PRESETS.items():
    print(f"\n{name} (M={spec.model_dim}, H={spec.hidden_dim}, "
          f"E={spec.num_experts}):")
    print(f"  {'B':>7}  {'states GiB':>11}  {'acts GiB':>9}  {'bufs GiB':>9}  "
          f"{'acts share':>10}")
    for tokens in (256, 1024, 4096, 16384):
        r = build_report(spec, tokens)
        share = (r.activations + r.buffers) / r.total
        print(f"  {tokens:>7}  {gib(r.model_states, spec):>11.3f}  "
              f"{gib(r.activations, spec):>9.3f}  {gib(r.buffers, spec):>9.3f}  "
              f"{share:>9.0%}")

print()
print("=" * 72)
print("2. Pipelining lifts temporary buffers to the activation footprint")
print("=" * 72)
spec = PRESETS["moe-gpt3-s"]
tokens = 16384
base = build_report(spec, tokens)
act_pipe, buf_pipe = mem_pipeline(spec, tokens)
print(f"\nmoe-gpt3-s at B={tokens}:")
print(f"  sequential buffers : {gib(base.buffers, spec):.3f} GiB")
print(f"  pipelined buffers  : {gib(buf_pipe, spec):.3f} GiB "
      f"(= activations, every partition slice in flight)")

print()
print("=" * 72)
print("3. Memory reuse: two slots for the dispatched pair, one for the hidden")
print("=" * 72)
print(f"\nmoe-gpt3-s at B={tokens}:")
print(f"  {'n':>3}  {'saved/category GiB':>19}  {'total GiB':>10}  {'ratio':>6}")
for n in (2, 4, 8, 16):
    saved = mem_reuse_savings(spec, tokens, n)
    report = build_report(spec, tokens, n, reuse=True)
    ratio = mem_saving_ratio(spec, tokens, n)
    print(f"  {n:>3}  {gib(saved, spec):>19.3f}  {gib(report.total, spec):>10.3f}"
          f"  {ratio:>6.1%}")
print("\nThe ratio climbs with n toward the point where only the input and"
      "\noutput tensors plus the fixed slot pools remain: about 62% of the"
      "\npipelined footprint for this layer.")
