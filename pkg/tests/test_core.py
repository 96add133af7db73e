"""Domain-type invariants: geometry validation, strategy table, slowdowns."""

import dataclasses
import random

import pytest

from moepipesim import (
    BatchSpec,
    HardwareProfile,
    InvalidPartitioningError,
    ModelSpec,
    NO_REUSE,
    RestoreMethod,
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


def test_micro_batch_size_examples():
    assert micro_batch_size(8192, 4) == 2048
    assert micro_batch_size(10, 3) == 4
    assert micro_batch_size(4096, 1) == 4096


@pytest.mark.parametrize("tokens,parts", [(10, 11), (10, 0), (0, 1), (5, -1)])
def test_micro_batch_size_rejects_bad_partitioning(tokens, parts):
    with pytest.raises(InvalidPartitioningError):
        micro_batch_size(tokens, parts)


def test_model_spec_validation():
    spec = ModelSpec(768, 3072, 64, 8)
    assert spec.element_bytes == 2
    with pytest.raises(ValueError):
        ModelSpec(0, 1, 1, 1)
    with pytest.raises(ValueError):
        ModelSpec(1, 1, 7, 2)  # experts not divisible by nodes
    with pytest.raises(ValueError):
        ModelSpec(1, 1, 1, 1, element_bytes=3)


def test_model_spec_is_immutable():
    spec = ModelSpec(8, 32, 4, 4)
    with pytest.raises(dataclasses.FrozenInstanceError):
        spec.model_dim = 16


def test_batch_spec_partition_sizes():
    rng = random.Random(0)
    for _ in range(200):
        tokens = rng.randint(1, 5000)
        parts = rng.randint(1, tokens)
        batch = BatchSpec(tokens, parts)
        sizes = batch.partition_sizes()
        assert len(sizes) == parts
        assert sum(sizes) == tokens
        assert max(sizes) == batch.micro_batch
        assert max(sizes) - min(sizes) <= 1
    with pytest.raises(InvalidPartitioningError):
        BatchSpec(4, 5)


def test_strategy_table_matches_published_q_vectors():
    expected = {
        "none": ((2, 2, 0), (4, 2, 0)),
        "s1": ((2, 2, 5), (4, 2, 5)),
        "s2": ((2, 2, 4), (4, 3, 4)),
        "s3": ((2, 2, 1), (5, 2, 1)),
        "s4": ((2, 2, 0), (5, 3, 0)),
    }
    assert set(STRATEGIES) == set(expected)
    for name, (q_fw, q_bw) in expected.items():
        s = ReuseStrategy.by_name(name)
        assert s.q_fw == q_fw
        assert s.q_bw == q_bw


def test_strategy_copy_units_decompose_consistently():
    # q3 = dispatched-input unit (1) + hidden-activation units (4), per the
    # tensors each strategy offloads.
    assert S1.q_fw[2] == 1 + 4
    assert S2.q_fw[2] == 4
    assert S3.q_fw[2] == 1
    assert S4.q_fw[2] == 0 and NO_REUSE.q_fw[2] == 0


def test_strategy_modes_and_restores():
    assert NO_REUSE.restore_dispatched_input is RestoreMethod.KEPT
    assert S1.restore_middle is RestoreMethod.OFFLOAD
    assert S2.restore_dispatched_input is RestoreMethod.COMMUNICATE
    assert S3.restore_middle is RestoreMethod.RECOMPUTE
    assert S4.restore_middle is RestoreMethod.RECOMPUTE
    for s in (NO_REUSE, S4):
        assert s.comm_slowdown_mode == "mu_comp"
        assert s.copy_slowdown_mode is None
        assert not s.uses_copy_stream
    for s in (S1, S2, S3):
        assert s.comm_slowdown_mode == "mu_all"
        assert s.copy_slowdown_mode == "eta_all"
        assert s.uses_copy_stream
    with pytest.raises(KeyError):
        ReuseStrategy.by_name("s9")


def test_slowdown_table_factor_resolution():
    table = SlowdownTable.from_factors(mu_comp=0.9, mu_all=0.6, eta_all=0.7)
    assert table.factor("comm", set()) == 1.0
    assert table.factor("comm", {"comp"}) == 0.9
    assert table.factor("comm", {"comp", "mem"}) == 0.6
    # Missing exact entry falls back to the worst matching subset.
    assert table.factor("comm", {"mem"}) == 1.0
    assert table.factor("mem", {"comp", "comm"}) == 0.7
    assert table.factor("mem", {"comp"}) == 1.0
    assert table.factor("comp", {"comm", "mem"}) == 1.0
    partial = SlowdownTable.from_factors(mu_comp=0.9, mu_mem=0.8)
    assert partial.factor("comm", {"comp", "mem"}) == 0.8


def test_slowdown_table_validation():
    with pytest.raises(ValueError):
        SlowdownTable({("comm", frozenset()): 0.9})
    with pytest.raises(ValueError):
        SlowdownTable({("comm", frozenset({"comp"})): 0.0})
    with pytest.raises(ValueError):
        SlowdownTable({("comm", frozenset({"comp"})): 1.5})
    with pytest.raises(ValueError):
        SlowdownTable({("bogus", frozenset({"comp"})): 0.5})
    with pytest.raises(ValueError):
        SlowdownTable({("comm", frozenset({"comm"})): 0.5})


def test_hardware_profile_validation_and_rates():
    hw = HardwareProfile(1e12, 1e10, 2e10, compute_saturation=1024,
                         launch_overhead=1e-5,
                         launch_overhead_overrides={"copy": 0.0})
    assert hw.alpha == 100.0
    assert hw.beta == 50.0
    assert hw.compute_rate(512) == pytest.approx(0.5e12)
    assert hw.compute_rate(1024) == 1e12
    assert hw.compute_rate(4096) == 1e12
    assert hw.launch_overhead_for("copy") == 0.0
    assert hw.launch_overhead_for("compute") == 1e-5
    with pytest.raises(ValueError):
        HardwareProfile(-1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        HardwareProfile(1.0, 1.0, 1.0, launch_overhead=-1e-9)
    with pytest.raises(ValueError):
        HardwareProfile(1.0, 1.0, 1.0, compute_saturation=0)
    with pytest.raises(ValueError):
        HardwareProfile(1.0, 1.0, 1.0, launch_overhead_overrides={"gpu": 1.0})


def test_tensor_role_shapes():
    spec = ModelSpec(768, 3072, 64, 8)
    for role in TensorRole:
        width = 3072 if role is TensorRole.MIDDLE else 768
        assert role.width(spec) == width
        assert role.elements(spec, 4096) == 4096 * width
        assert role.partition_elements(spec, 10, 3) == 4 * width
