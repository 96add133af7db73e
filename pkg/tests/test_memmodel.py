"""Memory-model checks against independently computed arithmetic.

Expected constants were produced by a separate script evaluating the
closed forms directly (exact integer/rational arithmetic), not by running
the functions under test.
"""

import random

import pytest

from moepipesim import (
    MemoryReport,
    ModelSpec,
    ReuseNotApplicableError,
    build_report,
    mem_activations_baseline,
    mem_buffers_baseline,
    mem_model_states,
    mem_pipeline,
    mem_reuse_savings,
    mem_saving_ratio,
)
from helpers import BERT_L, GPT3_S, GPT3_XL


def test_model_states_frozen_values():
    assert mem_model_states(GPT3_S) == 19_070_976
    assert mem_model_states(ModelSpec(1, 1, 1, 1)) == 12
    assert mem_model_states(GPT3_XL) == 134_742_016


def test_activations_baseline_frozen_values():
    assert mem_activations_baseline(GPT3_S, 4096) == 25_165_824
    assert mem_activations_baseline(ModelSpec(1, 1, 1, 1), 1) == 5
    with pytest.raises(ValueError):
        mem_activations_baseline(GPT3_S, 0)


def test_buffers_baseline_frozen_values():
    assert mem_buffers_baseline(GPT3_S, 4096) == 15_728_640
    assert mem_buffers_baseline(ModelSpec(1, 1, 1, 1), 1) == 2
    assert mem_buffers_baseline(BERT_L, 8192) == 41_943_040


def test_pipeline_components_equal():
    assert mem_pipeline(GPT3_S, 16384) == (100_663_296, 100_663_296)
    assert mem_pipeline(ModelSpec(1, 1, 1, 1), 1) == (5, 5)
    rng = random.Random(1)
    for _ in range(100):
        spec = ModelSpec(rng.randint(1, 4096), rng.randint(1, 16384), 4, 4)
        act, buf = mem_pipeline(spec, rng.randint(1, 1 << 20))
        assert act == buf


def test_reuse_savings_frozen_values():
    # n=2 zeroes the model-dim term, leaving B*H/2.
    assert mem_reuse_savings(GPT3_S, 4096, 2) == 6_291_456
    assert mem_reuse_savings(GPT3_S, 16384, 8) == 62_914_560
    assert mem_reuse_savings(GPT3_XL, 8192, 4) == 67_108_864


def test_reuse_savings_requires_pipelining():
    with pytest.raises(ReuseNotApplicableError):
        mem_reuse_savings(GPT3_S, 4096, 1)
    with pytest.raises(ReuseNotApplicableError):
        mem_saving_ratio(GPT3_S, 4096, 1)


def test_reuse_savings_monotone_in_partitions_and_linear_in_tokens():
    rng = random.Random(2)
    for _ in range(100):
        spec = ModelSpec(rng.randint(1, 2048), rng.randint(1, 8192), 8, 8)
        tokens = 16 * rng.randint(1, 4096)
        savings = [mem_reuse_savings(spec, tokens, n) for n in (2, 3, 4, 6, 8, 12, 16)]
        assert savings == sorted(savings)
        for n in (2, 4, 8, 16):
            assert mem_reuse_savings(spec, 2 * tokens, n) == 2 * mem_reuse_savings(spec, tokens, n)


def test_saving_ratio_frozen_value_and_bounds():
    assert mem_saving_ratio(GPT3_S, 16384, 8) == pytest.approx(0.5709, abs=1e-4)
    rng = random.Random(3)
    for _ in range(200):
        spec = ModelSpec(rng.randint(1, 2048), rng.randint(1, 8192), 8, 8)
        tokens = rng.randint(1, 1 << 18)
        ratios = [mem_saving_ratio(spec, tokens, n) for n in (2, 4, 8)]
        assert ratios == sorted(ratios)
        assert ratios[0] < ratios[1] < ratios[2]
        assert all(0.0 < r < 1.0 for r in ratios)


def test_report_totals_and_reuse():
    report = build_report(GPT3_S, 16384, 8, reuse=True)
    assert report.total == report.model_states + report.activations + report.buffers
    assert report.activations == 100_663_296 - 62_914_560
    assert report.buffers == report.activations
    assert report.saving_ratio == pytest.approx(0.5709, abs=1e-4)
    d = report.to_dict()
    assert d["total_bytes"] == report.total * 2
    assert "saving ratio" in report.as_table()

    baseline = build_report(GPT3_S, 4096)
    assert baseline.activations == 25_165_824
    assert baseline.buffers == 15_728_640
    assert baseline.saving_ratio is None

    with pytest.raises(ReuseNotApplicableError):
        build_report(GPT3_S, 4096, 1, reuse=True)

    with pytest.raises(ValueError):
        build_report(GPT3_S, 4, 8)  # more partitions than tokens

    with pytest.raises(ValueError):
        MemoryReport(-1, 0, 0, 2)
