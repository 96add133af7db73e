"""Shared fixtures for the test suite: model presets and profile builders."""

from moepipesim import HardwareProfile, ModelSpec, SlowdownTable

GPT3_S = ModelSpec(768, 3072, 64, 8)
GPT3_XL = ModelSpec(2048, 8192, 64, 8)
BERT_L = ModelSpec(1024, 4096, 64, 8)
PRESET_SPECS = {"moe-gpt3-s": GPT3_S, "moe-gpt3-xl": GPT3_XL, "moe-bert-l": BERT_L}


def flat_profile(w_comp=1e12, w_comm=1e10, w_mem=1e10, **kwargs) -> HardwareProfile:
    """Interference-free profile; every stream runs at its base speed."""
    kwargs.setdefault("compute_saturation", 1)
    return HardwareProfile(w_comp, w_comm, w_mem, **kwargs)


def interfering_profile(
    w_comp=1e12,
    w_comm=1e10,
    w_mem=1e10,
    mu_comp=0.8,
    mu_all=0.6,
    sigma_comm=0.9,
    eta_all=0.7,
    **kwargs,
) -> HardwareProfile:
    kwargs.setdefault("compute_saturation", 1)
    table = SlowdownTable.from_factors(
        mu_comp=mu_comp, mu_all=mu_all, sigma_comm=sigma_comm, eta_all=eta_all
    )
    return HardwareProfile(w_comp, w_comm, w_mem, slowdown=table, **kwargs)
