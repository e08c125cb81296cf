"""Surrogate datasets used by the desk-scale experiments.

Six runs, three operating conditions with two bearings each. The first bearing
of each condition fails through horizontal-channel growth, the second through
vertical-channel growth, so a classifier that has only seen the first kind of
fault has no reason to flag the second.
"""

from __future__ import annotations

from .config import DenoiserSettings, PartitionSettings, PdmSettings, PipelineConfig, SourceConfig
from .data_ingest import SurrogateSpec
from .diffusion import TrainConfig
from .tsg_metrics import MetricConfig

BENCHMARK_WINDOW = 256


def benchmark_specs(window_length: int = BENCHMARK_WINDOW) -> list[SurrogateSpec]:
    specs = []
    for b in range(6):
        growth = (1.0, 0.0) if b % 2 == 0 else (0.0, 1.0)
        specs.append(SurrogateSpec(
            duration_windows=40,
            healthy_amplitude=0.5,
            degradation_onset_fraction=0.5,
            degradation_growth=1.2,
            burst_rate=0.3,
            seed=100 + b,
            window_length=window_length,
            channel_growth=growth,
            bearing_id=b,
            condition_id=b // 2 + 1,
        ))
    return specs


def tiny_specs(window_length: int = 64) -> list[SurrogateSpec]:
    """Four short runs for smoke tests."""
    specs = []
    for b in range(4):
        growth = (1.0, 0.0) if b % 2 == 0 else (0.0, 1.0)
        specs.append(SurrogateSpec(
            duration_windows=24, healthy_amplitude=0.5, degradation_onset_fraction=0.5,
            degradation_growth=1.35, burst_rate=0.3, seed=200 + b, window_length=window_length,
            channel_growth=growth, bearing_id=b, condition_id=b // 2 + 1,
        ))
    return specs


PRESETS = {"benchmark": benchmark_specs, "tiny": tiny_specs}


def benchmark_config(out: str = "runs/benchmark", seeds=(0, 1, 2, 3, 4)) -> PipelineConfig:
    """Desk-scale configuration for the headline surrogate experiment."""
    return PipelineConfig(
        source=SourceConfig(kind="surrogate", preset="benchmark"),
        window_length=BENCHMARK_WINDOW,
        partition=PartitionSettings(k=3, gamma=0.3, o=8 * BENCHMARK_WINDOW, complete_run_ids=[0, 2, 4]),
        denoiser=DenoiserSettings(h=16, R=4, e=32, dilations=[1, 2, 4, 8]),
        train=TrainConfig(epochs=40, batch_size=16, learning_rate=2e-3, T=200),
        metrics=MetricConfig(max_lag=100, tsne_iterations=1000, embedding_epochs=30),
        pdm=PdmSettings(),
        seeds=list(seeds),
        evaluate_held_out=False,
        out=out,
    )


def tiny_config(out: str = "runs/tiny", seeds=(0,)) -> PipelineConfig:
    return PipelineConfig(
        source=SourceConfig(kind="surrogate", preset="tiny"),
        window_length=64,
        partition=PartitionSettings(k=2, gamma=0.3, o=4 * 64, complete_run_ids=[0, 2]),
        denoiser=DenoiserSettings(h=8, R=2, e=16, dilations=[1, 2]),
        train=TrainConfig(epochs=3, batch_size=16, T=20, beta_end=0.3),
        metrics=MetricConfig(max_lag=20, q=4, tsne_iterations=300, embedding_epochs=5, perplexity=5.0),
        pdm=PdmSettings(epochs=200),
        seeds=list(seeds),
        evaluate_held_out=True,
        out=out,
    )
