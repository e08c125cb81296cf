"""DDPM noise schedule, training loop, ancestral sampling and counterpart generation."""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import denoiser as dn
from .data_ingest import CLAMP, SampleWindow
from .denoiser import ConSignal, DenoiserParams, DivergenceError
from .optim import Adam, clip_by_global_norm

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class NoiseSchedule:
    beta: np.ndarray
    alpha: np.ndarray
    alpha_bar: np.ndarray

    @property
    def T(self) -> int:
        return len(self.beta)


def make_schedule(T: int = 200, beta_start: float = 1e-4, beta_end: float = 0.05) -> NoiseSchedule:
    if T <= 0:
        raise ValueError("T must be positive")
    if T == 1:
        if not 0 < beta_start < 1:
            raise ValueError("beta must lie in (0, 1)")
        beta = np.array([beta_start], dtype=np.float64)
    else:
        if not 0 < beta_start < beta_end < 1:
            raise ValueError("need 0 < beta_start < beta_end < 1")
        beta = np.linspace(beta_start, beta_end, T)
    alpha = 1.0 - beta
    return NoiseSchedule(beta, alpha, np.cumprod(alpha))


def add_noise(x0, t, noise, sched: NoiseSchedule) -> np.ndarray:
    """Closed-form forward process; ``t`` may be a scalar or one step per leading item."""
    x0 = np.asarray(x0)
    noise = np.asarray(noise)
    if x0.shape != noise.shape:
        raise ValueError(f"shape mismatch: x0 {x0.shape} vs noise {noise.shape}")
    t = np.asarray(t)
    if np.any(t < 0) or np.any(t >= sched.T):
        raise ValueError(f"step out of range [0, {sched.T})")
    ab = sched.alpha_bar[t]
    if ab.ndim:
        ab = ab.reshape(ab.shape + (1,) * (x0.ndim - ab.ndim))
    return (np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * noise).astype(x0.dtype, copy=False)


@dataclass
class TrainConfig:
    epochs: int = 60
    batch_size: int = 16
    learning_rate: float = 2e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    seed: int = 0
    T: int = 200
    beta_start: float = 1e-4
    beta_end: float = 0.05
    gradient_clip_norm: float = 1.0
    dtype: str = "float32"
    smote_balance: bool = False
    smote_k: int = 5

    def validate(self):
        for name in ("epochs", "batch_size", "learning_rate", "adam_beta1", "adam_beta2",
                     "adam_epsilon", "T", "gradient_clip_norm"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.learning_rate >= 1:
            raise ValueError("learning_rate must be < 1")
        if self.dtype not in ("float32", "float64"):
            raise ValueError("dtype must be float32 or float64")


@dataclass
class SyntheticDataset:
    windows: list[SampleWindow]
    generator_checkpoint_id: str
    con_signals_source: str
    con_signals: list[ConSignal] = field(default_factory=list)


def _stack(data):
    x = np.stack([w.values for w, _ in data])
    c = np.stack([s.packed for _, s in data])
    return x, c


def smote_balance(data, k: int, seed: int):
    """Top up each bearing's faulty windows with SMOTE interpolants until healthy/faulty counts match."""
    from .baseline_augment import smote

    out = list(data)
    by_bearing: dict[int, list] = {}
    for w, s in data:
        by_bearing.setdefault(s.bearing_index, []).append((w, s))
    for b in sorted(by_bearing):
        items = by_bearing[b]
        faulty = [(w, s) for w, s in items if s.is_faulty]
        n_new = (len(items) - len(faulty)) - len(faulty)
        if len(faulty) < 2 or n_new <= 0:
            continue
        shape = faulty[0][0].values.shape
        feats = [w.values.ravel() for w, _ in faulty]
        kk = min(k, len(faulty) - 1)
        for j, v in enumerate(smote(feats, kk, n_new, seed + 7919 * b)):
            w0, s0 = faulty[0]
            out.append((SampleWindow(v.reshape(shape), w0.bearing_id, -1 - j, True), s0))
    return out


def train(model: DenoiserParams, data: Sequence[tuple[SampleWindow, ConSignal]], cfg: TrainConfig,
          sched: NoiseSchedule) -> tuple[DenoiserParams, list[float]]:
    """Fit the denoiser by epsilon-prediction MSE; returns the new parameters and per-epoch mean loss."""
    cfg.validate()
    if not data:
        raise ValueError("training data is empty")
    if sched.T != model.T:
        raise ValueError(f"schedule has T={sched.T} but the model embeds T={model.T}")
    if cfg.smote_balance:
        data = smote_balance(data, cfg.smote_k, cfg.seed)
    dtype = np.dtype(cfg.dtype)
    params = model.astype(dtype)
    x_all, c_all = _stack(data)
    x_all = x_all.astype(dtype)
    if x_all.shape[1:] != (model.l, model.d):
        raise ValueError(f"window shape {x_all.shape[1:]} does not match model ({model.l}, {model.d})")
    rng = np.random.default_rng(cfg.seed)
    opt = Adam(params.arrays, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_epsilon)
    n = len(x_all)
    losses = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        total, count = 0.0, 0
        for bi, start in enumerate(range(0, n, cfg.batch_size)):
            idx = order[start:start + cfg.batch_size]
            x0 = x_all[idx]
            t = rng.integers(0, sched.T, size=len(idx))
            noise = rng.standard_normal(x0.shape).astype(dtype)
            xt = add_noise(x0, t, noise, sched)
            try:
                loss, grads = dn.loss_and_grad(params, xt, t, c_all[idx], noise)
            except DivergenceError as exc:
                raise DivergenceError(f"epoch {epoch} batch {bi}: {exc}") from None
            if not math.isfinite(loss):
                raise DivergenceError(f"NaN loss at epoch {epoch} batch {bi}")
            grads, _ = clip_by_global_norm(grads, cfg.gradient_clip_norm)
            opt.step(params.arrays, grads)
            total += loss * len(idx)
            count += len(idx)
        losses.append(total / count)
        log.debug("epoch %d loss %.5f", epoch, losses[-1])
    return params, losses


def _reverse(model: DenoiserParams, sched: NoiseSchedule, c: np.ndarray, rngs: list[np.random.Generator]):
    n = len(rngs)
    dtype = model.dtype
    shape = (model.l, model.d)
    x = np.stack([r.standard_normal(shape) for r in rngs]).astype(dtype)
    for t in range(sched.T - 1, -1, -1):
        eps = dn.forward(model, x, t, c)
        coef = sched.beta[t] / math.sqrt(1.0 - sched.alpha_bar[t])
        mean = (x - coef * eps) / math.sqrt(sched.alpha[t])
        if t > 0:
            z = np.stack([r.standard_normal(shape) for r in rngs]).astype(dtype)
            x = (mean + math.sqrt(sched.beta[t]) * z).astype(dtype)
        else:
            x = mean.astype(dtype)
        if not np.all(np.isfinite(x)):
            raise DivergenceError(f"non-finite sample at step {t}")
    return np.clip(x, -CLAMP, CLAMP).astype(np.float64).reshape(n, *shape)


def sample(model: DenoiserParams, sched: NoiseSchedule, c: ConSignal, seed: int,
           bearing_ids: Sequence[int] | None = None, window_index: int = 0) -> SampleWindow:
    """Draw one window by ancestral sampling from pure noise."""
    x = _reverse(model, sched, dn.pack_signals(c), [np.random.default_rng(seed)])[0]
    bid = bearing_ids[c.bearing_index] if bearing_ids is not None else c.bearing_index
    return SampleWindow(x, int(bid), window_index, bool(c.is_faulty))


def sample_many(model: DenoiserParams, sched: NoiseSchedule, signals: Sequence[ConSignal],
                seeds: Sequence[int], chunk: int = 128) -> np.ndarray:
    """Batched sampling; window ``i`` draws all of its noise from ``default_rng(seeds[i])``."""
    out = []
    for s in range(0, len(signals), chunk):
        c = dn.pack_signals(list(signals[s:s + chunk]))
        rngs = [np.random.default_rng(int(v)) for v in seeds[s:s + chunk]]
        out.append(_reverse(model, sched, c, rngs))
    return np.concatenate(out) if out else np.zeros((0, model.l, model.d))


def generate_counterpart(model: DenoiserParams, sched: NoiseSchedule, u_manifest: Sequence[ConSignal],
                         seed: int, bearing_ids: Sequence[int] | None = None,
                         keys: Sequence[tuple[int, int]] | None = None, checkpoint_id: str = "",
                         source: str = "") -> SyntheticDataset:
    """One synthetic window per con-signal, in manifest order, seeded ``seed + index``."""
    if not u_manifest:
        raise ValueError("empty con-signal manifest")
    seeds = [seed + i for i in range(len(u_manifest))]
    xs = sample_many(model, sched, u_manifest, seeds)
    windows = []
    for i, (c, x) in enumerate(zip(u_manifest, xs)):
        bid = bearing_ids[c.bearing_index] if bearing_ids is not None else c.bearing_index
        idx = keys[i][1] if keys is not None else i
        windows.append(SampleWindow(x, int(bid), int(idx), bool(c.is_faulty)))
    return SyntheticDataset(windows, checkpoint_id, source, list(u_manifest))


def signal_histogram(signals: Sequence[ConSignal]) -> Counter:
    return Counter((s.bearing_index, s.is_faulty) for s in signals)
