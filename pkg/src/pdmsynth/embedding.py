"""Strided-convolution autoencoder used as the C-FID embedding.

Kernel width equals stride (4), so each convolution is a reshape followed by a
matmul and its gradient is a plain matrix product.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .denoiser import DivergenceError
from .optim import Adam

STRIDE = 4


@dataclass
class EmbeddingModel:
    arrays: dict[str, np.ndarray]
    q: int
    l_crop: int
    d: int
    c1: int
    c2: int
    loss_history: list[float] = field(default_factory=list)

    @property
    def final_loss(self) -> float:
        return self.loss_history[-1] if self.loss_history else float("nan")

    def encode(self, windows) -> np.ndarray:
        x = _stack(windows, self.l_crop)
        return _encode(self.arrays, x, self)[0]


def _stack(windows, l_crop):
    xs = [np.asarray(getattr(w, "values", w), float) for w in windows]
    return np.stack([x[:l_crop] for x in xs])


def _encode(P, x, m):
    n = x.shape[0]
    l1 = m.l_crop // STRIDE
    l2 = l1 // STRIDE
    p1 = x.reshape(n, l1, STRIDE * m.d)
    h1 = np.tanh(p1 @ P["enc1_w"] + P["enc1_b"])
    p2 = h1.reshape(n, l2, STRIDE * m.c1)
    h2 = np.tanh(p2 @ P["enc2_w"] + P["enc2_b"])
    f = h2.reshape(n, l2 * m.c2)
    z = f @ P["lat_w"] + P["lat_b"]
    return z, (p1, h1, p2, h2, f)


def _decode(P, z, m):
    n = z.shape[0]
    l1 = m.l_crop // STRIDE
    l2 = l1 // STRIDE
    g = np.tanh(z @ P["up_w"] + P["up_b"])
    g2 = g.reshape(n, l2, m.c2)
    k = np.tanh(g2 @ P["dec2_w"] + P["dec2_b"])
    k1 = k.reshape(n, l1, m.c1)
    out = (k1 @ P["dec1_w"] + P["dec1_b"]).reshape(n, m.l_crop, m.d)
    return out, (g, g2, k, k1)


def _flat(a):
    return a.reshape(-1, a.shape[-1])


def loss_and_grad(m: EmbeddingModel, x):
    P = m.arrays
    n = x.shape[0]
    z, (p1, h1, p2, h2, f) = _encode(P, x, m)
    out, (g, g2, k, k1) = _decode(P, z, m)
    diff = out - x
    loss = float(np.mean(diff * diff))
    G = (2.0 * diff / diff.size).reshape(n, -1, STRIDE * m.d)
    grads = {}
    grads["dec1_w"] = _flat(k1).T @ _flat(G)
    grads["dec1_b"] = G.sum(axis=(0, 1))
    dk = (G @ P["dec1_w"].T).reshape(k.shape) * (1 - k * k)
    grads["dec2_w"] = _flat(g2).T @ _flat(dk)
    grads["dec2_b"] = dk.sum(axis=(0, 1))
    dg = (dk @ P["dec2_w"].T).reshape(g.shape) * (1 - g * g)
    grads["up_w"] = z.T @ dg
    grads["up_b"] = dg.sum(axis=0)
    dz = dg @ P["up_w"].T
    grads["lat_w"] = f.T @ dz
    grads["lat_b"] = dz.sum(axis=0)
    dh2 = (dz @ P["lat_w"].T).reshape(h2.shape) * (1 - h2 * h2)
    grads["enc2_w"] = _flat(p2).T @ _flat(dh2)
    grads["enc2_b"] = dh2.sum(axis=(0, 1))
    dh1 = (dh2 @ P["enc2_w"].T).reshape(h1.shape) * (1 - h1 * h1)
    grads["enc1_w"] = _flat(p1).T @ _flat(dh1)
    grads["enc1_b"] = dh1.sum(axis=(0, 1))
    return loss, grads


def init_embedding(seed: int, l: int, d: int, q: int = 16, c1: int = 16, c2: int = 8) -> EmbeddingModel:
    l_crop = (l // STRIDE ** 2) * STRIDE ** 2
    if l_crop == 0:
        raise ValueError(f"window length {l} is too short for the embedding (need >= {STRIDE ** 2})")
    l2 = l_crop // STRIDE ** 2
    shapes = {
        "enc1_w": (STRIDE * d, c1), "enc1_b": (c1,),
        "enc2_w": (STRIDE * c1, c2), "enc2_b": (c2,),
        "lat_w": (l2 * c2, q), "lat_b": (q,),
        "up_w": (q, l2 * c2), "up_b": (l2 * c2,),
        "dec2_w": (c2, STRIDE * c1), "dec2_b": (STRIDE * c1,),
        "dec1_w": (c1, STRIDE * d), "dec1_b": (STRIDE * d,),
    }
    rng = np.random.default_rng(seed)
    arrays = {}
    for name, shape in shapes.items():
        if name.endswith("_b"):
            arrays[name] = np.zeros(shape)
        else:
            bound = 1.0 / math.sqrt(shape[0])
            arrays[name] = rng.uniform(-bound, bound, size=shape)
    return EmbeddingModel(arrays, q, l_crop, d, c1, c2)


def train_embedding(real, q: int = 16, seed: int = 0, epochs: int = 30, batch_size: int = 32,
                    lr: float = 2e-3) -> EmbeddingModel:
    """Fit the autoencoder on real windows by reconstruction MSE."""
    if len(real) == 0:
        raise ValueError("no windows to train the embedding on")
    first = np.asarray(getattr(real[0], "values", real[0]))
    m = init_embedding(seed, first.shape[0], first.shape[1], q)
    x_all = _stack(real, m.l_crop)
    rng = np.random.default_rng(seed)
    opt = Adam(m.arrays, lr)
    for epoch in range(epochs):
        order = rng.permutation(len(x_all))
        tot = 0.0
        for s in range(0, len(order), batch_size):
            idx = order[s:s + batch_size]
            loss, grads = loss_and_grad(m, x_all[idx])
            if not math.isfinite(loss):
                raise DivergenceError(f"embedding training diverged at epoch {epoch}")
            opt.step(m.arrays, grads)
            tot += loss * len(idx)
        m.loss_history.append(tot / len(x_all))
    return m
