"""Exact t-SNE with perplexity calibration by bisection."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

EXAGGERATION = 12.0
EXAGGERATION_ITERS = 250
MOMENTUM_SWITCH = 250


@dataclass
class TsneResult:
    embedding: np.ndarray
    kl_history: list[float]
    betas: np.ndarray


def _sq_dists(x):
    s = np.sum(x * x, axis=1)
    d = s[:, None] + s[None, :] - 2.0 * x @ x.T
    np.maximum(d, 0.0, out=d)
    np.fill_diagonal(d, 0.0)
    return d


def conditional_probabilities(D: np.ndarray, perplexity: float, tol: float = 1e-5, max_iter: int = 200):
    """Row-wise Gaussian affinities whose entropy matches ``log(perplexity)``.

    Returns ``(P, beta)`` where ``beta = 1 / (2 sigma^2)`` per row.
    """
    n = D.shape[0]
    target = math.log(perplexity)
    P = np.zeros((n, n))
    betas = np.ones(n)
    for i in range(n):
        di = np.delete(D[i], i)
        lo, hi = 0.0, np.inf
        beta = 1.0
        for _ in range(max_iter):
            e = np.exp(-(di - di.min()) * beta)
            s = e.sum()
            p = e / s
            H = math.log(s) + beta * float(np.dot(di - di.min(), p))
            if abs(H - target) < tol:
                break
            if H > target:
                lo = beta
                beta = beta * 2.0 if hi == np.inf else (beta + hi) / 2.0
            else:
                hi = beta
                beta = (beta + lo) / 2.0
        P[i, np.arange(n) != i] = p
        betas[i] = beta
    return P, betas


def _pca_init(x, seed):
    xc = x - x.mean(axis=0)
    _, _, vt = np.linalg.svd(xc, full_matrices=False)
    comps = vt[:2]
    # deterministic sign: largest loading positive
    signs = np.sign(comps[np.arange(len(comps)), np.argmax(np.abs(comps), axis=1)])
    comps = comps * signs[:, None]
    y = xc @ comps.T
    if y.shape[1] < 2:
        rng = np.random.default_rng(seed)
        y = np.hstack([y, rng.normal(size=(len(y), 2 - y.shape[1]))])
    std = y[:, 0].std()
    return y / (std if std > 0 else 1.0) * 1e-4


def tsne_project(features, perplexity: float = 30.0, iterations: int = 1000, seed: int = 0,
                 learning_rate: float | None = None) -> TsneResult:
    x = np.asarray([np.asarray(f, float).ravel() for f in features])
    n = len(x)
    if n < 5:
        raise ValueError("t-SNE needs at least 5 points")
    if not perplexity < (n - 1) / 3.0:
        raise ValueError(f"perplexity {perplexity} infeasible for {n} points; need < {(n - 1) / 3:.2f}")
    if learning_rate is None:
        learning_rate = max(n / EXAGGERATION / 4.0, 50.0)
    Pc, betas = conditional_probabilities(_sq_dists(x), perplexity)
    P = (Pc + Pc.T) / (2.0 * n)
    P = np.maximum(P, 1e-12)
    y = _pca_init(x, seed)
    update = np.zeros_like(y)
    gains = np.ones_like(y)
    kl = []
    for it in range(iterations):
        exag = EXAGGERATION if it < EXAGGERATION_ITERS else 1.0
        momentum = 0.5 if it < MOMENTUM_SWITCH else 0.8
        num = 1.0 / (1.0 + _sq_dists(y))
        np.fill_diagonal(num, 0.0)
        Q = np.maximum(num / num.sum(), 1e-12)
        PQ = (exag * P - Q) * num
        grad = 4.0 * (np.diag(PQ.sum(axis=1)) - PQ) @ y
        inc = np.sign(grad) != np.sign(update)
        gains = np.where(inc, gains + 0.2, gains * 0.8)
        np.maximum(gains, 0.01, out=gains)
        update = momentum * update - learning_rate * gains * grad
        y = y + update
        y = y - y.mean(axis=0)
        mask = ~np.eye(n, dtype=bool)
        kl.append(float(np.sum(P[mask] * np.log(P[mask] / Q[mask]))))
    return TsneResult(y, kl, betas)
