"""SMOTE oversampling of minority-class feature vectors."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class SmoteDraw:
    """Provenance of one synthetic vector: base index, neighbour index and interpolation weight."""

    base: int
    neighbor: int
    lam: float


def nearest_neighbors(x: np.ndarray, k: int) -> np.ndarray:
    """Indices of the ``k`` nearest other rows by euclidean distance; ties go to the lower index."""
    sq = np.sum(x * x, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    np.fill_diagonal(d2, np.inf)
    # stable sort keeps equal distances in index order
    return np.argsort(d2, axis=1, kind="stable")[:, :k]


def smote(minority, k: int = 5, n_new: int = 0, seed: int = 0, return_draws: bool = False):
    x = np.asarray([np.asarray(v, dtype=np.float64).ravel() for v in minority])
    if len(x) < 2:
        raise ValueError("SMOTE needs at least two minority samples")
    if not 1 <= k <= len(x) - 1:
        raise ValueError(f"k must lie in [1, {len(x) - 1}], got {k}")
    if n_new < 0:
        raise ValueError("n_new must be non-negative")
    if not np.all(np.isfinite(x)):
        raise ValueError("minority vectors must be finite")
    rng = np.random.default_rng(seed)
    nn = nearest_neighbors(x, k)
    base = rng.integers(0, len(x), size=n_new)
    pick = rng.integers(0, k, size=n_new)
    lam = rng.random(n_new)
    neigh = nn[base, pick]
    out = x[base] + lam[:, None] * (x[neigh] - x[base])
    result = [row for row in out]
    if return_draws:
        return result, [SmoteDraw(int(b), int(n), float(l)) for b, n, l in zip(base, neigh, lam)]
    return result
