"""Unconstrained dynamic time warping with euclidean point cost."""

from __future__ import annotations

import math

import numba
import numpy as np


@numba.njit(cache=True)
def _dtw_table(a, b):
    n, m = a.shape[0], b.shape[0]
    D = np.full((n + 1, m + 1), np.inf)
    D[0, 0] = 0.0
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            acc = 0.0
            for c in range(a.shape[1]):
                diff = a[i - 1, c] - b[j - 1, c]
                acc += diff * diff
            cost = math.sqrt(acc)
            best = D[i - 1, j - 1]
            if D[i - 1, j] < best:
                best = D[i - 1, j]
            if D[i, j - 1] < best:
                best = D[i, j - 1]
            D[i, j] = cost + best
    return D


def _as_2d(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    return np.ascontiguousarray(x)


def dtw_distance(a, b) -> float:
    a, b = _as_2d(a), _as_2d(b)
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise ValueError("DTW of an empty sequence is undefined")
    if a.shape[1] != b.shape[1]:
        raise ValueError("sequences must have the same channel count")
    return float(_dtw_table(a, b)[-1, -1])


def mean_pool(x, max_len: int = 256) -> np.ndarray:
    """Average consecutive blocks so the result has at most ``max_len`` rows."""
    x = _as_2d(x)
    n = x.shape[0]
    if n <= max_len:
        return x
    f = math.ceil(n / max_len)
    n_full = n // f
    out = x[: n_full * f].reshape(n_full, f, -1).mean(axis=1)
    if n % f:
        out = np.vstack([out, x[n_full * f:].mean(axis=0, keepdims=True)])
    return out
