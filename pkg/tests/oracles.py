"""Independent reference implementations used by the test suite."""

import itertools
import math
from fractions import Fraction

import numpy as np

from pdmsynth.denoiser import ConSignal, backward, forward, init_params


def dtw_brute(a, b):
    """Minimum cost over every monotone alignment path, enumerated explicitly."""
    a = np.asarray(a, float).reshape(len(a), -1)
    b = np.asarray(b, float).reshape(len(b), -1)
    n, m = len(a), len(b)
    best = math.inf
    moves = ((1, 0), (0, 1), (1, 1))

    def walk(i, j, acc):
        nonlocal best
        acc += float(np.sqrt(np.sum((a[i] - b[j]) ** 2)))
        if i == n - 1 and j == m - 1:
            best = min(best, acc)
            return
        for di, dj in moves:
            if i + di < n and j + dj < m:
                walk(i + di, j + dj, acc)

    walk(0, 0, 0.0)
    return best


def n_paths(n, m):
    """Delannoy number: count of monotone paths from (0,0) to (n-1,m-1)."""
    n, m = n - 1, m - 1
    return sum(math.comb(m, k) * math.comb(n, k) * 2 ** k for k in range(min(n, m) + 1))


def exact_moments(x):
    """Fisher skewness and excess kurtosis in rational arithmetic."""
    xs = [Fraction(float(v)) for v in np.ravel(x)]
    n = len(xs)
    mu = sum(xs) / n
    m2 = sum((v - mu) ** 2 for v in xs) / n
    m3 = sum((v - mu) ** 3 for v in xs) / n
    m4 = sum((v - mu) ** 4 for v in xs) / n
    skew = float(m3) / float(m2) ** 1.5
    kurt = float(m4 / (m2 * m2)) - 3.0
    return skew, kurt


def exact_features(x):
    """Per-channel rms, p2p, crest, skew, kurtosis, std via math.fsum."""
    out = []
    for c in range(x.shape[1]):
        v = [float(t) for t in x[:, c]]
        n = len(v)
        rms = math.sqrt(math.fsum(t * t for t in v) / n)
        p2p = max(v) - min(v)
        crest = max(abs(t) for t in v) / rms if rms > 0 else 0.0
        mu = math.fsum(v) / n
        m2 = math.fsum((t - mu) ** 2 for t in v) / n
        if m2 > 0:
            m3 = math.fsum((t - mu) ** 3 for t in v) / n
            m4 = math.fsum((t - mu) ** 4 for t in v) / n
            skew, kurt = m3 / m2 ** 1.5, m4 / m2 ** 2 - 3.0
        else:
            skew = kurt = 0.0
        out += [rms, p2p, crest, skew, kurt, math.sqrt(m2)]
    return np.array(out)


def frechet_diag(mu1, var1, mu2, var2):
    """Closed form for diagonal covariances: sum of squared mean and std differences."""
    mu1, var1, mu2, var2 = map(np.asarray, (mu1, var1, mu2, var2))
    return float(np.sum((mu1 - mu2) ** 2) + np.sum((np.sqrt(var1) - np.sqrt(var2)) ** 2))


def gradient_check(seed, l=32, d=2, h=8, R=2, e=16, B=3, T=50, step=1e-4):
    """Worst relative error between analytic and central-difference gradients over every parameter."""
    r = np.random.default_rng(seed)
    p = init_params(seed, l, d, h, R, e, B, T, dilations=(1, 2, 4))
    for k, v in p.arrays.items():
        if not k.endswith("decay_raw"):
            p.arrays[k] = r.normal(0, 0.4, size=v.shape)
    x = r.normal(size=(2, l, d))
    t = r.integers(0, T, size=2)
    c = [ConSignal.make(int(r.integers(B)), B, int(r.integers(2))) for _ in range(2)]
    G = r.normal(size=x.shape)
    grads = backward(p, x, t, c, G)
    worst, count = 0.0, 0
    for name, arr in p.arrays.items():
        flat = arr.reshape(-1)
        g = grads[name].reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + step
            up = float(np.sum(forward(p, x, t, c) * G))
            flat[i] = old - step
            dn = float(np.sum(forward(p, x, t, c) * G))
            flat[i] = old
            num = (up - dn) / (2 * step)
            rel = abs(num - g[i]) / max(abs(num), abs(g[i]), 1e-8)
            worst = max(worst, rel)
            count += 1
    return worst, count


def ks_uniform(samples):
    """One-sample Kolmogorov-Smirnov test against U(0, 1); returns (D, asymptotic p-value)."""
    x = np.sort(np.asarray(samples, float))
    n = len(x)
    i = np.arange(1, n + 1)
    d = float(max(np.max(i / n - x), np.max(x - (i - 1) / n)))
    lam = (math.sqrt(n) + 0.12 + 0.11 / math.sqrt(n)) * d
    p = 2.0 * sum((-1) ** (k - 1) * math.exp(-2.0 * k * k * lam * lam) for k in range(1, 101))
    return d, min(max(p, 0.0), 1.0)


def brute_neighbors(x, k):
    x = np.asarray(x, float)
    out = []
    for i in range(len(x)):
        dist = sorted((math.dist(x[i], x[j]), j) for j in range(len(x)) if j != i)
        out.append([j for _, j in dist[:k]])
    return out
