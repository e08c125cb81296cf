"""Real-vs-synthetic comparison metrics.

All functions take lists of :class:`SampleWindow` (or raw ``(l, d)`` arrays)
and return plain floats; lower is better everywhere.
"""

from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .dtw import dtw_distance, mean_pool
from .embedding import EmbeddingModel
from .pdm_eval import ClassifierConfig, evaluate, feature_matrix, train_classifier

log = logging.getLogger(__name__)

REPORT_SCHEMA_VERSION = 1
AR_CONTEXT = 16
AR_RIDGE = 1e-6


def _values(ws) -> list[np.ndarray]:
    out = []
    for w in ws:
        x = np.asarray(getattr(w, "values", w), dtype=np.float64)
        out.append(x[:, None] if x.ndim == 1 else x)
    return out


def _pooled(ws) -> np.ndarray:
    return np.concatenate(_values(ws), axis=0)


# --------------------------------------------------------------------------
# DS / PS
# --------------------------------------------------------------------------

def _split_idx(n, seed, frac=0.8):
    perm = np.random.default_rng(seed).permutation(n)
    cut = int(round(frac * n))
    return perm[:cut], perm[cut:]


def _by_key(ws):
    return sorted(ws, key=lambda w: (getattr(w, "bearing_id", 0), getattr(w, "window_index", 0)))


def discriminative_score(real, synth, seed: int = 0) -> float:
    """|accuracy - 0.5| of a logistic real-vs-synthetic classifier on held-out windows."""
    if len(real) < 5 or len(synth) < 5:
        raise ValueError("discriminative score needs at least 5 windows per side")
    # Sorting by provenance key and reusing one permutation seed puts a window
    # and its counterpart in the same fold, so paired copies cannot leak.
    real, synth = _by_key(real), _by_key(synth)
    Xr, Xs = feature_matrix(real), feature_matrix(synth)
    tr_r, te_r = _split_idx(len(Xr), seed)
    tr_s, te_s = _split_idx(len(Xs), seed)
    X_tr = np.vstack([Xr[tr_r], Xs[tr_s]])
    y_tr = np.r_[np.ones(len(tr_r)), np.zeros(len(tr_s))]
    X_te = np.vstack([Xr[te_r], Xs[te_s]])
    y_te = np.r_[np.ones(len(te_r)), np.zeros(len(te_s))].astype(bool)
    model = train_classifier(X_tr, y_tr, ClassifierConfig(seed=seed, class_weighting="none"))
    acc = float(np.mean(model.predict(X_te) == y_te))
    return abs(acc - 0.5)


def _ar_design(x: np.ndarray, p: int):
    """Lagged design matrix (with intercept) and next-step targets for one 1-D series."""
    lag = sliding_window_view(x[:-1], p)
    X = np.hstack([lag, np.ones((len(lag), 1))])
    return X, x[p:]


def fit_ar(windows, p: int = AR_CONTEXT, ridge: float = AR_RIDGE) -> np.ndarray:
    """Per-channel least-squares next-step coefficients, shape (d, p + 1)."""
    vals = _values(windows)
    d = vals[0].shape[1]
    if vals[0].shape[0] <= p:
        raise ValueError(f"window length must exceed the AR context {p}")
    coefs = []
    for c in range(d):
        A = np.zeros((p + 1, p + 1))
        b = np.zeros(p + 1)
        for v in vals:
            X, y = _ar_design(v[:, c], p)
            A += X.T @ X
            b += X.T @ y
        A += ridge * np.eye(p + 1)
        if not np.all(np.isfinite(A)) or np.linalg.cond(A) > 1e15:
            raise ValueError("degenerate AR design matrix")
        coefs.append(np.linalg.solve(A, b))
    return np.stack(coefs)


def ar_mae(coefs: np.ndarray, windows, p: int = AR_CONTEXT) -> float:
    tot, cnt = 0.0, 0
    for v in _values(windows):
        for c in range(v.shape[1]):
            X, y = _ar_design(v[:, c], p)
            r = X @ coefs[c] - y
            tot += float(np.abs(r).sum())
            cnt += len(r)
    return tot / cnt


def predictive_score(real, synth, seed: int = 0, p: int = AR_CONTEXT) -> float:
    """One-step MAE on real windows of a linear autoregressor fitted on synthetic ones."""
    if not len(real) or not len(synth):
        raise ValueError("predictive score needs non-empty inputs")
    return ar_mae(fit_ar(synth, p), real, p)


# --------------------------------------------------------------------------
# C-FID
# --------------------------------------------------------------------------

def _psd_sqrt(S):
    w, V = np.linalg.eigh((S + S.T) / 2.0)
    return (V * np.sqrt(np.clip(w, 0.0, None))) @ V.T


def frechet_distance(mu1, S1, mu2, S2) -> float:
    mu1, mu2 = np.asarray(mu1, float), np.asarray(mu2, float)
    S1, S2 = np.atleast_2d(S1).astype(float), np.atleast_2d(S2).astype(float)
    if not (np.all(np.isfinite(S1)) and np.all(np.isfinite(S2))):
        raise ValueError("covariance is not finite")
    r1 = _psd_sqrt(S1)
    M = r1 @ S2 @ r1
    w = np.linalg.eigvalsh((M + M.T) / 2.0)
    tr_sqrt = float(np.sum(np.sqrt(np.clip(w, 0.0, None))))
    diff = mu1 - mu2
    return max(0.0, float(diff @ diff + np.trace(S1) + np.trace(S2) - 2.0 * tr_sqrt))


def contextual_fid(real, synth, enc: EmbeddingModel) -> float:
    if len(real) < enc.q + 1 or len(synth) < enc.q + 1:
        raise ValueError(f"C-FID needs at least q + 1 = {enc.q + 1} windows per side")
    er, es = enc.encode(real), enc.encode(synth)
    return frechet_distance(er.mean(0), np.cov(er, rowvar=False), es.mean(0), np.cov(es, rowvar=False))


# --------------------------------------------------------------------------
# distribution metrics
# --------------------------------------------------------------------------

def marginal_distribution_distance(real, synth, bins: int = 50) -> float:
    pr, ps = _pooled(real), _pooled(synth)
    out = []
    for c in range(pr.shape[1]):
        lo = min(pr[:, c].min(), ps[:, c].min())
        hi = max(pr[:, c].max(), ps[:, c].max())
        if hi <= lo:
            raise ValueError(f"channel {c}: zero combined range")
        hr, _ = np.histogram(pr[:, c], bins=bins, range=(lo, hi))
        hs, _ = np.histogram(ps[:, c], bins=bins, range=(lo, hi))
        out.append(np.mean(np.abs(hr / hr.sum() - hs / hs.sum())))
    return float(np.mean(out))


def mean_acf(windows, max_lag: int) -> tuple[np.ndarray, int]:
    """Average normalized ACF over windows, shape (d, max_lag), and the count of skipped series."""
    vals = _values(windows)
    if vals[0].shape[0] <= max_lag:
        raise ValueError("window length must exceed max_lag")
    d = vals[0].shape[1]
    acc = np.zeros((d, max_lag))
    cnt = np.zeros(d)
    skipped = 0
    for v in vals:
        dev = v - v.mean(axis=0)
        den = np.sum(dev * dev, axis=0)
        for c in range(d):
            if den[c] <= 0:
                skipped += 1
                continue
            x = dev[:, c]
            acc[c] += np.array([np.dot(x[:-k], x[k:]) for k in range(1, max_lag + 1)]) / den[c]
            cnt[c] += 1
    if skipped:
        log.info("ACF: skipped %d zero-variance window channels", skipped)
    return acc / np.maximum(cnt, 1)[:, None], skipped


def autocorrelation_distance(real, synth, max_lag: int = 100) -> float:
    ar, _ = mean_acf(real, max_lag)
    as_, _ = mean_acf(synth, max_lag)
    return float(np.linalg.norm(ar - as_))


def _skew_kurt(x):
    dev = x - x.mean()
    m2 = np.mean(dev ** 2)
    if m2 <= 0:
        raise ValueError("zero variance: skewness and kurtosis undefined")
    return np.mean(dev ** 3) / m2 ** 1.5, np.mean(dev ** 4) / m2 ** 2 - 3.0


def moment_differences(real, synth) -> tuple[float, float]:
    pr, ps = _pooled(real), _pooled(synth)
    if len(pr) < 2 or len(ps) < 2:
        raise ValueError("need at least two values per side")
    sd, kd = [], []
    for c in range(pr.shape[1]):
        sr, kr = _skew_kurt(pr[:, c])
        ss, ks = _skew_kurt(ps[:, c])
        sd.append(abs(sr - ss))
        kd.append(abs(kr - ks))
    return float(np.mean(sd)), float(np.mean(kd))


# --------------------------------------------------------------------------
# paired metrics
# --------------------------------------------------------------------------

def _group_key(w):
    return (getattr(w, "bearing_id", 0), bool(getattr(w, "is_faulty", False)))


def pair_by_signal(real, synth) -> list[tuple[int, int]]:
    """Match k-th real to k-th synthetic window within each (bearing, faulty) group.

    Inside a group windows are ordered by ``window_index`` (stable), which is
    manifest order for both U and its counterpart.
    """
    if len(real) != len(synth):
        raise ValueError(f"paired metrics need equal counts, got {len(real)} and {len(synth)}")
    gr, gs = defaultdict(list), defaultdict(list)
    for i, w in enumerate(real):
        gr[_group_key(w)].append(i)
    for i, w in enumerate(synth):
        gs[_group_key(w)].append(i)
    if {k: len(v) for k, v in gr.items()} != {k: len(v) for k, v in gs.items()}:
        raise ValueError("con-signal histograms of real and synthetic sets differ")
    pairs = []
    order = lambda ws, idx: sorted(idx, key=lambda i: getattr(ws[i], "window_index", 0))  # noqa: E731
    for k in gr:
        pairs.extend(zip(order(real, gr[k]), order(synth, gs[k])))
    return sorted(pairs)


def euclidean_distance(real, synth) -> float:
    pairs = pair_by_signal(real, synth)
    vr, vs = _values(real), _values(synth)
    return float(np.mean([np.linalg.norm(vr[i] - vs[j]) for i, j in pairs]))


def dataset_dtw(real, synth, max_len: int = 256) -> float:
    pairs = pair_by_signal(real, synth)
    vr, vs = _values(real), _values(synth)
    return float(np.mean([dtw_distance(mean_pool(vr[i], max_len), mean_pool(vs[j], max_len)) for i, j in pairs]))


# --------------------------------------------------------------------------
# report
# --------------------------------------------------------------------------

@dataclass
class MetricConfig:
    bins: int = 50
    max_lag: int = 100
    q: int = 16
    perplexity: float = 30.0
    tsne_iterations: int = 1000
    embedding_epochs: int = 30
    dtw_max_len: int = 256
    seed: int = 0


@dataclass
class MetricsReport:
    ds: float
    ps: float
    c_fid: float
    mdd: float
    acd: float
    sd: float
    kd: float
    ed: float
    dtw: float
    sample_counts: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["schema_version"] = REPORT_SCHEMA_VERSION
        return d

    def validate(self):
        vals = [self.ds, self.ps, self.c_fid, self.mdd, self.acd, self.sd, self.kd, self.ed, self.dtw]
        if not all(np.isfinite(vals)) or min(vals) < 0 or self.ds > 0.5:
            raise ValueError(f"metric values out of range: {vals}")


METRIC_NAMES = ("ds", "ps", "c_fid", "mdd", "acd", "sd", "kd", "ed", "dtw")


def compute_report(real: Sequence, synth: Sequence, enc: EmbeddingModel, cfg: MetricConfig) -> MetricsReport:
    sd, kd = moment_differences(real, synth)
    max_lag = min(cfg.max_lag, _values(real[:1])[0].shape[0] - 1)
    rep = MetricsReport(
        ds=discriminative_score(real, synth, cfg.seed),
        ps=predictive_score(real, synth, cfg.seed),
        c_fid=contextual_fid(real, synth, enc),
        mdd=marginal_distribution_distance(real, synth, cfg.bins),
        acd=autocorrelation_distance(real, synth, max_lag),
        sd=sd,
        kd=kd,
        ed=euclidean_distance(real, synth),
        dtw=dataset_dtw(real, synth, cfg.dtw_max_len),
        sample_counts={"real": len(real), "synthetic": len(synth)},
        config={**asdict(cfg), "max_lag": max_lag},
    )
    rep.validate()
    return rep
