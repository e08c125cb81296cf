"""Window features, the logistic fault classifier, and the three-batch utility experiment."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .data_ingest import SampleWindow

FEATURE_NAMES = ("rms", "peak_to_peak", "crest_factor", "skewness", "excess_kurtosis", "std")
CLASSES = ("healthy", "faulty")


def extract_features(w) -> np.ndarray:
    """Six statistics per channel, concatenated channel by channel."""
    x = np.asarray(w.values if isinstance(w, SampleWindow) else w, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    rms = np.sqrt(np.mean(x * x, axis=0))
    p2p = x.max(axis=0) - x.min(axis=0)
    peak = np.abs(x).max(axis=0)
    crest = np.divide(peak, rms, out=np.zeros_like(rms), where=rms > 0)
    mu = x.mean(axis=0)
    dev = x - mu
    m2 = np.mean(dev ** 2, axis=0)
    m3 = np.mean(dev ** 3, axis=0)
    m4 = np.mean(dev ** 4, axis=0)
    live = m2 > 1e-300
    skew = np.divide(m3, m2 ** 1.5, out=np.zeros_like(m2), where=live)
    kurt = np.where(live, np.divide(m4, m2 ** 2, out=np.zeros_like(m2), where=live) - 3.0, 0.0)
    std = np.sqrt(m2)
    return np.stack([rms, p2p, crest, skew, kurt, std], axis=1).ravel()


def feature_matrix(windows: Sequence[SampleWindow]) -> np.ndarray:
    return np.stack([extract_features(w) for w in windows])


@dataclass
class ClassifierConfig:
    epochs: int = 500
    lr: float = 0.5
    l2: float = 1e-3
    seed: int = 0
    class_weighting: str = "inverse-frequency"

    def validate(self):
        if self.epochs <= 0 or self.lr <= 0 or self.l2 < 0:
            raise ValueError("epochs and lr must be positive, l2 non-negative")
        if self.class_weighting not in ("none", "inverse-frequency"):
            raise ValueError(f"unknown class_weighting {self.class_weighting!r}")


@dataclass
class ClassifierModel:
    weights: np.ndarray
    bias: float
    mean: np.ndarray
    scale: np.ndarray
    seed: int

    def predict_proba(self, X) -> np.ndarray:
        z = ((np.asarray(X, float) - self.mean) / self.scale) @ self.weights + self.bias
        return 0.5 * (1.0 + np.tanh(0.5 * z))

    def predict(self, X) -> np.ndarray:
        return self.predict_proba(X) >= 0.5


def train_classifier(X, y, cfg: ClassifierConfig = ClassifierConfig()) -> ClassifierModel:
    """L2-regularized logistic regression by full-batch gradient descent."""
    cfg.validate()
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.ndim != 2 or len(X) == 0:
        raise ValueError("training data is empty")
    if len(y) != len(X):
        raise ValueError("feature and label counts differ")
    n_pos = y.sum()
    n_neg = len(y) - n_pos
    if cfg.class_weighting == "inverse-frequency":
        if n_pos == 0 or n_neg == 0:
            raise ValueError("cannot weight an absent class: training data holds a single class")
        sw = np.where(y > 0, len(y) / (2.0 * n_pos), len(y) / (2.0 * n_neg))
    else:
        sw = np.ones_like(y)
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale = np.where(scale > 1e-12, scale, 1.0)
    Z = (X - mean) / scale
    rng = np.random.default_rng(cfg.seed)
    w = rng.normal(0.0, 0.01, size=X.shape[1])
    b = 0.0
    norm = sw.sum()
    for _ in range(cfg.epochs):
        p = 0.5 * (1.0 + np.tanh(0.5 * (Z @ w + b)))
        r = sw * (p - y) / norm
        w -= cfg.lr * (Z.T @ r + cfg.l2 * w)
        b -= cfg.lr * r.sum()
    return ClassifierModel(w, float(b), mean, scale, cfg.seed)


@dataclass
class ClassReport:
    per_class: dict[str, dict[str, float]]
    confusion: list[list[int]]  # rows: true healthy/faulty, cols: predicted healthy/faulty

    def to_dict(self) -> dict:
        return {"classes": self.per_class, "confusion": self.confusion}


def _prf(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    f = 2 * p * r / (p + r) if p + r else 0.0
    return p, r, f


def report_from_predictions(y_true, y_pred) -> ClassReport:
    y_true = np.asarray(y_true, bool)
    y_pred = np.asarray(y_pred, bool)
    tp = int(np.sum(y_true & y_pred))
    tn = int(np.sum(~y_true & ~y_pred))
    fp = int(np.sum(~y_true & y_pred))
    fn = int(np.sum(y_true & ~y_pred))
    per = {}
    p, r, f = _prf(tn, fn, fp)
    per["healthy"] = {"precision": p, "recall": r, "f1": f, "support": tn + fp}
    p, r, f = _prf(tp, fp, fn)
    per["faulty"] = {"precision": p, "recall": r, "f1": f, "support": tp + fn}
    return ClassReport(per, [[tn, fp], [fn, tp]])


def evaluate(model: ClassifierModel, X, y) -> ClassReport:
    X = np.asarray(X, float)
    if len(X) == 0:
        raise ValueError("empty test set")
    return report_from_predictions(y, model.predict(X))


# --------------------------------------------------------------------------
# three-batch experiment
# --------------------------------------------------------------------------

@dataclass
class BatchInputs:
    """Everything one (seed) of the experiment needs, already generated.

    ``available`` / ``unavailable`` come from the held-out partition;
    ``lto`` maps each target to its leave-target-out (A, U) pair.
    ``synth_full`` is the counterpart of ``unavailable`` from a generator fit
    on all data; ``synth_lto`` maps each target to the counterpart of its
    leave-target-out U from a generator that never saw that target's faults.
    """

    available: list[SampleWindow]
    unavailable: list[SampleWindow]
    targets: list[int]
    lto: dict[int, tuple[list[SampleWindow], list[SampleWindow]]]
    synth_full: list[SampleWindow] | None = None
    synth_lto: dict[int, list[SampleWindow]] = field(default_factory=dict)


def _xy(windows):
    return feature_matrix(windows), np.array([w.is_faulty for w in windows], dtype=bool)


def run_three_batches(inputs: BatchInputs, seed: int, clf: ClassifierConfig = ClassifierConfig()) -> list[dict]:
    """One entry per (batch, target): batch 1 on A, batch 2 on A + S_full, batch 3 on A_lto + S_lto."""
    if inputs.synth_full is None:
        raise ValueError("missing full-data generator output for batch 2")
    missing = [t for t in inputs.targets if t not in inputs.synth_lto]
    if missing:
        raise ValueError(f"missing leave-target-out generator output for targets {missing}")
    cfg = ClassifierConfig(clf.epochs, clf.lr, clf.l2, seed, clf.class_weighting)
    entries = []

    def test_on(model, target, windows):
        tw = [w for w in windows if w.bearing_id == target]
        X, y = _xy(tw)
        return evaluate(model, X, y)

    m1 = train_classifier(*_xy(inputs.available), cfg)
    m2 = train_classifier(*_xy(inputs.available + inputs.synth_full), cfg)
    for t in inputs.targets:
        entries.append({"batch": 1, "target": t, "seed": seed, **test_on(m1, t, inputs.unavailable).to_dict()})
    for t in inputs.targets:
        entries.append({"batch": 2, "target": t, "seed": seed, **test_on(m2, t, inputs.unavailable).to_dict()})
    for t in inputs.targets:
        a_t, u_t = inputs.lto[t]
        m3 = train_classifier(*_xy(a_t + inputs.synth_lto[t]), cfg)
        entries.append({"batch": 3, "target": t, "seed": seed, **test_on(m3, t, u_t).to_dict()})
    return entries


def aggregate(entries: Sequence[dict]) -> dict:
    """Per-batch means of every per-class metric over all targets and seeds."""
    out = {}
    for batch in sorted({e["batch"] for e in entries}):
        rows = [e for e in entries if e["batch"] == batch]
        agg = {}
        for cls in CLASSES:
            agg[cls] = {m: float(np.mean([r["classes"][cls][m] for r in rows])) for m in ("precision", "recall", "f1")}
        out[str(batch)] = {"n_models": len(rows), **agg}
    return out


ProbeFn = Callable[[Sequence[SampleWindow]], np.ndarray]


def fault_probe(real: Sequence[SampleWindow], seed: int = 0) -> ProbeFn:
    """Classifier trained on real labelled windows; returns P(faulty) for new windows."""
    model = train_classifier(*_xy(list(real)), ClassifierConfig(seed=seed))
    return lambda ws: model.predict_proba(feature_matrix(ws))
