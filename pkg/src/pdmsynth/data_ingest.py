"""Reading PRONOSTIA-style run directories, surrogate runs, and normalization.

Raw runs live in g-units; everything downstream of :func:`windowize` works in
model space, where each channel has been centred, scaled and clamped.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

FILE_ROWS = 2560
DEFAULT_WINDOW = 2560
SAMPLE_RATE_HZ = 25600.0
AMPLITUDE_LIMIT_G = 20.0
CLAMP = 1.5


class IngestError(ValueError):
    """Raised for malformed run directories or files."""


@dataclass
class RawRun:
    bearing_id: int
    condition_id: int
    points: np.ndarray  # (T_total, d), g-units
    sample_rate_hz: float = SAMPLE_RATE_HZ

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64)
        if self.points.ndim != 2 or self.points.shape[0] == 0:
            raise IngestError(f"points must be a non-empty (T, d) matrix, got {self.points.shape}")
        if not np.all(np.isfinite(self.points)):
            raise IngestError(f"bearing {self.bearing_id}: non-finite values in run")

    @property
    def n_points(self) -> int:
        return self.points.shape[0]


@dataclass
class SampleWindow:
    values: np.ndarray  # (l, d), model space
    bearing_id: int
    window_index: int
    is_faulty: bool = False

    @property
    def key(self) -> tuple[int, int]:
        return (self.bearing_id, self.window_index)


@dataclass(frozen=True)
class NormalizationSpec:
    center: np.ndarray
    scale: np.ndarray
    method: str

    def normalize(self, x: np.ndarray) -> np.ndarray:
        return (x - self.center) / self.scale

    def denormalize(self, z: np.ndarray) -> np.ndarray:
        return z * self.scale + self.center

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "center": [float(v) for v in self.center],
            "scale": [float(v) for v in self.scale],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NormalizationSpec":
        return cls(np.asarray(d["center"], float), np.asarray(d["scale"], float), d["method"])


# --------------------------------------------------------------------------
# PRONOSTIA CSV layout
# --------------------------------------------------------------------------

def _detect_delimiter(first_line: str) -> str:
    if ";" in first_line and "," not in first_line:
        return ";"
    return ","


def _read_acc_file(path: Path) -> np.ndarray:
    text = path.read_text()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if len(lines) != FILE_ROWS:
        raise IngestError(f"{path}: expected {FILE_ROWS} rows, found {len(lines)}")
    delim = _detect_delimiter(lines[0])
    out = np.empty((FILE_ROWS, 2))
    for i, row in enumerate(csv.reader(io.StringIO("\n".join(lines)), delimiter=delim)):
        if len(row) < 6:
            raise IngestError(f"{path}:{i + 1}: expected at least 6 columns, found {len(row)}")
        try:
            out[i, 0] = float(row[-2])
            out[i, 1] = float(row[-1])
        except ValueError as exc:
            raise IngestError(f"{path}:{i + 1}: unparseable numeric field ({exc})") from None
    if not np.all(np.isfinite(out)):
        raise IngestError(f"{path}: non-finite acceleration value")
    return out


def read_pronostia_run(dir_path, bearing_id: int, condition_id: int) -> RawRun:
    """Concatenate the acceleration columns of every ``acc_*.csv`` in ``dir_path``.

    Files are taken in lexicographic order, which for the zero-padded
    PRONOSTIA names is also temporal order.
    """
    d = Path(dir_path)
    if not d.is_dir():
        raise IngestError(f"run directory not found: {d}")
    files = sorted(d.glob("acc_*.csv"), key=lambda p: p.name)
    if not files:
        raise IngestError(f"{d}: no acc_*.csv files")
    points = np.concatenate([_read_acc_file(f) for f in files], axis=0)
    return RawRun(bearing_id, condition_id, points)


def write_pronostia_run(run: RawRun, dir_path) -> list[Path]:
    """Write ``run`` as acc_NNNNN.csv files of 2560 rows each."""
    if run.points.shape[1] != 2:
        raise IngestError("PRONOSTIA layout holds exactly two acceleration channels")
    if run.n_points % FILE_ROWS:
        raise IngestError(f"run length {run.n_points} is not a multiple of {FILE_ROWS}")
    d = Path(dir_path)
    d.mkdir(parents=True, exist_ok=True)
    dt_us = 1e6 / run.sample_rate_hz
    paths = []
    for f in range(run.n_points // FILE_ROWS):
        block = run.points[f * FILE_ROWS:(f + 1) * FILE_ROWS]
        t0 = 10 * f  # one snapshot every 10 s
        hour, rem = divmod(t0, 3600)
        minute, second = divmod(rem, 60)
        path = d / f"acc_{f + 1:05d}.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            for j, (h, v) in enumerate(block):
                w.writerow([hour, minute, second, f"{j * dt_us:.1f}", repr(float(h)), repr(float(v))])
        paths.append(path)
    return paths


def run_dir_name(condition_id: int, bearing_id: int) -> str:
    return f"Bearing{condition_id}_{bearing_id}"


def read_pronostia_tree(root) -> list[RawRun]:
    """Read every ``Bearing<condition>_<run>`` directory under ``root``.

    Bearing IDs are assigned 0..n-1 in lexicographic directory order.
    """
    root = Path(root)
    if not root.is_dir():
        raise IngestError(f"dataset root not found: {root}")
    dirs = sorted(p for p in root.iterdir() if p.is_dir() and p.name.startswith("Bearing"))
    if not dirs:
        raise IngestError(f"{root}: no Bearing*_* run directories")
    runs = []
    for i, p in enumerate(dirs):
        try:
            cond = int(p.name[len("Bearing"):].split("_")[0])
        except ValueError:
            raise IngestError(f"cannot parse condition from directory name {p.name}") from None
        runs.append(read_pronostia_run(p, i, cond))
    return runs


# --------------------------------------------------------------------------
# Surrogate runs
# --------------------------------------------------------------------------

@dataclass
class SurrogateSpec:
    duration_windows: int
    healthy_amplitude: float = 0.5
    degradation_onset_fraction: float = 0.5
    degradation_growth: float = 1.15
    burst_rate: float = 0.5
    seed: int = 0
    # Not part of the core contract; they let one dataset mix failure modes.
    window_length: int = DEFAULT_WINDOW
    channel_growth: tuple[float, ...] = (1.0, 1.0)
    bearing_id: int = 0
    condition_id: int = 1

    def validate(self):
        if self.duration_windows < 4:
            raise ValueError("duration_windows must be >= 4")
        if self.healthy_amplitude <= 0:
            raise ValueError("healthy_amplitude must be positive")
        if self.degradation_growth <= 0:
            raise ValueError("degradation_growth must be positive")
        if not 0 < self.degradation_onset_fraction < 1:
            raise ValueError("degradation_onset_fraction must lie in (0, 1)")
        if self.burst_rate < 0:
            raise ValueError("burst_rate must be non-negative")
        if any(g < 0 for g in self.channel_growth):
            raise ValueError("channel_growth entries must be non-negative")


def surrogate_amplitudes(spec: SurrogateSpec) -> np.ndarray:
    """Per-window, per-channel noise standard deviation, shape (W, d)."""
    onset = int(math.floor(spec.degradation_onset_fraction * spec.duration_windows))
    w = np.arange(spec.duration_windows)
    steps = np.maximum(0, w - onset + 1)[:, None]
    expo = steps * np.asarray(spec.channel_growth, float)[None, :]
    return spec.healthy_amplitude * spec.degradation_growth ** expo


def generate_surrogate_run(spec: SurrogateSpec) -> RawRun:
    """Synthesize one run-to-failure.

    Healthy noise is uniform with standard deviation ``healthy_amplitude`` so a
    non-degrading channel never produces a 3-sigma outlier. After onset the
    amplitude grows by ``degradation_growth`` per window (raised to the
    channel's ``channel_growth`` exponent) and decaying-sinusoid bursts arrive
    as a Poisson process. The run stops at the first window holding a point
    beyond 20 g.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    l = spec.window_length
    d = len(spec.channel_growth)
    amps = surrogate_amplitudes(spec)
    onset = int(math.floor(spec.degradation_onset_fraction * spec.duration_windows))
    half_width = math.sqrt(3.0)
    x = rng.uniform(-half_width, half_width, size=(spec.duration_windows, l, d)) * amps[:, None, :]

    burst_len = max(4, min(64, l // 8))
    tau = np.arange(burst_len)
    kernel = np.exp(-tau / (burst_len / 5.0)) * np.sin(2 * np.pi * 0.2 * tau)
    weight = np.minimum(np.asarray(spec.channel_growth, float), 1.0)
    for w in range(onset, spec.duration_windows):
        n_bursts = rng.poisson(spec.burst_rate)
        for _ in range(n_bursts):
            start = int(rng.integers(0, l - burst_len + 1))
            sign = 1.0 if rng.random() < 0.5 else -1.0
            x[w, start:start + burst_len, :] += sign * kernel[:, None] * (4.0 * amps[w] * weight)[None, :]

    points = x.reshape(-1, d)
    over = np.flatnonzero(np.any(np.abs(points) > AMPLITUDE_LIMIT_G, axis=1))
    if over.size:
        n_windows = over[0] // l + 1
        points = points[: n_windows * l]
    return RawRun(spec.bearing_id, spec.condition_id, points.copy())


# --------------------------------------------------------------------------
# Normalization and windowing
# --------------------------------------------------------------------------

NORMALIZATION_METHODS = ("global-minmax", "global-standardize")


def fit_normalization(runs: Sequence[RawRun], method: str = "global-standardize") -> NormalizationSpec:
    if not runs:
        raise ValueError("need at least one run")
    if method not in NORMALIZATION_METHODS:
        raise ValueError(f"unknown normalization method {method!r}")
    pooled = np.concatenate([r.points for r in runs], axis=0)
    lo, hi = pooled.min(axis=0), pooled.max(axis=0)
    if np.any(hi - lo <= 0):
        const = [int(c) for c in np.flatnonzero(hi - lo <= 0)]
        raise ValueError(f"constant channel(s) {const}: cannot normalize zero spread")
    if method == "global-minmax":
        center = (hi + lo) / 2.0
        scale = (hi - lo) / 2.0
    else:
        center = pooled.mean(axis=0)
        scale = 3.0 * pooled.std(axis=0)
    return NormalizationSpec(center, np.maximum(scale, 1e-12), method)


def windowize(run: RawRun, norm: NormalizationSpec, l: int = DEFAULT_WINDOW) -> list[SampleWindow]:
    """Cut ``run`` into non-overlapping normalized windows; the tail remainder is dropped."""
    if l <= 0:
        raise ValueError("window length must be positive")
    if l > run.n_points:
        raise ValueError(f"window length {l} exceeds run length {run.n_points}")
    n = run.n_points // l
    z = np.clip(norm.normalize(run.points[: n * l]), -CLAMP, CLAMP)
    z = z.reshape(n, l, -1)
    return [SampleWindow(z[i].copy(), run.bearing_id, i, False) for i in range(n)]


@dataclass
class Dataset:
    """Windowed runs plus the normalization used to produce them."""

    runs: list[RawRun]
    norm: NormalizationSpec
    window_length: int
    windows: dict[int, list[SampleWindow]] = field(default_factory=dict)

    @classmethod
    def build(cls, runs: Sequence[RawRun], window_length: int, method: str = "global-standardize"):
        norm = fit_normalization(runs, method)
        ds = cls(list(runs), norm, window_length)
        ds.windows = {r.bearing_id: windowize(r, norm, window_length) for r in runs}
        return ds

    @property
    def bearing_ids(self) -> list[int]:
        return sorted(self.windows)
