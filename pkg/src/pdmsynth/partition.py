"""End-of-life detection, failure-horizon labels and the A/U split."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .data_ingest import NormalizationSpec, RawRun, SampleWindow, windowize

DEFAULT_HORIZON_WINDOWS = 8
MANIFEST_VERSION = 1


@dataclass
class RunToFailure:
    windows: list[SampleWindow]
    eol_point_index: int
    bearing_id: int
    condition_id: int
    window_length: int
    n_points: int

    @property
    def labels(self) -> np.ndarray:
        return np.array([w.is_faulty for w in self.windows], dtype=bool)

    def first_fault(self) -> int:
        """Index of the first faulty window, or the window count if there is none."""
        idx = np.flatnonzero(self.labels)
        return int(idx[0]) if idx.size else len(self.windows)


@dataclass
class PartitionConfig:
    k: int
    gamma: float = 0.3
    o: int = DEFAULT_HORIZON_WINDOWS * 2560
    complete_run_ids: list[int] = field(default_factory=list)

    def validate(self, n_runs: int | None = None):
        if len(self.complete_run_ids) != self.k:
            raise ValueError(f"k={self.k} but {len(self.complete_run_ids)} complete_run_ids given")
        if len(set(self.complete_run_ids)) != len(self.complete_run_ids):
            raise ValueError("duplicate complete_run_ids")
        if n_runs is not None and self.k > n_runs:
            raise ValueError(f"k={self.k} exceeds run count {n_runs}")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must lie in (0, 1): every bearing needs some healthy data in A")
        if self.o < 0:
            raise ValueError("failure horizon o must be non-negative")


@dataclass
class Partition:
    available: list[SampleWindow]
    unavailable: list[SampleWindow]
    provenance: dict[tuple[int, int], str]  # (run id, window_index) -> "A" | "U"
    cutoffs: dict[int, int]  # run id -> number of leading windows placed in A

    def keys(self, part: str) -> set[tuple[int, int]]:
        return {k for k, v in self.provenance.items() if v == part}


def detect_eol(run_points: np.ndarray) -> int:
    """First raw index lying 3 or more run standard deviations from the run mean.

    Statistics are per channel over the whole run; the earliest qualifying
    index over all channels wins. Returns ``T - 1`` when nothing qualifies.
    """
    x = np.asarray(run_points, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] < 2:
        raise ValueError("need at least two points to detect end-of-life")
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    live = std > 0
    if not live.any():
        raise ValueError("zero spread in every channel")
    hit = np.abs(x[:, live] - mean[live]) >= 3.0 * std[live]
    rows = np.flatnonzero(hit.any(axis=1))
    return int(rows[0]) if rows.size else x.shape[0] - 1


def label_faulty(run: RunToFailure, o: int) -> RunToFailure:
    """Mark every window whose raw span reaches into [eol - o, end] as faulty."""
    if o < 0:
        raise ValueError("o must be non-negative")
    l = run.window_length
    start = run.eol_point_index - o
    windows = [replace(w, is_faulty=bool((w.window_index + 1) * l - 1 >= start)) for w in run.windows]
    return replace(run, windows=windows)


def build_run(raw: RawRun, norm: NormalizationSpec, l: int, o: int) -> RunToFailure:
    """Windowize a raw run, find its EoL and apply the failure horizon."""
    run = RunToFailure(
        windows=windowize(raw, norm, l),
        eol_point_index=detect_eol(raw.points),
        bearing_id=raw.bearing_id,
        condition_id=raw.condition_id,
        window_length=l,
        n_points=raw.n_points,
    )
    return label_faulty(run, o)


def gamma_cutoff(run: RunToFailure, gamma: float) -> int:
    n_front = math.floor(gamma * len(run.windows) + 1e-9)
    return min(n_front, run.first_fault())


def split(runs: Sequence[RunToFailure], cfg: PartitionConfig) -> Partition:
    ids = [r.bearing_id for r in runs]
    cfg.validate(len(runs))
    unknown = set(cfg.complete_run_ids) - set(ids)
    if unknown:
        raise ValueError(f"complete_run_ids reference unknown runs: {sorted(unknown)}")
    complete = set(cfg.complete_run_ids)
    avail, unavail, prov, cutoffs = [], [], {}, {}
    for run in runs:
        cut = len(run.windows) if run.bearing_id in complete else gamma_cutoff(run, cfg.gamma)
        cutoffs[run.bearing_id] = cut
        for w in run.windows:
            if w.window_index < cut:
                avail.append(w)
                prov[w.key] = "A"
            else:
                unavail.append(w)
                prov[w.key] = "U"
    return Partition(avail, unavail, prov, cutoffs)


def leave_target_out(runs: Sequence[RunToFailure], target_bearing: int, gamma: float,
                     o: int = DEFAULT_HORIZON_WINDOWS * 2560) -> Partition:
    """Every run except ``target_bearing`` is complete; the target keeps only its healthy prefix."""
    ids = [r.bearing_id for r in runs]
    if target_bearing not in ids:
        raise ValueError(f"unknown target bearing {target_bearing}")
    others = [i for i in ids if i != target_bearing]
    return split(runs, PartitionConfig(k=len(others), gamma=gamma, o=o, complete_run_ids=others))


# --------------------------------------------------------------------------
# Manifest
# --------------------------------------------------------------------------

def partition_manifest(runs: Sequence[RunToFailure], part: Partition, gamma: float, o: int,
                       complete_run_ids: Sequence[int], mode: str = "held-out",
                       target: int | None = None) -> dict:
    complete = set(complete_run_ids)
    entries = []
    for run in runs:
        entries.append({
            "bearing_id": run.bearing_id,
            "condition_id": run.condition_id,
            "eol_point_index": run.eol_point_index,
            "o": o,
            "gamma": gamma,
            "complete": run.bearing_id in complete,
            "cutoff": part.cutoffs[run.bearing_id],
            "windows": [
                {"index": w.window_index, "partition": part.provenance[w.key], "is_faulty": bool(w.is_faulty)}
                for w in run.windows
            ],
        })
    return {
        "schema_version": MANIFEST_VERSION,
        "mode": mode,
        "target": target,
        "gamma": gamma,
        "o": o,
        "complete_run_ids": sorted(complete),
        "counts": {
            "A": len(part.available),
            "U": len(part.unavailable),
            "faulty_A": sum(w.is_faulty for w in part.available),
            "faulty_U": sum(w.is_faulty for w in part.unavailable),
        },
        "runs": entries,
    }


def write_manifest(manifest: dict, path) -> None:
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True))


def read_manifest(path) -> dict:
    m = json.loads(Path(path).read_text())
    if m.get("schema_version") != MANIFEST_VERSION:
        raise ValueError(f"{path}: unsupported manifest schema {m.get('schema_version')}")
    return m


def manifest_labels(manifest: dict, part: str) -> list[tuple[int, int, bool]]:
    """(bearing_id, window_index, is_faulty) for every window in ``part``, in manifest order."""
    return [
        (r["bearing_id"], w["index"], w["is_faulty"])
        for r in manifest["runs"]
        for w in r["windows"]
        if w["partition"] == part
    ]
