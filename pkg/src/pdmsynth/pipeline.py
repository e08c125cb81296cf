"""Stage orchestration over the artifact store.

Each stage is keyed by its own configuration plus the digests of the
artifacts it reads, and always reads those inputs back from disk so a cached
run and a fresh run see exactly the same bytes.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import shutil
from pathlib import Path
from typing import Callable

import numpy as np

from . import container
from .benchmark import PRESETS
from .config import PipelineConfig
from .data_ingest import Dataset, RawRun, SurrogateSpec, generate_surrogate_run, read_pronostia_tree
from .denoiser import ConSignal, init_params
from .diffusion import generate_counterpart, make_schedule, train
from .embedding import train_embedding
from .partition import (RunToFailure, detect_eol, label_faulty, leave_target_out, partition_manifest,
                        read_manifest, split, write_manifest, PartitionConfig)
from .pdm_eval import (BatchInputs, ClassifierConfig, aggregate, evaluate, fault_probe, feature_matrix,
                       run_three_batches, train_classifier)
from .plots import batches_svg, tsne_svg
from .store import ArtifactStore, stage_key
from .tsg_metrics import compute_report
from .tsne import tsne_project

REPORT_SCHEMA_VERSION = 1


class MissingArtifact(RuntimeError):
    pass


def sample_seed(seed: int) -> int:
    return 1_000_003 * seed + 11


def load_raw_runs(cfg: PipelineConfig) -> list[RawRun]:
    src = cfg.source
    if src.kind == "pronostia":
        return read_pronostia_tree(src.path)
    if src.runs is not None:
        specs = []
        for i, r in enumerate(src.runs):
            r = dict(r)
            if "channel_growth" in r:
                r["channel_growth"] = tuple(r["channel_growth"])
            r.setdefault("bearing_id", i)
            r.setdefault("window_length", cfg.window_length)
            specs.append(SurrogateSpec(**r))
    else:
        specs = PRESETS[src.preset](cfg.window_length)
    return [generate_surrogate_run(s) for s in specs]


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True))


class Pipeline:
    def __init__(self, cfg: PipelineConfig, store: ArtifactStore | None = None,
                 compute_upstream: bool = True, echo: Callable[[str], None] = print):
        self.cfg = cfg.validate()
        self.store = store or ArtifactStore(Path(cfg.out) / "store")
        self.compute_upstream = compute_upstream
        self.echo = echo
        self._seen: dict[str, Path] = {}
        self.computed: list[str] = []

    # -- plumbing -------------------------------------------------------------

    def _stage(self, stage: str, label: str, config, inputs: dict[str, Path], build, compute: bool) -> Path:
        digests = {k: self.store.digest(v) for k, v in inputs.items()}
        key = stage_key(stage, config, digests)
        if key in self._seen:
            return self._seen[key]
        hit = self.store.lookup(stage, key)
        if hit is not None:
            self.echo(f"[cached] {label}")
        else:
            if not compute:
                raise MissingArtifact(f"{label}: required artifact is missing; run the upstream stage first")
            path = self.store.begin(stage, key)
            build(path)
            self.store.commit(stage, key, label)
            self.computed.append(label)
            hit = path
        self._seen[key] = hit
        return hit

    @property
    def targets(self) -> list[int]:
        if self.cfg.partition.targets is not None:
            return list(self.cfg.partition.targets)
        runs = json.loads((self.ingest(self.compute_upstream) / "runs.json").read_text())
        return [r["bearing_id"] for r in runs if r["bearing_id"] not in self.cfg.partition.complete_run_ids]

    def load_runs(self) -> list[RunToFailure]:
        ing = self.ingest(self.compute_upstream)
        meta = json.loads((ing / "runs.json").read_text())
        windows = container.load_windows(ing / "windows.pdms")
        by_run: dict[int, list] = {}
        for w in windows:
            by_run.setdefault(w.bearing_id, []).append(w)
        runs = []
        for m in meta:
            r = RunToFailure(by_run[m["bearing_id"]], m["eol_point_index"], m["bearing_id"], m["condition_id"],
                             self.cfg.window_length, m["n_points"])
            runs.append(label_faulty(r, self.cfg.horizon))
        return runs

    def bearing_ids(self) -> list[int]:
        meta = json.loads((self.ingest(self.compute_upstream) / "runs.json").read_text())
        return sorted(m["bearing_id"] for m in meta)

    # -- stages ---------------------------------------------------------------

    def ingest(self, compute: bool = True) -> Path:
        cfg = self.cfg
        conf = {"source": dataclasses.asdict(cfg.source), "l": cfg.window_length, "norm": cfg.normalization}

        def build(path: Path):
            raws = load_raw_runs(cfg)
            ds = Dataset.build(raws, cfg.window_length, cfg.normalization)
            windows = [w for bid in ds.bearing_ids for w in ds.windows[bid]]
            container.save_windows(path / "windows.pdms", windows)
            runs = [{
                "bearing_id": r.bearing_id, "condition_id": r.condition_id,
                "eol_point_index": detect_eol(r.points), "n_points": r.n_points,
                "n_windows": len(ds.windows[r.bearing_id]),
            } for r in sorted(raws, key=lambda r: r.bearing_id)]
            _write_json(path / "runs.json", runs)
            _write_json(path / "norm.json", ds.norm.to_dict())
            self.echo(f"ingest: {len(runs)} runs, {len(windows)} windows of length {cfg.window_length}")

        return self._stage("ingest", "ingest", conf, {}, build, compute)

    def partition(self, compute: bool = True) -> Path:
        cfg = self.cfg
        ing = self.ingest(self.compute_upstream)
        p = cfg.partition
        conf = {"k": p.k, "gamma": p.gamma, "o": cfg.horizon, "complete": p.complete_run_ids, "targets": p.targets}

        def build(path: Path):
            runs = self.load_runs()
            pc = PartitionConfig(p.k, p.gamma, cfg.horizon, list(p.complete_run_ids))
            part = split(runs, pc)
            man = partition_manifest(runs, part, p.gamma, cfg.horizon, p.complete_run_ids)
            write_manifest(man, path / "heldout.json")
            c = man["counts"]
            self.echo(f"partition: |A|={c['A']} |U|={c['U']} faulty in A={c['faulty_A']} faulty in U={c['faulty_U']}")
            for t in self.targets:
                lp = leave_target_out(runs, t, p.gamma, cfg.horizon)
                others = [r.bearing_id for r in runs if r.bearing_id != t]
                lm = partition_manifest(runs, lp, p.gamma, cfg.horizon, others, mode="leave-target-out", target=t)
                write_manifest(lm, path / f"lto_{t}.json")
                self.echo(f"partition[target {t}]: |A|={lm['counts']['A']} |U|={lm['counts']['U']}")

        return self._stage("partition", "partition", conf, {"ingest": ing}, build, compute)

    def _manifest(self, mode: str, target: int | None) -> dict:
        part = self.partition(self.compute_upstream)
        name = f"lto_{target}.json" if mode == "leave-target-out" else "heldout.json"
        return read_manifest(part / name)

    def _windows(self, manifest: dict, which: str) -> list:
        """Labelled windows for partition ``which`` ("A", "U" or "all") in manifest order."""
        runs = {r.bearing_id: r for r in self.load_runs()}
        out = []
        for r in manifest["runs"]:
            run = runs[r["bearing_id"]]
            for w in r["windows"]:
                if which == "all" or w["partition"] == which:
                    out.append(run.windows[w["index"]])
        return out

    def train(self, mode: str, seed: int, target: int | None = None, compute: bool = True) -> Path:
        cfg = self.cfg
        if mode == "leave-target-out" and target is None:
            raise ValueError("leave-target-out training needs a target")
        part = self.partition(self.compute_upstream)
        tcfg = dataclasses.replace(cfg.train, seed=seed)
        conf = {"mode": mode, "target": target, "seed": seed,
                "denoiser": dataclasses.asdict(cfg.denoiser), "train": dataclasses.asdict(tcfg)}
        label = f"train[{mode}{'' if target is None else f' target {target}'} seed {seed}]"

        def build(path: Path):
            man = self._manifest(mode, target)
            windows = self._windows(man, "all" if mode == "full-data" else "A")
            ids = self.bearing_ids()
            data = [(w, ConSignal.make(ids.index(w.bearing_id), len(ids), w.is_faulty)) for w in windows]
            d = cfg.denoiser
            model = init_params(seed, cfg.window_length, windows[0].values.shape[1], d.h, d.R, d.e,
                                len(ids), tcfg.T, tuple(d.dilations))
            sched = make_schedule(tcfg.T, tcfg.beta_start, tcfg.beta_end)
            params, losses = train(model, data, tcfg, sched)
            container.save_denoiser(path / "denoiser.pdms", params)
            with open(path / "loss.csv", "w", newline="") as fh:
                wr = csv.writer(fh)
                wr.writerow(["epoch", "mean_loss"])
                for i, v in enumerate(losses):
                    wr.writerow([i + 1, repr(float(v))])
            _write_json(path / "meta.json", {
                "bearing_ids": ids, "T": tcfg.T, "beta_start": tcfg.beta_start, "beta_end": tcfg.beta_end,
                "n_train": len(data), "final_loss": float(losses[-1]), "mode": mode, "target": target, "seed": seed,
            })
            self.echo(f"{label}: {len(data)} windows, loss {losses[0]:.4f} -> {losses[-1]:.4f}")

        return self._stage("train", label, conf, {"partition": part}, build, compute)

    def generate(self, mode: str, seed: int, target: int | None = None, compute: bool = True) -> Path:
        part = self.partition(self.compute_upstream)
        ckpt = self.train(mode, seed, target, compute=self.compute_upstream)
        conf = {"mode": mode, "target": target, "seed": seed, "sample_seed": sample_seed(seed)}
        label = f"generate[{mode}{'' if target is None else f' target {target}'} seed {seed}]"

        def build(path: Path):
            meta = json.loads((ckpt / "meta.json").read_text())
            params = container.load_denoiser(ckpt / "denoiser.pdms")
            sched = make_schedule(meta["T"], meta["beta_start"], meta["beta_end"])
            ids = meta["bearing_ids"]
            man = self._manifest(mode, target)
            u = [(b, i, f) for r in man["runs"] for (b, i, f) in
                 [(r["bearing_id"], w["index"], w["is_faulty"]) for w in r["windows"] if w["partition"] == "U"]]
            if not u:
                raise ValueError(f"{label}: U is empty, nothing to generate")
            signals = [ConSignal.make(ids.index(b), len(ids), f) for b, _, f in u]
            S = generate_counterpart(params, sched, signals, sample_seed(seed), bearing_ids=ids,
                                     keys=[(b, i) for b, i, _ in u], checkpoint_id=self.store.digest(ckpt),
                                     source=f"{mode}:{'heldout' if target is None else f'lto_{target}'}")
            container.save_windows(path / "synth.pdms", S.windows)
            _write_json(path / "sidecar.json", {
                "generator_checkpoint_id": S.generator_checkpoint_id,
                "con_signals_source": S.con_signals_source,
                "con_signals": [{"bearing_id": b, "window_index": i, "is_faulty": bool(f)} for b, i, f in u],
            })
            self.echo(f"{label}: {len(S.windows)} windows ({sum(f for *_, f in u)} faulty)")

        return self._stage("generate", label, conf, {"partition": part, "checkpoint": ckpt}, build, compute)

    def evaluate(self, compute: bool = True) -> Path:
        cfg = self.cfg
        up = self.compute_upstream
        targets = self.targets
        inputs = {"partition": self.partition(up)}
        for s in cfg.seeds:
            inputs[f"full/{s}"] = self.generate("full-data", s, compute=up)
            for t in targets:
                inputs[f"lto/{s}/{t}"] = self.generate("leave-target-out", s, t, compute=up)
            if cfg.evaluate_held_out:
                inputs[f"held/{s}"] = self.generate("held-out", s, compute=up)
        conf = {"metrics": dataclasses.asdict(cfg.metrics), "pdm": dataclasses.asdict(cfg.pdm),
                "seeds": cfg.seeds, "targets": targets, "held_out": cfg.evaluate_held_out}

        def build(path: Path):
            self._evaluate(path, inputs, targets)

        out = self._stage("evaluate", "evaluate", conf, inputs, build, compute)
        dest = Path(cfg.out)
        for name in ("report.json", "experiment.csv", "tsne.csv", "tsne.svg", "results.svg"):
            shutil.copyfile(out / name, dest / name)
        return out

    def _evaluate(self, path: Path, inputs: dict[str, Path], targets: list[int]) -> None:
        cfg = self.cfg
        held = self._manifest("held-out", None)
        A, U = self._windows(held, "A"), self._windows(held, "U")
        real_all = self._windows(held, "all")
        lto = {}
        for t in targets:
            m = self._manifest("leave-target-out", t)
            lto[t] = (self._windows(m, "A"), self._windows(m, "U"))
        enc = train_embedding(real_all, cfg.metrics.q, cfg.metrics.seed, cfg.metrics.embedding_epochs)
        probe = fault_probe(real_all, seed=0)
        clf = ClassifierConfig(cfg.pdm.epochs, cfg.pdm.lr, cfg.pdm.l2, 0, cfg.pdm.class_weighting)

        metrics: dict[str, dict] = {"full-data": {}, "leave-target-out": {}}
        entries, probe_gaps, protocol = [], {}, []
        for s in cfg.seeds:
            S_full = container.load_windows(inputs[f"full/{s}"] / "synth.pdms")
            S_lto = {t: container.load_windows(inputs[f"lto/{s}/{t}"] / "synth.pdms") for t in targets}
            metrics["full-data"][str(s)] = compute_report(U, S_full, enc, cfg.metrics).to_dict()
            U_lto = [w for t in targets for w in lto[t][1]]
            S_lto_all = [w for t in targets for w in S_lto[t]]
            metrics["leave-target-out"][str(s)] = compute_report(U_lto, S_lto_all, enc, cfg.metrics).to_dict()
            bi = BatchInputs(A, U, targets, lto, S_full, S_lto)
            entries.extend(run_three_batches(bi, s, clf))
            gaps = {}
            for t in targets:
                sc = probe(S_lto[t])
                fl = np.array([w.is_faulty for w in S_lto[t]])
                gaps[str(t)] = float(sc[fl].mean() - sc[~fl].mean()) if fl.any() and (~fl).any() else 0.0
            probe_gaps[str(s)] = gaps
            if cfg.evaluate_held_out:
                S_held = container.load_windows(inputs[f"held/{s}"] / "synth.pdms")
                metrics.setdefault("held-out", {})[str(s)] = compute_report(U, S_held, enc, cfg.metrics).to_dict()
                protocol.extend(self._held_out_protocol(A, U, S_held, targets, s, clf))

        s0 = cfg.seeds[0]
        S0 = container.load_windows(inputs[f"full/{s0}"] / "synth.pdms")
        feats = feature_matrix(U + S0)
        feats = (feats - feats.mean(0)) / np.where(feats.std(0) > 0, feats.std(0), 1.0)
        perp = min(cfg.metrics.perplexity, (len(feats) - 1) / 3.0 - 1e-6)
        ts = tsne_project(feats, perp, cfg.metrics.tsne_iterations, cfg.metrics.seed)
        origin = ["real"] * len(U) + ["synthetic"] * len(S0)
        labels = ["faulty" if w.is_faulty else "healthy" for w in U + S0]
        with open(path / "tsne.csv", "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["x", "y", "label", "origin"])
            for (x, y), lab, org in zip(ts.embedding, labels, origin):
                wr.writerow([repr(float(x)), repr(float(y)), lab, org])
        tsne_svg(ts.embedding, origin, path / "tsne.svg")
        batches_svg(entries, path / "results.svg")

        with open(path / "experiment.csv", "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["batch", "target", "seed", "class", "precision", "recall", "f1", "support"])
            for e in entries:
                for cls, v in e["classes"].items():
                    wr.writerow([e["batch"], e["target"], e["seed"], cls, repr(v["precision"]),
                                 repr(v["recall"]), repr(v["f1"]), v["support"]])

        per_seed = {str(s): aggregate([e for e in entries if e["seed"] == s]) for s in cfg.seeds}
        report = {
            "schema_version": REPORT_SCHEMA_VERSION,
            "seeds": cfg.seeds,
            "targets": targets,
            "metrics": metrics,
            "experiment": {"entries": entries, "aggregate": aggregate(entries), "per_seed": per_seed},
            "probe_fault_score_gap": probe_gaps,
            "embedding_final_loss": enc.final_loss,
            "tsne_final_kl": ts.kl_history[-1],
        }
        if protocol:
            report["held_out_protocol"] = protocol
        _write_json(path / "report.json", report)
        agg = report["experiment"]["aggregate"]
        self.echo("evaluate: mean faulty F1 by batch: " +
                  ", ".join(f"batch {b}={v['faulty']['f1']:.3f}" for b, v in agg.items()))

    @staticmethod
    def _held_out_protocol(A, U, S, targets, seed, clf) -> list[dict]:
        """M_p' on A versus M_p'' on A + S, both tested on each target's share of U."""
        cfg = dataclasses.replace(clf, seed=seed)
        fx = lambda ws: (feature_matrix(ws), np.array([w.is_faulty for w in ws]))  # noqa: E731
        m1 = train_classifier(*fx(A), cfg)
        m2 = train_classifier(*fx(A + S), cfg)
        out = []
        for t in targets:
            X, y = fx([w for w in U if w.bearing_id == t])
            for name, m in (("A", m1), ("A+S", m2)):
                out.append({"train_set": name, "target": t, "seed": seed, **evaluate(m, X, y).to_dict()})
        return out

    def run_all(self) -> Path:
        for s in self.cfg.seeds:
            self.generate("full-data", s)
            for t in self.targets:
                self.generate("leave-target-out", s, t)
            if self.cfg.evaluate_held_out:
                self.generate("held-out", s)
        return self.evaluate()
