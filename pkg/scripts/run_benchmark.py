"""Run the surrogate benchmark (all stages, 5 seeds) and print the per-seed batch summary.

    python3 scripts/run_benchmark.py --out runs/benchmark
"""

import argparse
import json
import time
from pathlib import Path

from pdmsynth.benchmark import benchmark_config
from pdmsynth.pipeline import Pipeline


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="runs/benchmark")
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    args = ap.parse_args()
    cfg = benchmark_config(args.out, seeds=args.seeds)
    Path(cfg.out).mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    Pipeline(cfg).run_all()
    report = json.loads((Path(cfg.out) / "report.json").read_text())
    print(f"\nwall time {time.perf_counter() - start:.1f} s")
    print("seed  F1(b1)  F1(b2)  F1(b3)  recall(b1)")
    for s, agg in report["experiment"]["per_seed"].items():
        f = [agg[b]["faulty"]["f1"] for b in ("1", "2", "3")]
        print(f"{s:>4}  {f[0]:.3f}   {f[1]:.3f}   {f[2]:.3f}   {agg['1']['faulty']['recall']:.3f}")
    print("probe fault-score gaps:", report["probe_fault_score_gap"])


if __name__ == "__main__":
    main()
