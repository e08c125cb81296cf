"""Write surrogate runs to disk in the PRONOSTIA directory layout.

    python3 scripts/make_fixture_tree.py /tmp/pronostia --runs 2 --windows 12
"""

import argparse
from pathlib import Path

from pdmsynth.data_ingest import FILE_ROWS, SurrogateSpec, generate_surrogate_run, run_dir_name, write_pronostia_run


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("root")
    ap.add_argument("--runs", type=int, default=2)
    ap.add_argument("--windows", type=int, default=12)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    root = Path(args.root)
    for b in range(args.runs):
        spec = SurrogateSpec(duration_windows=args.windows, seed=args.seed + b, window_length=FILE_ROWS,
                             bearing_id=b, condition_id=1, burst_rate=0.0)
        run = generate_surrogate_run(spec)
        files = write_pronostia_run(run, root / run_dir_name(1, b + 1))
        print(f"{run_dir_name(1, b + 1)}: {len(files)} files")


if __name__ == "__main__":
    main()
