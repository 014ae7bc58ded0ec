"""Cross-validated hyperparameter grid search for both surrogate networks.

Usage: python scripts/run_gridsearch.py [--seed N] [--out DIR] [--epoch-cap E] [--jobs J]
"""

import argparse
import json
from pathlib import Path

from impactid import bench, synth, training


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="runs/grid")
    parser.add_argument("--epoch-cap", type=int, default=2000)
    parser.add_argument("--folds", type=int, default=5)
    parser.add_argument("--jobs", type=int, default=1)
    args = parser.parse_args()

    events = synth.generate(synth.SynthConfig(seed=args.seed))
    results = bench.grid_search(
        bench.default_search_space(), events, k_folds=args.folds,
        config=training.TrainConfig(seed=args.seed), epoch_cap=args.epoch_cap, jobs=args.jobs,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for target, rows in results.items():
        bench.grid_to_csv(rows, out / f"grid_{target}.csv")
        (out / f"grid_{target}.json").write_text(json.dumps(rows, indent=1))
        best = rows[0]
        print(f"{target}: best {best['layer_size']}x{best['depth']} {best['activation']} "
              f"lr={best['lr']} mean R2 {best['mean_r2']:.4f}")


if __name__ == "__main__":
    main()
