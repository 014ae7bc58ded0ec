"""Robustness and generalization sweeps over a generated dataset.

Runs the availability sweep, the noise sweep, the combined grid, and two
out-of-distribution training ranges; writes one JSON report per cell.

Usage: python scripts/run_sweeps.py [--seed N] [--out DIR] [--jobs J] [--fast]
"""

import argparse
import json
from pathlib import Path

from impactid import bench, synth, training


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="runs/sweeps")
    parser.add_argument("--jobs", type=int, default=1)
    parser.add_argument("--fast", action="store_true")
    args = parser.parse_args()

    events = synth.generate(synth.SynthConfig(seed=args.seed))
    config = training.TrainConfig(seed=args.seed)
    if args.fast:
        config = training.TrainConfig(seed=args.seed, max_epochs_per_phase=1500, max_cycles=2,
                                      patience=300)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cases = [
        bench.default_case("R1"),
        bench.default_case("R2"),
        bench.default_case("R3"),
        bench.default_case("G1", train_energy_range_j=(20.0, 80.0)),
        bench.default_case("G1", train_energy_range_j=(20.0, 65.0)),
    ]
    for i, case in enumerate(cases):
        reports = bench.run_case(case, events, config, jobs=args.jobs)
        for j, rep in enumerate(reports):
            path = out / f"{case.case_id.lower()}_{i}_{j:02d}.json"
            path.write_text(json.dumps(rep.to_dict(), indent=1))
            print(f"{rep.provenance}: energy MAPE {rep.mape_energy:.2f}%")


if __name__ == "__main__":
    main()
