"""End-to-end predictive-analytics run: generate, augment, split, train, report.

Usage: python scripts/run_p1.py [--seed N] [--out DIR] [--fast]
"""

import argparse
import json
from pathlib import Path

from impactid import bench, synth, training


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="runs/p1")
    parser.add_argument("--fast", action="store_true", help="reduced epoch budget")
    args = parser.parse_args()

    events = synth.generate(synth.SynthConfig(seed=args.seed))
    synth.verify_monotonicity(events)

    config = training.TrainConfig(seed=args.seed)
    if args.fast:
        config = training.TrainConfig(seed=args.seed, max_epochs_per_phase=2000, max_cycles=2)
    report = bench.run_case(bench.default_case("P1"), events, config)[0]

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(json.dumps(report.to_dict(), indent=1))
    print(f"velocity MAPE {report.mape_velocity:.2f}%")
    print(f"mass     MAPE {report.mape_mass:.2f}%")
    print(f"energy   MAPE {report.mape_energy:.2f}%")
    print(f"in-band (+-10%) {report.tolerance_band_fraction:.3f}")
    print(f"report: {out / 'report.json'}")


if __name__ == "__main__":
    main()
