"""Command-line interface.

Subcommands: generate, train, predict, sweep, gridsearch, ablation.
Exit code 0 on success; on failure a machine-readable JSON error record is
written to stderr and the exit code is nonzero.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import bench, features, nn, signals, synth, training

FEATURE_LAYOUT = "per-sensor concatenation"

BUNDLE_FILES = {
    "disp": "displacement_model.json",
    "mass": "mass_model.json",
    "config": "training_config.json",
    "norm": "normalization.json",
    "history": "loss_history.csv",
}


def _write_history_csv(history, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["cycle", "phase", "epoch", "total", "part1", "part2", "part3"])
        for row in history:
            parts = list(row.parts) + [""] * (3 - len(row.parts))
            writer.writerow([row.cycle, row.phase, row.epoch, repr(row.total),
                             *[repr(p) if p != "" else "" for p in parts]])


def save_bundle(outdir, state: training.TrainState, normed: features.FeatureMatrix,
                config: training.TrainConfig, weights: training.LossWeights) -> Path:
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    nn.to_json(state.disp_net, out / BUNDLE_FILES["disp"])
    nn.to_json(state.mass_net, out / BUNDLE_FILES["mass"])
    meta = {
        "train_config": asdict(config),
        "loss_weights": asdict(weights),
        "feature_layout": FEATURE_LAYOUT,
        "feature_names": list(normed.feature_names),
        "cycles_run": state.cycle + 1,
    }
    (out / BUNDLE_FILES["config"]).write_text(json.dumps(meta, indent=1))
    features.normalization_to_json(normed, out / BUNDLE_FILES["norm"])
    _write_history_csv(state.history, out / BUNDLE_FILES["history"])
    return out


def load_bundle(bundle_dir):
    bundle = Path(bundle_dir)
    disp_net = nn.from_json(bundle / BUNDLE_FILES["disp"])
    mass_net = nn.from_json(bundle / BUNDLE_FILES["mass"])
    meta = json.loads((bundle / BUNDLE_FILES["config"]).read_text())
    norm = json.loads((bundle / BUNDLE_FILES["norm"]).read_text())
    return disp_net, mass_net, meta, norm


def _cmd_generate(args) -> int:
    kwargs = {}
    if args.config:
        kwargs = json.loads(Path(args.config).read_text())
    if args.seed is not None:
        kwargs["seed"] = args.seed
    config = synth.SynthConfig(**kwargs)
    events = synth.generate(config)
    note = "monotonicity check skipped"
    if not args.no_verify:
        note = str(synth.verify_monotonicity(events))
    signals.save_events(events, args.out)
    print(f"wrote {len(events)} events to {args.out} ({note})")
    return 0


def _cmd_train(args) -> int:
    events = signals.load_events(args.data)
    config, weights = _load_train_config(args)
    matrix = features.build_matrix(events)
    normed = features.normalize(matrix, range(len(events)))
    m_obs, v_obs, e_meas = (
        np.array([ev.mass_obs_kg for ev in events]),
        np.array([ev.v0_obs_mps for ev in events]),
        np.array([ev.energy_meas_j for ev in events]),
    )
    state = training.train(normed.rows, v_obs, m_obs, e_meas, config, weights)
    save_bundle(args.out, state, normed, config, weights)
    print(f"trained on {len(events)} events over {state.cycle + 1} cycles; bundle at {args.out}")
    return 0


def _load_train_config(args):
    config_kwargs, weight_kwargs = {}, {}
    if getattr(args, "config", None):
        doc = json.loads(Path(args.config).read_text())
        config_kwargs = doc.get("train_config", doc if "loss_weights" not in doc else {})
        weight_kwargs = doc.get("loss_weights", {})
    if args.seed is not None:
        config_kwargs["seed"] = args.seed
    return training.TrainConfig(**config_kwargs), training.LossWeights(**weight_kwargs)


def _cmd_predict(args) -> int:
    disp_net, mass_net, meta, norm = load_bundle(args.bundle)
    events = signals.load_events(args.data)
    matrix = features.build_matrix(events)
    if list(matrix.feature_names) != list(meta["feature_names"]):
        raise ValueError("dataset feature layout does not match the bundle")
    rows = features.normalize_with(matrix.rows, matrix.feature_names, norm)
    state = training.TrainState(
        disp_net=disp_net, mass_net=mass_net, adam_disp=None, adam_mass=None,
        fixed_mass=np.array([]), fixed_velocity=np.array([]), cycle=meta["cycles_run"] - 1,
        history=[], best_disp_total=float("nan"), best_mass_total=float("nan"),
        n_features=rows.shape[1],
    )
    m_pred, v_pred, e_pred = training.predict_batch(state, rows)
    m_true = np.array([ev.mass_obs_kg for ev in events])
    v_true = np.array([ev.v0_obs_mps for ev in events])
    e_true = np.array([ev.energy_meas_j for ev in events])
    report = {
        "n_events": len(events),
        "mape_velocity": bench.mape(v_true, v_pred),
        "mape_mass": bench.mape(m_true, m_pred),
        "mape_energy": bench.mape(e_true, e_pred),
        "tolerance_band_fraction": bench.tolerance_band_fraction(e_true, e_pred),
        "r_squared_energy": bench.r_squared(e_true, e_pred),
        "predictions": [
            {
                "event_id": ev.event_id,
                "mass_kg": float(m),
                "v0_mps": float(v),
                "energy_j": float(e),
            }
            for ev, m, v, e in zip(events, m_pred, v_pred, e_pred)
        ],
    }
    Path(args.out).write_text(json.dumps(report, indent=1))
    print(f"energy MAPE {report['mape_energy']:.2f}% over {len(events)} events; report at {args.out}")
    return 0


def _write_reports(reports, outdir):
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    summary = []
    for i, rep in enumerate(reports):
        (out / f"report_{i:03d}.json").write_text(json.dumps(rep.to_dict(), indent=1))
        with open(out / f"parity_{i:03d}.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["target", "truth", "prediction"])
            for target, pairs in rep.parity.items():
                for t, p in pairs:
                    writer.writerow([target, repr(t), repr(p)])
        summary.append(
            {
                "cell": rep.cell,
                "mape_energy": rep.mape_energy,
                "tolerance_band_fraction": rep.tolerance_band_fraction,
                "provenance": rep.provenance,
            }
        )
    (out / "summary.json").write_text(json.dumps(summary, indent=1))


def _cmd_sweep(args) -> int:
    events = signals.load_events(args.data)
    config, weights = _load_train_config(args)
    spec = bench.default_case(args.case, train_energy_range_j=_parse_range(args.train_range))
    reports = bench.run_case(spec, events, config, weights, k_folds=args.folds, jobs=args.jobs)
    _write_reports(reports, args.out)
    print(f"case {args.case}: {len(reports)} cell reports written to {args.out}")
    return 0


def _parse_range(text):
    if not text:
        return None
    lo, hi = (float(t) for t in text.split(":"))
    return (lo, hi)


def _cmd_gridsearch(args) -> int:
    events = signals.load_events(args.data)
    config, weights = _load_train_config(args)
    space = json.loads(Path(args.grid).read_text()) if args.grid else bench.default_search_space()
    results = bench.grid_search(
        space, events, k_folds=args.folds, config=config, weights=weights,
        epoch_cap=args.epoch_cap, jobs=args.jobs,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for target, rows in results.items():
        bench.grid_to_csv(rows, out / f"grid_{target}.csv")
        (out / f"grid_{target}.json").write_text(json.dumps(rows, indent=1))
        print(f"{target}: {len(rows)} configurations ranked; best mean R2 {rows[0]['mean_r2']:.4f}")
    return 0


def _cmd_ablation(args) -> int:
    events = signals.load_events(args.data)
    config, weights = _load_train_config(args)
    result = bench.run_ablation(events, config, weights)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "ablation.json").write_text(
        json.dumps({"physics": result.physics.to_dict(), "ablated": result.ablated.to_dict()}, indent=1)
    )
    print(
        f"physics arm: energy MAPE {result.physics.mape_energy:.2f}%, "
        f"in-band {result.physics.tolerance_band_fraction:.3f}; "
        f"ablated arm: energy MAPE {result.ablated.mape_energy:.2f}%, "
        f"in-band {result.ablated.tolerance_band_fraction:.3f}"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="impactid", description=__doc__)
    parser.add_argument("--seed", type=int, default=None, help="global seed override")
    parser.add_argument("--jobs", type=int, default=1, help="parallel workers for sweeps")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic dataset")
    p.add_argument("--config", help="SynthConfig overrides (JSON)")
    p.add_argument("--out", required=True)
    p.add_argument("--no-verify", action="store_true",
                   help="skip the energy-monotonicity sanity gate")
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("train", help="train on a dataset directory")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="output bundle directory")
    p.add_argument("--config", help="train config JSON")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("predict", help="run a trained bundle over a dataset")
    p.add_argument("--bundle", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="report JSON path")
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("sweep", help="run one evaluation case")
    p.add_argument("--case", required=True, choices=bench.CASE_IDS)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="train config JSON")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--train-range", help="G1 energy range as LO:HI in joules")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("gridsearch", help="cross-validated hyperparameter grid")
    p.add_argument("--data", required=True)
    p.add_argument("--grid", help="grid JSON; defaults to the built-in search space")
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="train config JSON")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--epoch-cap", type=int, default=2000)
    p.set_defaults(func=_cmd_gridsearch)

    p = sub.add_parser("ablation", help="physics-constrained vs plain-regression comparison")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="train config JSON")
    p.set_defaults(func=_cmd_ablation)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        json.dump({"error": type(exc).__name__, "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
