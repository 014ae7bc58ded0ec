import json

import pytest

from impactid import cli

TINY_SYNTH = {
    "n_events": 14,
    "n_sensors": 2,
    "sample_rate_hz": 50_000.0,
    "duration_s": 0.008,
    "seed": 5,
}

TINY_TRAIN = {
    "train_config": {
        "max_epochs_per_phase": 80,
        "max_cycles": 1,
        "patience": 40,
        "disp_hidden": [16, 16],
        "mass_hidden": [12, 12],
        "seed": 0,
    }
}


@pytest.fixture()
def dataset(tmp_path):
    config = tmp_path / "synth.json"
    config.write_text(json.dumps(TINY_SYNTH))
    data = tmp_path / "data"
    assert cli.main(["generate", "--config", str(config), "--out", str(data), "--no-verify"]) == 0
    return data


def write_train_config(tmp_path):
    path = tmp_path / "train.json"
    path.write_text(json.dumps(TINY_TRAIN))
    return path


def test_generate_writes_manifest(dataset):
    assert (dataset / "manifest.json").exists()
    records = json.loads((dataset / "manifest.json").read_text())
    assert len(records) == TINY_SYNTH["n_events"]


def test_generate_deterministic(tmp_path):
    config = tmp_path / "synth.json"
    config.write_text(json.dumps(TINY_SYNTH))
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["generate", "--config", str(config), "--out", str(out_a), "--no-verify"]) == 0
    assert cli.main(["generate", "--config", str(config), "--out", str(out_b), "--no-verify"]) == 0
    for file_a in sorted(out_a.iterdir()):
        file_b = out_b / file_a.name
        assert file_a.read_bytes() == file_b.read_bytes()


def test_train_predict_round_trip(dataset, tmp_path):
    train_cfg = write_train_config(tmp_path)
    bundle = tmp_path / "bundle"
    assert cli.main(["train", "--data", str(dataset), "--out", str(bundle),
                     "--config", str(train_cfg)]) == 0
    for name in cli.BUNDLE_FILES.values():
        assert (bundle / name).exists()
    history = (bundle / "loss_history.csv").read_text().splitlines()
    assert history[0] == "cycle,phase,epoch,total,part1,part2,part3"
    assert len(history) > 2

    report_path = tmp_path / "report.json"
    assert cli.main(["predict", "--bundle", str(bundle), "--data", str(dataset),
                     "--out", str(report_path)]) == 0
    report = json.loads(report_path.read_text())
    assert report["n_events"] == TINY_SYNTH["n_events"]
    assert len(report["predictions"]) == TINY_SYNTH["n_events"]
    for pred in report["predictions"]:
        assert pred["mass_kg"] > 0
        assert pred["energy_j"] == pytest.approx(0.5 * pred["mass_kg"] * pred["v0_mps"] ** 2)


def test_train_deterministic_bundles(dataset, tmp_path):
    train_cfg = write_train_config(tmp_path)
    bundle_a, bundle_b = tmp_path / "ba", tmp_path / "bb"
    for bundle in (bundle_a, bundle_b):
        assert cli.main(["train", "--data", str(dataset), "--out", str(bundle),
                         "--config", str(train_cfg)]) == 0
    for name in cli.BUNDLE_FILES.values():
        assert (bundle_a / name).read_bytes() == (bundle_b / name).read_bytes()


def test_sweep_writes_reports(dataset, tmp_path):
    train_cfg = write_train_config(tmp_path)
    out = tmp_path / "sweep"
    assert cli.main(["sweep", "--case", "R2", "--data", str(dataset), "--out", str(out),
                     "--config", str(train_cfg), "--folds", "2"]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert len(summary) == 6  # default R2 noise ladder
    assert (out / "report_000.json").exists()
    assert (out / "parity_000.csv").exists()


def test_gridsearch_singleton(dataset, tmp_path):
    grid = tmp_path / "grid.json"
    grid.write_text(json.dumps({
        "mass": {"layer_size": [8], "depth": [2], "lr": [1e-3], "activation": ["softplus"]},
    }))
    out = tmp_path / "grid_out"
    train_cfg = write_train_config(tmp_path)
    assert cli.main(["gridsearch", "--data", str(dataset), "--grid", str(grid),
                     "--out", str(out), "--config", str(train_cfg),
                     "--folds", "2", "--epoch-cap", "30"]) == 0
    rows = json.loads((out / "grid_mass.json").read_text())
    assert len(rows) == 1 and rows[0]["rank"] == 1
    assert (out / "grid_mass.csv").read_text().startswith("rank,layer_size")


def test_ablation_writes_pair(dataset, tmp_path):
    train_cfg = write_train_config(tmp_path)
    out = tmp_path / "abl"
    assert cli.main(["ablation", "--data", str(dataset), "--out", str(out),
                     "--config", str(train_cfg)]) == 0
    doc = json.loads((out / "ablation.json").read_text())
    assert set(doc) == {"physics", "ablated"}
    assert doc["physics"]["mape_energy"] is not None


def test_error_record_on_failure(tmp_path, capsys):
    code = cli.main(["predict", "--bundle", str(tmp_path / "missing"),
                     "--data", str(tmp_path / "nothing"), "--out", str(tmp_path / "r.json")])
    assert code == 1
    err = json.loads(capsys.readouterr().err)
    assert "error" in err and "message" in err


def test_seed_override(dataset, tmp_path):
    train_cfg = write_train_config(tmp_path)
    bundle_a, bundle_b = tmp_path / "sa", tmp_path / "sb"
    assert cli.main(["--seed", "11", "train", "--data", str(dataset), "--out", str(bundle_a),
                     "--config", str(train_cfg)]) == 0
    assert cli.main(["--seed", "12", "train", "--data", str(dataset), "--out", str(bundle_b),
                     "--config", str(train_cfg)]) == 0
    assert (bundle_a / "displacement_model.json").read_bytes() != \
        (bundle_b / "displacement_model.json").read_bytes()
