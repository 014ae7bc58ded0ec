"""Acceptance gate: one test per criterion, each printing a pass/fail line.

Run with `pytest tests/test_acceptance.py -v -s`. The end-to-end criteria
train at full published settings where the criterion pins them (criterion 4)
and at reduced epoch budgets elsewhere; thresholds are never relaxed.
"""

import functools
import json
import time

import numpy as np
import pytest

from impactid import bench, cli, features, nn, signals, synth, training, wavelets

# Fixed dataset seed for the end-to-end criteria: gives >= 2 events above
# 80 J (non-degenerate high-energy OOD set) and >= 5 pristine events per
# mass group.
DATASET_SEED = 5

_events_cache = {}


def dataset(n_events=73):
    key = n_events
    if key not in _events_cache:
        _events_cache[key] = synth.generate(synth.SynthConfig(seed=DATASET_SEED, n_events=n_events))
    return _events_cache[key]


def criterion(num, name):
    def deco(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            start = time.perf_counter()
            try:
                fn(*args, **kwargs)
            except BaseException:
                print(f"\ncriterion {num} ({name}): FAIL [{time.perf_counter() - start:.1f}s]")
                raise
            print(f"\ncriterion {num} ({name}): PASS [{time.perf_counter() - start:.1f}s]")
        return wrapper
    return deco


@criterion(1, "gradient fidelity")
def test_criterion_1_gradient_fidelity():
    rng = np.random.default_rng(11)
    checked = 0
    for act in nn.HIDDEN_ACTIVATIONS:
        for transform in nn.OUTPUT_TRANSFORMS:
            for _ in range(17):
                sizes = [3, int(rng.integers(3, 6)), int(rng.integers(3, 6)), 1]
                net = nn.init_network(sizes, act, transform, seed=int(rng.integers(1 << 31)))
                x = rng.normal(size=3)
                upstream = rng.normal(size=1)

                analytic = nn.grad_params(net, x, upstream)
                h = 1e-5
                for pi, p in enumerate(nn.get_params(net)):
                    numeric = np.zeros_like(p)
                    it = np.nditer(p, flags=["multi_index"])
                    while not it.finished:
                        idx = it.multi_index
                        orig = p[idx]
                        p[idx] = orig + h
                        up = float(nn.forward(net, x)[0]) * upstream[0]
                        p[idx] = orig - h
                        down = float(nn.forward(net, x)[0]) * upstream[0]
                        p[idx] = orig
                        numeric[idx] = (up - down) / (2 * h)
                        it.iternext()
                    np.testing.assert_allclose(analytic[pi], numeric, rtol=1e-5, atol=1e-8)

                for index in range(3):
                    d = nn.dvalue_dtime(net, x, index)
                    xp, xm = x.copy(), x.copy()
                    xp[index] += h
                    xm[index] -= h
                    fd = (nn.forward(net, xp)[0] - nn.forward(net, xm)[0]) / (2 * h)
                    assert d == pytest.approx(fd, rel=1e-6, abs=1e-9)
                checked += 1
    assert checked >= 100


@criterion(2, "physics invariants")
def test_criterion_2_physics_invariants():
    rng = np.random.default_rng(7)
    # Mass positivity on random softplus-output networks, adversarial inputs included.
    for act in nn.HIDDEN_ACTIVATIONS:
        net = nn.init_network([6, 32, 32, 1], act, "softplus_plus_epsilon",
                              seed=int(rng.integers(1 << 31)))
        X = rng.normal(scale=50.0, size=(10_000, 6))
        X[0] = 1e6
        X[1] = -1e6
        out = nn.forward(net, X)
        assert np.all(out > 0)

    # Energy identity holds exactly by construction for every prediction.
    X = rng.uniform(size=(8, 4))
    config = training.TrainConfig(max_epochs_per_phase=60, max_cycles=1, patience=30,
                                  disp_hidden=(12,), mass_hidden=(12,), seed=0)
    state = training.train(X, np.full(8, 2.0), np.full(8, 3.0), np.full(8, 6.0), config)
    for row in rng.uniform(-2, 3, size=(100, 4)):
        pred = training.predict(state, row)
        assert pred.mass_kg > 0
        assert pred.energy_j == 0.5 * pred.mass_kg * pred.v0_mps * pred.v0_mps

    # Kinetic energy is even in velocity.
    for _ in range(1000):
        m = float(rng.uniform(0.1, 10.0))
        v = float(rng.uniform(-20.0, 20.0))
        assert training.kinetic_energy(m, v) == training.kinetic_energy(m, -v)


@criterion(3, "loss decomposition and zero-loss fixed point")
def test_criterion_3_loss_decomposition_fixed_point():
    rng = np.random.default_rng(5)
    for trial in range(20):
        lw = training.LossWeights(*rng.uniform(0.05, 3.0, size=5))
        n = int(rng.integers(3, 10))
        X = rng.uniform(size=(n, 4))
        v_obs = rng.uniform(1.0, 5.0, size=n)
        m_obs = rng.uniform(1.0, 6.0, size=n)
        e_meas = rng.uniform(2.0, 50.0, size=n)
        dnet = nn.init_network([5, 6, 1], seed=trial)
        total, parts = training.loss_disp(dnet, X, v_obs, e_meas, m_obs, lw)
        recomputed = (lw.lambda_v0 * parts["L_v0"] + lw.lambda_ic * parts["L_IC"]
                      + lw.lambda_ke * parts["L_KE"])
        assert abs(total - recomputed) <= 1e-12 * max(1.0, abs(total))
        mnet = nn.init_network([4, 6, 1], "softplus", "softplus_plus_epsilon", seed=trial)
        total_m, parts_m = training.loss_mass(mnet, X, m_obs, e_meas, v_obs, lw)
        recomputed_m = lw.lambda_m * parts_m["L_m"] + lw.lambda_ke_m * parts_m["L_KE_m"]
        assert abs(total_m - recomputed_m) <= 1e-12 * max(1.0, abs(total_m))

    # Analytically consistent state: exact labels, exact networks.
    n_feat, v0, mass = 3, 2.5, 3.0
    X = rng.uniform(size=(6, n_feat))
    v_obs = np.full(6, v0)
    m_obs = np.full(6, mass)
    e_meas = 0.5 * m_obs * v_obs**2
    lw = training.LossWeights()

    dnet = nn.init_network([n_feat + 1, 1], seed=0)
    dnet.weights[0][:] = 0.0
    dnet.weights[0][0, n_feat] = v0
    mnet = nn.init_network([n_feat, 1], output_transform="softplus_plus_epsilon", seed=0)
    mnet.weights[0][:] = 0.0
    mnet.biases[0][0] = np.log(np.expm1(mass - nn.SOFTPLUS_OUTPUT_EPS))

    total_d, _, grads_d = training._loss_disp_with_grads(dnet, X, v_obs, e_meas, m_obs, lw, 1.0)
    total_m, _, grads_m = training._loss_mass_with_grads(mnet, X, m_obs, e_meas, v_obs, lw)
    assert total_d <= 1e-20 and total_m <= 1e-16
    for g in grads_d + grads_m:
        np.testing.assert_allclose(g, 0.0, atol=1e-10)
    params = nn.get_params(dnet)
    stepped = nn.adam_step(params, grads_d, nn.adam_init(params, 1e-2))
    for p, q in zip(params, stepped):
        np.testing.assert_allclose(p, q, atol=1e-12)


@criterion(8, "feature property suite")
def test_criterion_8_feature_properties():
    rng = np.random.default_rng(2)
    checked = 0
    while checked < 1000:
        n = int(rng.integers(180, 700))
        fs = float(rng.uniform(2000.0, 20000.0))
        x = rng.normal(size=n) * rng.uniform(0.05, 20.0)
        w = signals.Waveform(x, fs, "s")
        alpha = float(rng.uniform(0.2, 5.0))
        w2 = signals.Waveform(alpha * x, fs, "s")

        # Homogeneity degrees 1, 2, and 0.
        assert features.rms(w2) == pytest.approx(alpha * features.rms(w), rel=1e-9)
        assert features.peak_amplitude(w2) == pytest.approx(alpha * features.peak_amplitude(w), rel=1e-9)
        assert features.approximation_max(w2) == pytest.approx(
            alpha * features.approximation_max(w), rel=1e-9)
        assert features.transmitted_energy(w2) == pytest.approx(
            alpha**2 * features.transmitted_energy(w), rel=1e-9)
        assert features.approximation_max_energy(w2) == pytest.approx(
            alpha**2 * features.approximation_max_energy(w), rel=1e-9)
        assert features.energy_peak_ratio(w2) == pytest.approx(
            features.energy_peak_ratio(w), rel=1e-9)
        assert features.peak_centroid_ratio(w2) == pytest.approx(
            features.peak_centroid_ratio(w), rel=1e-9)

        # Parseval: time-domain energy of the mean-removed signal matches the
        # one-sided spectrum with standard bin weights.
        _, mags = features.spectrum(w)
        weights = np.full(mags.size, 2.0)
        weights[0] = 1.0
        if n % 2 == 0:
            weights[-1] = 1.0
        xc = x - x.mean()
        assert np.sum(weights * mags**2) / n == pytest.approx(np.sum(xc**2), rel=1e-6)

        # Wavelet perfect reconstruction.
        approx, details, lengths = wavelets.wavedec(x, 4)
        assert np.max(np.abs(wavelets.waverec(approx, details, lengths) - x)) < 1e-8

        # Pure-tone peak frequency within one bin.
        freq = float(rng.uniform(fs * 0.02, fs * 0.4))
        t = np.arange(n) / fs
        tone = signals.Waveform(np.sin(2 * np.pi * freq * t), fs, "s")
        assert abs(features.peak_frequency(tone) - freq) <= fs / n

        checked += 1

    # Normalization range on a random matrix fit over all rows.
    rows = rng.normal(size=(40, 9))
    m = features.FeatureMatrix(rows, tuple(f"e{i}" for i in range(40)),
                               tuple(f"f{i}" for i in range(9)))
    normed = features.normalize(m, range(40))
    assert normed.rows.min() >= 0.0 and normed.rows.max() <= 1.0


@criterion(10, "grid enumeration")
def test_criterion_10_grid_enumeration(tmp_path):
    space = bench.default_search_space()
    assert len(bench.enumerate_grid(space["displacement"])) == 72
    assert len(bench.enumerate_grid(space["mass"])) == 36

    data_dir = tmp_path / "data"
    signals.save_events(synth.generate(synth.SynthConfig(
        seed=DATASET_SEED, n_events=16, n_sensors=2, sample_rate_hz=50_000.0, duration_s=0.008)),
        data_dir)
    out = tmp_path / "grid"
    config = tmp_path / "train.json"
    config.write_text(json.dumps({"train_config": {
        "max_epochs_per_phase": 20, "max_cycles": 1, "patience": 20, "seed": 0}}))
    code = cli.main(["gridsearch", "--data", str(data_dir), "--out", str(out),
                     "--config", str(config), "--folds", "2", "--epoch-cap", "20"])
    assert code == 0
    disp_rows = json.loads((out / "grid_displacement.json").read_text())
    mass_rows = json.loads((out / "grid_mass.json").read_text())
    assert len(disp_rows) == 72 and len(mass_rows) == 36
    assert [r["rank"] for r in disp_rows] == list(range(1, 73))
    assert [r["rank"] for r in mass_rows] == list(range(1, 37))
    assert all(np.isfinite(r["mean_r2"]) for r in disp_rows + mass_rows)
    disp_csv = (out / "grid_displacement.csv").read_text().splitlines()
    assert len(disp_csv) == 73  # header + one ranked row per configuration


@criterion(9, "determinism of train and generate")
def test_criterion_9_determinism(tmp_path):
    synth_cfg = tmp_path / "synth.json"
    synth_cfg.write_text(json.dumps({"seed": DATASET_SEED}))
    data_a, data_b = tmp_path / "da", tmp_path / "db"
    assert cli.main(["generate", "--config", str(synth_cfg), "--out", str(data_a)]) == 0
    assert cli.main(["generate", "--config", str(synth_cfg), "--out", str(data_b)]) == 0
    files_a = sorted(p.name for p in data_a.iterdir())
    assert files_a == sorted(p.name for p in data_b.iterdir())
    for name in files_a:
        assert (data_a / name).read_bytes() == (data_b / name).read_bytes()

    train_cfg = tmp_path / "train.json"
    train_cfg.write_text(json.dumps({"train_config": {
        "max_epochs_per_phase": 2500, "max_cycles": 2, "patience": 400, "seed": 1}}))
    bundle_a, bundle_b = tmp_path / "ba", tmp_path / "bb"
    for bundle in (bundle_a, bundle_b):
        assert cli.main(["train", "--data", str(data_a), "--out", str(bundle),
                         "--config", str(train_cfg)]) == 0
    for name in cli.BUNDLE_FILES.values():
        assert (bundle_a / name).read_bytes() == (bundle_b / name).read_bytes()


@criterion(4, "end-to-end recovery, predictive-analytics protocol")
def test_criterion_4_end_to_end_recovery():
    events = dataset()
    assert len(signals.augment_dataset(events, 0.01, 0)) == 146
    report = bench.run_case(bench.default_case("P1"), events,
                            training.TrainConfig(seed=0))[0]
    print(f"\n  velocity MAPE {report.mape_velocity:.2f}% (<=10), "
          f"mass MAPE {report.mape_mass:.2f}% (<=12), "
          f"energy MAPE {report.mape_energy:.2f}% (<=15), "
          f"in-band {report.tolerance_band_fraction:.3f} (>=0.70)")
    assert report.mape_velocity <= 10.0
    assert report.mape_mass <= 12.0
    assert report.mape_energy <= 15.0
    assert report.tolerance_band_fraction >= 0.70


@criterion(5, "ablation ordering")
def test_criterion_5_ablation_ordering():
    # Full published budget for both arms: the direct regressor needs the
    # whole epoch allowance to walk its output up to the energy scale.
    events = dataset()
    phys, abl = [], []
    for seed in (0, 1, 2):
        config = training.TrainConfig(seed=seed)
        result = bench.run_ablation(events, config)
        phys.append(result.physics.tolerance_band_fraction)
        abl.append(result.ablated.tolerance_band_fraction)
        print(f"\n  seed {seed}: physics in-band {phys[-1]:.3f} vs ablated {abl[-1]:.3f}")
    assert np.median(phys) >= np.median(abl)


@criterion(6, "robustness ordering")
def test_criterion_6_robustness_ordering():
    events = dataset()
    r1_low, r1_full, r3_worst, r3_best = [], [], [], []
    for seed in (0, 1, 2):
        config = training.TrainConfig(seed=seed, max_epochs_per_phase=1500, max_cycles=2,
                                      patience=300)
        r1 = bench.run_case(bench.CaseSpec("R1", (0.25, 1.0), (0.0,)), events, config,
                            k_folds=3, jobs=2)
        cells = {r.cell["availability"]: r for r in r1}
        r1_low.append(cells[0.25].mape_energy)
        r1_full.append(cells[1.0].mape_energy)
        r3 = bench.run_case(bench.CaseSpec("R3", (0.25, 1.0), (0.0, 0.05)), events, config,
                            k_folds=3, jobs=2)
        grid = {(r.cell["availability"], r.cell["noise"]): r for r in r3}
        r3_worst.append(grid[(0.25, 0.05)].mape_energy)
        r3_best.append(grid[(1.0, 0.0)].mape_energy)
        for rep in r1 + r3:
            assert np.isfinite(rep.mape_energy)
            assert np.isfinite(rep.tolerance_band_fraction)
            assert np.isfinite(rep.r_squared_energy)
            assert all(np.isfinite(m) for m in rep.fold_mape_energy)
    print(f"\n  R1 median MAPE: 25% avail {np.median(r1_low):.2f}% vs 100% {np.median(r1_full):.2f}%")
    print(f"  R3 median MAPE: (25%,5%) {np.median(r3_worst):.2f}% vs (100%,0%) {np.median(r3_best):.2f}%")
    assert np.median(r1_low) >= np.median(r1_full)
    assert np.median(r3_worst) >= np.median(r3_best)


@criterion(7, "generalization regime behavior")
def test_criterion_7_generalization():
    # Softplus displacement units extrapolate affinely outside the training
    # hull (slopes saturate to 0 or 1), which the below-range regime needs;
    # softplus is one of the published activation candidates for this network.
    events = dataset(n_events=146)
    low_mapes, high_wide, high_narrow = [], [], []
    for seed in (0, 1, 2):
        config = training.TrainConfig(seed=seed, max_epochs_per_phase=2500, max_cycles=2,
                                      patience=400, disp_hidden=(64, 64),
                                      disp_activation="softplus")
        for bounds, bucket in (((20.0, 80.0), high_wide), ((20.0, 65.0), high_narrow)):
            spec = bench.CaseSpec("G1", (1.0,), (0.01,), train_energy_range_j=bounds, augment=True)
            rep = bench.run_case(spec, events, config)[0]
            pairs = np.array(rep.parity["energy"])
            truth, pred = pairs[:, 0], pairs[:, 1]
            high = truth > bounds[1]
            assert high.any()
            bucket.append(bench.mape(truth[high], pred[high]))
            if bounds[1] == 80.0:
                low = truth < 20.0
                low_mapes.append(bench.mape(truth[low], pred[low]))
    print(f"\n  low-energy OOD MAPE (20-80 J arm) median {np.median(low_mapes):.2f}% (<=20)")
    print(f"  high-energy OOD MAPE: narrow arm {np.median(high_narrow):.2f}% "
          f"> wide arm {np.median(high_wide):.2f}%")
    assert np.median(low_mapes) <= 20.0
    assert np.median(high_narrow) > np.median(high_wide)
