"""Evaluation harness: metrics, splits, sweep protocols, grid search, ablation.

Sweep cases:
  P1  predictive analytics: noise-augmented full dataset, one 80/20 split
  R1  training-set availability sweep at zero noise
  R2  training-signal noise sweep at full availability
  R3  Cartesian availability x noise grid
  G1  out-of-distribution energy ranges: train in-range, test out-of-range
R-case metrics are averaged over cross-validation folds with the held-out
test set fixed (bit-identical) across every cell of a sweep.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict

import numpy as np

from . import features as feat
from . import training
from .signals import ImpactEvent, augment_dataset, perturb_dataset

CASE_IDS = ("P1", "R1", "R2", "R3", "G1")

DEFAULT_ENERGY_BINS = np.linspace(4.0, 80.0, 9)
MIN_TRAIN_EVENTS = 5


def mape(truth, pred) -> float:
    """Mean absolute percentage error, in percent."""
    t = np.asarray(truth, dtype=float)
    p = np.asarray(pred, dtype=float)
    if t.shape != p.shape:
        raise ValueError("truth and prediction lengths differ")
    if np.any(t == 0):
        raise ValueError("MAPE is undefined for zero truth values")
    return float(100.0 * np.mean(np.abs(t - p) / np.abs(t)))


def tolerance_band_fraction(truth, pred, band: float = 0.10) -> float:
    """Fraction of predictions within +-band of the truth."""
    t = np.asarray(truth, dtype=float)
    p = np.asarray(pred, dtype=float)
    if t.shape != p.shape:
        raise ValueError("truth and prediction lengths differ")
    return float(np.mean(np.abs(p - t) <= band * np.abs(t)))


def r_squared(truth, pred) -> float:
    """Coefficient of determination; 0 when SS_tot = 0 and SS_res > 0, 1 when both are 0."""
    t = np.asarray(truth, dtype=float)
    p = np.asarray(pred, dtype=float)
    if t.shape != p.shape:
        raise ValueError("truth and prediction lengths differ")
    ss_res = float(np.sum((t - p) ** 2))
    ss_tot = float(np.sum((t - np.mean(t)) ** 2))
    if ss_tot == 0.0:
        return 1.0 if ss_res == 0.0 else 0.0
    return 1.0 - ss_res / ss_tot


@dataclass
class SplitPlan:
    train_ids: tuple[str, ...]
    test_ids: tuple[str, ...]
    folds: list[tuple[tuple[str, ...], tuple[str, ...]]]
    seed: int


def make_splits(events: list[ImpactEvent], ratio: float = 0.8, k_folds: int = 5, seed: int = 0) -> SplitPlan:
    """Seeded shuffle, floor(N * ratio) training events, k-fold partition of the train ids."""
    if not 0 < ratio < 1:
        raise ValueError("ratio must be in (0, 1)")
    if k_folds < 1:
        raise ValueError("k_folds must be at least 1")
    ids = sorted(ev.event_id for ev in events)
    if len(ids) != len(set(ids)):
        raise ValueError("duplicate event ids")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(ids))
    shuffled = [ids[i] for i in order]
    n_train = int(np.floor(len(ids) * ratio))
    train_ids = tuple(shuffled[:n_train])
    test_ids = tuple(shuffled[n_train:])
    folds = []
    chunks = np.array_split(np.arange(n_train), k_folds)
    for chunk in chunks:
        val = tuple(train_ids[i] for i in chunk)
        rest = tuple(i for i in train_ids if i not in set(val))
        folds.append((rest, val))
    return SplitPlan(train_ids, test_ids, folds, seed)


@dataclass
class CaseSpec:
    """One sweep protocol; fields follow the case definitions above."""

    case_id: str
    availability_fractions: tuple[float, ...] = (1.0,)
    noise_levels: tuple[float, ...] = (0.0,)
    train_energy_range_j: tuple[float, float] | None = None
    augment: bool = False

    def __post_init__(self):
        if self.case_id not in CASE_IDS:
            raise ValueError(f"unknown case {self.case_id!r}")
        self.availability_fractions = tuple(float(f) for f in self.availability_fractions)
        self.noise_levels = tuple(float(n) for n in self.noise_levels)
        if any(not 0.25 <= f <= 1.0 for f in self.availability_fractions):
            raise ValueError("availability fractions must lie in [0.25, 1.0]")
        if any(not 0.0 <= n <= 0.05 for n in self.noise_levels):
            raise ValueError("noise levels must lie in [0, 0.05]")
        if self.case_id == "G1" and self.train_energy_range_j is None:
            raise ValueError("case G1 needs train_energy_range_j")


def default_case(case_id: str, train_energy_range_j=None) -> CaseSpec:
    """Standard configuration for each sweep case."""
    if case_id == "P1":
        return CaseSpec("P1", (1.0,), (0.01,), augment=True)
    if case_id == "R1":
        return CaseSpec("R1", (0.25, 0.5, 0.75, 1.0), (0.0,))
    if case_id == "R2":
        return CaseSpec("R2", (1.0,), (0.0, 0.01, 0.02, 0.03, 0.04, 0.05))
    if case_id == "R3":
        return CaseSpec("R3", (0.25, 0.5, 0.75, 1.0), (0.0, 0.01, 0.03, 0.05))
    if case_id == "G1":
        return CaseSpec("G1", (1.0,), (0.01,), train_energy_range_j or (20.0, 80.0), augment=True)
    raise ValueError(f"unknown case {case_id!r}")


@dataclass
class EvalReport:
    """Per-target metrics plus parity pairs for one evaluation cell."""

    case_id: str
    cell: dict
    mape_velocity: float | None
    mape_mass: float | None
    mape_energy: float
    tolerance_band_fraction: float
    r_squared_energy: float
    parity: dict
    energy_bin_mape: list[dict]
    n_test: int
    runtime_s: float
    seed: int
    provenance: str
    fold_mape_energy: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def _energy_bin_table(truth: np.ndarray, pred: np.ndarray, edges: np.ndarray) -> list[dict]:
    table = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        mask = (truth >= lo) & (truth < hi)
        cell = {"lo_j": float(lo), "hi_j": float(hi), "count": int(mask.sum())}
        cell["mape"] = mape(truth[mask], pred[mask]) if mask.any() else None
        table.append(cell)
    return table


def _provenance(case_id: str, cell: dict, seed: int, config: training.TrainConfig) -> str:
    payload = json.dumps(
        {"case": case_id, "cell": cell, "seed": seed, "config": asdict(config)}, sort_keys=True
    )
    digest = hashlib.sha256(payload.encode()).hexdigest()[:12]
    cell_key = ",".join(f"{k}={v}" for k, v in sorted(cell.items()))
    return f"{case_id}[{cell_key}]seed={seed}#{digest}"


def _labels(events: list[ImpactEvent]):
    return (
        np.array([ev.mass_obs_kg for ev in events]),
        np.array([ev.v0_obs_mps for ev in events]),
        np.array([ev.energy_meas_j for ev in events]),
    )


def _train_eval(train_events, test_events, config, weights):
    """Extract features, normalize on the training rows, train, and predict."""
    all_events = list(train_events) + list(test_events)
    matrix = feat.build_matrix(all_events)
    n_train = len(train_events)
    normed = feat.normalize(matrix, range(n_train))
    m_tr, v_tr, e_tr = _labels(train_events)
    state = training.train(normed.rows[:n_train], v_tr, m_tr, e_tr, config, weights)
    m_pred, v_pred, e_pred = training.predict_batch(state, normed.rows[n_train:])
    return state, m_pred, v_pred, e_pred


def _evaluate_cell(case_id, cell, train_events, test_events, config, weights,
                   bin_edges=DEFAULT_ENERGY_BINS) -> EvalReport:
    if len(train_events) < MIN_TRAIN_EVENTS:
        raise ValueError(f"cell {cell}: training subset has fewer than {MIN_TRAIN_EVENTS} events")
    if not test_events:
        raise ValueError(f"cell {cell}: empty test set")
    start = time.perf_counter()
    _, m_pred, v_pred, e_pred = _train_eval(train_events, test_events, config, weights)
    m_true, v_true, e_true = _labels(test_events)
    return EvalReport(
        case_id=case_id,
        cell=dict(cell),
        mape_velocity=mape(v_true, v_pred),
        mape_mass=mape(m_true, m_pred),
        mape_energy=mape(e_true, e_pred),
        tolerance_band_fraction=tolerance_band_fraction(e_true, e_pred),
        r_squared_energy=r_squared(e_true, e_pred),
        parity={
            "velocity": [[float(t), float(p)] for t, p in zip(v_true, v_pred)],
            "mass": [[float(t), float(p)] for t, p in zip(m_true, m_pred)],
            "energy": [[float(t), float(p)] for t, p in zip(e_true, e_pred)],
        },
        energy_bin_mape=_energy_bin_table(e_true, e_pred, bin_edges),
        n_test=len(test_events),
        runtime_s=time.perf_counter() - start,
        seed=config.seed,
        provenance=_provenance(case_id, cell, config.seed, config),
    )


def _subsample_ids(train_ids, fraction: float, seed: int) -> tuple[str, ...]:
    n = max(MIN_TRAIN_EVENTS, int(np.ceil(fraction * len(train_ids))))
    n = min(n, len(train_ids))
    rng = np.random.default_rng(seed)
    picked = rng.choice(len(train_ids), size=n, replace=False)
    return tuple(train_ids[i] for i in sorted(picked))


def _r_cell(args):
    """One fold of one availability/noise cell; separated out for process pools."""
    (events, split, fraction, noise, fold_idx, config, weights, case_id) = args
    by_id = {ev.event_id: ev for ev in events}
    sub_seed = int(np.random.SeedSequence((config.seed, fold_idx, int(fraction * 1000), int(noise * 1000))).generate_state(1)[0])
    train_ids = _subsample_ids(split.train_ids, fraction, sub_seed)
    train_events = [by_id[i] for i in train_ids]
    if noise > 0:
        train_events = perturb_dataset(train_events, noise, sub_seed + 1)
    test_events = [by_id[i] for i in split.test_ids]
    cell = {"availability": fraction, "noise": noise, "fold": fold_idx}
    return _evaluate_cell(case_id, cell, train_events, test_events, config, weights)


def _aggregate_folds(case_id, fraction, noise, fold_reports) -> EvalReport:
    """Collapse per-fold reports into one cell report (fold-mean metrics)."""
    fold_reports = sorted(fold_reports, key=lambda r: r.cell["fold"])
    e_true = np.array([t for t, _ in fold_reports[0].parity["energy"]])
    preds = np.stack([[p for _, p in r.parity["energy"]] for r in fold_reports])
    mean_pred = preds.mean(axis=0)
    cell = {"availability": fraction, "noise": noise}
    base = fold_reports[0]
    return EvalReport(
        case_id=case_id,
        cell=cell,
        mape_velocity=float(np.mean([r.mape_velocity for r in fold_reports])),
        mape_mass=float(np.mean([r.mape_mass for r in fold_reports])),
        mape_energy=float(np.mean([r.mape_energy for r in fold_reports])),
        tolerance_band_fraction=float(np.mean([r.tolerance_band_fraction for r in fold_reports])),
        r_squared_energy=float(np.mean([r.r_squared_energy for r in fold_reports])),
        parity={"energy": [[float(t), float(p)] for t, p in zip(e_true, mean_pred)]},
        energy_bin_mape=_energy_bin_table(e_true, mean_pred, DEFAULT_ENERGY_BINS),
        n_test=base.n_test,
        runtime_s=float(np.sum([r.runtime_s for r in fold_reports])),
        seed=base.seed,
        provenance=_provenance(case_id, cell, base.seed, training.TrainConfig(seed=base.seed)),
        fold_mape_energy=[r.mape_energy for r in fold_reports],
    )


def run_case(case: CaseSpec, events: list[ImpactEvent], config: training.TrainConfig | None = None,
             weights: training.LossWeights | None = None, k_folds: int = 5,
             jobs: int = 1) -> list[EvalReport]:
    """Execute one sweep case; returns one EvalReport per cell, in cell order."""
    config = config or training.TrainConfig()
    weights = weights or training.LossWeights()

    if case.case_id == "P1":
        data = augment_dataset(events, case.noise_levels[0], config.seed) if case.augment else list(events)
        split = make_splits(data, 0.8, k_folds, config.seed)
        by_id = {ev.event_id: ev for ev in data}
        train_events = [by_id[i] for i in split.train_ids]
        test_events = [by_id[i] for i in split.test_ids]
        cell = {"availability": 1.0, "noise": case.noise_levels[0]}
        return [_evaluate_cell("P1", cell, train_events, test_events, config, weights)]

    if case.case_id == "G1":
        lo, hi = case.train_energy_range_j
        data = augment_dataset(events, case.noise_levels[0], config.seed) if case.augment else list(events)
        train_events = [ev for ev in data if lo <= ev.energy_meas_j <= hi]
        test_events = [ev for ev in data if not lo <= ev.energy_meas_j <= hi]
        if not test_events:
            raise ValueError("G1 training range covers every event; no out-of-range test set")
        cell = {"train_lo_j": lo, "train_hi_j": hi, "noise": case.noise_levels[0]}
        return [_evaluate_cell("G1", cell, train_events, test_events, config, weights)]

    # R1/R2/R3: fixed test set, fold-averaged metrics per cell.
    split = make_splits(events, 0.8, k_folds, config.seed)
    cells = list(itertools.product(case.availability_fractions, case.noise_levels))
    tasks = [
        (events, split, fraction, noise, fold_idx, config, weights, case.case_id)
        for fraction, noise in cells
        for fold_idx in range(k_folds)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            fold_reports = list(pool.map(_r_cell, tasks))
    else:
        fold_reports = [_r_cell(t) for t in tasks]
    reports = []
    for i, (fraction, noise) in enumerate(cells):
        chunk = fold_reports[i * k_folds : (i + 1) * k_folds]
        reports.append(_aggregate_folds(case.case_id, fraction, noise, chunk))
    return reports


def default_search_space() -> dict:
    """Hyperparameter grids for the displacement and mass networks."""
    return {
        "displacement": {
            "layer_size": [32, 64, 128, 256],
            "depth": [2, 3, 4],
            "lr": [1e-2, 1e-3],
            "activation": ["sigmoid", "softplus", "tanh"],
        },
        "mass": {
            "layer_size": [16, 32, 64],
            "depth": [2, 3],
            "lr": [1e-2, 1e-3],
            "activation": ["sigmoid", "softplus", "tanh"],
        },
    }


def enumerate_grid(space: dict) -> list[dict]:
    """Deterministic Cartesian expansion of one network's grid."""
    keys = ("layer_size", "depth", "lr", "activation")
    for key in keys:
        if key not in space or not space[key]:
            raise ValueError(f"grid is missing values for {key!r}")
    return [
        {"layer_size": int(n), "depth": int(d), "lr": float(lr), "activation": str(act)}
        for n, d, lr, act in itertools.product(*[space[k] for k in keys])
    ]


def _grid_config(base: training.TrainConfig, target: str, combo: dict, epoch_cap: int,
                 max_cycles: int) -> training.TrainConfig:
    kwargs = asdict(base)
    kwargs["max_epochs_per_phase"] = epoch_cap
    kwargs["max_cycles"] = max_cycles
    hidden = (combo["layer_size"],) * combo["depth"]
    if target == "displacement":
        kwargs.update(disp_hidden=hidden, disp_activation=combo["activation"], lr_disp=combo["lr"])
    else:
        kwargs.update(mass_hidden=hidden, mass_activation=combo["activation"], lr_mass=combo["lr"])
    return training.TrainConfig(**kwargs)


def _grid_cell(args):
    (events, split, target, combo, config, weights) = args
    by_id = {ev.event_id: ev for ev in events}
    scores = []
    for fold_train, fold_val in split.folds:
        train_events = [by_id[i] for i in fold_train]
        val_events = [by_id[i] for i in fold_val]
        _, m_pred, v_pred, _ = _train_eval(train_events, val_events, config, weights)
        m_true, v_true, _ = _labels(val_events)
        if target == "displacement":
            scores.append(r_squared(v_true, v_pred))
        else:
            scores.append(r_squared(m_true, m_pred))
    return {**combo, "mean_r2": float(np.mean(scores)), "fold_r2": [float(s) for s in scores]}


def grid_search(space: dict, events: list[ImpactEvent], k_folds: int = 5,
                config: training.TrainConfig | None = None,
                weights: training.LossWeights | None = None,
                epoch_cap: int = 2000, max_cycles: int = 2, jobs: int = 1) -> dict:
    """Cross-validated search over both network grids.

    Returns {"displacement": [...], "mass": [...]} with one row per
    configuration, ranked by mean validation R-squared of the network's own
    target (velocity for the displacement net, mass for the mass net).
    """
    config = config or training.TrainConfig()
    weights = weights or training.LossWeights()
    split = make_splits(events, 0.8, k_folds, config.seed)
    results = {}
    for target in ("displacement", "mass"):
        if target not in space:
            continue
        combos = enumerate_grid(space[target])
        tasks = [
            (events, split, target, combo,
             _grid_config(config, target, combo, epoch_cap, max_cycles), weights)
            for combo in combos
        ]
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                rows = list(pool.map(_grid_cell, tasks))
        else:
            rows = [_grid_cell(t) for t in tasks]
        rows.sort(key=lambda r: -r["mean_r2"])
        for rank, row in enumerate(rows, start=1):
            row["rank"] = rank
        results[target] = rows
    return results


def grid_to_csv(rows: list[dict], path) -> None:
    """Parallel-coordinates-ready table: one ranked row per configuration."""
    header = "rank,layer_size,depth,lr,activation,mean_r2"
    lines = [header] + [
        f"{r['rank']},{r['layer_size']},{r['depth']},{r['lr']!r},{r['activation']},{r['mean_r2']!r}"
        for r in rows
    ]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


@dataclass
class AblationResult:
    physics: EvalReport
    ablated: EvalReport


def run_ablation(events: list[ImpactEvent], config: training.TrainConfig | None = None,
                 weights: training.LossWeights | None = None) -> AblationResult:
    """Train the physics-constrained pipeline and a plain energy regressor on
    identical augmented splits, and report both on the same test events."""
    config = config or training.TrainConfig()
    weights = weights or training.LossWeights()
    physics = run_case(default_case("P1"), events, config, weights)[0]

    data = augment_dataset(events, 0.01, config.seed)
    split = make_splits(data, 0.8, 5, config.seed)
    by_id = {ev.event_id: ev for ev in data}
    train_events = [by_id[i] for i in split.train_ids]
    test_events = [by_id[i] for i in split.test_ids]
    start = time.perf_counter()
    all_events = train_events + test_events
    matrix = feat.build_matrix(all_events)
    normed = feat.normalize(matrix, range(len(train_events)))
    _, _, e_tr = _labels(train_events)
    baseline = training.train_baseline(normed.rows[: len(train_events)], e_tr, config)
    e_pred = training.predict_baseline(baseline, normed.rows[len(train_events):])
    m_true, v_true, e_true = _labels(test_events)
    cell = {"availability": 1.0, "noise": 0.01, "arm": "ablated"}
    ablated = EvalReport(
        case_id="P1",
        cell=cell,
        mape_velocity=None,
        mape_mass=None,
        mape_energy=mape(e_true, e_pred),
        tolerance_band_fraction=tolerance_band_fraction(e_true, e_pred),
        r_squared_energy=r_squared(e_true, e_pred),
        parity={"energy": [[float(t), float(p)] for t, p in zip(e_true, e_pred)]},
        energy_bin_mape=_energy_bin_table(e_true, np.asarray(e_pred), DEFAULT_ENERGY_BINS),
        n_test=len(test_events),
        runtime_s=time.perf_counter() - start,
        seed=config.seed,
        provenance=_provenance("P1", cell, config.seed, config),
    )
    return AblationResult(physics=physics, ablated=ablated)
