"""Multi-sensor impact waveforms: containers, dataset IO, noise augmentation.

Dataset layout on disk: a manifest JSON listing events plus one CSV per
sensor waveform (header ``time_s,value``, uniform time step).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

# Labels must satisfy E = 0.5 * m * v0**2 up to this relative tolerance.
LABEL_CONSISTENCY_TOL = 0.05

MANIFEST_NAME = "manifest.json"


class DatasetError(ValueError):
    """A dataset file or record violates the storage contract."""


@dataclass(eq=False)
class Waveform:
    """One sensor channel: voltage samples at a uniform rate."""

    samples: np.ndarray
    sample_rate_hz: float
    sensor_id: str

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if self.samples.ndim != 1 or self.samples.size == 0:
            raise ValueError(f"sensor {self.sensor_id}: samples must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError(f"sensor {self.sensor_id}: samples contain non-finite values")
        self.sample_rate_hz = float(self.sample_rate_hz)
        if not self.sample_rate_hz > 0:
            raise ValueError(f"sensor {self.sensor_id}: sample_rate_hz must be positive")

    @property
    def dt(self) -> float:
        return 1.0 / self.sample_rate_hz


@dataclass(eq=False)
class ImpactEvent:
    """One impact: per-sensor waveforms plus observed mass/velocity/energy labels."""

    event_id: str
    waveforms: list[Waveform]
    mass_obs_kg: float
    v0_obs_mps: float
    energy_meas_j: float
    damaged: bool = False

    def __post_init__(self):
        if not self.waveforms:
            raise ValueError(f"event {self.event_id}: at least one waveform required")
        self.mass_obs_kg = float(self.mass_obs_kg)
        self.v0_obs_mps = float(self.v0_obs_mps)
        self.energy_meas_j = float(self.energy_meas_j)
        if not self.mass_obs_kg > 0:
            raise ValueError(f"event {self.event_id}: field mass_obs_kg must be positive")
        if not self.energy_meas_j > 0:
            raise ValueError(f"event {self.event_id}: field energy_meas_j must be positive")
        kinetic = 0.5 * self.mass_obs_kg * self.v0_obs_mps**2
        rel = abs(self.energy_meas_j - kinetic) / self.energy_meas_j
        if rel > LABEL_CONSISTENCY_TOL:
            raise ValueError(
                f"event {self.event_id}: energy_meas_j inconsistent with labels "
                f"(0.5*m*v0**2 = {kinetic!r}, energy_meas_j = {self.energy_meas_j!r})"
            )


def _read_waveform_csv(path: Path, sensor_id: str, event_id: str) -> Waveform:
    try:
        raw = path.read_text()
    except OSError as exc:
        raise DatasetError(f"event {event_id}: cannot read waveform file {path}: {exc}") from exc
    lines = raw.strip().splitlines()
    if not lines or lines[0].strip() != "time_s,value":
        raise DatasetError(f"event {event_id}: {path} missing 'time_s,value' header")
    try:
        data = np.array([[float(tok) for tok in line.split(",")] for line in lines[1:]])
    except ValueError as exc:
        raise DatasetError(f"event {event_id}: malformed row in {path}: {exc}") from exc
    if data.ndim != 2 or data.shape[0] < 2 or data.shape[1] != 2:
        raise DatasetError(f"event {event_id}: {path} needs at least two 'time_s,value' rows")
    times, values = data[:, 0], data[:, 1]
    steps = np.diff(times)
    dt = steps[0]
    if dt <= 0 or np.max(np.abs(steps - dt)) > 1e-6 * dt:
        raise DatasetError(f"event {event_id}: {path} time column is not uniformly spaced")
    return Waveform(values, 1.0 / dt, sensor_id)


def load_events(path) -> list[ImpactEvent]:
    """Load a dataset from a manifest file or a directory containing one.

    Events are returned sorted by event_id; every record is validated against
    the ImpactEvent invariants and malformed records are reported with the
    offending event and field.
    """
    p = Path(path)
    manifest = p / MANIFEST_NAME if p.is_dir() else p
    if not manifest.is_file():
        raise DatasetError(f"no manifest found at {manifest}")
    base = manifest.parent
    try:
        records = json.loads(manifest.read_text())
    except json.JSONDecodeError as exc:
        raise DatasetError(f"malformed manifest {manifest}: {exc}") from exc
    if not isinstance(records, list):
        raise DatasetError(f"manifest {manifest} must contain a JSON array of event records")

    events = []
    seen = set()
    for rec in records:
        event_id = rec.get("event_id", "<missing event_id>")
        for key in ("event_id", "mass_kg", "v0_mps", "energy_j", "damaged", "sensors"):
            if key not in rec:
                raise DatasetError(f"event {event_id}: field {key} missing from manifest record")
        if event_id in seen:
            raise DatasetError(f"event {event_id}: duplicate event_id in manifest")
        seen.add(event_id)
        waveforms = []
        for sensor in rec["sensors"]:
            if "sensor_id" not in sensor or "file" not in sensor:
                raise DatasetError(f"event {event_id}: sensor record needs sensor_id and file")
            waveforms.append(_read_waveform_csv(base / sensor["file"], sensor["sensor_id"], event_id))
        try:
            events.append(
                ImpactEvent(
                    event_id=event_id,
                    waveforms=waveforms,
                    mass_obs_kg=float(rec["mass_kg"]),
                    v0_obs_mps=float(rec["v0_mps"]),
                    energy_meas_j=float(rec["energy_j"]),
                    damaged=bool(rec["damaged"]),
                )
            )
        except ValueError as exc:
            raise DatasetError(str(exc)) from exc
    events.sort(key=lambda ev: ev.event_id)
    return events


def save_events(events: list[ImpactEvent], outdir) -> Path:
    """Write events in the manifest + per-sensor CSV layout; returns the manifest path.

    Numbers are serialized with full round-trip precision so that
    save -> load reproduces labels exactly.
    """
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    records = []
    for ev in events:
        sensors = []
        for w in ev.waveforms:
            fname = f"{ev.event_id}_{w.sensor_id}.csv"
            times = np.arange(w.samples.size) * w.dt
            rows = "\n".join(f"{float(t)!r},{float(v)!r}" for t, v in zip(times, w.samples))
            (out / fname).write_text("time_s,value\n" + rows + "\n")
            sensors.append({"sensor_id": w.sensor_id, "file": fname})
        records.append(
            {
                "event_id": ev.event_id,
                "mass_kg": ev.mass_obs_kg,
                "v0_mps": ev.v0_obs_mps,
                "energy_j": ev.energy_meas_j,
                "damaged": ev.damaged,
                "sensors": sensors,
            }
        )
    manifest = out / MANIFEST_NAME
    manifest.write_text(json.dumps(records, indent=1))
    return manifest


def _derived_seed(seed: int, *key: int) -> int:
    return int(np.random.SeedSequence((seed,) + key).generate_state(1)[0])


def add_noise(w: Waveform, level_fraction: float, seed: int) -> Waveform:
    """Add zero-mean Gaussian noise with std = level_fraction * max|samples|.

    level_fraction = 0 returns the waveform unchanged; identical inputs and
    seed give bit-identical output.
    """
    if level_fraction < 0:
        raise ValueError("level_fraction must be non-negative")
    if level_fraction == 0:
        return w
    scale = level_fraction * float(np.max(np.abs(w.samples)))
    rng = np.random.default_rng(seed)
    return Waveform(w.samples + rng.normal(0.0, scale, w.samples.size), w.sample_rate_hz, w.sensor_id)


def _noisy_copy(ev: ImpactEvent, level_fraction: float, seed: int, index: int, rename: bool) -> ImpactEvent:
    # Independent noise stream per sensor so channels are not perturbed identically.
    waveforms = [
        add_noise(w, level_fraction, _derived_seed(seed, index, j))
        for j, w in enumerate(ev.waveforms)
    ]
    return ImpactEvent(
        event_id=ev.event_id + "+noise" if rename else ev.event_id,
        waveforms=waveforms,
        mass_obs_kg=ev.mass_obs_kg,
        v0_obs_mps=ev.v0_obs_mps,
        energy_meas_j=ev.energy_meas_j,
        damaged=ev.damaged,
    )


def augment_dataset(events: list[ImpactEvent], level_fraction: float, seed: int) -> list[ImpactEvent]:
    """Return the original events followed by noise-perturbed copies (labels unchanged)."""
    if not level_fraction > 0:
        raise ValueError("level_fraction must be positive for augmentation")
    noisy = [_noisy_copy(ev, level_fraction, seed, i, rename=True) for i, ev in enumerate(events)]
    return list(events) + noisy


def perturb_dataset(events: list[ImpactEvent], level_fraction: float, seed: int) -> list[ImpactEvent]:
    """Replace every waveform with a noise-perturbed copy (same ids and labels)."""
    if level_fraction == 0:
        return list(events)
    return [_noisy_copy(ev, level_fraction, seed, i, rename=False) for i, ev in enumerate(events)]
