"""Synthetic impact oracle: events with exact (mass, velocity, energy) labels.

Each sensor channel is a superposition of damped sinusoids (modal parameters
drawn once per dataset seed) convolved with a half-sine contact force whose
amplitude scales with v0 * sqrt(m) and whose duration scales with sqrt(m).
Velocity therefore governs amplitude directly, while mass acts through the
contact duration's low-pass effect on the excited modes, so frequency-domain
indicators separate the mass groups. Above the damage threshold the dominant
mode shifts up 10% and amplitudes saturate through a soft knee.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import features as feat
from .signals import ImpactEvent, Waveform

MODE_BAND_HZ = (800.0, 6000.0)
# Dominant-mode shift reaches +10% as damage progresses over the span above
# the onset threshold.
DAMAGE_FREQ_SHIFT = 1.10
DAMAGE_PROGRESSION_SPAN_J = 25.0


class MonotonicityError(RuntimeError):
    """The generated dataset is not cleanly learnable; carries the report."""

    def __init__(self, report):
        super().__init__(f"energy monotonicity check failed: {report}")
        self.report = report


@dataclass
class SynthConfig:
    n_events: int = 73
    masses_kg: tuple[float, ...] = (2.238, 2.356, 5.510)
    energy_range_j: tuple[float, float] = (3.74, 80.95)
    sample_rate_hz: float = 200_000.0
    duration_s: float = 0.01
    n_sensors: int = 6
    damage_threshold_j: float = 55.0
    seed: int = 0
    amplitude_cap: float = 100.0
    # Half-sine contact duration: contact_time_scale_s * sqrt(mass).
    contact_time_scale_s: float = 5e-4
    force_gain: float = 100.0
    # Headroom of the soft amplitude knee above the damage threshold, as a
    # multiple of the threshold-level amplitude; larger means gentler
    # compression of the damaged-regime response.
    knee_headroom: float = 0.8

    def __post_init__(self):
        lo, hi = self.energy_range_j
        if not (0 < lo < hi):
            raise ValueError("energy_range_j must be positive and ordered")
        if any(m <= 0 for m in self.masses_kg) or not self.masses_kg:
            raise ValueError("masses_kg must be positive")
        if self.n_sensors < 1:
            raise ValueError("n_sensors must be at least 1")
        if self.n_events < 1:
            raise ValueError("n_events must be at least 1")
        if self.sample_rate_hz < 4 * MODE_BAND_HZ[1]:
            raise ValueError("sample_rate_hz too low for the synthesized mode band")
        if self.duration_s * self.sample_rate_hz < 2:
            raise ValueError("duration_s too short at this sample rate")


@dataclass
class _SensorModel:
    sensor_id: str
    mode_freqs_hz: np.ndarray
    mode_decays: np.ndarray
    mode_weights: np.ndarray
    attenuation: float
    delay_s: float


def _draw_sensors(config: SynthConfig, rng: np.random.Generator) -> list[_SensorModel]:
    sensors = []
    for s in range(config.n_sensors):
        n_modes = int(rng.integers(3, 6))
        sensors.append(
            _SensorModel(
                sensor_id=f"pzt{s + 1}",
                mode_freqs_hz=rng.uniform(*MODE_BAND_HZ, n_modes),
                mode_decays=rng.uniform(250.0, 900.0, n_modes),
                mode_weights=rng.uniform(0.4, 1.0, n_modes),
                attenuation=float(rng.uniform(0.4, 1.0)),
                delay_s=float(rng.uniform(0.0, 8e-4)),
            )
        )
    return sensors


def _soft_knee(x: np.ndarray, knee: float, headroom: float) -> np.ndarray:
    """Identity below the knee, tanh-compressed excess above it (continuous at the knee)."""
    mag = np.abs(x)
    excess = mag - knee
    compressed = knee + headroom * np.tanh(np.maximum(excess, 0.0) / headroom)
    return np.where(mag <= knee, x, np.sign(x) * compressed)


def _synth_waveform(config: SynthConfig, sensor: _SensorModel, mass: float, v0: float,
                    energy: float, damaged: bool) -> Waveform:
    fs = config.sample_rate_hz
    n = int(round(config.duration_s * fs))
    t = np.arange(n) / fs

    tau = config.contact_time_scale_s * np.sqrt(mass)
    n_force = max(2, int(round(tau * fs)))
    force = config.force_gain * v0 * np.sqrt(mass) * np.sin(np.pi * np.arange(n_force) / (n_force - 1))

    freqs = sensor.mode_freqs_hz.copy()
    if damaged:
        progress = min(1.0, max(0.0, (energy - config.damage_threshold_j) / DAMAGE_PROGRESSION_SPAN_J))
        shift = 1.0 + (DAMAGE_FREQ_SHIFT - 1.0) * progress
        freqs[int(np.argmax(sensor.mode_weights))] *= shift
    impulse = np.zeros(n)
    for f_k, lam_k, a_k in zip(freqs, sensor.mode_decays, sensor.mode_weights):
        impulse += a_k * np.exp(-lam_k * t) * np.sin(2 * np.pi * f_k * t)

    y = sensor.attenuation * np.convolve(force, impulse)[:n] / fs
    delay = int(round(sensor.delay_s * fs))
    if delay > 0:
        y = np.concatenate([np.zeros(delay), y])[:n]

    if damaged:
        # Linear response scales with v0, i.e. sqrt(energy), at fixed mass; the
        # knee sits at the amplitude a threshold-energy impact would produce.
        knee = float(np.max(np.abs(y))) * np.sqrt(config.damage_threshold_j / energy)
        y = _soft_knee(y, knee, config.knee_headroom * knee)

    peak = float(np.max(np.abs(y)))
    if peak > config.amplitude_cap:
        raise ValueError(f"synthesized amplitude {peak} exceeds cap {config.amplitude_cap}")
    return Waveform(y, fs, sensor.sensor_id)


def generate(config: SynthConfig | None = None) -> list[ImpactEvent]:
    """Generate events with labels satisfying E = 0.5 * m * v0**2 exactly."""
    config = config or SynthConfig()
    rng = np.random.default_rng(config.seed)
    sensors = _draw_sensors(config, rng)
    width = max(3, len(str(config.n_events - 1)))
    events = []
    for i in range(config.n_events):
        mass = float(config.masses_kg[int(rng.integers(len(config.masses_kg)))])
        energy_target = float(rng.uniform(*config.energy_range_j))
        v0 = float(np.sqrt(2.0 * energy_target / mass))
        energy = 0.5 * mass * v0 * v0  # recomputed so the label identity is exact
        damaged = energy > config.damage_threshold_j
        waveforms = [
            _synth_waveform(config, sensor, mass, v0, energy, damaged) for sensor in sensors
        ]
        events.append(
            ImpactEvent(
                event_id=f"ev{i:0{width}d}",
                waveforms=waveforms,
                mass_obs_kg=mass,
                v0_obs_mps=v0,
                energy_meas_j=energy,
                damaged=damaged,
            )
        )
    return events


def _spearman(x: np.ndarray, y: np.ndarray) -> float:
    rx = np.argsort(np.argsort(x)).astype(float)
    ry = np.argsort(np.argsort(y)).astype(float)
    rx -= rx.mean()
    ry -= ry.mean()
    denom = np.sqrt(np.sum(rx**2) * np.sum(ry**2))
    if denom == 0:
        return 0.0
    return float(np.sum(rx * ry) / denom)


@dataclass
class MonotonicityReport:
    """Per mass group: Spearman correlation of energy with mean PA and mean TE."""

    groups: list[dict] = field(default_factory=list)
    threshold: float = 0.95

    @property
    def passed(self) -> bool:
        return all(g["rho_pa"] > self.threshold and g["rho_te"] > self.threshold for g in self.groups)

    def __str__(self):
        rows = ", ".join(
            f"m={g['mass_kg']}: n={g['n']}, rho_PA={g['rho_pa']:.3f}, rho_TE={g['rho_te']:.3f}"
            for g in self.groups
        )
        return f"MonotonicityReport({rows})"


def verify_monotonicity(events: list[ImpactEvent], threshold: float = 0.95) -> MonotonicityReport:
    """Sanity gate: pristine-regime PA and TE must rise with energy in each mass group.

    Raises MonotonicityError (carrying the report) if any group fails, and
    ValueError if a mass group has fewer than 5 pristine events.
    """
    pristine = [ev for ev in events if not ev.damaged]
    groups: dict[float, list[ImpactEvent]] = {}
    for ev in pristine:
        groups.setdefault(round(ev.mass_obs_kg, 9), []).append(ev)
    if not groups:
        raise ValueError("no pristine events to check")
    report = MonotonicityReport(threshold=threshold)
    for mass in sorted(groups):
        evs = groups[mass]
        if len(evs) < 5:
            raise ValueError(f"mass group {mass}: fewer than 5 pristine events ({len(evs)})")
        energy = np.array([ev.energy_meas_j for ev in evs])
        pa = np.array([np.mean([feat.peak_amplitude(w) for w in ev.waveforms]) for ev in evs])
        te = np.array([np.mean([feat.transmitted_energy(w) for w in ev.waveforms]) for ev in evs])
        report.groups.append(
            {
                "mass_kg": mass,
                "n": len(evs),
                "rho_pa": _spearman(energy, pa),
                "rho_te": _spearman(energy, te),
            }
        )
    if not report.passed:
        raise MonotonicityError(report)
    return report
