"""Multi-domain energy indicators and the normalized feature matrix.

Nine indicators per sensor channel, concatenated over sensors in a fixed
order: RMS, TE (transmitted energy), PA (peak amplitude), EPR (energy peak
ratio), PCR (peak centroid ratio), WPF (weighted peak frequency), PF (peak
frequency), AME (approximation max energy), AM (approximation max).
Frequency-domain indicators use the magnitude spectrum of the mean-removed
signal; AME/AM use level-4 Daubechies-4 approximation coefficients.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .signals import ImpactEvent, Waveform
from .wavelets import wavedec

FEATURE_ORDER = ("RMS", "TE", "PA", "EPR", "PCR", "WPF", "PF", "AME", "AM")
DWT_LEVELS = 4


def rms(w: Waveform) -> float:
    """Root mean square of the samples."""
    return float(np.sqrt(np.mean(w.samples**2)))


def transmitted_energy(w: Waveform) -> float:
    """Discrete signal energy: sum of squared samples times the sample interval."""
    return float(np.sum(w.samples**2) * w.dt)


def peak_amplitude(w: Waveform) -> float:
    return float(np.max(np.abs(w.samples)))


def energy_peak_ratio(w: Waveform) -> float:
    """Transmitted energy over squared peak amplitude; 0 for an all-zero signal."""
    pa2 = peak_amplitude(w) ** 2
    if pa2 == 0.0:  # all-zero signal, or a peak so small its square underflows
        return 0.0
    return transmitted_energy(w) / pa2


def spectrum(w: Waveform) -> tuple[np.ndarray, np.ndarray]:
    """One-sided magnitude spectrum of the mean-removed signal.

    Returns (frequencies_hz, magnitudes); frequency resolution is
    sample_rate / length. No window is applied.
    """
    x = w.samples - np.mean(w.samples)
    mags = np.abs(np.fft.rfft(x))
    freqs = np.fft.rfftfreq(x.size, d=w.dt)
    return freqs, mags


def peak_frequency(w: Waveform) -> float:
    """Frequency of the maximum-magnitude bin; ties break toward the lowest frequency."""
    freqs, mags = spectrum(w)
    return float(freqs[int(np.argmax(mags))])


def frequency_centroid(w: Waveform) -> float:
    """Magnitude-weighted mean frequency; 0 for an all-zero spectrum."""
    freqs, mags = spectrum(w)
    total = float(np.sum(mags))
    if total == 0.0:
        return 0.0
    return float(np.sum(freqs * mags) / total)


def peak_centroid_ratio(w: Waveform) -> float:
    """Peak frequency over frequency centroid; 0 when the centroid is 0."""
    centroid = frequency_centroid(w)
    if centroid == 0.0:
        return 0.0
    return peak_frequency(w) / centroid


def weighted_peak_frequency(w: Waveform) -> float:
    """Geometric mean of peak frequency and frequency centroid."""
    return float(np.sqrt(peak_frequency(w) * frequency_centroid(w)))


def dwt_approximation(w: Waveform, levels: int = DWT_LEVELS) -> np.ndarray:
    """Approximation coefficients after `levels` Daubechies-4 decompositions."""
    approx, _, _ = wavedec(w.samples, levels)
    return approx


def approximation_max(w: Waveform) -> float:
    return float(np.max(np.abs(dwt_approximation(w))))


def approximation_max_energy(w: Waveform) -> float:
    return float(np.max(dwt_approximation(w) ** 2))


_FEATURE_FUNCS = {
    "RMS": rms,
    "TE": transmitted_energy,
    "PA": peak_amplitude,
    "EPR": energy_peak_ratio,
    "PCR": peak_centroid_ratio,
    "WPF": weighted_peak_frequency,
    "PF": peak_frequency,
    "AME": approximation_max_energy,
    "AM": approximation_max,
}


@dataclass(eq=False)
class FeatureVector:
    values: np.ndarray
    feature_names: tuple[str, ...]


def extract(event: ImpactEvent) -> FeatureVector:
    """Compute the nine indicators per sensor, concatenated in waveform order."""
    values = []
    names = []
    for w in event.waveforms:
        for feat in FEATURE_ORDER:
            values.append(_FEATURE_FUNCS[feat](w))
            names.append(f"{w.sensor_id}_{feat}")
    vec = np.array(values, dtype=float)
    if not np.all(np.isfinite(vec)):
        bad = names[int(np.argmax(~np.isfinite(vec)))]
        raise ValueError(f"event {event.event_id}: non-finite feature {bad}")
    return FeatureVector(vec, tuple(names))


@dataclass(eq=False)
class FeatureMatrix:
    """N events by F indicators, with optional per-column min-max normalization."""

    rows: np.ndarray
    event_ids: tuple[str, ...]
    feature_names: tuple[str, ...]
    norm_min: np.ndarray | None = None
    norm_max: np.ndarray | None = None

    @property
    def normalized(self) -> bool:
        return self.norm_min is not None


def build_matrix(events: list[ImpactEvent]) -> FeatureMatrix:
    """Assemble the raw (unnormalized) feature matrix over events."""
    if not events:
        raise ValueError("cannot build a feature matrix from an empty event list")
    vectors = [extract(ev) for ev in events]
    names = vectors[0].feature_names
    for ev, vec in zip(events, vectors):
        if len(vec.feature_names) != len(names):
            raise ValueError(f"event {ev.event_id}: inconsistent feature layout across events")
    rows = np.stack([vec.values for vec in vectors])
    return FeatureMatrix(rows, tuple(ev.event_id for ev in events), names)


def _apply_minmax(rows: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    span = hi - lo
    degenerate = span == 0
    safe_span = np.where(degenerate, 1.0, span)
    scaled = (rows - lo) / safe_span
    scaled[:, degenerate] = 0.5
    return scaled


def normalize(m: FeatureMatrix, fit_rows) -> FeatureMatrix:
    """Min-max normalize all rows using parameters fitted on `fit_rows` only.

    Fitted columns map into [0, 1]; rows outside the fit range may fall
    outside [0, 1] (no clamping). Constant columns map to 0.5.
    """
    fit = np.asarray(list(fit_rows), dtype=int)
    if fit.size == 0:
        raise ValueError("fit_rows must be non-empty")
    lo = m.rows[fit].min(axis=0)
    hi = m.rows[fit].max(axis=0)
    return FeatureMatrix(_apply_minmax(m.rows, lo, hi), m.event_ids, m.feature_names, lo, hi)


def normalize_with(rows: np.ndarray, feature_names, params: dict) -> np.ndarray:
    """Apply previously exported normalization parameters to new rows."""
    lo = np.array([params[name]["min"] for name in feature_names])
    hi = np.array([params[name]["max"] for name in feature_names])
    return _apply_minmax(np.atleast_2d(np.asarray(rows, dtype=float)), lo, hi)


def matrix_to_csv(m: FeatureMatrix, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["event_id", *m.feature_names])
        for event_id, row in zip(m.event_ids, m.rows):
            writer.writerow([event_id, *[repr(v) for v in row]])


def normalization_params(m: FeatureMatrix) -> dict:
    if not m.normalized:
        raise ValueError("matrix has no normalization parameters; call normalize first")
    return {
        name: {"min": float(lo), "max": float(hi)}
        for name, lo, hi in zip(m.feature_names, m.norm_min, m.norm_max)
    }


def normalization_to_json(m: FeatureMatrix, path) -> None:
    Path(path).write_text(json.dumps(normalization_params(m), indent=1))
