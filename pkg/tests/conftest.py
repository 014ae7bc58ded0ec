import numpy as np
import pytest

from impactid import synth, training


def tiny_synth_config(seed=0, n_events=16, n_sensors=2):
    """Small, fast oracle configuration for unit tests."""
    return synth.SynthConfig(
        n_events=n_events,
        n_sensors=n_sensors,
        sample_rate_hz=50_000.0,
        duration_s=0.008,
        seed=seed,
    )


def tiny_train_config(seed=0, **overrides):
    """Small networks and budgets so trainer tests run in seconds."""
    kwargs = dict(
        max_epochs_per_phase=300,
        max_cycles=2,
        patience=100,
        disp_hidden=(24, 24),
        mass_hidden=(16, 16),
        seed=seed,
    )
    kwargs.update(overrides)
    return training.TrainConfig(**kwargs)


@pytest.fixture(scope="session")
def tiny_events():
    return synth.generate(tiny_synth_config())


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
