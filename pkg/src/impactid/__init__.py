"""Physics-constrained impact identification.

Multi-domain energy indicators feed two decoupled surrogate networks
(impact velocity via a differentiated displacement model, strictly positive
impactor mass) trained by alternating physics-constrained optimization;
impact energy follows from kinetic-energy consistency.
"""

from .signals import ImpactEvent, Waveform, add_noise, augment_dataset, load_events, save_events
from .features import FeatureMatrix, FeatureVector, build_matrix, extract, normalize
from .nn import AdamState, Network, adam_init, adam_step, dvalue_dtime, forward, grad_params, init_network
from .training import (
    LossWeights,
    Prediction,
    TrainConfig,
    TrainState,
    kinetic_energy,
    loss_disp,
    loss_mass,
    predict,
    predict_batch,
    predict_velocity,
    train,
    train_baseline,
)
from .synth import SynthConfig, generate, verify_monotonicity
from .bench import (
    CaseSpec,
    EvalReport,
    SplitPlan,
    default_case,
    grid_search,
    make_splits,
    mape,
    r_squared,
    run_ablation,
    run_case,
    tolerance_band_fraction,
)

__version__ = "0.1.0"
