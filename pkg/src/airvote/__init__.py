"""Sign-vote federated learning over a non-coherent OFDM uplink.

Devices report only gradient signs, encoded as energy on paired
subcarriers; the server tallies votes by comparing accumulated bin
energies, without channel state information.  The package pairs the
simulator with closed-form performance bounds and the Monte Carlo
machinery that checks them.
"""

from .analysis import (
    BoundParams,
    comm_cost,
    convergence_bound,
    convergence_tau,
    error_prob_bound,
    error_prob_intermediate_bound,
    exact_error_prob,
    failure_prob_bound,
    mc_error_prob,
    mc_error_prob_gaussian,
    mc_flip_prob,
    mc_mean_energy,
    mean_energy,
)
from .channel import ChannelConfig, ChannelRealization, apply_sync_error, sample_channel, superpose
from .detector import DetectionResult, detect, detect_votes, ideal_majority_vote, measure_energies
from .experiment import (
    DatasetSpec,
    ExperimentConfig,
    PhyConfig,
    RoundMetrics,
    RunState,
    load_config,
    prepare_run,
    run_experiment,
    run_round,
    run_rounds,
)
from .learner import (
    Dataset,
    DatasetShard,
    GradientVector,
    IdxFormatError,
    ModelState,
    SoftmaxRegression,
    TanhMlp,
    TrainingConfig,
    apply_global_update,
    compute_local_gradient,
    evaluate,
    full_gradient,
    load_idx_dataset,
    make_synthetic_dataset,
    partition,
    sign_quantize,
)
from .phy import (
    SYMBOL_ENERGY,
    PowerState,
    SubcarrierMap,
    build_subcarrier_map,
    encode_signs,
    initial_power_state,
    mean_power,
    signed_agreement,
    update_power,
)

__version__ = "0.1.0"
