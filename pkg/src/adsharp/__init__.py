"""Semi-supervised distillation with sparse probability transforms.

The package implements adaptive sharpening -- sparse candidate selection
followed by power sharpening of the surviving probabilities -- alongside the
classic distillation strategies (entropy minimization, temperature
sharpening, pseudo-labeling, negative sampling), a combined training
objective with consistency regularization, a small manually-differentiated
network, and an experiment harness with brute-force verification oracles.
"""

from .data import AugmentKind, Dataset, SemiSplit, augment, load_csv, make_blobs, make_two_moons, save_csv, split_semi
from .distill import (
    DistillResult,
    DistillTarget,
    MaskReason,
    PredictionClass,
    Strategy,
    StrategyConfig,
    Transform,
    ads_loss,
    ads_target,
    classify_prediction,
    corollary1_bounds,
    fixed_topm_loss,
    fixed_topm_target,
    me_loss,
    ns_loss,
    pl_loss,
    sh_loss,
    strategy_loss,
    theorem1_predicate,
)
from .errors import ConfigError
from .metrics import (
    RunMetrics,
    avg_dominant_probability,
    avg_sparsity_and_topm,
    prediction_histogram,
    test_error,
)
from .net import Activation, Gradients, InitScheme, Net, init_net, make_optimizer, sgd_step
from .objective import (
    ConsistencyDist,
    ConsistencySource,
    LossBreakdown,
    ObjectiveConfig,
    consistency_loss,
    supervised_sparsemax_loss,
    total_objective,
    vat_perturbation,
)
from .runner import ExperimentConfig, SweepRow, parse_config, run_experiment, run_sweep
from .transforms import (
    ProbDistribution,
    SparsemaxSolution,
    sharpen,
    softmax,
    sparsemax,
    sparsemax_jacobian,
)

__version__ = "0.1.0"
