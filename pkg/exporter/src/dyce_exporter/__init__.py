"""Bridge from a frozen backbone model to early-exit trace directories."""

from .backbone import SegmentedBackbone, pretrain_backbone, state_digest
from .data import SyntheticSplits, make_dataset
from .exits import DEFAULT_VARIANTS, ExitSpec, PooledMlpExit, ShapeMismatch
from .experiment import DESK_EXPERIMENT, Experiment, run_experiment
from .export import ValidationFailure, export_trace
from .macs import backbone_cost_model, module_macs
from .training import (
    FrozenBackboneViolated,
    TrainRecipe,
    attach_and_train,
    pooled_features,
    soft_cross_entropy,
)

__version__ = "0.1.0"
