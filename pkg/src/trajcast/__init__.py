"""Stepwise CVAE trajectory forecaster with socially-aware offset refinement."""

from .arch import ArchConfig
from .autodiff import Tensor, backward, fd_gradient, no_grad
from .checkpoint import load_checkpoint, save_checkpoint
from .datasets import (
    SceneWindow,
    SplitPlan,
    TrajectoryScene,
    extract_windows,
    make_splits,
    parse_scene,
    write_scene,
)
from .errors import DataError, NumericError, UsageError
from .evaluation import EvalReport, ade, displacement_errors, efficiency_report, evaluate_model, fde
from .heads import BaselineHead, CascadedHead, RawPrediction, SlideHead, build_head, count_parameters
from .losses import LossReport, loss_ap, loss_kld, loss_r
from .model import ForecastModel, ModelConfig, WindowPrediction
from .nn import (
    LatentGaussian,
    Mlp,
    MlpSpec,
    ParamStore,
    adam_step,
    kl_standard_normal,
    sample_reparameterized,
    softmax_rows,
)
from .social import RefinedPrediction, SocialRefiner, build_mask, refine
from .synthetic import SynthConfig, synth_scenes
from .training import TrainConfig, train_model

__version__ = "0.1.0"
