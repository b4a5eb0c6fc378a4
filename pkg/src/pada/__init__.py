"""Partial adversarial domain adaptation on a small numpy autodiff engine."""

from .datagen import Dataset, SynthConfig, load_csv, make_synthetic, save_csv, subset_target_classes
from .evaluation import EvalReport, WeightStats, evaluate, sweep_target_classes, weight_stats
from .model import ModelConfig, NetworkParams, init_params, predict_labels, predict_proba
from .train import Mode, TrainConfig, lambda_at, lr_at, pada_step, train_run
from .weighting import ClassWeights, estimate_class_weights, normalize_weights

__version__ = "0.1.0"
