"""Minibatch SGD for the weighted minimax objective.

One step builds a tape over a source batch and a target batch and minimizes

    cls + dom_src + dom_tgt

where ``cls`` is the class-weighted source cross-entropy, ``dom_src`` the
class-weighted discriminator loss on source features (domain label 0) and
``dom_tgt`` the discriminator loss on target features (domain label 1).
Features reach the discriminator through a gradient reversal layer with
coefficient ``lambda_p``, so the discriminator descends its own loss while
the feature extractor ascends it, scaled by ``lambda_p``.  The reported
objective is ``cls + lambda_p * (dom_src + dom_tgt)``.
"""

from __future__ import annotations

import csv
import enum
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import autodiff as ad
from .datagen import Dataset, TrainView
from .errors import DivergenceError, NumericalError, ParameterError
from .model import ModelConfig, NetworkParams, bind, classify_forward, discriminate_forward
from .model import feature_forward, init_params, predict_labels, predict_proba
from .weighting import ClassWeights, estimate_class_weights, normalize_weights
from .weighting import uniform_weights, weights_for_labels

log = logging.getLogger(__name__)


class Mode(str, enum.Enum):
    SOURCE_ONLY = "source-only"
    DANN = "dann"
    PADA = "pada"
    # class weights on the classifier term only (the "no adversarial weight" ablation)
    PADA_CLASSIFIER_ONLY = "pada-no-adversarial-weight"
    # class weights on the discriminator term only (the "no classifier weight" ablation)
    PADA_ADVERSARIAL_ONLY = "pada-no-classifier-weight"

    @property
    def weights_classifier(self) -> bool:
        return self in (Mode.PADA, Mode.PADA_CLASSIFIER_ONLY)

    @property
    def weights_adversary(self) -> bool:
        return self in (Mode.PADA, Mode.PADA_ADVERSARIAL_ONLY)

    @property
    def uses_weights(self) -> bool:
        return self.weights_classifier or self.weights_adversary


@dataclass(frozen=True)
class TrainConfig:
    mode: Mode = Mode.PADA
    epochs: int = 30
    batch_size: int = 32
    eta0: float = 0.02
    alpha: float = 10.0
    decay: float = 0.75
    momentum: float = 0.9
    lambda_max: float = 0.2
    ramp_steepness: float = 10.0
    head_lr_multiplier: float = 1.0
    freeze_class_weights: bool = False
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if not self.eta0 > 0:
            raise ParameterError("eta0 must be positive")
        if self.lambda_max < 0 or self.decay < 0 or self.alpha < 0:
            raise ParameterError("lambda_max, decay and alpha must be nonnegative")
        if not 0 <= self.momentum < 1:
            raise ParameterError("momentum must lie in [0, 1)")
        if self.head_lr_multiplier < 1:
            raise ParameterError("head_lr_multiplier must be >= 1")
        if self.epochs < 0 or self.batch_size < 1:
            raise ParameterError("epochs must be >= 0 and batch_size >= 1")


@dataclass
class TrainState:
    params: NetworkParams
    velocity: NetworkParams
    class_weights: ClassWeights
    step: int = 0
    total_steps: int = 1
    epoch: int = 0
    rng: np.random.Generator = field(default_factory=lambda: np.random.default_rng(0))

    @property
    def progress(self) -> float:
        return min(1.0, self.step / self.total_steps) if self.total_steps else 1.0


@dataclass(frozen=True)
class StepLosses:
    source_cls_loss: float
    source_domain_loss: float
    target_domain_loss: float
    total_objective: float


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    losses: StepLosses
    gamma: np.ndarray
    source_accuracy: float
    target_accuracy: float


def _check_progress(p: float) -> None:
    if not 0.0 <= p <= 1.0:
        raise ParameterError(f"progress must lie in [0, 1], got {p}")


def lr_at(config: TrainConfig, p: float) -> float:
    _check_progress(p)
    return config.eta0 / (1.0 + config.alpha * p) ** config.decay


def lambda_at(config: TrainConfig, p: float) -> float:
    _check_progress(p)
    return config.lambda_max * (2.0 / (1.0 + math.exp(-config.ramp_steepness * p)) - 1.0)


def init_state(model_config: ModelConfig, config: TrainConfig, total_steps: int = 1) -> TrainState:
    params = init_params(model_config)
    return TrainState(
        params=params,
        velocity=params.map(lambda _, a: np.zeros_like(a)),
        class_weights=uniform_weights(model_config.num_source_classes),
        total_steps=max(total_steps, 1),
        rng=np.random.default_rng(config.seed),
    )


def effective_weights(config: TrainConfig, weights: ClassWeights, labels) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample weights for the classifier term and the source discriminator term."""
    ones = np.ones(len(labels))
    per_sample = weights_for_labels(weights, labels) if config.mode.uses_weights else ones
    cls_w = per_sample if config.mode.weights_classifier else ones
    dom_w = per_sample if config.mode.weights_adversary else ones
    return cls_w, dom_w


def build_objective(tape: ad.Tape, params: NetworkParams, x_s, y_s, x_t, cls_w, dom_w, grl_coeff: float):
    """Record the three loss terms on ``tape``.

    Returns ``(bound_params, loss_node, (cls, dom_src, dom_tgt))``.
    """
    bound = bind(tape, params)
    f_s = feature_forward(tape, bound, x_s)
    f_t = feature_forward(tape, bound, x_t)
    cls = ad.cross_entropy(tape, classify_forward(tape, bound, f_s), y_s, cls_w)
    d_s = discriminate_forward(tape, bound, f_s, grl_coeff)
    d_t = discriminate_forward(tape, bound, f_t, grl_coeff)
    dom_src = ad.cross_entropy(tape, d_s, np.zeros(len(y_s), dtype=np.int64), dom_w)
    dom_tgt = ad.cross_entropy(tape, d_t, np.ones(len(x_t), dtype=np.int64))
    return bound, ad.add(tape, cls, dom_src, dom_tgt), (cls, dom_src, dom_tgt)


def _bound_ids(bound) -> list[tuple[str, int]]:
    ids = []
    for w, b in bound.theta_f:
        ids += [("f", w), ("f", b)]
    ids += [("y", bound.theta_y[0]), ("y", bound.theta_y[1])]
    for w, b in bound.theta_d:
        ids += [("d", w), ("d", b)]
    return ids


def _sgd_momentum(state: TrainState, config: TrainConfig, grads: list[np.ndarray], lr: float):
    """``v <- mu v + g``; ``theta <- theta - lr_group v`` (heads scaled by the multiplier)."""
    fresh = iter([config.momentum * v + g for (_, v), g in zip(state.velocity.named(), grads)])
    velocity = state.velocity.map(lambda _group, _a: next(fresh))
    flat_v = iter([v for _, v in velocity.named()])

    def update(group, a):
        mult = config.head_lr_multiplier if group in ("y", "d") else 1.0
        return a - (lr * mult) * next(flat_v)

    return state.params.map(update), velocity


def pada_step(state: TrainState, config: TrainConfig, source_batch, target_batch) -> tuple[TrainState, StepLosses]:
    x_s, y_s = source_batch
    x_t = target_batch
    y_s = np.asarray(y_s, dtype=np.int64)
    if len(y_s) == 0 or len(x_t) == 0:
        raise ParameterError("source and target batches must be non-empty")
    if y_s.min() < 0 or y_s.max() >= len(state.class_weights):
        raise IndexError(f"source label out of range [0, {len(state.class_weights)})")
    p = state.progress
    lam = 0.0 if config.mode is Mode.SOURCE_ONLY else lambda_at(config, p)
    cls_w, dom_w = effective_weights(config, state.class_weights, y_s)
    try:
        tape = ad.Tape()
        bound, loss, (cls, dom_src, dom_tgt) = build_objective(
            tape, state.params, x_s, y_s, x_t, cls_w, dom_w, lam
        )
        grads_by_id = ad.backward(tape, loss)
    except NumericalError as exc:
        raise DivergenceError(state.step, str(exc)) from None
    c, ds, dt = (float(tape.value(n)[0, 0]) for n in (cls, dom_src, dom_tgt))
    losses = StepLosses(c, ds, dt, c + lam * (ds + dt))
    if not all(math.isfinite(v) for v in (c, ds, dt)):
        raise DivergenceError(state.step)
    grads = [grads_by_id[i] for _, i in _bound_ids(bound)]
    params, velocity = _sgd_momentum(state, config, grads, lr_at(config, p))
    if not all(np.isfinite(a).all() for _, a in params.named()):
        raise DivergenceError(state.step, "non-finite parameter")
    return replace(state, params=params, velocity=velocity, step=state.step + 1), losses


def refresh_class_weights(params: NetworkParams, target_x) -> ClassWeights:
    """Average the classifier's target predictions and normalize by the maximum."""
    return normalize_weights(estimate_class_weights(predict_proba(params, target_x)))


def _accuracy(params: NetworkParams, x, y) -> float:
    if y is None:
        return float("nan")
    y = np.asarray(y)
    known = y >= 0
    if not known.any():
        return float("nan")
    return float(np.mean(predict_labels(params, x[known]) == y[known]))


def _mean_losses(losses: list[StepLosses]) -> StepLosses:
    arr = np.array([[l.source_cls_loss, l.source_domain_loss, l.target_domain_loss, l.total_objective] for l in losses])
    return StepLosses(*(float(v) for v in arr.mean(axis=0)))


def train_run(
    dataset: Dataset,
    model_config: ModelConfig,
    train_config: TrainConfig,
) -> tuple[NetworkParams, list[EpochRecord]]:
    """Train for ``train_config.epochs`` epochs and return final params and history.

    Each epoch walks the larger domain once in shuffled batches; the smaller
    domain is cycled.  Class weights start at all-ones and, for weighted
    modes, are re-estimated from all target data at the start of every later
    epoch.  Target labels are used only for the per-epoch accuracy column.
    """
    view: TrainView = dataset.train_view()
    if view.num_source_classes != model_config.num_source_classes:
        raise ParameterError("dataset and model disagree on the number of source classes")
    if dataset.dim != model_config.input_dim:
        raise ParameterError(f"dataset has dim {dataset.dim}, model expects {model_config.input_dim}")
    n_s, n_t = view.source_x.shape[0], view.target_x.shape[0]
    b = train_config.batch_size
    steps_per_epoch = math.ceil(max(n_s, n_t) / b)
    state = init_state(model_config, train_config, train_config.epochs * steps_per_epoch)
    history: list[EpochRecord] = []
    for epoch in range(train_config.epochs):
        if epoch > 0 and train_config.mode.uses_weights and not train_config.freeze_class_weights:
            state.class_weights = refresh_class_weights(state.params, view.target_x)
        state.epoch = epoch
        perm_s = state.rng.permutation(n_s)
        perm_t = state.rng.permutation(n_t)
        epoch_losses = []
        for j in range(steps_per_epoch):
            window = np.arange(j * b, (j + 1) * b)
            idx_s = perm_s[window % n_s]
            idx_t = perm_t[window % n_t]
            state, losses = pada_step(
                state, train_config, (view.source_x[idx_s], view.source_y[idx_s]), view.target_x[idx_t]
            )
            epoch_losses.append(losses)
        record = EpochRecord(
            epoch=epoch,
            losses=_mean_losses(epoch_losses),
            gamma=np.array(state.class_weights.gamma),
            source_accuracy=_accuracy(state.params, view.source_x, view.source_y),
            target_accuracy=_accuracy(state.params, dataset.target_x, dataset.target_y_eval),
        )
        log.debug("epoch %d objective %.4f tgt_acc %.4f", epoch, record.losses.total_objective, record.target_accuracy)
        history.append(record)
    return state.params, history


HISTORY_COLUMNS = ["epoch", "src_cls_loss", "src_dom_loss", "tgt_dom_loss", "objective", "src_acc", "tgt_acc"]


def write_history_csv(history: list[EpochRecord], path, num_classes: int, shared: Optional[tuple[int, ...]] = None) -> None:
    """One row per epoch; class weights follow as ``gamma_0..gamma_{K-1}``.

    When ``shared`` is given, the shared/outlier weight means are appended
    as the two last columns.
    """
    from .evaluation import weight_stats

    header = HISTORY_COLUMNS + [f"gamma_{k}" for k in range(num_classes)]
    if shared is not None:
        header += ["gamma_mean_shared", "gamma_mean_outlier"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for r in history:
            row = [r.epoch] + [
                format(v, ".17g")
                for v in (
                    r.losses.source_cls_loss,
                    r.losses.source_domain_loss,
                    r.losses.target_domain_loss,
                    r.losses.total_objective,
                    r.source_accuracy,
                    r.target_accuracy,
                )
            ]
            row += [format(v, ".17g") for v in r.gamma]
            if shared is not None:
                stats = weight_stats(ClassWeights(r.gamma, normalized=True), shared)
                row += [format(stats.mean_shared, ".17g"), format(stats.mean_outlier, ".17g")]
            writer.writerow(row)
