"""Accuracy reports, class-weight statistics and the target-class-count sweep."""

from __future__ import annotations

import csv
import hashlib
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .datagen import UNKNOWN_LABEL, Dataset, subset_target_classes
from .errors import ParameterError, UnavailableMetricError
from .model import ModelConfig, NetworkParams, predict_labels
from .train import Mode, TrainConfig, train_run
from .weighting import ClassWeights

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EvalReport:
    target_accuracy: float
    source_accuracy: float
    per_class_target_accuracy: dict[int, float]
    confusion: np.ndarray  # rows: true class, cols: predicted class


@dataclass(frozen=True)
class WeightStats:
    mean_shared: float
    mean_outlier: float
    sum_shared: float
    sum_outlier: float
    full_vector: np.ndarray
    num_outlier: int


def evaluate(params: NetworkParams, dataset: Dataset) -> EvalReport:
    if not dataset.has_target_labels:
        raise UnavailableMetricError("dataset carries no target evaluation labels")
    k = dataset.num_source_classes
    known = dataset.target_y_eval != UNKNOWN_LABEL
    truth = dataset.target_y_eval[known]
    pred = predict_labels(params, dataset.target_x[known])
    confusion = np.zeros((k, k), dtype=np.int64)
    np.add.at(confusion, (truth, pred), 1)
    per_class = {
        int(c): float(confusion[c, c] / confusion[c].sum())
        for c in range(k)
        if confusion[c].sum() > 0
    }
    source_acc = float(np.mean(predict_labels(params, dataset.source_x) == dataset.source_y))
    return EvalReport(
        target_accuracy=float(np.trace(confusion) / confusion.sum()),
        source_accuracy=source_acc,
        per_class_target_accuracy=per_class,
        confusion=confusion,
    )


def weight_stats(weights: ClassWeights, shared: Sequence[int]) -> WeightStats:
    """Split the weight vector into shared and outlier classes.

    With no outlier classes the outlier mean is reported as 0.
    """
    shared = sorted(set(int(c) for c in shared))
    k = len(weights)
    if not shared:
        raise ParameterError("shared class set must be nonempty")
    if shared[0] < 0 or shared[-1] >= k:
        raise ParameterError(f"shared classes must lie in [0, {k})")
    g = np.asarray(weights.gamma)
    mask = np.zeros(k, dtype=bool)
    mask[shared] = True
    outlier = g[~mask]
    return WeightStats(
        mean_shared=float(g[mask].mean()),
        mean_outlier=float(outlier.mean()) if outlier.size else 0.0,
        sum_shared=float(g[mask].sum()),
        sum_outlier=float(outlier.sum()),
        full_vector=g.copy(),
        num_outlier=int(outlier.size),
    )


def negative_transfer_margin(adapted: EvalReport, source_only: EvalReport) -> float:
    """Adapted minus source-only target accuracy; negative means negative transfer."""
    return adapted.target_accuracy - source_only.target_accuracy


def cell_seed(base_seed: int, k: int, mode: str) -> int:
    """Stable 63-bit seed for one sweep cell, from SHA-256 of ``base_seed:k:mode``."""
    mode = Mode(mode).value
    digest = hashlib.sha256(f"{base_seed}:{k}:{mode}".encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1


@dataclass(frozen=True)
class SweepRow:
    k: int
    mode: str
    target_accuracy: float
    source_accuracy: float
    seconds: float
    seed: int
    status: str = "ok"


def run_cell(dataset: Dataset, k: int, model_config: ModelConfig, train_config: TrainConfig, seed: int) -> SweepRow:
    """Train one sweep cell from a fresh init; failures become a non-ok row."""
    start = time.perf_counter()
    mode = train_config.mode.value
    try:
        data = subset_target_classes(dataset, k)
        params, _ = train_run(data, replace(model_config, seed=seed), replace(train_config, seed=seed))
        report = evaluate(params, data)
    except Exception as exc:  # recorded in the table, never aborts the sweep
        log.warning("sweep cell k=%d mode=%s failed: %s", k, mode, exc)
        return SweepRow(k, mode, float("nan"), float("nan"), time.perf_counter() - start, seed, f"error: {exc}")
    return SweepRow(k, mode, report.target_accuracy, report.source_accuracy, time.perf_counter() - start, seed)


def sweep_target_classes(
    base_dataset: Dataset,
    ks: Sequence[int],
    model_config: ModelConfig,
    train_configs: Sequence[TrainConfig],
    base_seed: Optional[int] = None,
    jobs: int = 1,
    seed_fn=cell_seed,
) -> list[SweepRow]:
    """Train every ``(k, mode)`` cell independently; rows come back in ``ks`` x ``modes`` order.

    Cell seeds come from ``seed_fn(base_seed, k, mode)``; ``base_seed``
    defaults to the first train config's seed.
    """
    if not ks:
        raise ParameterError("ks must be nonempty")
    for k in ks:
        if not 1 <= k <= len(base_dataset.target_class_set):
            raise ParameterError(f"k={k} outside [1, {len(base_dataset.target_class_set)}]")
    if base_seed is None:
        base_seed = train_configs[0].seed
    cells = [
        (k, tc, seed_fn(base_seed, k, tc.mode.value)) for k in ks for tc in train_configs
    ]
    if jobs <= 1:
        return [run_cell(base_dataset, k, model_config, tc, s) for k, tc, s in cells]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(run_cell, base_dataset, k, model_config, tc, s) for k, tc, s in cells]
        return [f.result() for f in futures]


SWEEP_COLUMNS = ["k", "mode", "target_acc", "src_acc", "seconds", "seed", "status"]


def write_sweep_csv(rows: Sequence[SweepRow], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SWEEP_COLUMNS)
        for r in rows:
            writer.writerow([
                r.k, r.mode, format(r.target_accuracy, ".17g"), format(r.source_accuracy, ".17g"),
                format(r.seconds, ".6f"), r.seed, r.status,
            ])


def write_eval_csv(report: EvalReport, path) -> None:
    """``metric,value`` lines, then per-class accuracy and the confusion matrix."""
    k = report.confusion.shape[0]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["metric", "value"])
        writer.writerow(["target_acc", format(report.target_accuracy, ".17g")])
        writer.writerow(["src_acc", format(report.source_accuracy, ".17g")])
        for c, acc in sorted(report.per_class_target_accuracy.items()):
            writer.writerow([f"class_acc_{c}", format(acc, ".17g")])
        for i in range(k):
            for j in range(k):
                writer.writerow([f"confusion_{i}_{j}", int(report.confusion[i, j])])
