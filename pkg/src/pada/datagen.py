"""Partial domain adaptation datasets: synthetic Gaussian blobs and CSV files.

Source data covers every class; target data covers only a prefix of the
class indices and is moved by a rigid motion (rotation in the first two
coordinates followed by a translation).  Target labels are kept for
evaluation only; training code receives a :class:`TrainView` without them.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import DataFormatError, DimensionError, ParameterError

UNKNOWN_LABEL = -1


@dataclass(frozen=True)
class TrainView:
    """What the training loss is allowed to see."""

    source_x: np.ndarray
    source_y: np.ndarray
    target_x: np.ndarray
    num_source_classes: int


@dataclass(frozen=True)
class Dataset:
    source_x: np.ndarray
    source_y: np.ndarray
    target_x: np.ndarray
    target_y_eval: Optional[np.ndarray]
    num_source_classes: int
    target_class_set: tuple[int, ...]

    def __post_init__(self):
        sx = np.asarray(self.source_x, dtype=np.float64)
        tx = np.asarray(self.target_x, dtype=np.float64)
        sy = np.asarray(self.source_y, dtype=np.int64).reshape(-1)
        if sx.ndim != 2 or tx.ndim != 2 or sx.shape[1] != tx.shape[1]:
            raise DimensionError(f"source {sx.shape} and target {tx.shape} must share a column count")
        if sy.shape[0] != sx.shape[0]:
            raise DimensionError("one source label per source row required")
        k = self.num_source_classes
        if sy.size and (sy.min() < 0 or sy.max() >= k):
            raise ParameterError(f"source labels must lie in [0, {k})")
        classes = tuple(sorted(set(int(c) for c in self.target_class_set)))
        if not classes or classes[0] < 0 or classes[-1] >= k:
            raise ParameterError(f"target classes {classes} must be a nonempty subset of [0, {k})")
        ty = None
        if self.target_y_eval is not None:
            ty = np.asarray(self.target_y_eval, dtype=np.int64).reshape(-1)
            if ty.shape[0] != tx.shape[0]:
                raise DimensionError("one target eval label per target row required")
            known = ty[ty != UNKNOWN_LABEL]
            if not set(known.tolist()) <= set(classes):
                raise ParameterError("target eval labels fall outside the target class set")
            ty.setflags(write=False)
        for a in (sx, tx, sy):
            a.setflags(write=False)
        object.__setattr__(self, "source_x", sx)
        object.__setattr__(self, "target_x", tx)
        object.__setattr__(self, "source_y", sy)
        object.__setattr__(self, "target_y_eval", ty)
        object.__setattr__(self, "target_class_set", classes)

    @property
    def dim(self) -> int:
        return self.source_x.shape[1]

    @property
    def has_target_labels(self) -> bool:
        return self.target_y_eval is not None and bool(np.any(self.target_y_eval != UNKNOWN_LABEL))

    def train_view(self) -> TrainView:
        return TrainView(self.source_x, self.source_y, self.target_x, self.num_source_classes)

    def equals(self, other: "Dataset") -> bool:
        def same(a, b):
            if a is None or b is None:
                return a is None and b is None
            return a.shape == b.shape and np.array_equal(a, b)

        return (
            self.num_source_classes == other.num_source_classes
            and self.target_class_set == other.target_class_set
            and same(self.source_x, other.source_x)
            and same(self.source_y, other.source_y)
            and same(self.target_x, other.target_x)
            and same(self.target_y_eval, other.target_y_eval)
        )


@dataclass(frozen=True)
class SynthConfig:
    """Synthetic task description; the defaults are the reference task.

    The reference task puts 8 classes on a circle in the first two
    coordinates and moves the 4 target classes along the third coordinate,
    which carries no class information.  A feature extractor shared by both
    domains can undo that shift by ignoring the third coordinate, something
    it cannot do for a rotation inside the class plane.
    """

    num_source_classes: int = 8
    num_target_classes: int = 4
    samples_per_class_source: int = 200
    samples_per_class_target: int = 50
    feature_dim: int = 3
    class_separation: float = 3.25
    shift_angle: float = 0.0  # degrees, in the plane of the first two coordinates
    shift_translation: tuple[float, ...] = (0.0, 0.0, 4.0)
    noise_std: float = 1.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "shift_translation", tuple(float(v) for v in self.shift_translation))
        if self.num_source_classes < 2:
            raise ParameterError("num_source_classes must be at least 2")
        if not 1 <= self.num_target_classes <= self.num_source_classes:
            raise ParameterError("num_target_classes must lie in [1, num_source_classes]")
        if self.samples_per_class_source < 1 or self.samples_per_class_target < 1:
            raise ParameterError("samples per class must be positive")
        if self.feature_dim < 1:
            raise ParameterError("feature_dim must be positive")
        if self.feature_dim < 2 and self.shift_angle != 0.0:
            raise ParameterError("rotation needs feature_dim >= 2")
        if self.shift_translation and len(self.shift_translation) != self.feature_dim:
            raise ParameterError("shift_translation must have feature_dim entries")
        if self.noise_std < 0:
            raise ParameterError("noise_std must be nonnegative")

    @property
    def translation(self) -> np.ndarray:
        if not self.shift_translation:
            return np.zeros(self.feature_dim)
        return np.array(self.shift_translation)


def class_centers(config: SynthConfig) -> np.ndarray:
    """Centers evenly spaced on a circle of radius ``class_separation``.

    The circle lies in the plane of the first two coordinates; any further
    coordinates of the centers are zero.  With one coordinate the centers
    sit on a line, ``class_separation`` apart.
    """
    k, d = config.num_source_classes, config.feature_dim
    if d == 1:
        return config.class_separation * np.arange(k, dtype=np.float64).reshape(-1, 1)
    angles = 2.0 * math.pi * np.arange(k) / k
    centers = np.zeros((k, d))
    centers[:, 0] = config.class_separation * np.cos(angles)
    centers[:, 1] = config.class_separation * np.sin(angles)
    return centers


def rigid_shift(x: np.ndarray, angle_deg: float, translation: np.ndarray) -> np.ndarray:
    out = x.copy()
    if angle_deg:
        a = math.radians(angle_deg)
        c, s = math.cos(a), math.sin(a)
        x0, x1 = x[:, 0].copy(), x[:, 1].copy()
        out[:, 0] = c * x0 - s * x1
        out[:, 1] = s * x0 + c * x1
    return out + translation


def _blobs(centers, classes, per_class, noise_std, rng):
    labels = np.repeat(np.asarray(classes, dtype=np.int64), per_class)
    noise = rng.standard_normal((labels.shape[0], centers.shape[1]))
    return centers[labels] + noise_std * noise, labels


def make_synthetic(config: SynthConfig) -> Dataset:
    source_rng, target_rng = (
        np.random.default_rng(s) for s in np.random.SeedSequence(config.seed).spawn(2)
    )
    centers = class_centers(config)
    source_x, source_y = _blobs(
        centers, range(config.num_source_classes), config.samples_per_class_source, config.noise_std, source_rng
    )
    target_classes = tuple(range(config.num_target_classes))
    target_x, target_y = _blobs(
        centers, target_classes, config.samples_per_class_target, config.noise_std, target_rng
    )
    target_x = rigid_shift(target_x, config.shift_angle, config.translation)
    return Dataset(source_x, source_y, target_x, target_y, config.num_source_classes, target_classes)


def subset_target_classes(dataset: Dataset, k: int) -> Dataset:
    """Keep only target samples of the ``k`` smallest target class indices."""
    if not 1 <= k <= len(dataset.target_class_set):
        raise ParameterError(f"k must lie in [1, {len(dataset.target_class_set)}], got {k}")
    if not dataset.has_target_labels:
        raise ParameterError("subsetting target classes needs target labels")
    kept = dataset.target_class_set[:k]
    mask = np.isin(dataset.target_y_eval, kept)
    return Dataset(
        dataset.source_x,
        dataset.source_y,
        dataset.target_x[mask],
        dataset.target_y_eval[mask],
        dataset.num_source_classes,
        kept,
    )


@dataclass(frozen=True)
class CsvSchema:
    """Optional declarations for CSV ingestion.

    ``target_classes`` is used when the target file carries no labels.
    """

    target_classes: Sequence[int] = field(default_factory=tuple)


def _write_samples(path, x, y, num_classes) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        fh.write(f"dim={x.shape[1]},classes={num_classes}\n")
        for row, label in zip(x, y):
            writer.writerow([format(v, ".17g") for v in row] + [int(label)])


def save_csv(dataset: Dataset, source_path, target_path) -> None:
    _write_samples(source_path, dataset.source_x, dataset.source_y, dataset.num_source_classes)
    ty = dataset.target_y_eval
    if ty is None:
        ty = np.full(dataset.target_x.shape[0], UNKNOWN_LABEL)
    _write_samples(target_path, dataset.target_x, ty, dataset.num_source_classes)


def _read_samples(path, allow_unknown: bool):
    with open(path, newline="") as fh:
        lines = fh.read().split("\n")
    header = dict()
    try:
        for part in lines[0].split(","):
            key, value = part.split("=")
            header[key.strip()] = int(value)
        dim, classes = header["dim"], header["classes"]
    except (ValueError, KeyError):
        raise DataFormatError(path, 1, "header must read 'dim=<d>,classes=<k>'") from None
    xs, ys = [], []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        fields = line.split(",")
        if len(fields) != dim + 1:
            raise DataFormatError(path, lineno, f"expected {dim + 1} fields, got {len(fields)}")
        try:
            values = [float(v) for v in fields[:-1]]
            label = int(fields[-1])
        except ValueError as exc:
            raise DataFormatError(path, lineno, str(exc)) from None
        if not all(math.isfinite(v) for v in values):
            raise DataFormatError(path, lineno, "non-finite feature value")
        if label >= classes or (label < 0 and not (allow_unknown and label == UNKNOWN_LABEL)):
            raise DataFormatError(path, lineno, f"label {label} outside [0, {classes})")
        xs.append(values)
        ys.append(label)
    if not xs:
        raise DataFormatError(path, len(lines), "no samples")
    return np.array(xs, dtype=np.float64), np.array(ys, dtype=np.int64), dim, classes


def load_csv(source_path, target_path, schema: Optional[CsvSchema] = None) -> Dataset:
    schema = schema or CsvSchema()
    sx, sy, sdim, sclasses = _read_samples(source_path, allow_unknown=False)
    tx, ty, tdim, tclasses = _read_samples(target_path, allow_unknown=True)
    if sdim != tdim:
        raise DimensionError(f"source dim {sdim} differs from target dim {tdim}")
    if sclasses != tclasses:
        raise DataFormatError(target_path, 1, f"classes={tclasses} differs from source classes={sclasses}")
    known = ty[ty != UNKNOWN_LABEL]
    if schema.target_classes:
        target_classes = tuple(schema.target_classes)
    elif known.size:
        target_classes = tuple(int(c) for c in np.unique(known))
    else:
        target_classes = tuple(range(sclasses))
    eval_labels = ty if known.size else None
    return Dataset(sx, sy, tx, eval_labels, sclasses, target_classes)
