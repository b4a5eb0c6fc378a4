"""Feature extractor, source classifier and domain discriminator as small MLPs.

Parameters live in :class:`NetworkParams` as plain numpy arrays.  To run a
forward pass, :func:`bind` registers them on a tape; the forward functions
then take the resulting :class:`BoundParams` and return node ids.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from . import autodiff as ad
from .errors import DataFormatError, DimensionError, ParameterError

Layer = tuple[np.ndarray, np.ndarray]


@dataclass(frozen=True)
class ModelConfig:
    input_dim: int = 3
    feature_dims: tuple[int, ...] = (16, 8)
    num_source_classes: int = 8
    discriminator_dims: tuple[int, ...] = (8,)
    init_scale: float = 1.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "feature_dims", tuple(self.feature_dims))
        object.__setattr__(self, "discriminator_dims", tuple(self.discriminator_dims))
        if self.input_dim < 1 or not self.feature_dims:
            raise ParameterError("input_dim and feature_dims must be positive")
        if any(d < 1 for d in self.feature_dims + self.discriminator_dims):
            raise ParameterError("all layer widths must be positive")
        if self.num_source_classes < 2:
            raise ParameterError("num_source_classes must be at least 2")
        if self.init_scale < 0:
            raise ParameterError("init_scale must be nonnegative")

    @property
    def feature_dim(self) -> int:
        return self.feature_dims[-1]


@dataclass
class NetworkParams:
    theta_f: list[Layer]
    theta_y: Layer
    theta_d: list[Layer] = field(default_factory=list)

    def named(self) -> Iterator[tuple[str, np.ndarray]]:
        """Yield ``(name, matrix)`` pairs in a fixed order."""
        for group, layers in (("f", self.theta_f), ("y", [self.theta_y]), ("d", self.theta_d)):
            for i, (w, b) in enumerate(layers):
                yield f"{group}{i}.weight", w
                yield f"{group}{i}.bias", b

    def map(self, fn) -> "NetworkParams":
        """Apply ``fn(group, array)`` to every matrix, returning new params."""
        return NetworkParams(
            theta_f=[(fn("f", w), fn("f", b)) for w, b in self.theta_f],
            theta_y=(fn("y", self.theta_y[0]), fn("y", self.theta_y[1])),
            theta_d=[(fn("d", w), fn("d", b)) for w, b in self.theta_d],
        )

    def copy(self) -> "NetworkParams":
        return self.map(lambda _, a: a.copy())

    def equals(self, other: "NetworkParams") -> bool:
        mine, theirs = list(self.named()), list(other.named())
        return len(mine) == len(theirs) and all(
            n1 == n2 and a.shape == b.shape and np.array_equal(a, b)
            for (n1, a), (n2, b) in zip(mine, theirs)
        )


@dataclass(frozen=True)
class BoundParams:
    """Node ids of a :class:`NetworkParams` registered on one tape."""

    theta_f: list[tuple[int, int]]
    theta_y: tuple[int, int]
    theta_d: list[tuple[int, int]]


def _linear(fan_in: int, fan_out: int, scale: float, rng) -> Layer:
    bound = scale / math.sqrt(fan_in)
    w = rng.uniform(-bound, bound, size=(fan_in, fan_out)) if bound > 0 else np.zeros((fan_in, fan_out))
    return w, np.zeros((1, fan_out))


def init_params(config: ModelConfig) -> NetworkParams:
    """Scaled-uniform weights, zero biases, reproducible from ``config.seed``."""
    rng = np.random.default_rng(config.seed)
    dims = (config.input_dim,) + config.feature_dims
    theta_f = [_linear(a, b, config.init_scale, rng) for a, b in zip(dims, dims[1:])]
    theta_y = _linear(config.feature_dim, config.num_source_classes, config.init_scale, rng)
    ddims = (config.feature_dim,) + config.discriminator_dims + (2,)
    theta_d = [_linear(a, b, config.init_scale, rng) for a, b in zip(ddims, ddims[1:])]
    return NetworkParams(theta_f, theta_y, theta_d)


def bind(tape: ad.Tape, params: NetworkParams) -> BoundParams:
    return BoundParams(
        theta_f=[(tape.leaf(w), tape.leaf(b)) for w, b in params.theta_f],
        theta_y=(tape.leaf(params.theta_y[0]), tape.leaf(params.theta_y[1])),
        theta_d=[(tape.leaf(w), tape.leaf(b)) for w, b in params.theta_d],
    )


def _mlp(tape: ad.Tape, layers, h: int) -> int:
    for i, (w, b) in enumerate(layers):
        h = ad.add_bias(tape, ad.matmul(tape, h, w), b)
        if i < len(layers) - 1:
            h = ad.relu(tape, h)
    return h


def feature_forward(tape: ad.Tape, params: BoundParams, x) -> int:
    """Features ``f = G_f(x)``; ``x`` is a matrix or an existing node id."""
    if not isinstance(x, (int, np.integer)):
        x = tape.leaf(x)
    expected = tape.shape(params.theta_f[0][0])[0]
    if tape.shape(x)[1] != expected:
        raise DimensionError(f"feature_forward: input has {tape.shape(x)[1]} columns, expected {expected}")
    return _mlp(tape, params.theta_f, x)


def classify_forward(tape: ad.Tape, params: BoundParams, features: int) -> int:
    """Softmax class probabilities over the source label space."""
    w, b = params.theta_y
    if tape.shape(features)[1] != tape.shape(w)[0]:
        raise DimensionError(
            f"classify_forward: features {tape.shape(features)} vs weight {tape.shape(w)}"
        )
    return ad.softmax_rows(tape, _mlp(tape, [params.theta_y], features))


def discriminate_forward(tape: ad.Tape, params: BoundParams, features: int, grl_coeff: float) -> int:
    """Domain probabilities (column 0 = source, column 1 = target) behind a GRL."""
    reversed_ = ad.grad_reversal(tape, features, grl_coeff)
    return ad.softmax_rows(tape, _mlp(tape, params.theta_d, reversed_))


def predict_proba(params: NetworkParams, x) -> np.ndarray:
    """Class probabilities for a batch, without keeping a tape around."""
    tape = ad.Tape()
    bound = bind(tape, params)
    return tape.value(classify_forward(tape, bound, feature_forward(tape, bound, x))).copy()


def predict_labels(params: NetworkParams, x) -> np.ndarray:
    """Arg-max class per row; ties go to the smaller class index."""
    return np.argmax(predict_proba(params, x), axis=1)


def save_params(params: NetworkParams, path) -> None:
    """Write one CSV line per matrix: ``name,rows,cols,v0,v1,...`` (row-major)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for name, m in params.named():
            writer.writerow([name, m.shape[0], m.shape[1]] + [format(v, ".17g") for v in m.ravel()])


def load_params(path) -> NetworkParams:
    groups: dict[str, dict[int, dict[str, np.ndarray]]] = {"f": {}, "y": {}, "d": {}}
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row:
                continue
            try:
                name = row[0]
                rows, cols = int(row[1]), int(row[2])
                values = [float(v) for v in row[3:]]
                group, rest = name[0], name[1:]
                index, kind = rest.split(".")
                index = int(index)
            except (ValueError, IndexError) as exc:
                raise DataFormatError(path, lineno, f"malformed parameter row ({exc})") from None
            if group not in groups or kind not in ("weight", "bias"):
                raise DataFormatError(path, lineno, f"unknown parameter name {name!r}")
            if len(values) != rows * cols:
                raise DataFormatError(path, lineno, f"{name}: expected {rows * cols} values, got {len(values)}")
            groups[group].setdefault(index, {})[kind] = np.array(values, dtype=np.float64).reshape(rows, cols)

    def layers(group):
        out = []
        for i in range(len(groups[group])):
            if i not in groups[group] or set(groups[group][i]) != {"weight", "bias"}:
                raise DataFormatError(path, 0, f"incomplete layer {group}{i}")
            out.append((groups[group][i]["weight"], groups[group][i]["bias"]))
        return out

    ys = layers("y")
    if len(ys) != 1:
        raise DataFormatError(path, 0, "expected exactly one classifier layer")
    return NetworkParams(layers("f"), ys[0], layers("d"))

