"""Define-by-run reverse-mode automatic differentiation over dense matrices.

Every value is a 2-D ``numpy.float64`` array (a "matrix").  Operations are
recorded on a :class:`Tape` as they run; :func:`backward` walks the tape in
reverse id order, which is a valid reverse topological order because a node
can only reference inputs that already exist.

Example::

    tape = Tape()
    w = tape.leaf([[1.0, 2.0], [3.0, 4.0]])
    x = tape.leaf([[1.0, 1.0]])
    loss = sum_all(tape, matmul(tape, x, w))
    grads = backward(tape, loss)
    grads[w]  # d loss / d w
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DimensionError, NumericalError, ParameterError

LOG_FLOOR = 1e-12

BackwardRule = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


def as_matrix(value) -> np.ndarray:
    """Return ``value`` as a finite 2-D float64 array (copying when needed)."""
    m = np.array(value, dtype=np.float64)
    if m.ndim == 0:
        m = m.reshape(1, 1)
    elif m.ndim == 1:
        m = m.reshape(1, -1)
    if m.ndim != 2 or m.shape[0] == 0 or m.shape[1] == 0:
        raise DimensionError(f"expected a non-empty 2-D matrix, got shape {m.shape}")
    if not np.isfinite(m).all():
        raise NumericalError("matrix contains NaN or Inf")
    return m


@dataclass
class Node:
    op: str
    inputs: tuple[int, ...]
    value: np.ndarray
    rule: Optional[BackwardRule] = None


class Tape:
    """Record of operations for a single forward/backward pass.

    A tape is single-threaded and meant to be rebuilt for every minibatch.
    """

    def __init__(self):
        self.nodes: list[Node] = []

    def __len__(self):
        return len(self.nodes)

    def leaf(self, value) -> int:
        """Register an input or parameter matrix and return its node id."""
        return self._push("leaf", (), as_matrix(value), None)

    def value(self, node: int) -> np.ndarray:
        return self.nodes[node].value

    def shape(self, node: int) -> tuple[int, int]:
        return self.nodes[node].value.shape

    def _push(self, op, inputs, value, rule) -> int:
        if not np.isfinite(value).all():
            raise NumericalError(f"{op} produced a non-finite value")
        self.nodes.append(Node(op, tuple(inputs), value, rule))
        return len(self.nodes) - 1


def matmul(tape: Tape, a: int, b: int) -> int:
    va, vb = tape.value(a), tape.value(b)
    if va.shape[1] != vb.shape[0]:
        raise DimensionError(f"matmul: cannot multiply {va.shape} by {vb.shape}")

    def rule(g):
        return g @ vb.T, va.T @ g

    return tape._push("matmul", (a, b), va @ vb, rule)


def add_bias(tape: Tape, x: int, b: int) -> int:
    vx, vb = tape.value(x), tape.value(b)
    if vb.shape != (1, vx.shape[1]):
        raise DimensionError(
            f"add_bias: bias must be (1, {vx.shape[1]}), got {vb.shape}"
        )

    def rule(g):
        return g, g.sum(axis=0, keepdims=True)

    return tape._push("add_bias", (x, b), vx + vb, rule)


def relu(tape: Tape, x: int) -> int:
    vx = tape.value(x)
    mask = vx > 0.0

    def rule(g):
        return (g * mask,)

    return tape._push("relu", (x,), np.where(mask, vx, 0.0), rule)


def softmax_rows(tape: Tape, x: int) -> int:
    vx = tape.value(x)
    e = np.exp(vx - vx.max(axis=1, keepdims=True))
    s = e / e.sum(axis=1, keepdims=True)

    def rule(g):
        # J^T g for J = diag(s) - s s^T, row by row
        return (s * (g - (g * s).sum(axis=1, keepdims=True)),)

    return tape._push("softmax_rows", (x,), s, rule)


def cross_entropy(tape: Tape, probs: int, labels, sample_weights=None) -> int:
    """Mean of ``-w_i * log p[i, y_i]`` over rows, divided by the raw row count.

    Probabilities are clamped at ``LOG_FLOOR`` before the log; the clamped
    entries receive zero gradient.
    """
    p = tape.value(probs)
    n, k = p.shape
    y = np.asarray(labels, dtype=np.int64).reshape(-1)
    if y.shape[0] != n:
        raise DimensionError(f"cross_entropy: {y.shape[0]} labels for {n} rows")
    if np.any(y < 0) or np.any(y >= k):
        raise IndexError(f"cross_entropy: label out of range [0, {k})")
    if sample_weights is None:
        w = np.ones(n)
    else:
        w = np.asarray(sample_weights, dtype=np.float64).reshape(-1)
        if w.shape[0] != n:
            raise DimensionError(f"cross_entropy: {w.shape[0]} weights for {n} rows")
    rows = np.arange(n)
    picked = p[rows, y]
    clamped = np.maximum(picked, LOG_FLOOR)
    loss = np.sum(w * -np.log(clamped)) / n

    def rule(g):
        grad = np.zeros_like(p)
        live = picked > LOG_FLOOR
        grad[rows[live], y[live]] = -w[live] / (n * picked[live])
        return (grad * g[0, 0],)

    return tape._push("cross_entropy", (probs,), np.array([[loss]]), rule)


def grad_reversal(tape: Tape, x: int, coeff: float) -> int:
    """Identity forward; multiplies the upstream adjoint by ``-coeff``."""
    if not coeff >= 0.0:
        raise ParameterError(f"grad_reversal: coeff must be >= 0, got {coeff}")
    factor = -float(coeff)

    def rule(g):
        return (factor * g,)

    return tape._push("grad_reversal", (x,), tape.value(x), rule)


def add(tape: Tape, *xs: int) -> int:
    """Elementwise sum of same-shaped nodes."""
    shape = tape.shape(xs[0])
    for x in xs[1:]:
        if tape.shape(x) != shape:
            raise DimensionError(f"add: shape {tape.shape(x)} does not match {shape}")
    total = tape.value(xs[0]).copy()
    for x in xs[1:]:
        total = total + tape.value(x)

    def rule(g):
        return tuple(g for _ in xs)

    return tape._push("add", xs, total, rule)


def scale(tape: Tape, x: int, factor: float) -> int:
    factor = float(factor)

    def rule(g):
        return (factor * g,)

    return tape._push("scale", (x,), factor * tape.value(x), rule)


def sum_all(tape: Tape, x: int) -> int:
    vx = tape.value(x)

    def rule(g):
        return (np.full(vx.shape, g[0, 0]),)

    return tape._push("sum_all", (x,), np.array([[vx.sum()]]), rule)


def backward(tape: Tape, loss: int) -> dict[int, np.ndarray]:
    """Propagate adjoints from the scalar node ``loss`` to every node.

    Returns a map from node id to adjoint.  Nodes that do not feed ``loss``
    get a zero adjoint of their own shape.
    """
    if tape.shape(loss) != (1, 1):
        raise DimensionError(f"backward: loss must be 1x1, got {tape.shape(loss)}")
    adjoints: list[Optional[np.ndarray]] = [None] * len(tape.nodes)
    adjoints[loss] = np.ones((1, 1))
    for i in range(loss, -1, -1):
        g = adjoints[i]
        node = tape.nodes[i]
        if g is None or node.rule is None:
            continue
        for j, gj in zip(node.inputs, node.rule(g)):
            if gj is None:
                continue
            adjoints[j] = gj if adjoints[j] is None else adjoints[j] + gj
    return {
        i: (np.zeros_like(node.value) if adjoints[i] is None else adjoints[i])
        for i, node in enumerate(tape.nodes)
    }
