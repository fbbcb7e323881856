"""Fully connected softmax classifier over flat parameter vectors.

Every model in the simulator, whatever tier it lives on, is a
:class:`ParameterVector`: one contiguous float64 array tagged with the
fingerprint of the :class:`ModelSpec` it belongs to. Layers are packed in
order as ``W`` (``fan_in x fan_out``, row-major) followed by ``b``.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from .exceptions import InputError, TrainingDivergence

LOG_CLAMP = 1e-12


@dataclass(frozen=True)
class ModelSpec:
    """Layer sizes of a ReLU MLP with a softmax output."""

    input_dim: int
    hidden_dims: tuple[int, ...] = (64,)
    num_classes: int = 10

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        if int(self.input_dim) < 1:
            raise InputError(f"input_dim must be positive, got {self.input_dim}")
        if any(h < 1 for h in self.hidden_dims):
            raise InputError(f"hidden layer sizes must be positive, got {self.hidden_dims}")
        if int(self.num_classes) < 2:
            raise InputError(f"num_classes must be >= 2, got {self.num_classes}")

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return (self.input_dim, *self.hidden_dims, self.num_classes)

    @property
    def n_params(self) -> int:
        sizes = self.layer_sizes
        return sum(a * b + b for a, b in zip(sizes[:-1], sizes[1:]))

    @property
    def fingerprint(self) -> str:
        key = "mlp-relu-softmax:" + "-".join(str(s) for s in self.layer_sizes)
        return hashlib.sha256(key.encode()).hexdigest()[:16]


@dataclass(frozen=True, eq=False)
class ParameterVector:
    """Immutable flat weight vector bound to one ``ModelSpec``."""

    values: np.ndarray
    spec_fingerprint: str

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64, copy=True).ravel()
        if not np.all(np.isfinite(v)):
            raise InputError("parameter vector contains non-finite entries")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @classmethod
    def for_spec(cls, spec: ModelSpec, values) -> "ParameterVector":
        values = np.asarray(values, dtype=np.float64).ravel()
        if values.size != spec.n_params:
            raise InputError(f"expected {spec.n_params} parameters, got {values.size}")
        return cls(values, spec.fingerprint)

    def __len__(self) -> int:
        return self.values.size

    def identical(self, other: "ParameterVector") -> bool:
        """Bit-for-bit equality, including the fingerprint."""
        return (
            self.spec_fingerprint == other.spec_fingerprint
            and self.values.tobytes() == other.values.tobytes()
        )


class LabeledExample(NamedTuple):
    features: np.ndarray
    label: int


@dataclass(frozen=True, eq=False)
class Dataset:
    """Ordered examples. ``ids`` identify examples across slices of one pool."""

    X: np.ndarray
    y: np.ndarray
    ids: np.ndarray = None
    provenance: str = "synthetic"

    def __post_init__(self):
        X = np.ascontiguousarray(self.X, dtype=np.float64)
        y = np.ascontiguousarray(self.y, dtype=np.int64).ravel()
        if X.ndim != 2 or X.shape[0] != y.shape[0]:
            raise InputError(f"features {X.shape} and labels {y.shape} disagree")
        ids = np.arange(len(y), dtype=np.int64) if self.ids is None else np.asarray(self.ids, dtype=np.int64)
        if ids.shape != y.shape:
            raise InputError("ids must have one entry per example")
        for arr in (X, y, ids):
            arr.flags.writeable = False
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "ids", ids)

    def __len__(self) -> int:
        return self.y.shape[0]

    def __iter__(self) -> Iterator[LabeledExample]:
        for x, label in zip(self.X, self.y):
            yield LabeledExample(x, int(label))

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def subset(self, indices) -> "Dataset":
        indices = np.asarray(indices, dtype=np.int64)
        return Dataset(self.X[indices], self.y[indices], self.ids[indices], "slice")

    @classmethod
    def concat(cls, parts: Sequence["Dataset"]) -> "Dataset":
        if not parts:
            raise InputError("cannot concatenate zero datasets")
        return cls(
            np.concatenate([p.X for p in parts]),
            np.concatenate([p.y for p in parts]),
            np.concatenate([p.ids for p in parts]),
            "slice",
        )

    def label_counts(self, num_classes: int) -> np.ndarray:
        return np.bincount(self.y, minlength=num_classes)


def _layers(spec: ModelSpec, flat: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    sizes = spec.layer_sizes
    out = []
    pos = 0
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        W = flat[pos:pos + fan_in * fan_out].reshape(fan_in, fan_out)
        pos += fan_in * fan_out
        b = flat[pos:pos + fan_out]
        pos += fan_out
        out.append((W, b))
    return out


def _check_params(spec: ModelSpec, params: ParameterVector):
    if params.spec_fingerprint != spec.fingerprint or len(params) != spec.n_params:
        raise InputError("parameter vector does not belong to this model spec")


def _check_features(spec: ModelSpec, X: np.ndarray):
    if X.shape[-1] != spec.input_dim:
        raise InputError(f"expected {spec.input_dim} features, got {X.shape[-1]}")


def _check_labels(spec: ModelSpec, y: np.ndarray):
    if y.size and (y.min() < 0 or y.max() >= spec.num_classes):
        raise InputError(f"labels must lie in [0, {spec.num_classes})")


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    np.exp(z, out=z)
    z /= z.sum(axis=1, keepdims=True)
    return z


def _logits(spec: ModelSpec, flat: np.ndarray, X: np.ndarray) -> np.ndarray:
    layers = _layers(spec, flat)
    a = X
    for W, b in layers[:-1]:
        a = np.maximum(a @ W + b, 0.0)
    W, b = layers[-1]
    return a @ W + b


def _loss_and_grad(spec: ModelSpec, flat: np.ndarray, X: np.ndarray, y: np.ndarray):
    layers = _layers(spec, flat)
    acts = [X]
    for W, b in layers[:-1]:
        acts.append(np.maximum(acts[-1] @ W + b, 0.0))
    W, b = layers[-1]
    probs = _softmax(acts[-1] @ W + b)
    n = X.shape[0]
    rows = np.arange(n)
    loss = -np.mean(np.log(np.maximum(probs[rows, y], LOG_CLAMP)))

    grad = np.empty_like(flat)
    grad_layers = _layers(spec, grad)
    delta = probs
    delta[rows, y] -= 1.0
    delta /= n
    for i in range(len(layers) - 1, -1, -1):
        gW, gb = grad_layers[i]
        np.matmul(acts[i].T, delta, out=gW)
        np.sum(delta, axis=0, out=gb)
        if i:
            delta = (delta @ layers[i][0].T) * (acts[i] > 0)
    return loss, grad


def init_params(spec: ModelSpec, seed: int) -> ParameterVector:
    """Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero."""
    rng = np.random.default_rng(seed)
    flat = np.zeros(spec.n_params)
    for W, _ in _layers(spec, flat):
        bound = 1.0 / np.sqrt(W.shape[0])
        W[...] = rng.uniform(-bound, bound, size=W.shape)
    return ParameterVector(flat, spec.fingerprint)


def forward(spec: ModelSpec, params: ParameterVector, features) -> np.ndarray:
    """Class probabilities for one feature vector (1-D) or a batch (2-D)."""
    _check_params(spec, params)
    X = np.asarray(features, dtype=np.float64)
    _check_features(spec, X)
    single = X.ndim == 1
    probs = _softmax(_logits(spec, params.values, np.atleast_2d(X)))
    return probs[0] if single else probs


def loss(spec: ModelSpec, params: ParameterVector, batch: Dataset) -> float:
    """Mean cross-entropy, with probabilities clamped below at 1e-12."""
    _check_params(spec, params)
    _check_features(spec, batch.X)
    _check_labels(spec, batch.y)
    if len(batch) == 0:
        raise InputError("loss of an empty batch is undefined")
    probs = _softmax(_logits(spec, params.values, batch.X))
    p_true = probs[np.arange(len(batch)), batch.y]
    return float(-np.mean(np.log(np.maximum(p_true, LOG_CLAMP))))


def gradient(spec: ModelSpec, params: ParameterVector, batch: Dataset) -> ParameterVector:
    """Gradient of :func:`loss` w.r.t. the parameters (the clamp is ignored)."""
    _check_params(spec, params)
    _check_features(spec, batch.X)
    _check_labels(spec, batch.y)
    if len(batch) == 0:
        raise InputError("gradient of an empty batch is undefined")
    _, grad = _loss_and_grad(spec, params.values, batch.X, batch.y)
    return ParameterVector(grad, spec.fingerprint)


def train_local(
    spec: ModelSpec,
    params: ParameterVector,
    data: Dataset,
    epochs: int,
    batch_size: int,
    lr: float,
    seed: int,
) -> ParameterVector:
    """Plain mini-batch SGD; each epoch reshuffles with an rng keyed on (seed, epoch).

    The final partial batch of an epoch is used as-is.
    """
    _check_params(spec, params)
    _check_features(spec, data.X)
    _check_labels(spec, data.y)
    if len(data) == 0:
        raise InputError("cannot train on an empty dataset")
    if epochs < 1 or batch_size < 1:
        raise InputError("epochs and batch_size must be >= 1")

    w = params.values.copy()
    X, y = data.X, data.y
    n = len(data)
    for epoch in range(epochs):
        order = np.random.default_rng([seed, epoch]).permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            with np.errstate(over="ignore", invalid="ignore"):
                batch_loss, g = _loss_and_grad(spec, w, X[idx], y[idx])
                if not np.isfinite(batch_loss) or not np.all(np.isfinite(g)):
                    raise TrainingDivergence(
                        f"non-finite loss at epoch {epoch}, step {start // batch_size} (lr={lr}); "
                        "the learning rate is probably too large"
                    )
                w -= lr * g
    if not np.all(np.isfinite(w)):
        raise TrainingDivergence(f"weights overflowed during training (lr={lr})")
    return ParameterVector(w, spec.fingerprint)


def predict(spec: ModelSpec, params: ParameterVector, X) -> np.ndarray:
    """Argmax class per row; ties go to the lowest class index."""
    _check_params(spec, params)
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    _check_features(spec, X)
    return np.argmax(_logits(spec, params.values, X), axis=1)


def evaluate_accuracy(spec: ModelSpec, params: ParameterVector, testset: Dataset) -> float:
    if len(testset) == 0:
        raise InputError("accuracy on an empty test set is undefined")
    return float(np.mean(predict(spec, params, testset.X) == testset.y))
