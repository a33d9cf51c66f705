"""Small softmax classifier: parameters, SGD training, per-class errors."""
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from . import kernels
from .exceptions import ConfigurationError, InputError
from .rng import stream


@dataclass(frozen=True)
class Arch:
    input_dim: int
    num_classes: int
    hidden_dims: Tuple[int, ...] = ()
    activation: str = "tanh"

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        if self.input_dim < 1 or self.num_classes < 1 or any(h < 1 for h in self.hidden_dims):
            raise ConfigurationError(f"architecture dimensions must be positive: {self}")
        if len(self.hidden_dims) > 1:
            raise ConfigurationError("at most one hidden layer is supported")
        if self.activation != "tanh":
            raise ConfigurationError(f"unsupported activation {self.activation!r}")

    @property
    def hidden(self):
        return self.hidden_dims[0] if self.hidden_dims else 0

    @property
    def num_params(self):
        d, c, h = self.input_dim, self.num_classes, self.hidden
        if h == 0:
            return d * c + c
        return d * h + h + h * c + c

    def layer_shapes(self):
        """``(fan_in, size)`` of each parameter block, in storage order."""
        d, c, h = self.input_dim, self.num_classes, self.hidden
        if h == 0:
            return [(d, d * c), (d, c)]
        return [(d, d * h), (d, h), (h, h * c), (h, c)]


def _frozen(arr):
    arr = np.array(arr, dtype=np.float64, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Model:
    """Flat parameter vector plus its architecture. Immutable."""

    params: np.ndarray
    arch: Arch

    def __post_init__(self):
        params = _frozen(np.ravel(self.params))
        if params.shape[0] != self.arch.num_params:
            raise InputError(
                f"expected {self.arch.num_params} parameters for {self.arch}, got {params.shape[0]}"
            )
        if not np.all(np.isfinite(params)):
            raise InputError("model parameters must be finite")
        object.__setattr__(self, "params", params)

    def _check(self, other):
        if not isinstance(other, Model) or other.arch != self.arch:
            raise InputError("model arithmetic needs two models of the same architecture")

    def __add__(self, other):
        self._check(other)
        return Model(self.params + other.params, self.arch)

    def __sub__(self, other):
        self._check(other)
        return Model(self.params - other.params, self.arch)

    def scale(self, factor):
        if factor == 1:
            return self
        return Model(self.params * float(factor), self.arch)

    def same_as(self, other):
        return isinstance(other, Model) and other.arch == self.arch and np.array_equal(
            self.params, other.params
        )


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    features: np.ndarray
    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        features = np.array(self.features, dtype=np.float64, copy=True)
        labels = np.array(self.labels, dtype=np.int64, copy=True).ravel()
        if features.ndim != 2:
            if features.size == 0:
                features = features.reshape(0, features.shape[-1] if features.ndim else 0)
            else:
                raise InputError("features must be an N x d matrix")
        if features.shape[0] != labels.shape[0]:
            raise InputError("features and labels disagree on the number of samples")
        if labels.size and (labels.min() < 0 or labels.max() >= self.num_classes):
            raise InputError(f"labels must lie in [0, {self.num_classes})")
        features.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)

    def __len__(self):
        return int(self.labels.shape[0])

    @property
    def dim(self):
        return int(self.features.shape[1])

    def subset(self, indices):
        indices = np.asarray(indices, dtype=np.int64)
        return LabeledDataset(self.features[indices], self.labels[indices], self.num_classes)

    def with_labels(self, labels):
        return LabeledDataset(self.features, labels, self.num_classes)

    def class_counts(self):
        return np.bincount(self.labels, minlength=self.num_classes)

    @staticmethod
    def concat(parts, num_classes=None, dim=None):
        parts = list(parts)
        if not parts:
            if num_classes is None or dim is None:
                raise InputError("cannot infer shape of an empty concatenation")
            return LabeledDataset(np.empty((0, dim)), np.empty(0, dtype=np.int64), num_classes)
        return LabeledDataset(
            np.concatenate([p.features for p in parts]),
            np.concatenate([p.labels for p in parts]),
            parts[0].num_classes,
        )


@dataclass(frozen=True)
class TrainParams:
    epochs: int = 2
    learning_rate: float = 0.1
    batch_size: int = 16
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigurationError("epochs and batch_size must be >= 1")
        if self.learning_rate < 0:
            raise ConfigurationError("learning_rate must be non-negative")


@dataclass(frozen=True, eq=False)
class ErrorProfile:
    """Per-class error fractions of one model on one dataset.

    ``source_errors[y]``: share of the dataset with label ``y`` that is
    misclassified. ``target_errors[y]``: share of the dataset wrongly
    predicted as ``y``. Both sum to ``overall_error``.
    """

    source_errors: np.ndarray
    target_errors: np.ndarray
    overall_error: float


def init_model(arch, seed):
    """Uniform init in ``[-0.5, 0.5] / sqrt(fan_in)``, one named stream per layer block."""
    blocks = []
    for idx, (fan_in, size) in enumerate(arch.layer_shapes()):
        rng = stream(seed, "init", idx)
        blocks.append(rng.uniform(-0.5, 0.5, size=size) / np.sqrt(fan_in))
    return Model(np.concatenate(blocks), arch)


def _check_features(model, features):
    if features.shape[-1] != model.arch.input_dim:
        raise InputError(
            f"feature dimension {features.shape[-1]} != model input_dim {model.arch.input_dim}"
        )


def _check_dataset(model, dataset, allow_empty=False):
    if not allow_empty and len(dataset) == 0:
        raise InputError("dataset is empty")
    if dataset.num_classes != model.arch.num_classes:
        raise InputError("model and dataset disagree on the number of classes")
    _check_features(model, dataset.features)


def logits(model, features):
    features = np.atleast_2d(np.asarray(features, dtype=np.float64))
    _check_features(model, features)
    return kernels.logits_numpy(model.params, features, model.arch.hidden, model.arch.num_classes)


def predict_batch(model, features):
    features = np.ascontiguousarray(np.atleast_2d(np.asarray(features, dtype=np.float64)))
    _check_features(model, features)
    return kernels.predict_labels(model.params, features, model.arch.hidden, model.arch.num_classes)


def predict(model, features_row):
    row = np.asarray(features_row, dtype=np.float64)
    if row.ndim != 1:
        raise InputError("predict takes a single feature row")
    return int(predict_batch(model, row[None, :])[0])


def loss_and_grad(model, dataset):
    """Mean cross-entropy and its gradient w.r.t. the flat parameters."""
    _check_dataset(model, dataset)
    X, y = dataset.features, dataset.labels
    arch = model.arch
    n = len(dataset)
    views = kernels._unpack(model.params, arch.input_dim, arch.hidden, arch.num_classes)
    if arch.hidden == 0:
        w, b = views
        z = X @ w + b
    else:
        w1, b1, w2, b2 = views
        act = np.tanh(X @ w1 + b1)
        z = act @ w2 + b2
    z = z - z.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(z).sum(axis=1))
    loss = float(np.mean(logsum - z[np.arange(n), y]))
    p = np.exp(z - logsum[:, None])
    p[np.arange(n), y] -= 1.0
    p /= n
    if arch.hidden == 0:
        grad = np.concatenate([(X.T @ p).ravel(), p.sum(axis=0)])
    else:
        gh = (p @ w2.T) * (1.0 - act * act)
        grad = np.concatenate(
            [(X.T @ gh).ravel(), gh.sum(axis=0), (act.T @ p).ravel(), p.sum(axis=0)]
        )
    return loss, grad


def train_local(model, dataset, train_params):
    """Minibatch SGD from ``model`` on ``dataset``; returns a new Model."""
    _check_dataset(model, dataset)
    params = np.array(model.params, dtype=np.float64, copy=True)
    X = np.ascontiguousarray(dataset.features)
    y = np.ascontiguousarray(dataset.labels)
    rng = stream(train_params.seed, "shuffle")
    for _ in range(train_params.epochs):
        order = rng.permutation(len(dataset)).astype(np.int64)
        kernels.sgd_epoch(
            params, X, y, order, train_params.batch_size, train_params.learning_rate,
            model.arch.hidden, model.arch.num_classes,
        )
    return Model(params, model.arch)


def empirical_accuracy(model, dataset):
    _check_dataset(model, dataset)
    pred = predict_batch(model, dataset.features)
    return int(np.count_nonzero(pred == dataset.labels)) / len(dataset)


def confusion_matrix(model, dataset):
    _check_dataset(model, dataset)
    pred = predict_batch(model, dataset.features)
    return kernels.confusion_counts(
        np.ascontiguousarray(dataset.labels), pred, model.arch.num_classes
    )


def per_class_errors(model, dataset):
    counts = confusion_matrix(model, dataset)
    n = len(dataset)
    wrong = counts.copy()
    np.fill_diagonal(wrong, 0)
    return ErrorProfile(
        source_errors=wrong.sum(axis=1) / n,
        target_errors=wrong.sum(axis=0) / n,
        overall_error=int(wrong.sum()) / n,
    )
