"""Synthetic blobs, client/server splits, Dirichlet non-IID partitioning."""
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigurationError, InputError
from .ml_core import LabeledDataset
from .rng import stream


@dataclass(frozen=True)
class PartitionConfig:
    num_clients: int = 100
    dirichlet_alpha: float = 0.9
    seed: int = 0

    def __post_init__(self):
        if self.num_clients < 1:
            raise ConfigurationError("num_clients must be >= 1")
        if not self.dirichlet_alpha > 0:
            raise ConfigurationError("dirichlet_alpha must be > 0")


@dataclass(frozen=True)
class SplitConfig:
    client_share: float = 0.9
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.client_share <= 1:
            raise ConfigurationError("client_share must lie in (0, 1]")


def class_means(num_classes, dim, radius, seed):
    """One mean per class, uniformly on the sphere of the given radius."""
    rng = stream(seed, "means")
    directions = rng.standard_normal((num_classes, dim))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    return radius * directions


def _draw(means, per_class, spread, rng, num_classes):
    dim = means.shape[1]
    labels = np.repeat(np.arange(num_classes), per_class)
    features = means[labels] + spread * rng.standard_normal((labels.size, dim))
    order = rng.permutation(labels.size)
    return LabeledDataset(features[order], labels[order], num_classes)


def make_synthetic(num_classes, dim, samples_per_class, cluster_spread, seed,
                   test_per_class=None, radius=3.0):
    """Gaussian blobs with isotropic std ``cluster_spread`` around per-class means.

    Train and test sets are independent draws around the same means and are
    exactly class-balanced.
    """
    if num_classes < 2:
        raise ConfigurationError("need at least two classes")
    if dim < 1 or samples_per_class < 1:
        raise ConfigurationError("dim and samples_per_class must be positive")
    if not cluster_spread > 0 or not radius > 0:
        raise ConfigurationError("cluster_spread and radius must be > 0")
    test_per_class = samples_per_class if test_per_class is None else test_per_class
    if test_per_class < 1:
        raise ConfigurationError("test_per_class must be positive")
    means = class_means(num_classes, dim, radius, seed)
    train = _draw(means, samples_per_class, cluster_spread, stream(seed, "train"), num_classes)
    test = _draw(means, test_per_class, cluster_spread, stream(seed, "test"), num_classes)
    return train, test


def split_indices(n, split_config):
    # guard against 0.29 * 100 == 28.999999999999996
    cut = math.floor(split_config.client_share * n + 1e-9)
    perm = stream(split_config.seed, "split").permutation(n)
    return np.sort(perm[:cut]), np.sort(perm[cut:])


def split_clients_server(dataset, split_config):
    """Seeded shuffle, then the first ``floor(C * |D|)`` samples go to the clients."""
    if len(dataset) == 0:
        raise InputError("cannot split an empty dataset")
    client_idx, server_idx = split_indices(len(dataset), split_config)
    return dataset.subset(client_idx), dataset.subset(server_idx)


def largest_remainder(proportions, total):
    """Integer counts summing to ``total`` that best follow ``proportions``.

    Ties in the fractional part go to the lower index.
    """
    proportions = np.asarray(proportions, dtype=np.float64)
    raw = proportions * total
    counts = np.floor(raw).astype(np.int64)
    short = int(total - counts.sum())
    if short > 0:
        frac = raw - counts
        # stable sort on -frac keeps lower indices first among equal remainders
        winners = np.argsort(-frac, kind="stable")[:short]
        counts[winners] += 1
    return counts


def dirichlet_proportions(rng, alpha, num_clients):
    draws = rng.gamma(alpha, 1.0, size=num_clients)
    total = draws.sum()
    if not total > 0:
        return np.full(num_clients, 1.0 / num_clients)
    return draws / total


def dirichlet_partition_indices(labels, num_classes, partition_config):
    """Index arrays (one per client) of a per-class Dirichlet split of ``labels``."""
    labels = np.asarray(labels)
    n_clients = partition_config.num_clients
    buckets = [[] for _ in range(n_clients)]
    for y in range(num_classes):
        idx = np.flatnonzero(labels == y)
        if idx.size == 0:
            continue
        rng = stream(partition_config.seed, "dirichlet", y)
        idx = idx[rng.permutation(idx.size)]
        counts = largest_remainder(
            dirichlet_proportions(rng, partition_config.dirichlet_alpha, n_clients), idx.size
        )
        bounds = np.concatenate([[0], np.cumsum(counts)])
        for client in range(n_clients):
            if counts[client]:
                buckets[client].append(idx[bounds[client]:bounds[client + 1]])
    return [
        np.sort(np.concatenate(b)) if b else np.empty(0, dtype=np.int64) for b in buckets
    ]


def dirichlet_partition(dataset, partition_config):
    if len(dataset) == 0:
        raise InputError("cannot partition an empty dataset")
    return [
        dataset.subset(idx)
        for idx in dirichlet_partition_indices(dataset.labels, dataset.num_classes, partition_config)
    ]


def backdoor_mask(dataset, spec):
    """Boolean mask of the samples the backdoor relabels."""
    if spec.mode == "label_flip":
        return dataset.labels == spec.source_class
    mask = dataset.features[:, spec.trigger_coord] > spec.trigger_threshold
    if spec.source_class is not None:
        mask &= dataset.labels == spec.source_class
    return mask


def poison_dataset(dataset, spec):
    """Copy of ``dataset`` with every backdoor sample relabeled to the target class."""
    spec.validate(dataset.num_classes, dataset.dim)
    labels = np.array(dataset.labels, copy=True)
    labels[backdoor_mask(dataset, spec)] = spec.target_class
    return dataset.with_labels(labels)
