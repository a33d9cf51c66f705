import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bafflesim.attack import BackdoorSpec
from bafflesim.data_gen import (
    PartitionConfig, SplitConfig, backdoor_mask, dirichlet_partition,
    dirichlet_partition_indices, largest_remainder, make_synthetic, poison_dataset,
    split_clients_server,
)
from bafflesim.exceptions import ConfigurationError
from bafflesim.ml_core import Arch, LabeledDataset, TrainParams, empirical_accuracy, init_model, train_local


def test_synthetic_shapes_and_balance():
    train, test = make_synthetic(10, 20, 200, 1.0, seed=0, test_per_class=50)
    assert train.features.shape == (2000, 20)
    assert train.class_counts().tolist() == [200] * 10
    assert test.class_counts().tolist() == [50] * 10
    again, _ = make_synthetic(10, 20, 200, 1.0, seed=0, test_per_class=50)
    np.testing.assert_array_equal(train.features, again.features)


def test_tight_clusters_are_learnable():
    train, test = make_synthetic(10, 20, 50, 0.01, seed=1)
    m = train_local(init_model(Arch(20, 10), 0), train, TrainParams(epochs=20, seed=0))
    assert empirical_accuracy(m, test) > 0.99


def test_split_sizes():
    train, _ = make_synthetic(10, 5, 100, 1.0, seed=0)
    clients, server = split_clients_server(train, SplitConfig(0.9, seed=3))
    assert (len(clients), len(server)) == (900, 100)
    clients, server = split_clients_server(train, SplitConfig(1.0, seed=3))
    assert (len(clients), len(server)) == (1000, 0)
    with pytest.raises(ConfigurationError):
        SplitConfig(0.0)


def test_split_float_guard():
    data = LabeledDataset(np.zeros((100, 1)), np.zeros(100), 2)
    clients, _ = split_clients_server(data, SplitConfig(0.29, seed=0))
    assert len(clients) == 29


def test_largest_remainder_examples():
    assert largest_remainder([0.5, 0.5], 3).tolist() == [2, 1]
    assert largest_remainder([1 / 3] * 3, 10).tolist() == [4, 3, 3]
    assert largest_remainder([0.2, 0.8], 0).tolist() == [0, 0]


def test_huge_alpha_is_near_uniform():
    labels = np.repeat(np.arange(10), 100)
    parts = dirichlet_partition_indices(labels, 10, PartitionConfig(10, 1e6, seed=0))
    sizes = [len(p) for p in parts]
    assert all(abs(s - 100) <= 2 for s in sizes)


def test_single_client_gets_everything():
    train, _ = make_synthetic(4, 3, 25, 1.0, seed=0)
    (only,) = dirichlet_partition(train, PartitionConfig(1, 0.5, seed=0))
    assert len(only) == len(train)


def test_partition_conserves_samples_for_100_clients():
    train, _ = make_synthetic(10, 3, 90, 1.0, seed=2)
    parts = dirichlet_partition_indices(train.labels, 10, PartitionConfig(100, 0.9, seed=4))
    flat = np.concatenate(parts)
    assert sorted(flat.tolist()) == list(range(len(train)))


@settings(max_examples=50, deadline=None)
@given(n=st.integers(1, 300), classes=st.integers(1, 6), clients=st.integers(1, 30),
       alpha=st.floats(0.05, 50), seed=st.integers(0, 2**31))
def test_partition_is_a_disjoint_cover(n, classes, clients, alpha, seed):
    labels = np.random.default_rng(seed).integers(0, classes, n)
    parts = dirichlet_partition_indices(labels, classes, PartitionConfig(clients, alpha, seed))
    assert len(parts) == clients
    flat = np.concatenate(parts)
    assert np.array_equal(np.sort(flat), np.arange(n))


@settings(max_examples=50, deadline=None)
@given(props=st.lists(st.floats(0, 1), min_size=1, max_size=12), total=st.integers(0, 500))
def test_largest_remainder_sums_to_total(props, total):
    p = np.asarray(props)
    p = p / p.sum() if p.sum() > 0 else np.full(len(p), 1 / len(p))
    counts = largest_remainder(p, total)
    assert counts.sum() == total
    assert np.all(np.abs(counts - p * total) < 1 + 1e-9)


def test_label_flip_relabels_only_source():
    data = LabeledDataset(np.zeros((6, 2)), [0, 1, 1, 7, 1, 3], 10)
    spec = BackdoorSpec(target_class=7, source_class=1)
    out = poison_dataset(data, spec)
    assert out.labels.tolist() == [0, 7, 7, 7, 7, 3]
    assert data.labels.tolist() == [0, 1, 1, 7, 1, 3]


def test_semantic_trigger_tally():
    X = np.array([[1.0, 0], [-1.0, 0], [0.5, 0], [2.0, 0]])
    data = LabeledDataset(X, [0, 0, 1, 1], 3)
    spec = BackdoorSpec(target_class=2, mode="semantic_trigger", trigger_coord=0,
                        trigger_threshold=0.75)
    assert backdoor_mask(data, spec).tolist() == [True, False, False, True]
    only_zero = BackdoorSpec(target_class=2, mode="semantic_trigger", source_class=0,
                             trigger_threshold=0.75)
    assert backdoor_mask(data, only_zero).tolist() == [True, False, False, False]
    assert poison_dataset(data, spec).labels.tolist() == [2, 0, 1, 2]
