import numpy as np
import pytest

import oracles
from conftest import blobs, random_model
from bafflesim.baffle import (
    Decision, DefenseConfig, QuorumParams, _profile_point, decide, feedback_round,
    max_tolerated_malicious, quorum_threshold, validate, variation_vector, window_constants,
)
from bafflesim.exceptions import ConfigurationError
from bafflesim.data_gen import PartitionConfig, dirichlet_partition, make_synthetic
from bafflesim.fl_protocol import FlConfig, GlobalState, run_training_round, select_clients
from bafflesim.ml_core import (
    Arch, LabeledDataset, Model, TrainParams, init_model, per_class_errors, train_local,
)
from bafflesim.rng import stream


def _trajectory(length, seed=0, lr=0.02):
    """A slowly training sequence of models, the kind of history validate expects."""
    data = blobs(n_per_class=40, spread=1.2, seed=seed)
    m = random_model(seed=seed)
    models = [m]
    for i in range(length - 1):
        m = train_local(m, data, TrainParams(epochs=1, learning_rate=lr, seed=seed * 1000 + i))
        models.append(m)
    return models, data


def test_variation_vector_zero_and_antisymmetric():
    a, b = random_model(seed=1), random_model(seed=2)
    data = blobs(seed=3)
    assert not np.any(variation_vector(a, a, data).point)
    np.testing.assert_array_equal(variation_vector(a, b, data).point,
                                  -variation_vector(b, a, data).point)
    pa, pb = per_class_errors(a, data), per_class_errors(b, data)
    v = variation_vector(a, b, data)
    np.testing.assert_array_equal(v.source_deltas, pa.source_errors - pb.source_errors)
    np.testing.assert_array_equal(v.target_deltas, pa.target_errors - pb.target_errors)


def test_window_constants():
    assert window_constants(20) == (10, 15)
    assert window_constants(8) == (4, 6)
    assert window_constants(10) == (5, 8)
    k, h = window_constants(20)
    assert len(range(h, 20 + 1)) == 6


def test_identical_history_votes_accept():
    m = random_model()
    verdict = validate(m, [m] * 21, blobs())
    assert verdict.vote == 0
    assert verdict.lof_value == verdict.threshold


@pytest.mark.parametrize("lookback", [8, 20])
def test_validate_matches_oracle_on_variations(lookback):
    models, data = _trajectory(lookback + 2, seed=lookback)
    history, cand = models[:-1], models[-1]
    pts = [_profile_point(m, data) for m in history + [cand]]
    var = [(pts[i - 1] - pts[i]).tolist() for i in range(1, len(pts))]
    vote, phi, tau = oracles.validate_from_variations(var[:-1], var[-1])
    got = validate(cand, history, data)
    assert got.vote == vote
    assert got.lof_value == pytest.approx(phi, rel=1e-9)
    assert got.threshold == pytest.approx(tau, rel=1e-9)
    again = validate(cand, history, data)
    assert (again.vote, again.lof_value, again.threshold) == (got.vote, got.lof_value, got.threshold)


def test_validate_needs_enough_history():
    m = random_model()
    with pytest.raises(ConfigurationError):
        validate(m, [m] * 4, blobs())


def test_verdict_depends_only_on_predictions():
    models, data = _trajectory(10, seed=5)
    history, cand = models[:-1], models[-1]
    # positive rescaling of a linear softmax model keeps every argmax
    scaled = Model(cand.params * 3.0, cand.arch)
    a, b = validate(cand, history, data), validate(scaled, history, data)
    assert (a.vote, a.lof_value) == (b.vote, b.lof_value)


def test_replaced_model_is_flagged():
    models, data = _trajectory(22, seed=1)
    bad = Model(np.zeros_like(models[-1].params), models[-1].arch)  # predicts class 0 everywhere
    assert validate(bad, models[:-1], data).vote == 1


def _clean_fl_decision(seed):
    """Quorum decision on the next clean candidate after a 21-model clean FL history.

    The history starts after 50 warm-up rounds: the defense is only switched
    on once training has settled.
    """
    train, _ = make_synthetic(4, 6, 60, 1.0, seed=seed)
    shards = dirichlet_partition(train, PartitionConfig(20, 0.9, seed=seed))
    cfg = FlConfig(total_clients=20, contributors_per_round=5, global_lr=4.0,
                   train_params=TrainParams(epochs=1, learning_rate=0.05, seed=seed))
    state = GlobalState.start(init_model(Arch(6, 4), seed))
    for r in range(71):
        ids = select_clients(range(20), 5, stream(seed, "sel", r))
        cand, _ = run_training_round(state, cfg, shards, ids)
        state.accept(cand)
        state.round += 1
    ids = select_clients(range(20), 5, stream(seed, "sel", 71))
    cand, _ = run_training_round(state, cfg, shards, ids)
    validators = select_clients(range(20), 10, stream(seed, "val"))
    res = feedback_round(cand, state, DefenseConfig(20, 5, 10, "clients_only"),
                         {v: shards[v] for v in validators})
    return res.decision


def test_clean_histories_rarely_rejected():
    decisions = [_clean_fl_decision(seed) for seed in range(100)]
    assert np.mean([d == Decision.REJECT for d in decisions]) < 0.15


def test_quorum_examples():
    assert quorum_threshold(QuorumParams(10, 3, 0.5)) == 4
    assert quorum_threshold(QuorumParams(10, 0, 1.0)) == 10
    assert quorum_threshold(QuorumParams(10, 0, 0.0)) == 1
    assert max_tolerated_malicious(10, 0.5) == 3
    assert max_tolerated_malicious(10, 0.4) == 3
    assert max_tolerated_malicious(10, 1.0) == 0
    assert max_tolerated_malicious(9, 0.0) == 4
    with pytest.raises(ConfigurationError):
        QuorumParams(10, 5, 0.5)


def test_decide_is_inclusive():
    assert decide(5, 5) == Decision.REJECT
    assert decide(4, 5) == Decision.ACCEPT


def _state(models):
    s = GlobalState.start(models[0])
    for m in models[1:]:
        s.accept(m)
    return s


def test_feedback_round_rejection_leaves_history_untouched():
    models, data = _trajectory(22, seed=1)
    state = _state(models[:-1])
    before = [m.params.copy() for m in state.accepted_history]
    bad = Model(np.zeros_like(models[-1].params), models[-1].arch)
    shards = {i: data for i in range(4)}
    res = feedback_round(bad, state, DefenseConfig(20, 3, 4, "combined"), shards, data)
    assert res.decision == Decision.REJECT
    assert res.reject_votes == 5
    assert len(state.accepted_history) == len(before)
    for m, p in zip(state.accepted_history, before):
        np.testing.assert_array_equal(m.params, p)


def test_feedback_round_quorum_and_modes():
    m = random_model()
    data = blobs()
    shards = {i: data for i in range(4)}
    # identical history: every honest verdict is accept; flipped voters reject
    state = _state([m] * 21)
    res = feedback_round(m, state, DefenseConfig(20, 2, 4, "clients_only"), shards,
                         vote_overrides={0, 3})
    assert res.reject_votes == 2 and res.decision == Decision.REJECT
    state = _state([m] * 21)
    res = feedback_round(m, state, DefenseConfig(20, 3, 4, "clients_only"), shards,
                         vote_overrides={0, 3})
    assert res.decision == Decision.ACCEPT and len(state.accepted_history) == 22
    state = _state([m] * 21)
    res = feedback_round(m, state, DefenseConfig(20, 1, 4, "server_only"), shards, data,
                         vote_overrides={0, 1, 2, 3})
    assert res.client_votes == {} and res.decision == Decision.ACCEPT


def test_feedback_round_empty_shard_votes_accept():
    m = random_model()
    empty = LabeledDataset(np.empty((0, 4)), [], 3)
    res = feedback_round(m, _state([m] * 21), DefenseConfig(20, 1, 1, "clients_only"), {7: empty})
    assert res.client_votes == {7: 0}


def test_feedback_round_needs_history():
    m = random_model()
    with pytest.raises(ConfigurationError):
        feedback_round(m, _state([m] * 5), DefenseConfig(), {0: blobs()})


def test_more_reject_votes_never_flip_reject_to_accept():
    m = random_model()
    shards = {i: blobs() for i in range(6)}
    prev = Decision.ACCEPT
    for flips in range(7):
        res = feedback_round(m, _state([m] * 21), DefenseConfig(20, 3, 6, "clients_only"),
                             shards, vote_overrides=set(range(flips)))
        if prev == Decision.REJECT:
            assert res.decision == Decision.REJECT
        prev = res.decision
    assert prev == Decision.REJECT


def test_fixed_votes_skip_validation():
    models, data = _trajectory(22, seed=1)
    bad = Model(np.zeros_like(models[-1].params), models[-1].arch)
    res = feedback_round(bad, _state(models[:-1]), DefenseConfig(20, 3, 3, "clients_only"),
                         {0: data, 1: data, 2: data}, fixed_votes={1: 0})
    assert res.client_votes == {0: 1, 1: 0, 2: 1}
    assert res.decision == Decision.ACCEPT
