"""Federated round engine: client selection, local training, aggregation.

Secure aggregation is modelled as a boundary: individual local models exist
only inside :func:`run_training_round`; callers receive the aggregate plus the
ids of clients whose update was replaced (ground truth for metrics only).
"""
from dataclasses import dataclass, field, replace
from typing import List, Tuple

import numpy as np

from .exceptions import ConfigurationError, InputError
from .ml_core import Model, TrainParams, train_local
from .rng import derive_seed


@dataclass(frozen=True)
class FlConfig:
    total_clients: int = 100
    contributors_per_round: int = 10
    global_lr: float = 10.0
    train_params: TrainParams = field(default_factory=TrainParams)
    rounds: int = 50

    def __post_init__(self):
        if self.contributors_per_round < 1 or self.contributors_per_round > self.total_clients:
            raise ConfigurationError("need 1 <= contributors_per_round <= total_clients")
        if not self.global_lr > 0:
            raise ConfigurationError("global_lr must be > 0")
        if self.rounds < 0:
            raise ConfigurationError("rounds must be >= 0")


@dataclass
class GlobalState:
    """Server-side state. ``accepted_history[-1]`` is always the current model."""

    round: int
    accepted_history: List[Model]
    round_log: list = field(default_factory=list)

    @classmethod
    def start(cls, model, round_=0):
        return cls(round=round_, accepted_history=[model])

    @property
    def current_model(self):
        return self.accepted_history[-1]

    def accept(self, model):
        self.accepted_history.append(model)

    def recent(self, count):
        """The last ``count`` accepted models, oldest first."""
        if count > len(self.accepted_history):
            raise ConfigurationError(
                f"only {len(self.accepted_history)} accepted models, {count} requested"
            )
        return list(self.accepted_history[-count:])


@dataclass(frozen=True)
class ContributionMeta:
    round: int
    contributors: Tuple[int, ...]
    malicious_ids: Tuple[int, ...]


def select_clients(client_ids, n, rng):
    """``n`` distinct ids drawn uniformly without replacement."""
    ids = np.asarray(list(client_ids))
    if n > ids.size:
        raise ConfigurationError(f"cannot select {n} clients from a pool of {ids.size}")
    if n < 0:
        raise ConfigurationError("n must be non-negative")
    return [int(i) for i in rng.choice(ids, size=n, replace=False)]


def aggregate(global_model, locals_, lam, total_clients):
    """``G + (lam / N) * sum(L_i - G)``."""
    locals_ = list(locals_)
    if not locals_:
        raise InputError("aggregate needs at least one local model")
    for local in locals_:
        if local.arch != global_model.arch:
            raise InputError("local model architecture differs from the global model")
    g = global_model.params
    delta = np.zeros_like(g)
    for local in locals_:
        delta += local.params - g
    return Model(g + (lam / total_clients) * delta, global_model.arch)


def local_train_params(config, round_, client_id):
    """Train params for one client in one round; the seed is a pure function of ids."""
    tp = config.train_params
    return replace(tp, seed=derive_seed(tp.seed, "local", round_, client_id))


def run_training_round(state, config, client_shards, selected_ids, malicious_hook=None):
    """Train the selected clients from the current model and aggregate.

    ``malicious_hook`` maps client id -> ``callable(global_model) -> Model``;
    that client's local model is replaced by the hook's output.
    """
    malicious_hook = malicious_hook or {}
    g = state.current_model
    round_ = state.round + 1
    contributors = tuple(sorted(int(i) for i in selected_ids))
    if len(set(contributors)) != len(contributors):
        raise InputError("selected ids must be distinct")
    locals_ = []
    malicious = []
    for cid in contributors:
        if not 0 <= cid < len(client_shards):
            raise InputError(f"unknown client id {cid}")
        if cid in malicious_hook:
            locals_.append(malicious_hook[cid](g))
            malicious.append(cid)
            continue
        shard = client_shards[cid]
        if len(shard) == 0:
            locals_.append(g)
        else:
            locals_.append(train_local(g, shard, local_train_params(config, round_, cid)))
    candidate = aggregate(g, locals_, config.global_lr, config.total_clients)
    return candidate, ContributionMeta(round_, contributors, tuple(malicious))
