"""End-to-end experiment runs: data, federation, attacker, defense, metrics."""
import itertools
import logging
import statistics
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from .. import attack as atk
from ..baffle import Decision, DefenseConfig, feedback_round
from ..data_gen import (
    PartitionConfig, SplitConfig, backdoor_mask, dirichlet_partition, make_synthetic,
    split_clients_server,
)
from ..exceptions import ConfigurationError
from ..fl_protocol import FlConfig, GlobalState, run_training_round, select_clients
from ..ml_core import Arch, TrainParams, empirical_accuracy, init_model
from ..rng import derive_seed, repetition_seed, stream
from .config import with_overrides

logger = logging.getLogger(__name__)


@dataclass
class RoundRecord:
    round: int
    was_poisoned: bool
    decision: Decision
    client_votes: Dict[int, int] = field(default_factory=dict)
    server_vote: Optional[int] = None
    main_accuracy: float = 0.0
    backdoor_accuracy: float = 0.0
    repetition: int = 0

    @property
    def reject_votes(self):
        return sum(self.client_votes.values()) + (self.server_vote or 0)

    @property
    def defense_active(self):
        return self.decision != Decision.INACTIVE


@dataclass
class RunResult:
    """One repetition of one configuration."""

    repetition: int
    seed: int
    records: List[RoundRecord]
    warmup_rounds: int
    attacker_id: int
    source_class: Optional[int]
    target_class: int
    adaptive_failures: int = 0

    def fp_rate(self):
        return fp_rate(self.records)

    def fn_rate(self):
        return fn_rate(self.records)


@dataclass
class Report:
    config: dict
    config_hash: str
    runs: List[RunResult]

    @property
    def records(self):
        return [r for run in self.runs for r in run.records]

    def _summary(self, values):
        values = [v for v in values if v is not None]
        if not values:
            return None
        return {
            "mean": float(np.mean(values)),
            "std": float(statistics.stdev(values)) if len(values) > 1 else 0.0,
            "per_repetition": [float(v) for v in values],
        }

    @property
    def fp_rate(self):
        return self._summary(run.fp_rate() for run in self.runs)

    @property
    def fn_rate(self):
        return self._summary(run.fn_rate() for run in self.runs)


def fp_rate(records):
    """Rejected clean rounds over defense-active clean rounds (None if there are none)."""
    clean = [r for r in records if r.defense_active and not r.was_poisoned]
    if not clean:
        return None
    return sum(r.decision == Decision.REJECT for r in clean) / len(clean)


def fn_rate(records):
    """Accepted poisoned rounds over defense-active poisoned rounds (None if there are none)."""
    bad = [r for r in records if r.defense_active and r.was_poisoned]
    if not bad:
        return None
    return sum(r.decision == Decision.ACCEPT for r in bad) / len(bad)


def rates_at_quorum(records, quorum):
    """(fp, fn) obtained by re-deciding recorded tallies at another quorum.

    Only meaningful for client-voting configurations; the recorded model
    trajectory is kept fixed.
    """
    rescored = []
    for r in records:
        if r.defense_active:
            dec = Decision.REJECT if r.reject_votes >= quorum else Decision.ACCEPT
            r = RoundRecord(r.round, r.was_poisoned, dec, r.client_votes, r.server_vote)
        rescored.append(r)
    return fp_rate(rescored), fn_rate(rescored)


def comm_overhead(model_bytes, lookback, compression_factor=1.0):
    """Bytes sent to one validator per round: the candidate plus ``lookback + 1`` history models.

    Counted as ``(lookback + 1) * model_bytes / compression_factor``.
    """
    if model_bytes <= 0 or compression_factor <= 0 or lookback < 0:
        raise ConfigurationError("comm_overhead needs positive sizes and lookback >= 0")
    return (lookback + 1) * model_bytes / compression_factor


# ---------------------------------------------------------------------------


class _Setup:
    """Everything a repetition needs that does not change across rounds."""

    def __init__(self, config, seed):
        c = config
        self.config = c
        self.seed = seed
        self.train, self.test = make_synthetic(
            c.data.num_classes, c.data.dim, c.data.samples_per_class, c.data.cluster_spread,
            derive_seed(seed, "data"), test_per_class=c.data.test_per_class, radius=c.data.radius,
        )
        self.client_pool, self.server_set = split_clients_server(
            self.train, SplitConfig(c.split.client_share, derive_seed(seed, "split"))
        )
        self.shards = dirichlet_partition(
            self.client_pool,
            PartitionConfig(c.fl.total_clients, c.partition.dirichlet_alpha,
                            derive_seed(seed, "partition")),
        )
        self.arch = Arch(c.data.dim, c.data.num_classes, tuple(c.model.hidden_dims))
        self.fl = FlConfig(
            c.fl.total_clients, c.fl.contributors_per_round, c.fl.global_lr,
            TrainParams(c.fl.local_epochs, c.fl.learning_rate, c.fl.batch_size,
                        derive_seed(seed, "local")),
            c.fl.rounds,
        )
        self.defense = DefenseConfig(
            c.defense.lookback, c.defense.quorum, c.defense.validators_per_round,
            c.defense.configuration,
        )
        self._setup_attacker()

    def _setup_attacker(self):
        b = self.config.backdoor
        sizes = [len(s) for s in self.shards]
        attacker_id = b.attacker_id if b.attacker_id >= 0 else int(np.argmax(sizes))
        shard = self.shards[attacker_id]
        if len(shard) == 0:
            raise ConfigurationError(f"attacker client {attacker_id} holds no data")
        source = b.source_class
        if b.mode == atk.LABEL_FLIP and source < 0:
            source = int(np.argmax(shard.class_counts()))
        target = b.target_class
        if target < 0:
            choices = [y for y in range(self.arch.num_classes) if y != source]
            target = int(stream(self.seed, "target").choice(choices))
        spec = atk.BackdoorSpec(
            target_class=target, mode=b.mode,
            source_class=None if source < 0 else source,
            trigger_coord=b.trigger_coord, trigger_threshold=b.trigger_threshold,
            blend_ratio=b.blend_ratio,
        )
        self.attacker = atk.AttackerState(attacker_id, shard, spec)
        mask = backdoor_mask(self.test, spec)
        if not mask.any():
            raise ConfigurationError("the test set contains no backdoor instances")
        self.backdoor_test = self.test.subset(np.flatnonzero(mask))

    def attack_params(self, round_):
        c = self.config
        return TrainParams(c.backdoor.attack_epochs, c.fl.learning_rate, c.fl.batch_size,
                           derive_seed(self.seed, "attack", round_))


def _plateaued(acc, window, delta):
    if len(acc) < 2 * window:
        return False
    return np.mean(acc[-window:]) - np.mean(acc[-2 * window:-window]) < delta


def stabilize(setup, model):
    """Clean, undefended rounds from ``model`` until test accuracy plateaus.

    Returns the stabilized model and the number of rounds it took.
    """
    s = setup.config.scenario
    state = GlobalState.start(model)
    acc = []
    for r in range(1, s.max_warmup_rounds + 1):
        ids = select_clients(range(setup.fl.total_clients), setup.fl.contributors_per_round,
                             stream(setup.seed, "warmup-select", r))
        candidate, _ = run_training_round(state, _warmup_fl(setup, r), setup.shards, ids)
        state = GlobalState.start(candidate, r)
        acc.append(empirical_accuracy(candidate, setup.test))
        if _plateaued(acc, s.plateau_window, s.plateau_delta):
            return candidate, r
    return state.current_model, s.max_warmup_rounds


def _warmup_fl(setup, r):
    # distinct local seeds from the scenario rounds that follow
    tp = setup.fl.train_params
    return FlConfig(setup.fl.total_clients, setup.fl.contributors_per_round, setup.fl.global_lr,
                    TrainParams(tp.epochs, tp.learning_rate, tp.batch_size,
                                derive_seed(tp.seed, "warmup")), setup.fl.rounds)


def run_repetition(config, repetition):
    seed = repetition_seed(config.master_seed, repetition)
    setup = _Setup(config, seed)
    c = config
    model = init_model(setup.arch, derive_seed(seed, "init"))
    warmup = 0
    if c.scenario.stabilize:
        model, warmup = stabilize(setup, model)
    state = GlobalState.start(model)
    poison_rounds = set(c.scenario.poison_rounds)
    attacker = setup.attacker
    lam, total = setup.fl.global_lr, setup.fl.total_clients
    lookback = setup.defense.lookback
    records = []
    adaptive_failures = 0

    for r in range(1, c.end_round + 1):
        ids = select_clients(range(total), setup.fl.contributors_per_round,
                             stream(seed, "select", r))
        hook = {}
        if r in poison_rounds:
            if attacker.client_id not in ids:
                ids[-1] = attacker.client_id
            g = state.current_model
            if c.backdoor.adaptive:
                history = state.recent(lookback + 1) if len(state.accepted_history) > lookback else []
                target = atk.adaptive_craft(g, history, attacker, lookback,
                                            setup.attack_params(r), c.backdoor.adaptive_max_iters)
                if target is None:
                    adaptive_failures += 1
                    logger.info("round %d: adaptive attacker gave up", r)
            else:
                target = atk.craft_backdoor_model(g, attacker, setup.attack_params(r))
            if target is not None:
                hook[attacker.client_id] = (
                    lambda g_, x=target: atk.model_replacement_update(g_, x, lam, total)
                )
        state.round = r - 1
        candidate, meta = run_training_round(state, setup.fl, setup.shards, ids, hook)
        state.round = r

        active = r >= c.defense.start_round and len(state.accepted_history) > lookback
        client_votes, server_vote = {}, None
        if active:
            if c.defense.validators_are_contributors:
                validators = list(meta.contributors)
            else:
                validators = select_clients(range(total), setup.defense.validators_per_round,
                                            stream(seed, "validators", r))
            shards = {v: setup.shards[v] for v in validators}
            overrides = set(c.experiment.malicious_validator_ids) & set(validators)
            # an injecting attacker that also validates vouches for its own model
            fixed = {cid: 0 for cid in meta.malicious_ids if cid in shards}
            result = feedback_round(candidate, state, setup.defense, shards, setup.server_set,
                                    overrides, fixed)
            decision = result.decision
            client_votes, server_vote = result.client_votes, result.server_vote
        else:
            state.accept(candidate)
            decision = Decision.INACTIVE
        current = state.current_model
        records.append(RoundRecord(
            round=r,
            was_poisoned=bool(meta.malicious_ids),
            decision=decision,
            client_votes=client_votes,
            server_vote=server_vote,
            main_accuracy=empirical_accuracy(current, setup.test),
            backdoor_accuracy=atk.backdoor_accuracy(current, setup.backdoor_test,
                                                    attacker.spec.target_class),
            repetition=repetition,
        ))
    return RunResult(repetition, seed, records, warmup, attacker.client_id,
                     attacker.spec.source_class, attacker.spec.target_class, adaptive_failures)


def run_experiment(config):
    config.validate()
    runs = [run_repetition(config, rep) for rep in range(config.experiment.repetitions)]
    return Report(config.to_dict(), config.config_hash(), runs)


def expand_grid(param_grid):
    """Cartesian product of ``{dotted_key: [values]}`` as a list of override dicts."""
    if not param_grid:
        raise ConfigurationError("parameter grid is empty")
    keys = list(param_grid)
    values = [list(param_grid[k]) for k in keys]
    if any(not v for v in values):
        raise ConfigurationError("every grid axis needs at least one value")
    return [dict(zip(keys, combo)) for combo in itertools.product(*values)]


def sweep(config, param_grid):
    """One Report per grid point; the master seed is shared by every point."""
    points = expand_grid(param_grid)
    configs = [with_overrides(config, p).validate() for p in points]
    return [(point, run_experiment(cfg)) for point, cfg in zip(points, configs)]
