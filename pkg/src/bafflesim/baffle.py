"""Feedback-loop defense: error variations, LOF-based validation, quorum voting."""
import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Dict, Optional

import numpy as np

from .exceptions import ConfigurationError, InputError
from .lof import lof_score
from .ml_core import per_class_errors

SERVER_ONLY = "server_only"
CLIENTS_ONLY = "clients_only"
COMBINED = "combined"


class Decision(str, Enum):
    ACCEPT = "accept"
    REJECT = "reject"
    INACTIVE = "defense_inactive"


@dataclass(frozen=True)
class DefenseConfig:
    lookback: int = 20
    quorum: int = 5
    validators_per_round: int = 10
    configuration: str = COMBINED

    def __post_init__(self):
        if self.configuration not in (SERVER_ONLY, CLIENTS_ONLY, COMBINED):
            raise ConfigurationError(f"unknown defense configuration {self.configuration!r}")
        if self.lookback < 4:
            raise ConfigurationError("lookback must be >= 4")
        if self.validators_per_round < 0:
            raise ConfigurationError("validators_per_round must be >= 0")
        if self.configuration != SERVER_ONLY:
            top = self.validators_per_round + (self.configuration == COMBINED)
            if not 1 <= self.quorum <= top:
                raise ConfigurationError(f"quorum must lie in [1, {top}]")


@dataclass(frozen=True)
class QuorumParams:
    n: int
    n_malicious: int
    rho: float

    def __post_init__(self):
        if self.n < 1 or self.n_malicious < 0:
            raise ConfigurationError("need n >= 1 and n_malicious >= 0")
        if not 2 * self.n_malicious < self.n:
            raise ConfigurationError("honest majority required: n_malicious < n / 2")
        if not 0 <= self.rho <= 1:
            raise ConfigurationError("rho must lie in [0, 1]")


@dataclass(frozen=True, eq=False)
class VariationVector:
    source_deltas: np.ndarray
    target_deltas: np.ndarray

    @property
    def point(self):
        return np.concatenate([self.source_deltas, self.target_deltas])


@dataclass(frozen=True)
class Verdict:
    vote: int
    lof_value: float
    threshold: float


@dataclass
class FeedbackResult:
    decision: Decision
    client_votes: Dict[int, int] = field(default_factory=dict)
    server_vote: Optional[int] = None

    @property
    def reject_votes(self):
        return sum(self.client_votes.values()) + (self.server_vote or 0)


def _profile_point(model, dataset):
    prof = per_class_errors(model, dataset)
    return np.concatenate([prof.source_errors, prof.target_errors])


def variation_vector(f_prev, f_curr, dataset):
    """Per-class error of ``f_prev`` minus that of ``f_curr``, source then target."""
    if len(dataset) == 0:
        raise InputError("dataset is empty")
    a = per_class_errors(f_prev, dataset)
    b = per_class_errors(f_curr, dataset)
    return VariationVector(a.source_errors - b.source_errors, a.target_errors - b.target_errors)


def window_constants(lookback):
    """``(k, h)`` for a look-back window: k = ceil(l/2), h = ceil(3l/4)."""
    return -(-lookback // 2), -(-3 * lookback // 4)


def validate(current, history, dataset):
    """Vote 1 (suspicious) when the newest variation is more of an outlier than usual.

    ``history`` holds the last ``l + 1`` accepted models, oldest first. The
    LOF of each of the last trusted variations ``v_h..v_l`` against its
    ``h - 1`` predecessors sets the threshold (their mean); the candidate's
    variation is scored against the ``h - 1`` most recent trusted ones.
    """
    history = list(history)
    lookback = len(history) - 1
    if lookback < 4:
        raise ConfigurationError(f"history must hold at least 5 models, got {len(history)}")
    if len(dataset) == 0:
        raise InputError("dataset is empty")
    points = np.stack([_profile_point(m, dataset) for m in history + [current]])
    # v[i] compares models i-1 and i; v[0] is unused padding so indices match 1..l+1
    v = np.zeros_like(points)
    v[1:] = points[:-1] - points[1:]

    k, h = window_constants(lookback)
    kk = min(k, h - 1)
    trusted = [lof_score(v[i], v[i - h + 1:i], kk) for i in range(h, lookback + 1)]
    phi_new = lof_score(v[lookback + 1], v[lookback - h + 2:lookback + 1], kk)
    tau = float(np.mean(trusted))
    return Verdict(vote=int(phi_new > tau), lof_value=phi_new, threshold=tau)


def decide(reject_votes, quorum):
    """Reject iff at least ``quorum`` reject votes."""
    return Decision.REJECT if reject_votes >= quorum else Decision.ACCEPT


def _as_fraction(x):
    return Fraction(x).limit_denominator(10**9)


def quorum_threshold(params):
    """``ceil(rho * (n - n_M))`` clamped to ``[1, n]``."""
    q = math.ceil(_as_fraction(params.rho) * (params.n - params.n_malicious))
    return max(1, min(params.n, q))


def max_tolerated_malicious(n, rho):
    """Largest integer strictly below ``(1 - rho) * n / (2 - rho)`` (never negative)."""
    if not 0 <= rho <= 1:
        raise ConfigurationError("rho must lie in [0, 1]")
    r = _as_fraction(rho)
    bound = (1 - r) * n / (2 - r)
    return max(0, math.ceil(bound) - 1)


def feedback_round(candidate, state, defense, validator_shards, server_set=None,
                   vote_overrides=(), fixed_votes=None):
    """Collect verdicts on ``candidate`` and accept or reject it.

    ``validator_shards`` maps validator id -> private dataset. Validators
    with no data vote accept. Ids in ``vote_overrides`` have their verdict
    flipped; ids in ``fixed_votes`` cast the given vote without validating.
    On acceptance the candidate is appended to the state's
    accepted history; on rejection the state is left untouched.
    """
    need = defense.lookback + 1
    if len(state.accepted_history) < need:
        raise ConfigurationError(
            f"defense needs {need} accepted models, have {len(state.accepted_history)}"
        )
    history = state.recent(need)
    overrides = set(vote_overrides)
    fixed = dict(fixed_votes or {})

    result = FeedbackResult(decision=Decision.ACCEPT)
    if defense.configuration != SERVER_ONLY:
        for vid in sorted(validator_shards):
            shard = validator_shards[vid]
            if vid in fixed:
                result.client_votes[int(vid)] = int(fixed[vid])
                continue
            vote = validate(candidate, history, shard).vote if len(shard) else 0
            if vid in overrides:
                vote = 1 - vote
            result.client_votes[int(vid)] = vote
    if defense.configuration != CLIENTS_ONLY:
        if server_set is None or len(server_set) == 0:
            result.server_vote = 0
        else:
            result.server_vote = validate(candidate, history, server_set).vote

    if defense.configuration == SERVER_ONLY:
        result.decision = decide(result.server_vote, 1)
    else:
        result.decision = decide(result.reject_votes, defense.quorum)
    if result.decision == Decision.ACCEPT:
        state.accept(candidate)
    return result
