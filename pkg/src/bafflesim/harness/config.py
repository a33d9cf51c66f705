"""Experiment configuration: nested dataclasses addressed by dotted keys.

Config files are flat ``section.key = value`` lines; ``#`` starts a comment.
Values are parsed as JSON when possible (numbers, booleans, lists, null) and
kept as bare strings otherwise.
"""
import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from typing import Tuple

from ..exceptions import ConfigurationError


@dataclass(frozen=True)
class DataSection:
    num_classes: int = 10
    dim: int = 20
    samples_per_class: int = 200
    test_per_class: int = 100
    cluster_spread: float = 1.0
    radius: float = 3.0


@dataclass(frozen=True)
class ModelSection:
    hidden_dims: Tuple[int, ...] = ()


@dataclass(frozen=True)
class FlSection:
    total_clients: int = 100
    contributors_per_round: int = 10
    global_lr: float = 10.0
    rounds: int = 50
    local_epochs: int = 2
    learning_rate: float = 0.1
    batch_size: int = 16


@dataclass(frozen=True)
class PartitionSection:
    dirichlet_alpha: float = 0.9


@dataclass(frozen=True)
class SplitSection:
    client_share: float = 0.9


@dataclass(frozen=True)
class DefenseSection:
    lookback: int = 20
    quorum: int = 5
    validators_per_round: int = 10
    configuration: str = "combined"
    start_round: int = 21
    # the round's contributors double as its validators
    validators_are_contributors: bool = True


@dataclass(frozen=True)
class BackdoorSection:
    mode: str = "label_flip"
    # -1: pick the class the attacker holds most samples of
    source_class: int = -1
    # -1: uniform among the remaining classes
    target_class: int = -1
    trigger_coord: int = 0
    trigger_threshold: float = 0.0
    blend_ratio: float = 0.5
    # -1: the client with the largest shard
    attacker_id: int = -1
    attack_epochs: int = 10
    adaptive: bool = False
    adaptive_max_iters: int = 8


@dataclass(frozen=True)
class ScenarioSection:
    name: str = "stable"
    poison_rounds: Tuple[int, ...] = (30, 35, 40)
    stabilize: bool = True
    plateau_window: int = 20
    plateau_delta: float = 0.002
    max_warmup_rounds: int = 400


@dataclass(frozen=True)
class ExperimentSection:
    master_seed: int = 0
    repetitions: int = 5
    malicious_validator_ids: Tuple[int, ...] = ()


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: ExperimentSection = field(default_factory=ExperimentSection)
    data: DataSection = field(default_factory=DataSection)
    model: ModelSection = field(default_factory=ModelSection)
    fl: FlSection = field(default_factory=FlSection)
    partition: PartitionSection = field(default_factory=PartitionSection)
    split: SplitSection = field(default_factory=SplitSection)
    defense: DefenseSection = field(default_factory=DefenseSection)
    backdoor: BackdoorSection = field(default_factory=BackdoorSection)
    scenario: ScenarioSection = field(default_factory=ScenarioSection)

    @property
    def end_round(self):
        return self.fl.rounds

    @property
    def master_seed(self):
        return self.experiment.master_seed

    def to_dict(self):
        return json.loads(json.dumps(dataclasses.asdict(self)))

    def config_hash(self):
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:12]

    def validate(self):
        """Raise ConfigurationError on inconsistent settings, before anything runs."""
        if self.experiment.repetitions < 1:
            raise ConfigurationError("experiment.repetitions must be >= 1")
        bad = [r for r in self.scenario.poison_rounds if not 1 <= r <= self.end_round]
        if bad:
            raise ConfigurationError(f"poison rounds {bad} outside [1, {self.end_round}]")
        if self.fl.contributors_per_round > self.fl.total_clients:
            raise ConfigurationError("more contributors per round than clients")
        if (self.defense.validators_are_contributors
                and self.defense.validators_per_round != self.fl.contributors_per_round):
            raise ConfigurationError(
                "validators_are_contributors needs validators_per_round == contributors_per_round"
            )
        if self.defense.validators_per_round > self.fl.total_clients:
            raise ConfigurationError("more validators per round than clients")
        ids = self.experiment.malicious_validator_ids
        if any(not 0 <= i < self.fl.total_clients for i in ids):
            raise ConfigurationError("malicious validator id out of range")
        if self.backdoor.attacker_id >= self.fl.total_clients:
            raise ConfigurationError("attacker_id out of range")
        c = self.data.num_classes
        for name in ("source_class", "target_class"):
            v = getattr(self.backdoor, name)
            if v != -1 and not 0 <= v < c:
                raise ConfigurationError(f"backdoor.{name}={v} outside [0, {c})")
        if self.backdoor.source_class != -1 and self.backdoor.source_class == self.backdoor.target_class:
            raise ConfigurationError("backdoor source and target class must differ")
        return self


SCENARIOS = {
    "stable": {
        "scenario.name": "stable",
        "scenario.stabilize": True,
        "scenario.poison_rounds": [30, 35, 40],
        "fl.rounds": 50,
        "defense.start_round": 21,
    },
    "early": {
        "scenario.name": "early",
        "scenario.stabilize": False,
        "scenario.poison_rounds": [10, 30] + list(range(65, 115, 5)),
        "fl.rounds": 120,
        "defense.start_round": 60,
    },
}


def parse_value(text):
    text = text.strip()
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text.strip("\"'")


def parse_config_text(text):
    """``{dotted_key: value}`` from a flat key-value document."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = parse_value(value)
    return out


def load_config_file(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_config_text(fh.read())
    except OSError as exc:
        raise ConfigurationError(f"cannot read config file {path}: {exc}") from exc


def dump_config_text(config):
    lines = []
    for section, values in config.to_dict().items():
        for key, value in values.items():
            lines.append(f"{section}.{key} = {json.dumps(value)}")
    return "\n".join(lines) + "\n"


def _coerce(value, current, key):
    if isinstance(value, str) and not isinstance(current, str):
        value = parse_value(value)
    try:
        if isinstance(current, bool):
            if isinstance(value, str):
                return value.lower() in ("1", "true", "yes", "on")
            return bool(value)
        if isinstance(current, int):
            if isinstance(value, float) and not value.is_integer():
                raise ValueError
            return int(value)
        if isinstance(current, float):
            return float(value)
        if isinstance(current, tuple):
            if not isinstance(value, (list, tuple)):
                value = [value]
            return tuple(int(v) if isinstance(v, (int, float)) and float(v).is_integer() else v
                         for v in value)
        if isinstance(current, str):
            return str(value)
    except (TypeError, ValueError):
        raise ConfigurationError(f"bad value {value!r} for {key}") from None
    return value


def with_overrides(config, overrides):
    """A copy of ``config`` with ``{"section.key": value}`` applied."""
    sections = {}
    for key, value in overrides.items():
        if key in ("scenario", "seed"):
            # CLI-level shorthands handled by the caller
            continue
        parts = key.split(".")
        if len(parts) != 2:
            raise ConfigurationError(f"config keys look like 'section.key', got {key!r}")
        section, name = parts
        if not hasattr(config, section) or not dataclasses.is_dataclass(getattr(config, section)):
            raise ConfigurationError(f"unknown config section {section!r}")
        current_section = sections.get(section, getattr(config, section))
        if not hasattr(current_section, name):
            raise ConfigurationError(f"unknown config key {key!r}")
        value = _coerce(value, getattr(current_section, name), key)
        sections[section] = dataclasses.replace(current_section, **{name: value})
    return dataclasses.replace(config, **sections)


def build_config(scenario=None, file_values=None, seed=None, overrides=None):
    """Defaults <- scenario preset <- config file <- --seed <- --set."""
    file_values = dict(file_values or {})
    name = scenario or file_values.get("scenario.name") or file_values.get("scenario") or "stable"
    if name not in SCENARIOS:
        raise ConfigurationError(f"unknown scenario {name!r}; choose from {sorted(SCENARIOS)}")
    config = with_overrides(ExperimentConfig(), SCENARIOS[name])
    config = with_overrides(config, file_values)
    if scenario:
        config = with_overrides(config, {"scenario.name": scenario})
    if seed is not None:
        config = with_overrides(config, {"experiment.master_seed": seed})
    config = with_overrides(config, dict(overrides or {}))
    return config.validate()


def config_from_dict(data):
    """Inverse of :meth:`ExperimentConfig.to_dict`."""
    flat = {f"{s}.{k}": v for s, values in data.items() for k, v in values.items()}
    return with_overrides(ExperimentConfig(), flat)


def desk_config(**overrides):
    """The default desk-scale configuration, with optional dotted overrides."""
    return build_config("stable", overrides={k.replace("__", "."): v for k, v in overrides.items()})

