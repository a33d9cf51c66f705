"""Backdoor adversary: poisoned training, model replacement, adaptive variant."""
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .data_gen import backdoor_mask, poison_dataset
from .exceptions import ConfigurationError, InputError
from .ml_core import LabeledDataset, Model, predict_batch, train_local

LABEL_FLIP = "label_flip"
SEMANTIC = "semantic_trigger"


@dataclass(frozen=True)
class BackdoorSpec:
    """What the attacker wants misclassified, and as what.

    ``label_flip``: every sample of ``source_class`` should become
    ``target_class``. ``semantic_trigger``: samples whose feature
    ``trigger_coord`` exceeds ``trigger_threshold`` (optionally only within
    ``source_class``) should become ``target_class``.
    """

    target_class: int
    mode: str = LABEL_FLIP
    source_class: Optional[int] = None
    trigger_coord: int = 0
    trigger_threshold: float = 0.0
    blend_ratio: float = 0.5

    def __post_init__(self):
        if self.mode not in (LABEL_FLIP, SEMANTIC):
            raise ConfigurationError(f"unknown backdoor mode {self.mode!r}")
        if not 0 < self.blend_ratio <= 1:
            raise ConfigurationError("blend_ratio must lie in (0, 1]")
        if self.mode == LABEL_FLIP and self.source_class is None:
            raise ConfigurationError("label_flip needs a source_class")
        if self.source_class is not None and self.source_class == self.target_class:
            raise ConfigurationError("source and target class must differ")

    def validate(self, num_classes, dim):
        for c in (self.target_class, self.source_class):
            if c is not None and not 0 <= c < num_classes:
                raise InputError(f"class id {c} outside [0, {num_classes})")
        if self.mode == SEMANTIC and not 0 <= self.trigger_coord < dim:
            raise InputError(f"trigger coordinate {self.trigger_coord} outside [0, {dim})")


@dataclass(frozen=True, eq=False)
class AttackerState:
    client_id: int
    attacker_dataset: LabeledDataset
    spec: BackdoorSpec

    def __post_init__(self):
        if len(self.attacker_dataset) == 0:
            raise InputError("attacker dataset is empty")
        self.spec.validate(self.attacker_dataset.num_classes, self.attacker_dataset.dim)

    def backdoor_part(self):
        return self.attacker_dataset.subset(
            np.flatnonzero(backdoor_mask(self.attacker_dataset, self.spec))
        )

    def clean_part(self):
        """Attacker samples outside the backdoor set, with their true labels."""
        return self.attacker_dataset.subset(
            np.flatnonzero(~backdoor_mask(self.attacker_dataset, self.spec))
        )


def backdoor_accuracy(model, backdoor_set, target_label):
    """Share of ``backdoor_set`` predicted as ``target_label``."""
    features = getattr(backdoor_set, "features", backdoor_set)
    features = np.asarray(features, dtype=np.float64)
    if features.shape[0] == 0:
        raise InputError("backdoor set is empty")
    pred = predict_batch(model, features)
    return int(np.count_nonzero(pred == target_label)) / pred.shape[0]


def blended_training_set(attacker_state, mimic=None):
    """Poisoned and clean attacker samples mixed at ``blend_ratio``.

    The poisoned samples are tiled until they make up ``blend_ratio`` of the
    mixture; all clean samples are kept. With ``mimic`` set to a model, the
    clean samples carry that model's predictions instead of their labels.
    """
    spec = attacker_state.spec
    backdoor = attacker_state.backdoor_part()
    clean = attacker_state.clean_part()
    if mimic is not None and len(clean):
        clean = clean.with_labels(predict_batch(mimic, clean.features))
    if len(backdoor) == 0:
        return clean
    poisoned = poison_dataset(backdoor, spec)
    if spec.blend_ratio >= 1 or len(clean) == 0:
        return poisoned
    want = int(round(spec.blend_ratio / (1 - spec.blend_ratio) * len(clean)))
    want = max(want, 1)
    reps = np.resize(np.arange(len(poisoned)), want)
    return LabeledDataset.concat([clean, poisoned.subset(reps)])


def craft_backdoor_model(global_model, attacker_state, train_params):
    """The model ``X`` the attacker wants the federation to adopt."""
    return train_local(global_model, blended_training_set(attacker_state), train_params)


def model_replacement_update(global_model, target_model, lam, total_clients):
    """``L_m = G + (N / lam) * (X - G)``: with zero honest deltas, aggregation yields X."""
    if target_model.arch != global_model.arch:
        raise InputError("target and global model architectures differ")
    if not lam > 0:
        raise ConfigurationError("global learning rate must be > 0")
    g = global_model.params
    return Model(g + (total_clients / lam) * (target_model.params - g), global_model.arch)


def adaptive_craft(global_model, history, attacker_state, lookback, train_params,
                   max_iters, finetune_epochs=5):
    """Search for a backdoored target model that the attacker's own validation accepts.

    The attacker trains on its poisoned samples plus its clean samples
    labelled with the global model's predictions, so that only backdoor
    inputs change behaviour on the data it can see. It then runs the
    defense's validation on its clean samples. After each rejection it
    fine-tunes the unscaled target for ``finetune_epochs`` more epochs on
    the clean samples and halves the interpolation step ``gamma`` towards
    it. Returns the first accepted target model (the model the aggregate
    should become), or ``None`` after ``max_iters`` attempts. With fewer than
    ``lookback + 1`` history models there is nothing to check against and
    the first crafted model is returned.
    """
    from .baffle import validate

    if max_iters <= 0:
        return None
    target = train_local(global_model, blended_training_set(attacker_state, mimic=global_model),
                         train_params)
    history = list(history or [])
    if len(history) < lookback + 1:
        return target
    history = history[-(lookback + 1):]
    check_set = attacker_state.clean_part()
    if len(check_set) == 0:
        return target
    mimic_set = check_set.with_labels(predict_batch(global_model, check_set.features))
    candidate = target
    gamma = 1.0
    for attempt in range(max_iters):
        if validate(candidate, history, check_set).vote == 0:
            return candidate
        if attempt == max_iters - 1:
            break
        tp = replace(train_params, epochs=finetune_epochs, seed=train_params.seed + attempt + 1)
        target = train_local(target, mimic_set, tp)
        gamma /= 2
        candidate = global_model + (target - global_model).scale(gamma)
    return None
