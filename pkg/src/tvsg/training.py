"""Seeded training loop, checkpoint selection, and learning curves.

Loss per scene is the mean cross-entropy over its present speaker IDs;
batches group whole scenes. After every epoch the dev set is scored and the
best-dev parameters are kept, so the returned model's dev accuracy equals
the maximum over the logged epochs. All randomness (init, shuffling,
dropout) derives from one seed: two runs with the same config and data
produce identical metric logs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .anonymize import MaskedInstanceSet
from .encoder import Adam, EncoderConfig, Vocab
from .errors import AllTruncated, ConfigError, EmptyInput, NonFiniteLoss, RowsUnrepresentable
from .evaluate import PredictionRecord
from .models import LONGFORMER_P, ARCHS, CharModel, MrConfig, argmax_candidate, decode_joint


@dataclass(frozen=True)
class TrainConfig:
    """Toy-scale defaults sized for laptop CPUs.

    Full-scale runs of the same architectures elsewhere used lr 2e-5 for 40
    epochs on pretrained encoders; this artifact always trains from scratch.
    """

    arch: str = LONGFORMER_P
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    mr: MrConfig = field(default_factory=MrConfig)
    epochs: int = 50
    lr: float = 3e-4
    batch_size: int = 8
    seed: int = 0
    patience: int = 0
    candidate_masked: bool = False
    include_background: bool = True

    def __post_init__(self):
        if self.arch not in ARCHS:
            raise ConfigError(f"unknown architecture {self.arch!r}")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.lr < 0:
            raise ConfigError("learning rate must be non-negative")
        if self.patience < 0:
            raise ConfigError("patience must be >= 0")


def derive_rosters(instances: Sequence[MaskedInstanceSet]) -> dict[str, list[str]]:
    """Roster per show: gold-resolved dialogue turn counts, most turns first.

    Ties break lexicographically, matching how the roster was ordered when
    the corpus was anonymized.
    """
    counts: dict[str, dict[str, int]] = {}
    for inst in instances:
        per = counts.setdefault(inst.show, {})
        for name in inst.candidates:
            per.setdefault(name, 0)
        for line in inst.lines:
            if line.speaker_id is not None:
                name = inst.gold[line.speaker_id]
                per[name] = per.get(name, 0) + 1
    return {
        show: [name for name, _ in sorted(per.items(), key=lambda kv: (-kv[1], kv[0]))]
        for show, per in counts.items()
    }


def build_vocab(instances: Sequence[MaskedInstanceSet]) -> Vocab:
    """Vocabulary over utterance text and supporting-speaker labels."""
    def texts():
        for inst in instances:
            for line in inst.lines:
                if line.speaker:
                    yield line.speaker
                yield line.text
    return Vocab.from_texts(texts())


def evaluate_accuracy(model: CharModel, instances: Sequence[MaskedInstanceSet]) -> float:
    """Instance accuracy under candidate-restricted argmax.

    Scenes the architecture cannot represent (all dialogue truncated away,
    more IDs than rows) count their instances as incorrect.
    """
    total = 0
    correct = 0
    for inst in instances:
        total += len(inst.gold)
        try:
            logits = model.predict_scene(inst)
        except (AllTruncated, RowsUnrepresentable):
            continue
        roster = model.roster_of(inst)
        for sid, l in logits.items():
            if argmax_candidate(l, roster, inst.candidates) == inst.gold[sid]:
                correct += 1
    if total == 0:
        raise EmptyInput("no instances to evaluate")
    return correct / total


def train(
    cfg: TrainConfig,
    train_set: Sequence[MaskedInstanceSet],
    dev_set: Sequence[MaskedInstanceSet],
) -> tuple[CharModel, list[dict]]:
    """Train one model; returns (best-dev model, metric log records).

    Log records are ``{"epoch", "split", "metric", "value"}`` dicts: train
    loss and dev instance accuracy per epoch, then one final
    ``best_instance_accuracy`` row for the restored checkpoint. Training
    stops as soon as dev accuracy reaches 1.0 (no later epoch could replace
    the best snapshot) or after ``patience`` epochs without improvement.
    """
    if not train_set:
        raise EmptyInput("training set is empty")
    if not dev_set:
        raise EmptyInput("dev set is empty")
    rosters = derive_rosters(list(train_set) + list(dev_set))
    vocab = build_vocab(train_set)
    model = CharModel(
        cfg.arch, vocab, rosters, cfg.encoder, mr=cfg.mr,
        seed=cfg.seed, include_background=cfg.include_background,
    )
    opt = Adam(model.params, lr=cfg.lr)
    shuffle_rng = np.random.default_rng([cfg.seed, 2])
    dropout_rng = np.random.default_rng([cfg.seed, 3])

    log: list[dict] = []
    best_acc = -1.0
    best_epoch = 0
    best_params: dict[str, np.ndarray] | None = None
    since_best = 0

    for epoch in range(1, cfg.epochs + 1):
        order = shuffle_rng.permutation(len(train_set))
        losses = []
        for start in range(0, len(order), cfg.batch_size):
            batch = [train_set[i] for i in order[start:start + cfg.batch_size]]
            loss, grads = model.loss_and_grads(
                batch, candidate_masked=cfg.candidate_masked, train=True, rng=dropout_rng
            )
            if not np.isfinite(loss):
                raise NonFiniteLoss(f"epoch {epoch}: loss is {loss}")
            opt.step(model.params, grads)
            losses.append(loss)
        train_loss = float(np.mean(losses))
        dev_acc = evaluate_accuracy(model, dev_set)
        log.append({"epoch": epoch, "split": "train", "metric": "loss", "value": train_loss})
        log.append({"epoch": epoch, "split": "dev", "metric": "instance_accuracy", "value": dev_acc})
        if dev_acc > best_acc:
            best_acc = dev_acc
            best_epoch = epoch
            best_params = {k: v.copy() for k, v in model.params.items()}
            since_best = 0
            if best_acc >= 1.0:
                break
        else:
            since_best += 1
            if cfg.patience and since_best >= cfg.patience:
                break

    if best_params is not None:
        model.params = best_params
    log.append({
        "epoch": best_epoch, "split": "dev",
        "metric": "best_instance_accuracy", "value": best_acc,
    })
    return model, log


def write_metric_log(records: Sequence[dict], path: str | Path, append: bool = False) -> None:
    mode = "a" if append else "w"
    with open(path, mode, encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False))
            fh.write("\n")


def learning_curve(
    cfg: TrainConfig,
    target_show: str,
    donor_shows: Sequence[str],
    train_by_show: Mapping[str, Sequence[MaskedInstanceSet]],
    dev_target: Sequence[MaskedInstanceSet],
) -> list[dict]:
    """Dev accuracy on the target show as donor shows join the training set.

    Entry i trains on the target plus the first i donors (fresh run, same
    seed schedule) and scores the target dev set; the result has
    ``len(donor_shows) + 1`` entries.
    """
    if target_show not in train_by_show:
        raise ConfigError(f"no training data for target show {target_show!r}")
    for show in donor_shows:
        if show not in train_by_show:
            raise ConfigError(f"no training data for donor show {show!r}")
    out: list[dict] = []
    for i in range(len(donor_shows) + 1):
        shows = [target_show, *donor_shows[:i]]
        merged: list[MaskedInstanceSet] = []
        for show in shows:
            merged.extend(train_by_show[show])
        model, _ = train(cfg, merged, dev_target)
        acc = evaluate_accuracy(model, dev_target)
        out.append({"donors": i, "shows": shows, "dev_accuracy": acc})
    return out


def predict_records(
    model: CharModel,
    instances: Sequence[MaskedInstanceSet],
    joint: bool = False,
    keep_logits: bool = True,
    on_error: str = "raise",
) -> tuple[list[PredictionRecord], int]:
    """Run the model over a corpus and collect one record per instance.

    Returns (records, skipped). With on_error="skip", scenes the model
    cannot represent (nothing fits the length budget, or more speaker IDs
    than rows) are dropped and counted instead of raising.
    """
    if on_error not in ("raise", "skip"):
        raise ConfigError(f"on_error must be 'raise' or 'skip', got {on_error!r}")
    records: list[PredictionRecord] = []
    skipped = 0
    for inst in instances:
        roster = model.roster_of(inst)
        try:
            logits = model.predict_scene(inst)
        except (AllTruncated, RowsUnrepresentable):
            if on_error == "raise":
                raise
            skipped += 1
            continue
        if joint:
            assigned = decode_joint(logits, roster, inst.candidates)
        for sid in sorted(logits):
            predicted = assigned[sid] if joint else argmax_candidate(
                logits[sid], roster, inst.candidates
            )
            records.append(PredictionRecord(
                show=inst.show,
                episode_id=inst.episode_id,
                scene_index=inst.scene_index,
                speaker_id=sid,
                predicted=predicted,
                gold=inst.gold[sid],
                candidates=tuple(inst.candidates),
                logits={name: float(logits[sid][roster.index(name)]) for name in roster}
                if keep_logits else None,
            ))
    return records, skipped
