"""Accuracy metrics, breakdowns, and random baselines over prediction dumps.

A prediction record is one (scene, speaker ID) instance with the model's
guess, the gold name, and the scene's candidate set. Instance accuracy is
the fraction of correct records; scene-macro accuracy averages per-scene
accuracies so long scenes do not dominate. Breakdowns regroup the same
records along one axis; annotation-driven axes join records to annotation
labels by (scene, speaker ID).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .anonymize import MaskedInstanceSet
from .annotations import AnnotationRecord, evidence_code
from .errors import ConfigError, EmptyInput, NoAnnotations, SchemaError

ANALYTIC = "analytic"
SIMULATED = "simulated"

AXES = ("character", "speakers_per_scene", "evidence", "dependency", "reasoning")


@dataclass(frozen=True)
class PredictionRecord:
    show: str
    episode_id: str
    scene_index: int
    speaker_id: str
    predicted: str
    gold: str
    candidates: tuple[str, ...]
    logits: dict[str, float] | None = None

    def scene_ref(self) -> tuple[str, str, int]:
        return (self.show, self.episode_id, self.scene_index)

    def key(self) -> tuple[str, str, int, str]:
        return (self.show, self.episode_id, self.scene_index, self.speaker_id)

    def correct(self) -> bool:
        return self.predicted == self.gold


def write_predictions(records: Iterable[PredictionRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in records:
            rec = {
                "scene_ref": {
                    "show": r.show, "episode_id": r.episode_id, "scene_index": r.scene_index,
                },
                "speaker_id": r.speaker_id,
                "predicted": r.predicted,
                "gold": r.gold,
                "candidates": list(r.candidates),
            }
            if r.logits is not None:
                rec["logits"] = r.logits
            fh.write(json.dumps(rec, ensure_ascii=False))
            fh.write("\n")


def read_predictions(path: str | Path) -> list[PredictionRecord]:
    out: list[PredictionRecord] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            if not raw.strip():
                continue
            try:
                rec = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"invalid JSON: {exc.msg}", line=lineno) from exc
            try:
                ref = rec["scene_ref"]
                out.append(PredictionRecord(
                    show=ref["show"],
                    episode_id=ref["episode_id"],
                    scene_index=int(ref["scene_index"]),
                    speaker_id=rec["speaker_id"],
                    predicted=rec["predicted"],
                    gold=rec["gold"],
                    candidates=tuple(rec["candidates"]),
                    logits=rec.get("logits"),
                ))
            except (KeyError, TypeError, ValueError) as exc:
                raise SchemaError(f"bad prediction record: {exc}", line=lineno) from exc
    return out


def instance_accuracy(records: Sequence[PredictionRecord]) -> float:
    if not records:
        raise EmptyInput("no prediction records")
    return sum(r.correct() for r in records) / len(records)


def scene_macro_accuracy(records: Sequence[PredictionRecord]) -> float:
    """Mean over scenes of that scene's instance accuracy."""
    if not records:
        raise EmptyInput("no prediction records")
    per_scene: dict[tuple, list[bool]] = {}
    for r in records:
        per_scene.setdefault(r.scene_ref(), []).append(r.correct())
    return float(np.mean([np.mean(v) for v in per_scene.values()]))


@dataclass
class BreakdownReport:
    axis: str
    rows: list[dict]
    matched: int
    unmatched: int
    multi_label: bool

    def to_dict(self) -> dict:
        return {
            "axis": self.axis,
            "rows": self.rows,
            "matched": self.matched,
            "unmatched": self.unmatched,
            "multi_label": self.multi_label,
        }


def _bucketize(pairs: Iterable[tuple[object, bool]]) -> dict:
    buckets: dict = {}
    for cat, ok in pairs:
        hits, n = buckets.get(cat, (0, 0))
        buckets[cat] = (hits + ok, n + 1)
    return buckets


def breakdown(
    records: Sequence[PredictionRecord],
    axis: str,
    annotations: Sequence[AnnotationRecord] | None = None,
) -> BreakdownReport:
    """Accuracy per category along one axis.

    ``character`` groups by gold name and ``speakers_per_scene`` by candidate
    count; both partition the records. The annotation axes join on (scene,
    speaker ID); labels are deduplicated across annotators per instance, and
    multi-label axes count an instance once per label. Records without a
    matching annotation are reported as unmatched, not bucketed.
    """
    if not records:
        raise EmptyInput("no prediction records")
    if axis not in AXES:
        raise ConfigError(f"unknown axis {axis!r}; choose from {AXES}")

    multi_label = False
    unmatched = 0
    if axis == "character":
        pairs = [(r.gold, r.correct()) for r in records]
        matched = len(records)
    elif axis == "speakers_per_scene":
        pairs = [(len(r.candidates), r.correct()) for r in records]
        matched = len(records)
    else:
        if not annotations:
            raise NoAnnotations(f"axis {axis!r} needs annotation records")
        by_key: dict[tuple, set] = {}
        for a in annotations:
            labels = by_key.setdefault(a.key(), set())
            if axis == "evidence":
                labels.update(evidence_code(e) for e in a.evidence)
            elif axis == "dependency":
                labels.add(a.dependency)
            else:
                labels.update(a.reasoning if a.reasoning else ("none",))
        multi_label = axis in ("evidence", "reasoning")
        pairs = []
        matched = 0
        for r in records:
            labels = by_key.get(r.key())
            if not labels:
                unmatched += 1
                continue
            matched += 1
            for lab in sorted(labels):
                pairs.append((lab, r.correct()))

    buckets = _bucketize(pairs)
    rows = [
        {"category": cat, "accuracy": hits / n, "support": n}
        for cat, (hits, n) in sorted(buckets.items(), key=lambda kv: str(kv[0]))
    ]
    return BreakdownReport(
        axis=axis, rows=rows, matched=matched, unmatched=unmatched, multi_label=multi_label
    )


def random_baseline(
    instances: Sequence[MaskedInstanceSet],
    mode: str = ANALYTIC,
    trials: int = 10000,
    seed: int = 0,
) -> float:
    """Expected accuracy of uniform guessing over each instance's candidates.

    Analytic mode returns the mean of 1/|candidates|; simulated mode guesses
    every instance ``trials`` times with a seeded generator.
    """
    pairs = [(inst, sid) for inst in instances for sid in sorted(inst.gold)]
    if not pairs:
        raise EmptyInput("no instances")
    if mode == ANALYTIC:
        return float(np.mean([1.0 / len(inst.candidates) for inst, _ in pairs]))
    if mode != SIMULATED:
        raise ConfigError(f"unknown mode {mode!r}")
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    hits = 0
    for inst, sid in pairs:
        cands = inst.candidates
        gold_idx = cands.index(inst.gold[sid])
        draws = rng.integers(0, len(cands), size=trials)
        hits += int((draws == gold_idx).sum())
    return hits / (trials * len(pairs))


def random_baseline_from_records(
    records: Sequence[PredictionRecord], mode: str = ANALYTIC, trials: int = 10000, seed: int = 0
) -> float:
    """Same baseline computed from a prediction dump's candidate sets."""
    if not records:
        raise EmptyInput("no prediction records")
    if mode == ANALYTIC:
        return float(np.mean([1.0 / len(r.candidates) for r in records]))
    if mode != SIMULATED:
        raise ConfigError(f"unknown mode {mode!r}")
    rng = np.random.default_rng(seed)
    hits = 0
    for r in records:
        gold_idx = r.candidates.index(r.gold)
        draws = rng.integers(0, len(r.candidates), size=trials)
        hits += int((draws == gold_idx).sum())
    return hits / (trials * len(records))
