"""Reading, writing, splitting, and summarizing masked corpora.

The on-disk corpus is line-delimited JSON, one masked scene per line:

    {"schema": 1, "show": ..., "episode_id": ..., "scene_index": ...,
     "lines": [{"kind": ..., "speaker_id"?: ..., "speaker"?: ..., "text": ...}],
     "candidates": [...], "gold": {"P0": ...}, "rng_seed": ...}

Unmasked scene corpora use the same envelope without candidates/gold/rng_seed
and with literal ``speaker`` labels. Reading validates every record and
reports the 1-based line number of the first offending one.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .anonymize import MaskedInstanceSet, MaskedLine, derive_scene_seed
from .errors import ConfigError, DegenerateSplit, SchemaError
from .parsing import BACKGROUND, DIALOGUE, Line, Scene
from .text import count_tokens

SCHEMA_VERSION = 1
SPLIT_NAMES = ("train", "dev", "test")
_ID_RE = re.compile(r"P[0-5]\Z")

CHRONOLOGICAL = "chronological"
SEEDED_RANDOM = "seeded_random"


@dataclass(frozen=True)
class SplitSpec:
    """Ratios and policy for a train/dev/test partition."""

    ratios: tuple[float, float, float] = (0.9, 0.05, 0.05)
    policy: str = CHRONOLOGICAL
    seed: int = 0

    def __post_init__(self):
        if len(self.ratios) != 3 or any(r < 0 for r in self.ratios):
            raise ConfigError(f"ratios must be three non-negative numbers, got {self.ratios}")
        if abs(sum(self.ratios) - 1.0) > 1e-9:
            raise ConfigError(f"ratios must sum to 1, got {sum(self.ratios)}")
        if self.policy not in (CHRONOLOGICAL, SEEDED_RANDOM):
            raise ConfigError(f"unknown split policy {self.policy!r}")


# --- serialization --------------------------------------------------------

def _line_to_dict(line: MaskedLine) -> dict:
    rec: dict = {"kind": line.kind}
    if line.speaker_id is not None:
        rec["speaker_id"] = line.speaker_id
    if line.speaker is not None:
        rec["speaker"] = line.speaker
    rec["text"] = line.text
    return rec


def instance_to_dict(inst: MaskedInstanceSet) -> dict:
    return {
        "schema": SCHEMA_VERSION,
        "show": inst.show,
        "episode_id": inst.episode_id,
        "scene_index": inst.scene_index,
        "lines": [_line_to_dict(ln) for ln in inst.lines],
        "candidates": list(inst.candidates),
        "gold": {sid: inst.gold[sid] for sid in sorted(inst.gold)},
        "rng_seed": inst.rng_seed,
    }


def write_corpus(instances: Iterable[MaskedInstanceSet], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for inst in instances:
            fh.write(json.dumps(instance_to_dict(inst), ensure_ascii=False))
            fh.write("\n")


def _fail(lineno: int, message: str):
    raise SchemaError(message, line=lineno)


def _check_str(rec: dict, key: str, lineno: int) -> str:
    value = rec.get(key)
    if not isinstance(value, str) or not value:
        _fail(lineno, f"field {key!r} must be a non-empty string")
    return value


def instance_from_dict(rec: dict, lineno: int = 0) -> MaskedInstanceSet:
    if not isinstance(rec, dict):
        _fail(lineno, "record is not an object")
    if rec.get("schema") != SCHEMA_VERSION:
        _fail(lineno, f"unsupported schema {rec.get('schema')!r}")
    show = _check_str(rec, "show", lineno)
    episode_id = _check_str(rec, "episode_id", lineno)
    scene_index = rec.get("scene_index")
    if not isinstance(scene_index, int) or scene_index < 0:
        _fail(lineno, "field 'scene_index' must be a non-negative integer")
    raw_lines = rec.get("lines")
    if not isinstance(raw_lines, list) or not raw_lines:
        _fail(lineno, "field 'lines' must be a non-empty array")
    lines: list[MaskedLine] = []
    for i, ln in enumerate(raw_lines):
        if not isinstance(ln, dict):
            _fail(lineno, f"lines[{i}] is not an object")
        kind = ln.get("kind")
        if kind not in (DIALOGUE, BACKGROUND):
            _fail(lineno, f"lines[{i}] has unknown kind {kind!r}")
        text = ln.get("text")
        if not isinstance(text, str):
            _fail(lineno, f"lines[{i}] is missing text")
        speaker_id = ln.get("speaker_id")
        speaker = ln.get("speaker")
        if speaker_id is not None and not (isinstance(speaker_id, str) and _ID_RE.fullmatch(speaker_id)):
            _fail(lineno, f"lines[{i}] has bad speaker_id {speaker_id!r}")
        if kind == BACKGROUND and (speaker_id or speaker):
            _fail(lineno, f"lines[{i}] is background but carries a speaker")
        if kind == DIALOGUE and speaker_id is not None and speaker is not None:
            _fail(lineno, f"lines[{i}] carries both speaker_id and speaker")
        lines.append(MaskedLine(kind=kind, text=text, speaker_id=speaker_id, speaker=speaker))
    if "candidates" not in rec:
        _fail(lineno, "record is missing 'candidates'")
    candidates = rec["candidates"]
    if not isinstance(candidates, list) or not all(isinstance(c, str) for c in candidates):
        _fail(lineno, "field 'candidates' must be an array of names")
    if "gold" not in rec:
        _fail(lineno, "record is missing 'gold'")
    gold = rec["gold"]
    if not isinstance(gold, dict) or not gold:
        _fail(lineno, "field 'gold' must be a non-empty object")
    for sid, name in gold.items():
        if not _ID_RE.fullmatch(str(sid)):
            _fail(lineno, f"gold key {sid!r} is not a speaker ID")
        if not isinstance(name, str):
            _fail(lineno, f"gold[{sid!r}] must be a name")
    if len(set(gold.values())) != len(gold):
        _fail(lineno, "gold maps two IDs to the same character")
    if set(gold.values()) != set(candidates):
        _fail(lineno, "candidates and gold values disagree")
    used_ids = {ln.speaker_id for ln in lines if ln.speaker_id is not None}
    if used_ids - set(gold):
        _fail(lineno, f"lines use IDs missing from gold: {sorted(used_ids - set(gold))}")
    rng_seed = rec.get("rng_seed")
    if not isinstance(rng_seed, int):
        _fail(lineno, "field 'rng_seed' must be an integer")
    return MaskedInstanceSet(
        show=show,
        episode_id=episode_id,
        scene_index=scene_index,
        lines=lines,
        candidates=tuple(sorted(candidates)),
        gold=dict(gold),
        rng_seed=rng_seed,
    )


def read_corpus(path: str | Path) -> list[MaskedInstanceSet]:
    """Read a masked corpus; empty file gives an empty corpus."""
    out: list[MaskedInstanceSet] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            if not raw.strip():
                continue
            try:
                rec = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"invalid JSON: {exc.msg}", line=lineno) from exc
            out.append(instance_from_dict(rec, lineno))
    return out


def scene_to_dict(scene: Scene) -> dict:
    lines = []
    for ln in scene.lines:
        rec: dict = {"kind": ln.kind}
        if ln.speaker is not None:
            rec["speaker"] = ln.speaker
        rec["text"] = ln.text
        lines.append(rec)
    return {
        "schema": SCHEMA_VERSION,
        "show": scene.show,
        "episode_id": scene.episode_id,
        "scene_index": scene.scene_index,
        "lines": lines,
    }


def write_scenes(scenes: Iterable[Scene], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for scene in scenes:
            fh.write(json.dumps(scene_to_dict(scene), ensure_ascii=False))
            fh.write("\n")


def read_scenes(path: str | Path) -> list[Scene]:
    """Read an unmasked scene corpus written by :func:`write_scenes`."""
    out: list[Scene] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            if not raw.strip():
                continue
            try:
                rec = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"invalid JSON: {exc.msg}", line=lineno) from exc
            if rec.get("schema") != SCHEMA_VERSION:
                _fail(lineno, f"unsupported schema {rec.get('schema')!r}")
            show = _check_str(rec, "show", lineno)
            episode_id = _check_str(rec, "episode_id", lineno)
            scene_index = rec.get("scene_index")
            if not isinstance(scene_index, int) or scene_index < 0:
                _fail(lineno, "field 'scene_index' must be a non-negative integer")
            raw_lines = rec.get("lines")
            if not isinstance(raw_lines, list) or not raw_lines:
                _fail(lineno, "field 'lines' must be a non-empty array")
            lines = []
            for i, ln in enumerate(raw_lines):
                kind = ln.get("kind") if isinstance(ln, dict) else None
                if kind not in (DIALOGUE, BACKGROUND):
                    _fail(lineno, f"lines[{i}] has unknown kind {kind!r}")
                text = ln.get("text")
                if not isinstance(text, str):
                    _fail(lineno, f"lines[{i}] is missing text")
                lines.append(Line(kind=kind, text=text, speaker=ln.get("speaker"), raw=""))
            out.append(Scene(show=show, episode_id=episode_id, scene_index=scene_index, lines=lines))
    return out


# --- splitting ------------------------------------------------------------

def _allocate(n: int, ratios: Sequence[float]) -> list[int]:
    """Largest-remainder rounding of ``n`` items into len(ratios) buckets."""
    quotas = [r * n for r in ratios]
    base = [math.floor(q) for q in quotas]
    short = n - sum(base)
    order = sorted(range(len(ratios)), key=lambda i: (-(quotas[i] - base[i]), i))
    for i in order[:short]:
        base[i] += 1
    return base


def split_corpus(
    instances: Sequence[MaskedInstanceSet], spec: SplitSpec
) -> dict[str, list[MaskedInstanceSet]]:
    """Partition scenes into train/dev/test, independently per show.

    Chronological policy assigns by scene order; seeded_random shuffles each
    show with a seed derived from (spec.seed, show) first. Raises
    DegenerateSplit when a positive ratio receives zero scenes for some show.
    """
    by_show: dict[str, list[MaskedInstanceSet]] = {}
    for inst in instances:
        by_show.setdefault(inst.show, []).append(inst)
    result: dict[str, list[MaskedInstanceSet]] = {name: [] for name in SPLIT_NAMES}
    for show in sorted(by_show):
        scenes = sorted(by_show[show], key=lambda s: s.scene_index)
        if spec.policy == SEEDED_RANDOM:
            rng = np.random.default_rng(derive_scene_seed(spec.seed, show, "__split__", 0))
            order = list(rng.permutation(len(scenes)))
            scenes = [scenes[i] for i in order]
        sizes = _allocate(len(scenes), spec.ratios)
        for name, ratio, size in zip(SPLIT_NAMES, spec.ratios, sizes):
            if ratio > 0 and size == 0:
                raise DegenerateSplit(
                    f"show {show!r}: ratio {ratio} for {name!r} yields no scenes (n={len(scenes)})"
                )
        start = 0
        for name, size in zip(SPLIT_NAMES, sizes):
            result[name].extend(scenes[start:start + size])
            start += size
    for name in SPLIT_NAMES:
        result[name].sort(key=lambda s: (s.show, s.scene_index))
    return result


# --- statistics -----------------------------------------------------------

@dataclass
class ShowStats:
    scene_counts: dict[str, int] = field(default_factory=dict)
    line_count: int = 0
    utterance_avg: float = 0.0
    utterance_max: int = 0
    scene_avg: float = 0.0
    scene_max: int = 0
    per_character: dict[str, int] = field(default_factory=dict)
    character_avg: float = 0.0
    character_max: int = 0

    def to_dict(self) -> dict:
        return {
            "scenes": dict(self.scene_counts),
            "lines": self.line_count,
            "tokens_per_utterance": {"avg": self.utterance_avg, "max": self.utterance_max},
            "tokens_per_scene": {"avg": self.scene_avg, "max": self.scene_max},
            "tokens_per_character": {"avg": self.character_avg, "max": self.character_max},
            "character_tokens": dict(sorted(self.per_character.items())),
        }


@dataclass
class StatsReport:
    per_show: dict[str, ShowStats]
    totals: ShowStats

    def to_dict(self) -> dict:
        return {
            "shows": {show: st.to_dict() for show, st in sorted(self.per_show.items())},
            "totals": self.totals.to_dict(),
        }


def _finalize(stats: ShowStats, line_tokens: list[int], scene_tokens: list[int]) -> None:
    stats.line_count = len(line_tokens)
    if line_tokens:
        stats.utterance_avg = sum(line_tokens) / len(line_tokens)
        stats.utterance_max = max(line_tokens)
    if scene_tokens:
        stats.scene_avg = sum(scene_tokens) / len(scene_tokens)
        stats.scene_max = max(scene_tokens)
    if stats.per_character:
        values = list(stats.per_character.values())
        stats.character_avg = sum(values) / len(values)
        stats.character_max = max(values)


def compute_stats(
    corpus: Mapping[str, Sequence[MaskedInstanceSet]] | Sequence[MaskedInstanceSet],
    roster: Sequence[str] | None = None,
) -> StatsReport:
    """Token and scene statistics per show.

    ``corpus`` is either a flat scene list (counted under split "all") or a
    mapping of split name to scenes. Every line, background included, counts
    as one utterance for the token statistics, so a scene's token total is
    exactly the sum over its lines. Character totals resolve masked IDs
    through gold and keep only roster names when a roster is given.
    """
    if isinstance(corpus, Mapping):
        splits = {name: list(scenes) for name, scenes in corpus.items()}
    else:
        splits = {"all": list(corpus)}

    shows = sorted({inst.show for scenes in splits.values() for inst in scenes})
    per_show = {show: ShowStats() for show in shows}
    totals = ShowStats()
    line_tok: dict[str, list[int]] = {show: [] for show in shows}
    scene_tok: dict[str, list[int]] = {show: [] for show in shows}
    all_line_tok: list[int] = []
    all_scene_tok: list[int] = []

    for split_name, scenes in splits.items():
        for inst in scenes:
            st = per_show[inst.show]
            st.scene_counts[split_name] = st.scene_counts.get(split_name, 0) + 1
            totals.scene_counts[split_name] = totals.scene_counts.get(split_name, 0) + 1
            counts = [count_tokens(ln.text) for ln in inst.lines]
            line_tok[inst.show].extend(counts)
            all_line_tok.extend(counts)
            scene_tok[inst.show].append(sum(counts))
            all_scene_tok.append(sum(counts))
            for ln, n in zip(inst.lines, counts):
                if ln.speaker_id is None:
                    continue
                name = inst.gold.get(ln.speaker_id)
                if name is None or (roster is not None and name not in roster):
                    continue
                st.per_character[name] = st.per_character.get(name, 0) + n
                totals.per_character[name] = totals.per_character.get(name, 0) + n

    for show in shows:
        _finalize(per_show[show], line_tok[show], scene_tok[show])
    _finalize(totals, all_line_tok, all_scene_tok)
    return StatsReport(per_show=per_show, totals=totals)
