"""Masking of main-character speaker labels behind per-scene IDs.

Each scene that contains roster dialogue becomes one instance set: every
main character speaking in the scene is replaced by an ID drawn from
P0..P5 via a seeded Fisher-Yates permutation, supporting characters keep
their literal labels, and mentions of character names inside utterance text
are left untouched. The gold map records which ID belongs to which
character; the candidate set is exactly the main characters speaking in the
scene.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import TooManySpeakers
from .parsing import DIALOGUE, AliasTable, Scene

MAX_IDS = 6


def speaker_ids(n: int) -> list[str]:
    """The first n speaker IDs, P0..P5."""
    return [f"P{i}" for i in range(n)]


@dataclass
class MaskedLine:
    """A scene line after masking.

    ``speaker_id`` is set for masked main-character dialogue, ``speaker``
    keeps the literal label of unmasked (supporting) dialogue; background
    lines carry neither.
    """

    kind: str
    text: str
    speaker_id: str | None = None
    speaker: str | None = None


@dataclass
class MaskedInstanceSet:
    """One masked scene; each (scene, speaker ID) pair is one task instance."""

    show: str
    episode_id: str
    scene_index: int
    lines: list[MaskedLine] = field(default_factory=list)
    candidates: tuple[str, ...] = ()
    gold: dict[str, str] = field(default_factory=dict)
    rng_seed: int = 0

    def scene_ref(self) -> tuple[str, str, int]:
        return (self.show, self.episode_id, self.scene_index)

    def instances(self) -> list[str]:
        """Speaker IDs to guess, in ID order."""
        return sorted(self.gold)


def seeded_permutation(n: int, seed: int) -> list[int]:
    """Fisher-Yates shuffle of range(n) driven by a seeded generator.

    The loop draws j uniformly from [0, i] for i = n-1 .. 1 and swaps; the
    exact trace is part of the artifact contract so tests can replay it.
    """
    rng = np.random.default_rng(seed)
    idx = list(range(n))
    for i in range(n - 1, 0, -1):
        j = int(rng.integers(0, i + 1))
        idx[i], idx[j] = idx[j], idx[i]
    return idx


def derive_scene_seed(base_seed: int, show: str, episode_id: str, scene_index: int) -> int:
    """Per-scene seed from the base seed and the scene reference.

    Uses a hash rather than a running counter so the seed of a scene does
    not depend on which other scenes were processed.
    """
    key = f"{base_seed}:{show}:{episode_id}:{scene_index}".encode("utf-8")
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "big")


def anonymize_scene(
    scene: Scene, table: AliasTable, roster: Sequence[str], seed: int
) -> MaskedInstanceSet | None:
    """Mask one scene, or return None when no roster character speaks.

    IDs are assigned by a fresh seeded permutation per scene: the characters
    present (in roster order) are permuted and position i of the permuted
    list receives ID Pi. Raises TooManySpeakers when more than MAX_IDS
    roster characters speak.
    """
    resolved: list[str | None] = []
    present: list[str] = []
    for line in scene.lines:
        canonical = None
        if line.kind == DIALOGUE and line.speaker is not None:
            canonical = table.resolve(line.speaker)
            if canonical is not None and canonical not in roster:
                canonical = None
        resolved.append(canonical)
        if canonical is not None and canonical not in present:
            present.append(canonical)
    if not present:
        return None
    present.sort(key=list(roster).index)
    if len(present) > MAX_IDS:
        raise TooManySpeakers(
            f"{scene.show}/{scene.episode_id}/{scene.scene_index}: "
            f"{len(present)} main characters exceed {MAX_IDS} IDs"
        )

    perm = seeded_permutation(len(present), seed)
    ids = speaker_ids(len(present))
    gold = {ids[i]: present[perm[i]] for i in range(len(present))}
    id_of = {name: sid for sid, name in gold.items()}

    lines: list[MaskedLine] = []
    for line, canonical in zip(scene.lines, resolved):
        if line.kind != DIALOGUE:
            lines.append(MaskedLine(kind=line.kind, text=line.text))
        elif canonical is not None:
            lines.append(MaskedLine(kind=DIALOGUE, text=line.text, speaker_id=id_of[canonical]))
        else:
            speaker = line.speaker.strip() if line.speaker else ""
            lines.append(MaskedLine(kind=DIALOGUE, text=line.text, speaker=speaker))
    return MaskedInstanceSet(
        show=scene.show,
        episode_id=scene.episode_id,
        scene_index=scene.scene_index,
        lines=lines,
        candidates=tuple(sorted(present)),
        gold=gold,
        rng_seed=seed,
    )


def anonymize_corpus(
    scenes: Iterable[Scene], table: AliasTable, roster: Sequence[str], base_seed: int
) -> list[MaskedInstanceSet]:
    """Mask every scene with roster dialogue; scenes without any are dropped."""
    out: list[MaskedInstanceSet] = []
    for scene in scenes:
        seed = derive_scene_seed(base_seed, scene.show, scene.episode_id, scene.scene_index)
        masked = anonymize_scene(scene, table, roster, seed)
        if masked is not None:
            out.append(masked)
    return out
