"""Shared builders for hand-constructed fixtures and randomized episodes."""

from __future__ import annotations

import numpy as np

from tvsg.anonymize import MaskedInstanceSet, MaskedLine
from tvsg.parsing import BACKGROUND, DIALOGUE


def dline(speaker_id: str, text: str) -> MaskedLine:
    return MaskedLine(kind=DIALOGUE, text=text, speaker_id=speaker_id)


def sline(speaker: str, text: str) -> MaskedLine:
    return MaskedLine(kind=DIALOGUE, text=text, speaker=speaker)


def bline(text: str) -> MaskedLine:
    return MaskedLine(kind=BACKGROUND, text=text)


def make_inst(
    lines,
    gold,
    show="s",
    episode_id="e0",
    scene_index=0,
    rng_seed=0,
    candidates=None,
) -> MaskedInstanceSet:
    return MaskedInstanceSet(
        show=show,
        episode_id=episode_id,
        scene_index=scene_index,
        lines=list(lines),
        candidates=tuple(sorted(gold.values())) if candidates is None else tuple(candidates),
        gold=dict(gold),
        rng_seed=rng_seed,
    )


# --- randomized raw episodes with known ground truth ----------------------

CAST = [
    ("ross", ["Ross", "Ross Geller", "ROSS"]),
    ("rachel", ["Rachel", "Rachel Green"]),
    ("monica", ["Monica", "Mon"]),
    ("chandler", ["Chandler", "Chan"]),
    ("joey", ["Joey", "Dr. Drake Ramoray"]),
    ("phoebe", ["Phoebe", "Pheebs"]),
]

SUPPORTING = ["Waiter", "Gunther", "Director", "Nurse", "Passer-by"]

_WORDS = (
    "we were on a break coffee dinosaur pivot lobster sandwich couch "
    "audition smelly cat apartment london yemen transponster unagi"
).split()


def _utterance(rng: np.random.Generator) -> str:
    n = int(rng.integers(1, 8))
    words = [_WORDS[int(rng.integers(len(_WORDS)))] for _ in range(n)]
    if rng.random() < 0.15:
        words.append("(pauses)")
    return " ".join(words)


def random_episode(rng: np.random.Generator) -> tuple[str, list[tuple[str, str | None]]]:
    """Random raw transcript plus the expected (kind, speaker) per kept line.

    Every generated line is classifiable by construction: boundaries start
    with a bracket, dialogue is ``Label: text``, background starts with a
    parenthesis and contains no colon.
    """
    raw_lines: list[str] = []
    expected: list[tuple[str, str | None]] = []
    n_scenes = int(rng.integers(1, 6))
    surfaces = [v for _, variants in CAST for v in variants]
    for _ in range(n_scenes):
        boundary = f"[Scene: location {int(rng.integers(100))}]"
        raw_lines.append(boundary)
        expected.append(("background", None))
        for _ in range(int(rng.integers(1, 9))):
            roll = rng.random()
            if roll < 0.65:
                speaker = surfaces[int(rng.integers(len(surfaces)))]
                raw_lines.append(f"{speaker}: {_utterance(rng)}")
                expected.append(("dialogue", speaker))
            elif roll < 0.8:
                speaker = SUPPORTING[int(rng.integers(len(SUPPORTING)))]
                raw_lines.append(f"{speaker}: {_utterance(rng)}")
                expected.append(("dialogue", speaker))
            else:
                raw_lines.append(f"(they all {_WORDS[int(rng.integers(len(_WORDS)))]})")
                expected.append(("background", None))
        if rng.random() < 0.3:
            raw_lines.append("")  # dropped by the parser
    # guarantee at least one dialogue line
    if not any(kind == "dialogue" for kind, _ in expected):
        raw_lines.append("Ross: hi")
        expected.append(("dialogue", "Ross"))
    return "\n".join(raw_lines) + "\n", expected
