"""Seeded synthetic show generator for experiments and fixtures.

The generator emits raw transcript text and pushes it through the real
parse -> alias -> anonymize pipeline, so synthetic corpora exercise the same
code paths as scraped ones. Two signal placements are supported:

* ``style``: every character draws most tokens from a private vocabulary,
  so a speaker's own lines identify them (separable even without context).
* ``context``: all characters share one filler vocabulary, but after each
  main utterance a supporting "Extra" line addresses the previous speaker
  by name. The discriminating signal sits entirely in OTHER characters'
  lines, which only context-aware models can reach.

Same config, same bytes: everything derives from one seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .anonymize import MaskedInstanceSet, anonymize_corpus
from .errors import ConfigError
from .parsing import AliasTable, Scene, build_alias_table, chain_episodes, default_rules, parse_episode

STYLE = "style"
CONTEXT = "context"
MODES = (STYLE, CONTEXT)

_LOCATIONS = ("apartment", "cafe", "office", "street", "studio", "kitchen", "rooftop")


@dataclass(frozen=True)
class SynthConfig:
    show: str = "synthshow"
    chars: int = 4
    scenes: int = 50
    seed: int = 7
    mode: str = STYLE
    speakers_min: int = 2
    speakers_max: int = 4
    turns_min: int = 4
    turns_max: int = 8
    tokens_min: int = 3
    tokens_max: int = 6
    char_vocab: int = 12
    filler_vocab: int = 16
    scenes_per_episode: int = 10

    def __post_init__(self):
        if not 1 <= self.chars <= 6:
            raise ConfigError("chars must be between 1 and 6")
        if self.scenes < 1:
            raise ConfigError("scenes must be >= 1")
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; choose from {MODES}")
        if not 1 <= self.speakers_min <= self.speakers_max:
            raise ConfigError("need 1 <= speakers_min <= speakers_max")
        if self.turns_min < 1 or self.turns_min > self.turns_max:
            raise ConfigError("need 1 <= turns_min <= turns_max")
        if self.tokens_min < 1 or self.tokens_min > self.tokens_max:
            raise ConfigError("need 1 <= tokens_min <= tokens_max")
        if self.scenes_per_episode < 1:
            raise ConfigError("scenes_per_episode must be >= 1")


def character_names(cfg: SynthConfig) -> list[str]:
    """Canonical names, derived from the show so shows get distinct rosters."""
    return [f"{cfg.show}{i}" for i in range(cfg.chars)]


def cast_list(cfg: SynthConfig) -> list[tuple[str, list[str]]]:
    return [(name, [name.capitalize()]) for name in character_names(cfg)]


def _utterance(rng: np.random.Generator, cfg: SynthConfig, ci: int) -> str:
    n = int(rng.integers(cfg.tokens_min, cfg.tokens_max + 1))
    toks = []
    for _ in range(n):
        if cfg.mode == STYLE and rng.random() < 0.7:
            toks.append(f"tok{ci}x{int(rng.integers(cfg.char_vocab))}")
        else:
            toks.append(f"fill{int(rng.integers(cfg.filler_vocab))}")
    return " ".join(toks)


def generate_raw_episodes(cfg: SynthConfig) -> list[tuple[str, str]]:
    """(episode_id, transcript text) pairs, scenes_per_episode scenes each."""
    rng = np.random.default_rng(cfg.seed)
    names = character_names(cfg)
    display = [n.capitalize() for n in names]
    episodes: list[tuple[str, str]] = []
    lines: list[str] = []
    scene_count = 0
    episode_count = 0

    def close_episode():
        nonlocal lines, episode_count
        if lines:
            episodes.append((f"e{episode_count:03d}", "\n".join(lines) + "\n"))
            episode_count += 1
            lines = []

    for _ in range(cfg.scenes):
        location = _LOCATIONS[int(rng.integers(len(_LOCATIONS)))]
        lines.append(f"[Scene: the {location}]")
        hi = min(cfg.speakers_max, cfg.chars)
        lo = min(cfg.speakers_min, hi)
        k = int(rng.integers(lo, hi + 1))
        speakers = list(rng.choice(cfg.chars, size=k, replace=False))
        n_turns = max(int(rng.integers(cfg.turns_min, cfg.turns_max + 1)), k)
        order = list(rng.permutation(speakers))
        while len(order) < n_turns:
            order.append(int(rng.choice(speakers)))
        for ci in order:
            lines.append(f"{display[ci]}: {_utterance(rng, cfg, ci)}")
            if cfg.mode == CONTEXT:
                filler = _utterance(rng, cfg, ci)
                lines.append(f"Extra: {display[ci]} {filler}")
        scene_count += 1
        if scene_count % cfg.scenes_per_episode == 0:
            close_episode()
    close_episode()
    return episodes


def generate_scenes(cfg: SynthConfig) -> tuple[list[Scene], AliasTable, list[str]]:
    """Parsed scenes in show-global order, plus the alias table and roster."""
    rules = default_rules()
    parsed = [
        parse_episode(text, rules, cfg.show, episode_id)
        for episode_id, text in generate_raw_episodes(cfg)
    ]
    scenes = chain_episodes(parsed)
    table = build_alias_table(cast_list(cfg))
    roster = character_names(cfg)
    return scenes, table, roster


def generate_corpus(cfg: SynthConfig) -> list[MaskedInstanceSet]:
    """Full pipeline: synthesize, parse, and anonymize one show."""
    scenes, table, roster = generate_scenes(cfg)
    return anonymize_corpus(scenes, table, roster, base_seed=cfg.seed)
