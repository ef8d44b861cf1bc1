"""Rule-based parsing of episode transcripts into scenes.

An episode is plain UTF-8 text, one line per transcript line. Scene
boundaries are detected by configurable rules (location patterns, leading
keywords, bracket markers); everything else is classified as dialogue when it
looks like ``Speaker: utterance`` and as background otherwise. Parsing is
lossless: every kept line remembers its surface form, so concatenating the
parsed scenes reproduces the non-empty input lines in order. Misclassified
lines are never fatal, the worst outcome is a wrong kind.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import ConfigError, DuplicateVariant, EmptyEpisode, NoMainCharacters

DIALOGUE = "dialogue"
BACKGROUND = "background"

# Characters that may appear in a speaker label ("Mr. Geller", "Ross and
# Rachel", "Dr. Drake Ramoray").  Anything else before the delimiter means the
# line is not dialogue.
_SPEAKER_PREFIX_RE = re.compile(r"[\w .,'&-]+\Z")
_CONTROL_RE = re.compile(r"[\x00-\x08\x0b-\x1f\x7f]")
_MAX_SPEAKER_WORDS = 5


@dataclass(frozen=True)
class RuleConfig:
    """Boundary and dialogue detection rules for one transcript format.

    boundary_location_patterns: regexes matched against the stripped line;
    a match starts a new scene.
    boundary_keywords: a line starting with one of these words (followed by
    whitespace, the delimiter, or end of line) starts a new scene.
    boundary_bracket_markers: a line starting with one of these prefixes
    starts a new scene.
    speaker_delimiter: separates the speaker label from the utterance.
    """

    boundary_location_patterns: tuple[str, ...] = (r"\[.*\]\s*\Z",)
    boundary_keywords: tuple[str, ...] = ("Scene", "Cut")
    boundary_bracket_markers: tuple[str, ...] = ("[",)
    speaker_delimiter: str = ":"

    def __post_init__(self):
        if not self.speaker_delimiter:
            raise ConfigError("speaker_delimiter must be non-empty")
        for pat in self.boundary_location_patterns:
            try:
                re.compile(pat)
            except re.error as exc:
                raise ConfigError(f"bad boundary pattern {pat!r}: {exc}") from exc


@dataclass
class Line:
    """One transcript line; ``speaker`` is the surface label, dialogue only.

    ``raw`` keeps the control-stripped surface line so parsing is lossless.
    """

    kind: str
    text: str
    speaker: str | None = None
    raw: str = ""


@dataclass
class Scene:
    show: str
    episode_id: str
    scene_index: int
    lines: list[Line] = field(default_factory=list)

    def dialogue(self) -> list[Line]:
        return [ln for ln in self.lines if ln.kind == DIALOGUE]


def default_rules() -> RuleConfig:
    return RuleConfig()


def load_rules(path: str | Path) -> RuleConfig:
    """Read a RuleConfig from a ``key: value`` file.

    Repeatable keys: ``boundary_location_pattern``, ``boundary_keyword``,
    ``bracket_marker``. Single: ``speaker_delimiter``. ``#`` starts a comment
    line; blank lines are ignored.
    """
    patterns: list[str] = []
    keywords: list[str] = []
    markers: list[str] = []
    delimiter: str | None = None
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        key, sep, value = stripped.partition(":")
        if not sep:
            raise ConfigError(f"{path}:{lineno}: expected 'key: value'")
        key, value = key.strip(), value.strip()
        if key == "boundary_location_pattern":
            patterns.append(value)
        elif key == "boundary_keyword":
            keywords.append(value)
        elif key == "bracket_marker":
            markers.append(value)
        elif key == "speaker_delimiter":
            delimiter = value
        else:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
    defaults = RuleConfig()
    return RuleConfig(
        boundary_location_patterns=tuple(patterns) or defaults.boundary_location_patterns,
        boundary_keywords=tuple(keywords) or defaults.boundary_keywords,
        boundary_bracket_markers=tuple(markers) or defaults.boundary_bracket_markers,
        speaker_delimiter=delimiter if delimiter is not None else defaults.speaker_delimiter,
    )


def _is_boundary(stripped: str, rules: RuleConfig, patterns: list[re.Pattern]) -> bool:
    for marker in rules.boundary_bracket_markers:
        if stripped.startswith(marker):
            return True
    for pat in patterns:
        if pat.match(stripped):
            return True
    lowered = stripped.casefold()
    for kw in rules.boundary_keywords:
        k = kw.casefold()
        if lowered.startswith(k):
            rest = stripped[len(k):]
            if not rest or rest[0] in (" ", "\t", rules.speaker_delimiter):
                return True
    return False


def _match_dialogue(stripped: str, rules: RuleConfig) -> tuple[str, str] | None:
    idx = stripped.find(rules.speaker_delimiter)
    if idx <= 0:
        return None
    prefix = stripped[:idx]
    if not _SPEAKER_PREFIX_RE.fullmatch(prefix):
        return None
    speaker = prefix.strip()
    if not speaker or len(speaker.split()) > _MAX_SPEAKER_WORDS:
        return None
    return speaker, stripped[idx + len(rules.speaker_delimiter):].strip()


def parse_episode(text: str, rules: RuleConfig, show: str, episode_id: str) -> list[Scene]:
    """Split episode text into scenes of classified lines.

    Boundary lines open a new scene and are kept as its first background
    line. Content before the first boundary forms a leading scene. Control
    characters other than newline are stripped; empty lines are dropped.
    Raises EmptyEpisode when no dialogue line exists at all.
    """
    patterns = [re.compile(p) for p in rules.boundary_location_patterns]
    scenes: list[Scene] = []
    current: list[Line] = []

    def flush():
        if current:
            scenes.append(Scene(show, episode_id, len(scenes), list(current)))
            current.clear()

    for raw in text.splitlines():
        line = _CONTROL_RE.sub("", raw)
        stripped = line.strip()
        if not stripped:
            continue
        if _is_boundary(stripped, rules, patterns):
            flush()
            current.append(Line(BACKGROUND, text=stripped, raw=line))
            continue
        hit = _match_dialogue(stripped, rules)
        if hit is not None:
            speaker, utterance = hit
            current.append(Line(DIALOGUE, text=utterance, speaker=speaker, raw=line))
        else:
            current.append(Line(BACKGROUND, text=stripped, raw=line))
    flush()

    if not any(ln.kind == DIALOGUE for sc in scenes for ln in sc.lines):
        raise EmptyEpisode(f"{show}/{episode_id}: no dialogue lines found")
    return scenes


def chain_episodes(episodes: Iterable[list[Scene]]) -> list[Scene]:
    """Renumber scenes from consecutive episodes into one show-global order."""
    out: list[Scene] = []
    for scenes in episodes:
        for scene in scenes:
            out.append(Scene(scene.show, scene.episode_id, len(out), scene.lines))
    return out


@dataclass(frozen=True)
class AliasTable:
    """Maps case-folded surface speaker labels to canonical character names."""

    mapping: dict[str, str]
    canonicals: tuple[str, ...]

    def resolve(self, surface: str) -> str | None:
        return self.mapping.get(surface.strip().casefold())


def build_alias_table(cast_list: Sequence[tuple[str, Iterable[str]]]) -> AliasTable:
    """Build an AliasTable from (canonical, variants) pairs.

    Each canonical is implicitly a variant of itself. A variant claimed by
    two different canonicals raises DuplicateVariant.
    """
    mapping: dict[str, str] = {}
    canonicals: list[str] = []
    for canonical, variants in cast_list:
        canonicals.append(canonical)
        for variant in [canonical, *variants]:
            key = variant.strip().casefold()
            owner = mapping.get(key)
            if owner is not None and owner != canonical:
                raise DuplicateVariant(
                    f"variant {variant!r} claimed by both {owner!r} and {canonical!r}"
                )
            mapping[key] = canonical
    return AliasTable(mapping=mapping, canonicals=tuple(canonicals))


def normalize_speaker(surface: str, table: AliasTable) -> str | None:
    """Resolve a surface speaker label to its canonical name, or None."""
    return table.resolve(surface)


def select_main_characters(
    scenes: Iterable[Scene], table: AliasTable, max_n: int = 6
) -> list[str]:
    """Pick the roster: top ``max_n`` canonicals by dialogue turn count.

    Ties break lexicographically. The returned order fixes the class index
    used by every model head. Raises NoMainCharacters when nothing resolves.
    """
    counts: dict[str, int] = {}
    for scene in scenes:
        for line in scene.lines:
            if line.kind != DIALOGUE or line.speaker is None:
                continue
            canonical = table.resolve(line.speaker)
            if canonical is not None:
                counts[canonical] = counts.get(canonical, 0) + 1
    if not counts:
        raise NoMainCharacters("no speaker resolved through the alias table")
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return [name for name, _ in ranked[:max_n]]
