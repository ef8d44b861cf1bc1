"""Evidence-type annotation schema, validation, and agreement statistics.

An annotation record explains one guess: which evidence types supported it
(coarse categories, two of which carry fine subtypes), whether the evidence
depends on other characters' identities (none / direct / indirect), and
which reasoning patterns were involved. Agreement between two annotators is
Cohen's kappa computed from the annotators' marginal label frequencies;
set-valued groups report the mean kappa over per-category presence
indicators.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Hashable, Iterable, Sequence

from .errors import LengthMismatch, NoOverlap, SchemaError, ValidationFailed

LINGUISTIC_STYLE = "linguistic_style"
PERSONALITY = "personality"
FACT = "fact"
MEMORY = "memory"
INSIDE_SCENE = "inside_scene"
EXCLUSION = "exclusion"

COARSE = (LINGUISTIC_STYLE, PERSONALITY, FACT, MEMORY, INSIDE_SCENE, EXCLUSION)
FINE = {
    FACT: ("attribute", "relation", "status"),
    INSIDE_SCENE: ("background", "mention"),
}
DEPENDENCY = ("none", "direct", "indirect")
REASONING = ("default_conjunction", "multihop_character", "multihop_textual", "commonsense")


@dataclass(frozen=True, order=True)
class EvidenceLabel:
    """One evidence tag; legality is checked by validate_annotation, not here."""

    coarse: str
    fine: str | None = None


def evidence_code(label: EvidenceLabel) -> str:
    """Stable string code: subtype labels read ``coarse:fine``."""
    return f"{label.coarse}:{label.fine}" if label.fine else label.coarse


FINE_CODES = tuple(
    code
    for coarse in COARSE
    for code in ([coarse] if coarse not in FINE else [f"{coarse}:{f}" for f in FINE[coarse]])
)


@dataclass(frozen=True)
class AnnotationRecord:
    """One annotator's explanation of one (scene, speaker ID) guess."""

    show: str
    episode_id: str
    scene_index: int
    speaker_id: str
    annotator_id: str
    guess: str
    evidence: tuple[EvidenceLabel, ...]
    dependency: str
    reasoning: tuple[str, ...] = ()
    timestamp: str = ""

    def scene_ref(self) -> tuple[str, str, int]:
        return (self.show, self.episode_id, self.scene_index)

    def key(self) -> tuple[str, str, int, str]:
        return (self.show, self.episode_id, self.scene_index, self.speaker_id)

    def coarse_set(self) -> set[str]:
        return {e.coarse for e in self.evidence}


@dataclass
class ValidationReport:
    errors: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors


def validate_annotation(record: AnnotationRecord, instance) -> ValidationReport:
    """Check one record against the schema and its scene.

    Errors: illegal coarse/fine combinations, empty evidence, unknown
    dependency or reasoning values, a guess outside the scene's candidates,
    or a speaker ID the scene does not mask. Warnings flag combinations the
    schema allows but that usually need cross-character context: exclusion
    evidence with no dependency, and a memory + inside-scene pair marked
    dependent.
    """
    report = ValidationReport()
    if not record.evidence:
        report.errors.append("evidence must be non-empty")
    for label in record.evidence:
        if label.coarse not in COARSE:
            report.errors.append(f"unknown evidence type {label.coarse!r}")
            continue
        subtypes = FINE.get(label.coarse)
        if subtypes is None and label.fine is not None:
            report.errors.append(f"{label.coarse!r} takes no subtype, got {label.fine!r}")
        elif subtypes is not None and label.fine is None:
            report.errors.append(f"{label.coarse!r} requires a subtype from {subtypes}")
        elif subtypes is not None and label.fine not in subtypes:
            report.errors.append(f"{label.coarse!r} has no subtype {label.fine!r}")
    if record.dependency not in DEPENDENCY:
        report.errors.append(f"unknown dependency {record.dependency!r}")
    for r in record.reasoning:
        if r not in REASONING:
            report.errors.append(f"unknown reasoning pattern {r!r}")
    if instance is not None:
        if record.guess not in instance.candidates:
            report.errors.append(f"guess {record.guess!r} is not a candidate")
        if record.speaker_id not in instance.gold:
            report.errors.append(f"scene does not mask speaker ID {record.speaker_id!r}")

    coarse = record.coarse_set()
    if EXCLUSION in coarse and record.dependency == "none":
        report.warnings.append(
            "exclusion evidence with no dependency: excluded characters' own "
            "dependencies would carry over and cannot be checked from this record"
        )
    if MEMORY in coarse and INSIDE_SCENE in coarse and record.dependency != "none":
        report.warnings.append(
            "memory plus inside-scene evidence is conventionally marked dependency-free"
        )
    return report


# --- serialization --------------------------------------------------------

def record_to_dict(record: AnnotationRecord) -> dict:
    return {
        "scene_ref": {
            "show": record.show,
            "episode_id": record.episode_id,
            "scene_index": record.scene_index,
        },
        "speaker_id": record.speaker_id,
        "annotator_id": record.annotator_id,
        "guess": record.guess,
        "evidence": [
            {"coarse": e.coarse, **({"fine": e.fine} if e.fine else {})}
            for e in record.evidence
        ],
        "dependency": record.dependency,
        "reasoning": list(record.reasoning),
        "timestamp": record.timestamp,
    }


def record_from_dict(rec: dict) -> AnnotationRecord:
    """Parse a record dict; structural problems raise ValidationFailed."""
    problems: list[str] = []
    if not isinstance(rec, dict):
        raise ValidationFailed(["record is not an object"])
    ref = rec.get("scene_ref")
    if not isinstance(ref, dict):
        problems.append("missing scene_ref object")
        ref = {}
    show = ref.get("show")
    episode_id = ref.get("episode_id")
    scene_index = ref.get("scene_index")
    if not isinstance(show, str) or not show:
        problems.append("scene_ref.show must be a non-empty string")
    if not isinstance(episode_id, str) or not episode_id:
        problems.append("scene_ref.episode_id must be a non-empty string")
    if not isinstance(scene_index, int) or scene_index < 0:
        problems.append("scene_ref.scene_index must be a non-negative integer")
    for key in ("speaker_id", "annotator_id", "guess"):
        if not isinstance(rec.get(key), str) or not rec.get(key):
            problems.append(f"{key} must be a non-empty string")
    evidence_raw = rec.get("evidence")
    evidence: list[EvidenceLabel] = []
    if not isinstance(evidence_raw, list):
        problems.append("evidence must be an array")
    else:
        for i, e in enumerate(evidence_raw):
            if not isinstance(e, dict) or not isinstance(e.get("coarse"), str):
                problems.append(f"evidence[{i}] must be an object with a coarse type")
                continue
            fine = e.get("fine")
            if fine is not None and not isinstance(fine, str):
                problems.append(f"evidence[{i}].fine must be a string")
                continue
            evidence.append(EvidenceLabel(coarse=e["coarse"], fine=fine))
    dependency = rec.get("dependency")
    if not isinstance(dependency, str):
        problems.append("dependency must be a string")
    reasoning_raw = rec.get("reasoning", [])
    if not isinstance(reasoning_raw, list) or not all(isinstance(r, str) for r in reasoning_raw):
        problems.append("reasoning must be an array of strings")
        reasoning_raw = []
    timestamp = rec.get("timestamp", "")
    if not isinstance(timestamp, str):
        problems.append("timestamp must be a string")
    if problems:
        raise ValidationFailed(problems)
    return AnnotationRecord(
        show=show,
        episode_id=episode_id,
        scene_index=scene_index,
        speaker_id=rec["speaker_id"],
        annotator_id=rec["annotator_id"],
        guess=rec["guess"],
        evidence=tuple(evidence),
        dependency=dependency,
        reasoning=tuple(reasoning_raw),
        timestamp=timestamp,
    )


def write_annotations(records: Iterable[AnnotationRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(json.dumps(record_to_dict(rec), ensure_ascii=False))
            fh.write("\n")


def read_annotations(path: str | Path) -> list[AnnotationRecord]:
    out: list[AnnotationRecord] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            if not raw.strip():
                continue
            try:
                rec = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"invalid JSON: {exc.msg}", line=lineno) from exc
            try:
                out.append(record_from_dict(rec))
            except ValidationFailed as exc:
                raise SchemaError(f"bad annotation record: {exc}", line=lineno) from exc
    return out


# --- agreement ------------------------------------------------------------

def cohen_kappa(labels_a: Sequence[Hashable], labels_b: Sequence[Hashable]) -> float:
    """Chance-corrected agreement between two aligned label sequences.

    kappa = (p_o - p_e) / (1 - p_e) with p_e from the two annotators'
    marginal frequencies. Degenerate total agreement (p_e = 1, which forces
    p_o = 1) returns 1.0.
    """
    if len(labels_a) != len(labels_b):
        raise LengthMismatch(f"{len(labels_a)} vs {len(labels_b)} labels")
    n = len(labels_a)
    if n == 0:
        raise LengthMismatch("cannot compute agreement over zero items")
    p_o = sum(a == b for a, b in zip(labels_a, labels_b)) / n
    cats = set(labels_a) | set(labels_b)
    p_e = sum(
        (sum(a == c for a in labels_a) / n) * (sum(b == c for b in labels_b) / n)
        for c in cats
    )
    if 1.0 - p_e < 1e-12:
        return 1.0
    return (p_o - p_e) / (1.0 - p_e)


@dataclass
class AgreementReport:
    n_items: int
    groups: dict[str, dict]

    def to_dict(self) -> dict:
        return {"n_items": self.n_items, "groups": self.groups}


def _presence_kappas(
    pairs: Sequence[tuple[set, set]], categories: Sequence[str]
) -> dict:
    per_category: dict[str, dict] = {}
    kappas: list[float] = []
    for cat in categories:
        a = [cat in pa for pa, _ in pairs]
        b = [cat in pb for _, pb in pairs]
        support = sum(x or y for x, y in zip(a, b))
        if support == 0:
            continue
        k = cohen_kappa(a, b)
        per_category[cat] = {"kappa": k, "support": support}
        kappas.append(k)
    mean = sum(kappas) / len(kappas) if kappas else None
    return {"kappa": mean, "per_category": per_category}


def agreement_report(
    records_a: Sequence[AnnotationRecord], records_b: Sequence[AnnotationRecord]
) -> AgreementReport:
    """Kappa per label group over the items both annotators covered.

    Evidence groups average per-category presence kappas (the coarse group
    collapses subtypes); dependency is scored both over all three values and
    as direct vs not-direct; reasoning averages its per-pattern kappas.
    Categories neither annotator ever used are left out of the averages.
    """
    by_a = {r.key(): r for r in records_a}
    by_b = {r.key(): r for r in records_b}
    common = sorted(set(by_a) & set(by_b))
    if not common:
        raise NoOverlap("annotators share no (scene, speaker ID) items")
    pairs = [(by_a[k], by_b[k]) for k in common]

    coarse_pairs = [(a.coarse_set(), b.coarse_set()) for a, b in pairs]
    fine_pairs = [
        ({evidence_code(e) for e in a.evidence}, {evidence_code(e) for e in b.evidence})
        for a, b in pairs
    ]
    reasoning_pairs = [(set(a.reasoning), set(b.reasoning)) for a, b in pairs]
    dep_a = [a.dependency for a, _ in pairs]
    dep_b = [b.dependency for _, b in pairs]

    groups = {
        "evidence_coarse": _presence_kappas(coarse_pairs, COARSE),
        "evidence_fine": _presence_kappas(fine_pairs, FINE_CODES),
        "dependency_all": {"kappa": cohen_kappa(dep_a, dep_b)},
        "dependency_direct_only": {
            "kappa": cohen_kappa(
                [d == "direct" for d in dep_a], [d == "direct" for d in dep_b]
            )
        },
        "reasoning": _presence_kappas(reasoning_pairs, REASONING),
    }
    return AgreementReport(n_items=len(common), groups=groups)
