# Annotation records, schema validation, and inter-annotator agreement.
#
# When humans do the guessing task we also record WHY they guessed: the
# kind of evidence they used, whether they needed other characters'
# identities first, and which reasoning pattern they applied.

from tvsg.annotations import (
    AnnotationRecord,
    EvidenceLabel,
    agreement_report,
    cohen_kappa,
    validate_annotation,
)
from tvsg.anonymize import MaskedInstanceSet, MaskedLine

scene = MaskedInstanceSet(
    show="demo", episode_id="e0", scene_index=0,
    lines=[MaskedLine(kind="dialogue", text="we were on a break", speaker_id="P0"),
           MaskedLine(kind="dialogue", text="no we were not", speaker_id="P1")],
    candidates=("rachel", "ross"), gold={"P0": "rachel", "P1": "ross"},
    rng_seed=0,
)


def rec(annotator, evidence, dependency="none", guess="rachel", reasoning=()):
    return AnnotationRecord(show="demo", episode_id="e0", scene_index=0,
                            speaker_id="P0", annotator_id=annotator, guess=guess,
                            evidence=tuple(evidence), dependency=dependency,
                            reasoning=tuple(reasoning))


# A fact label needs a subtype: WHAT kind of fact pinned the speaker down?
bad = rec("a1", [EvidenceLabel("fact")])
report = validate_annotation(bad, scene)
print("errors:", report.errors)

good = rec("a1", [EvidenceLabel("fact", "relation")], reasoning=["surface_cue"])
report = validate_annotation(good, scene)
print("valid record errors:", report.errors, "warnings:", report.warnings)

# Exclusion evidence with dependency "none" is legal but suspicious, so it
# warns instead of failing: you usually exclude AFTER identifying others.
odd = rec("a1", [EvidenceLabel("exclusion")])
print("warnings:", validate_annotation(odd, scene).warnings)

# Cohen's kappa corrects raw agreement for chance. Two annotators who agree
# on 16 of 20 binary items but with skewed marginals land at 0.6:
a = [True] * 12 + [False] * 8
b = [True] * 9 + [False] * 3 + [True] + [False] * 7
print(f"\nkappa on the hand-built pair: {cohen_kappa(a, b):.3f}")

# agreement_report pairs two annotators' files by item and reports kappa
# per label group.
ann_a = [rec("a1", [EvidenceLabel("linguistic_style")], dependency="none")]
ann_b = [rec("a2", [EvidenceLabel("linguistic_style")], dependency="direct")]
summary = agreement_report(ann_a, ann_b).to_dict()
print("items compared:", summary["n_items"])
print("evidence_coarse:", summary["groups"]["evidence_coarse"])
print("dependency_all:", summary["groups"]["dependency_all"])
