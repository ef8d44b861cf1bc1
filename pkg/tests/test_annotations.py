import math

import numpy as np
import pytest

from tvsg.annotations import (
    COARSE,
    DEPENDENCY,
    REASONING,
    AnnotationRecord,
    EvidenceLabel,
    agreement_report,
    cohen_kappa,
    evidence_code,
    read_annotations,
    record_from_dict,
    record_to_dict,
    validate_annotation,
    write_annotations,
)
from tvsg.errors import LengthMismatch, NoOverlap, SchemaError, ValidationFailed

from helpers import dline, make_inst


def rec(evidence=(("linguistic_style", None),), dependency="none", reasoning=(),
        guess="x", speaker_id="P0", annotator="a1", scene_index=0):
    return AnnotationRecord(
        show="s", episode_id="e0", scene_index=scene_index, speaker_id=speaker_id,
        annotator_id=annotator, guess=guess,
        evidence=tuple(EvidenceLabel(c, f) for c, f in evidence),
        dependency=dependency, reasoning=tuple(reasoning),
    )


INSTANCE = make_inst(
    [dline("P0", "w"), dline("P1", "w")],
    {"P0": "x", "P1": "y"},
    candidates=["x", "y"],
)


class TestEvidenceCode:
    def test_codes(self):
        assert evidence_code(EvidenceLabel("exclusion")) == "exclusion"
        assert evidence_code(EvidenceLabel("fact", "relation")) == "fact:relation"


class TestValidateAnnotation:
    def test_valid_record_passes(self):
        report = validate_annotation(
            rec(evidence=(("fact", "attribute"), ("inside_scene", "mention"))), INSTANCE
        )
        assert report.ok and report.warnings == []

    @pytest.mark.parametrize("record,fragment", [
        (rec(evidence=()), "non-empty"),
        (rec(evidence=(("vibes", None),)), "unknown evidence type"),
        (rec(evidence=(("fact", None),)), "requires a subtype"),
        (rec(evidence=(("linguistic_style", "attribute"),)), "takes no subtype"),
        (rec(evidence=(("fact", "color"),)), "no subtype 'color'"),
        (rec(dependency="both"), "unknown dependency"),
        (rec(reasoning=("induction",)), "unknown reasoning"),
        (rec(guess="zorro"), "not a candidate"),
        (rec(speaker_id="P5"), "does not mask"),
    ])
    def test_error_cases(self, record, fragment):
        report = validate_annotation(record, INSTANCE)
        assert not report.ok
        assert any(fragment in e for e in report.errors), report.errors

    def test_errors_accumulate(self):
        report = validate_annotation(rec(evidence=(), dependency="both"), INSTANCE)
        assert len(report.errors) == 2

    def test_instance_checks_skipped_without_instance(self):
        assert validate_annotation(rec(guess="zorro", speaker_id="P5"), None).ok

    def test_exclusion_without_dependency_warns(self):
        report = validate_annotation(
            rec(evidence=(("exclusion", None),), dependency="none"), INSTANCE
        )
        assert report.ok and len(report.warnings) == 1
        ok = validate_annotation(
            rec(evidence=(("exclusion", None),), dependency="direct"), INSTANCE
        )
        assert ok.warnings == []

    def test_memory_plus_inside_scene_dependency_warns(self):
        pair = (("memory", None), ("inside_scene", "background"))
        warned = validate_annotation(rec(evidence=pair, dependency="direct"), INSTANCE)
        assert warned.ok and len(warned.warnings) == 1
        clean = validate_annotation(rec(evidence=pair, dependency="none"), INSTANCE)
        assert clean.ok and clean.warnings == []


class TestSerialization:
    def test_dict_round_trip(self):
        record = rec(
            evidence=(("fact", "status"), ("personality", None)),
            dependency="indirect", reasoning=("commonsense", "multihop_character"),
        )
        assert record_from_dict(record_to_dict(record)) == record

    def test_fine_key_only_present_for_subtypes(self):
        d = record_to_dict(rec(evidence=(("personality", None), ("fact", "relation"))))
        assert d["evidence"] == [{"coarse": "personality"},
                                 {"coarse": "fact", "fine": "relation"}]

    def test_structural_problems_are_collected(self):
        with pytest.raises(ValidationFailed) as exc:
            record_from_dict({
                "scene_ref": {"show": "s", "episode_id": "e0", "scene_index": -1},
                "speaker_id": "", "annotator_id": "a1", "guess": "x",
                "evidence": "lots", "dependency": 7,
            })
        problems = exc.value.problems
        assert any("scene_index" in p for p in problems)
        assert any("speaker_id" in p for p in problems)
        assert any("evidence" in p for p in problems)
        assert any("dependency" in p for p in problems)

    def test_non_dict_rejected(self):
        with pytest.raises(ValidationFailed):
            record_from_dict(["not", "a", "record"])

    def test_file_round_trip(self, tmp_path):
        records = [rec(), rec(speaker_id="P1", guess="y", dependency="direct")]
        path = tmp_path / "ann.jsonl"
        write_annotations(records, path)
        assert read_annotations(path) == records

    def test_read_reports_line_numbers(self, tmp_path):
        path = tmp_path / "ann.jsonl"
        write_annotations([rec()], path)
        with open(path, "a") as fh:
            fh.write('{"scene_ref": {}}\n')
        with pytest.raises(SchemaError) as exc:
            read_annotations(path)
        assert exc.value.line == 2


class TestCohenKappa:
    def test_self_agreement_is_one(self):
        labels = ["a", "b", "a", "c", "b", "a"]
        assert cohen_kappa(labels, labels) == 1.0

    def test_symmetry(self):
        rng = np.random.default_rng(3)
        a = list(rng.choice(["p", "q", "r"], size=60))
        b = list(rng.choice(["p", "q", "r"], size=60))
        assert abs(cohen_kappa(a, b) - cohen_kappa(b, a)) < 1e-12

    def test_hand_computed_case(self):
        # 20 items: 9 both-yes, 7 both-no, A alone 3, B alone 1.
        # p_o = 16/20, p_e = (12/20)(10/20) + (8/20)(10/20) = 0.5 -> kappa 0.6
        a = [True] * 9 + [True] * 3 + [False] * 1 + [False] * 7
        b = [True] * 9 + [False] * 3 + [True] * 1 + [False] * 7
        assert abs(cohen_kappa(a, b) - 0.6) < 1e-12

    def test_independent_annotators_score_near_zero(self):
        rng = np.random.default_rng(11)
        a = list(rng.choice(["yes", "no"], size=1000))
        b = list(rng.choice(["yes", "no"], size=1000))
        assert abs(cohen_kappa(a, b)) < 0.1

    def test_degenerate_total_agreement(self):
        assert cohen_kappa(["z"] * 5, ["z"] * 5) == 1.0

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            cohen_kappa(["a"], ["a", "b"])
        with pytest.raises(LengthMismatch):
            cohen_kappa([], [])


class TestAgreementReport:
    def _records(self, annotator):
        flip = annotator == "a2"
        return [
            rec(annotator=annotator, scene_index=0,
                evidence=(("linguistic_style", None),), dependency="none",
                reasoning=("commonsense",)),
            rec(annotator=annotator, scene_index=1,
                evidence=(("fact", "relation"),) if flip else (("fact", "attribute"),),
                dependency="direct"),
            rec(annotator=annotator, scene_index=2,
                evidence=(("exclusion", None),),
                dependency="indirect" if flip else "direct"),
        ]

    def test_groups_and_supports(self):
        report = agreement_report(
            self._records("a1") + [rec(annotator="a1", scene_index=9)],
            self._records("a2"),
        )
        assert report.n_items == 3  # the scene-9 record has no partner
        groups = report.groups
        assert set(groups) == {"evidence_coarse", "evidence_fine", "dependency_all",
                               "dependency_direct_only", "reasoning"}
        coarse = groups["evidence_coarse"]["per_category"]
        assert coarse["linguistic_style"] == {"kappa": 1.0, "support": 1}
        assert coarse["fact"] == {"kappa": 1.0, "support": 1}
        assert "memory" not in coarse  # never used by either annotator
        fine = groups["evidence_fine"]["per_category"]
        assert fine["fact:attribute"]["kappa"] < 1.0  # subtypes disagree
        assert groups["dependency_all"]["kappa"] < 1.0
        assert groups["reasoning"]["per_category"]["commonsense"]["support"] == 1

    def test_direct_only_collapses_other_values(self):
        a = [rec(annotator="a1", scene_index=i, dependency=d)
             for i, d in enumerate(["direct", "none", "indirect"])]
        b = [rec(annotator="a2", scene_index=i, dependency=d)
             for i, d in enumerate(["direct", "indirect", "none"])]
        report = agreement_report(a, b)
        # as booleans the none/indirect swap is invisible
        assert report.groups["dependency_direct_only"]["kappa"] == 1.0
        assert report.groups["dependency_all"]["kappa"] < 1.0

    def test_no_overlap(self):
        with pytest.raises(NoOverlap):
            agreement_report([rec(scene_index=0)], [rec(scene_index=1, annotator="a2")])


class TestConstants:
    def test_vocabularies_are_frozen(self):
        assert len(COARSE) == 6
        assert DEPENDENCY == ("none", "direct", "indirect")
        assert len(REASONING) == 4
