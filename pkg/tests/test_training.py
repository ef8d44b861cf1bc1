import json

import numpy as np
import pytest

from tvsg.encoder import EncoderConfig
from tvsg.errors import ConfigError, EmptyInput, RowsUnrepresentable
from tvsg.models import LONGFORMER_P, MR, VANILLA, CharModel, MrConfig
from tvsg.training import (
    TrainConfig,
    build_vocab,
    derive_rosters,
    evaluate_accuracy,
    learning_curve,
    predict_records,
    train,
    write_metric_log,
)

from helpers import bline, dline, make_inst, sline


def tiny_train_cfg(**kw):
    base = dict(
        arch=LONGFORMER_P,
        encoder=EncoderConfig(dim=8, layers=1, heads=2, max_len=128),
        mr=MrConfig(rows=4, seg_len=32),
        epochs=2,
        lr=1e-3,
        batch_size=4,
        seed=0,
    )
    base.update(kw)
    return TrainConfig(**base)


class TestTrainConfig:
    @pytest.mark.parametrize("kw", [
        dict(arch="rnn"), dict(epochs=0), dict(batch_size=0),
        dict(lr=-1.0), dict(patience=-1),
    ])
    def test_validation(self, kw):
        with pytest.raises(ConfigError):
            tiny_train_cfg(**kw)


class TestDeriveRosters:
    def test_orders_by_turn_count_then_name(self):
        lines = [dline("P0", "a"), dline("P0", "a"), dline("P0", "a"),
                 dline("P1", "b"), dline("P2", "c")]
        inst = make_inst(lines, {"P0": "x", "P1": "y", "P2": "z"})
        assert derive_rosters([inst]) == {"s": ["x", "y", "z"]}

    def test_candidates_seed_zero_counts(self):
        inst = make_inst([dline("P0", "a")], {"P0": "x"}, candidates=["w", "x"])
        assert derive_rosters([inst]) == {"s": ["x", "w"]}

    def test_shows_are_independent(self):
        a = make_inst([dline("P0", "a")], {"P0": "x"}, show="one")
        b = make_inst([dline("P0", "a")], {"P0": "q"}, show="two")
        rosters = derive_rosters([a, b])
        assert rosters == {"one": ["x"], "two": ["q"]}


class TestBuildVocab:
    def test_covers_text_and_supporting_names(self):
        inst = make_inst(
            [dline("P0", "coffee time"), sline("Gunther", "refill"), bline("door slams")],
            {"P0": "x"},
        )
        vocab = build_vocab([inst])
        for word in ("coffee", "time", "gunther", "refill", "door", "slams"):
            assert word in vocab.index


class TestEvaluateAccuracy:
    def test_unrepresentable_scenes_count_as_wrong(self):
        crowded = make_inst(
            [dline("P0", "a"), dline("P1", "b"), dline("P2", "c")],
            {"P0": "x", "P1": "y", "P2": "z"},
        )
        easy = make_inst([dline("P0", "a")], {"P0": "x"})
        model = CharModel(
            MR, build_vocab([crowded, easy]), {"s": ["x", "y", "z"]},
            EncoderConfig(dim=8, layers=1, heads=2, max_len=64),
            mr=MrConfig(rows=2, seg_len=8),
        )
        with pytest.raises(RowsUnrepresentable):
            model.predict_scene(crowded)
        # 3 instances forfeited, the single-candidate one is free
        assert evaluate_accuracy(model, [crowded, easy]) == 0.25

    def test_empty_input(self):
        model = CharModel(
            VANILLA, build_vocab([]), {"s": ["x"]},
            EncoderConfig(dim=8, layers=1, heads=2),
        )
        with pytest.raises(EmptyInput):
            evaluate_accuracy(model, [])


class TestTrain:
    def test_empty_splits_rejected(self):
        inst = make_inst([dline("P0", "a")], {"P0": "x"})
        with pytest.raises(EmptyInput):
            train(tiny_train_cfg(), [], [inst])
        with pytest.raises(EmptyInput):
            train(tiny_train_cfg(), [inst], [])

    def test_two_runs_are_identical(self, small_corpus):
        cfg = tiny_train_cfg()
        train_set, dev_set = small_corpus[:8], small_corpus[8:]
        model_a, log_a = train(cfg, train_set, dev_set)
        model_b, log_b = train(cfg, train_set, dev_set)
        assert log_a == log_b
        for k in model_a.params:
            assert np.array_equal(model_a.params[k], model_b.params[k])

    def test_log_shape_and_best_row(self, small_corpus):
        cfg = tiny_train_cfg(epochs=3)
        model, log = train(cfg, small_corpus[:8], small_corpus[8:])
        dev_rows = [r for r in log if r["metric"] == "instance_accuracy"]
        loss_rows = [r for r in log if r["metric"] == "loss"]
        best = log[-1]
        assert len(dev_rows) == len(loss_rows)
        assert [r["epoch"] for r in loss_rows] == list(range(1, len(loss_rows) + 1))
        assert best["metric"] == "best_instance_accuracy"
        assert best["value"] == max(r["value"] for r in dev_rows)
        assert evaluate_accuracy(model, small_corpus[8:]) == best["value"]

    def test_perfect_dev_accuracy_stops_training(self):
        inst = make_inst([dline("P0", "a")], {"P0": "x"})
        cfg = tiny_train_cfg(epochs=50)
        _, log = train(cfg, [inst], [inst])
        # a single candidate makes dev accuracy 1.0 from epoch one
        assert log == [
            {"epoch": 1, "split": "train", "metric": "loss", "value": log[0]["value"]},
            {"epoch": 1, "split": "dev", "metric": "instance_accuracy", "value": 1.0},
            {"epoch": 1, "split": "dev", "metric": "best_instance_accuracy", "value": 1.0},
        ]

    def test_patience_stops_on_plateau(self, small_corpus):
        cfg = tiny_train_cfg(epochs=10, lr=0.0, patience=2)
        _, log = train(cfg, small_corpus[:8], small_corpus[8:])
        # lr 0 freezes dev accuracy, so epoch 1 is best and 2 more run
        assert max(r["epoch"] for r in log) == 3
        assert log[-1]["epoch"] == 1

    def test_vocab_comes_from_train_split_only(self):
        train_inst = make_inst([dline("P0", "alpha beta")], {"P0": "x"})
        dev_inst = make_inst([dline("P0", "gamma")], {"P0": "x"})
        model, _ = train(tiny_train_cfg(epochs=1), [train_inst], [dev_inst])
        assert "alpha" in model.vocab.index
        assert "gamma" not in model.vocab.index


class TestLearningCurve:
    def test_one_entry_per_donor_prefix(self):
        main = [make_inst([dline("P0", "a a")], {"P0": "x"}, show="main",
                          episode_id="e0", scene_index=i) for i in range(2)]
        donor = [make_inst([dline("P0", "b b")], {"P0": "q"}, show="extra",
                           episode_id="e0", scene_index=i) for i in range(2)]
        curve = learning_curve(
            tiny_train_cfg(epochs=1), "main", ["extra"],
            {"main": main, "extra": donor}, dev_target=main,
        )
        assert [row["donors"] for row in curve] == [0, 1]
        assert curve[0]["shows"] == ["main"]
        assert curve[1]["shows"] == ["main", "extra"]
        assert all(0.0 <= row["dev_accuracy"] <= 1.0 for row in curve)

    def test_unknown_shows_rejected(self):
        data = {"main": [make_inst([dline("P0", "a")], {"P0": "x"}, show="main")]}
        with pytest.raises(ConfigError):
            learning_curve(tiny_train_cfg(), "ghost", [], data, data["main"])
        with pytest.raises(ConfigError):
            learning_curve(tiny_train_cfg(), "main", ["ghost"], data, data["main"])


class TestPredictRecords:
    def _model(self, corpus, arch=LONGFORMER_P, rows=4):
        return CharModel(
            arch, build_vocab(corpus),
            derive_rosters(corpus),
            EncoderConfig(dim=8, layers=1, heads=2, max_len=128),
            mr=MrConfig(rows=rows, seg_len=32),
        )

    def test_one_record_per_instance(self, small_corpus):
        model = self._model(small_corpus)
        records, skipped = predict_records(model, small_corpus)
        assert skipped == 0
        assert len(records) == sum(len(inst.gold) for inst in small_corpus)
        by_key = {(r.show, r.episode_id, r.scene_index, r.speaker_id) for r in records}
        assert len(by_key) == len(records)
        inst = small_corpus[0]
        rec = [r for r in records if (r.episode_id, r.scene_index) ==
               (inst.episode_id, inst.scene_index)][0]
        assert rec.gold == inst.gold[rec.speaker_id]
        assert rec.candidates == tuple(inst.candidates)
        assert rec.predicted in inst.candidates
        assert set(rec.logits) == set(model.rosters[inst.show])

    def test_keep_logits_false(self, small_corpus):
        records, _ = predict_records(self._model(small_corpus), small_corpus[:2],
                                     keep_logits=False)
        assert all(r.logits is None for r in records)

    def test_joint_decoding_never_repeats_a_guess(self, small_corpus):
        records, _ = predict_records(self._model(small_corpus), small_corpus, joint=True)
        per_scene: dict = {}
        for r in records:
            per_scene.setdefault((r.episode_id, r.scene_index), []).append(r.predicted)
        for guesses in per_scene.values():
            assert len(set(guesses)) == len(guesses)

    def test_skip_counts_unrepresentable_scenes(self, small_corpus):
        model = self._model(small_corpus, arch=MR, rows=1)
        crowded = [inst for inst in small_corpus if len(inst.gold) > 1]
        assert crowded, "fixture should contain multi-speaker scenes"
        with pytest.raises(RowsUnrepresentable):
            predict_records(model, small_corpus)
        records, skipped = predict_records(model, small_corpus, on_error="skip")
        assert skipped == len(crowded)
        assert len(records) == sum(len(i.gold) for i in small_corpus if len(i.gold) == 1)

    def test_on_error_validated(self, small_corpus):
        with pytest.raises(ConfigError):
            predict_records(self._model(small_corpus), small_corpus, on_error="ignore")


class TestMetricLog:
    def test_write_and_append(self, tmp_path):
        path = tmp_path / "log.jsonl"
        write_metric_log([{"epoch": 1, "value": 0.5}], path)
        write_metric_log([{"epoch": 2, "value": 0.75}], path, append=True)
        rows = [json.loads(line) for line in path.read_text().splitlines()]
        assert rows == [{"epoch": 1, "value": 0.5}, {"epoch": 2, "value": 0.75}]
        write_metric_log([{"epoch": 9}], path)
        rows = [json.loads(line) for line in path.read_text().splitlines()]
        assert rows == [{"epoch": 9}]
