"""Confusion-matrix metrics and rank-based AUC against pairwise oracles."""

import json

import numpy as np
import pytest
from numpy.testing import assert_allclose

from allprep.dataprep import CLASS_LABELS
from allprep.errors import InvalidDistributionError, ShapeMismatchError, UnknownLabelError
from allprep.metrics import (
    ConfusionMatrix,
    accuracy,
    auc_ovr,
    build_report,
    confusion_from_predictions,
    micro_f1,
    precision_recall_f1,
    read_predictions_csv,
    read_scores_csv,
    report_json,
)


def pairwise_auc(pos_scores, neg_scores):
    """Brute-force U statistic: mean over all (pos, neg) pairs of
    win=1, tie=0.5, loss=0."""
    total = 0.0
    for p in pos_scores:
        for q in neg_scores:
            if p > q:
                total += 1.0
            elif p == q:
                total += 0.5
    return total / (len(pos_scores) * len(neg_scores))


def fixture_397_of_400():
    """100 per class with exactly 3 cross-class confusions."""
    pairs = []
    for label in CLASS_LABELS:
        pairs.extend([(label, label)] * 100)
    pairs[0] = ("Benign", "EarlyPreB")
    pairs[100] = ("EarlyPreB", "PreB")
    pairs[200] = ("PreB", "ProB")
    return confusion_from_predictions(pairs)


class TestConfusionMatrix:
    def test_perfect_diagonal(self):
        pairs = [(label, label) for label in CLASS_LABELS for _ in range(10)]
        cm = confusion_from_predictions(pairs)
        assert np.array_equal(cm.counts, np.eye(4, dtype=np.int64) * 10)
        assert cm.total == 40

    def test_empty_input(self):
        cm = confusion_from_predictions([])
        assert cm.total == 0
        assert np.all(cm.counts == 0)

    def test_fixture_off_diagonal_sum(self):
        cm = fixture_397_of_400()
        assert cm.total == 400
        assert int(np.trace(cm.counts)) == 397
        assert int(cm.counts.sum() - np.trace(cm.counts)) == 3

    def test_unknown_labels(self):
        with pytest.raises(UnknownLabelError):
            confusion_from_predictions([("Lymphoid", "Benign")])
        with pytest.raises(UnknownLabelError):
            confusion_from_predictions([("Benign", "Other")])

    def test_merge(self):
        a = confusion_from_predictions([("Benign", "Benign")])
        b = confusion_from_predictions([("Benign", "PreB"), ("ProB", "ProB")])
        merged = a.merge(b)
        assert merged.total == 3
        assert merged.counts[0, 0] == 1 and merged.counts[0, 2] == 1

    def test_validation(self):
        with pytest.raises(ShapeMismatchError):
            ConfusionMatrix(CLASS_LABELS, np.zeros((3, 3), dtype=np.int64))
        with pytest.raises(ValueError):
            ConfusionMatrix(("a", "b"), np.array([[1, -1], [0, 0]]))


class TestAccuracy:
    def test_perfect(self):
        cm = confusion_from_predictions([(l, l) for l in CLASS_LABELS])
        acc, flags = accuracy(cm)
        assert acc == 1.0 and flags == []

    def test_headline_fixture_exact(self):
        acc, flags = accuracy(fixture_397_of_400())
        assert acc == 0.9925
        assert flags == []

    def test_binary_point_eight(self):
        cm = ConfusionMatrix(("pos", "neg"), np.array([[50, 10], [10, 30]]))
        acc, _ = accuracy(cm)
        assert_allclose(acc, 0.8)

    def test_empty_flagged(self):
        acc, flags = accuracy(confusion_from_predictions([]))
        assert acc == 0.0
        assert "accuracy_zero_division" in flags


class TestPrecisionRecallF1:
    def test_binary_worked_example(self):
        cm = ConfusionMatrix(("pos", "neg"), np.array([[50, 10], [10, 30]]))
        per_class, macro, weighted, flags = precision_recall_f1(cm)
        assert_allclose(per_class["pos"]["precision"], 50 / 60)
        assert_allclose(per_class["pos"]["recall"], 50 / 60)
        assert_allclose(per_class["pos"]["f1"], 50 / 60)
        assert per_class["pos"]["support"] == 60
        assert flags == []

    def test_perfect_diagonal_all_ones(self):
        cm = confusion_from_predictions([(l, l) for l in CLASS_LABELS for _ in range(5)])
        per_class, macro, weighted, flags = precision_recall_f1(cm)
        for label in CLASS_LABELS:
            assert per_class[label] == {"precision": 1.0, "recall": 1.0, "f1": 1.0, "support": 5}
        assert macro == {"precision": 1.0, "recall": 1.0, "f1": 1.0}
        assert weighted == {"precision": 1.0, "recall": 1.0, "f1": 1.0}
        assert flags == []

    def test_never_predicted_class_flagged(self):
        pairs = [("Benign", "Benign"), ("EarlyPreB", "Benign"), ("PreB", "PreB"), ("ProB", "ProB")]
        per_class, _, _, flags = precision_recall_f1(confusion_from_predictions(pairs))
        assert per_class["EarlyPreB"]["precision"] == 0.0
        assert per_class["EarlyPreB"]["recall"] == 0.0
        assert "precision_zero_division:EarlyPreB" in flags

    def test_supports_sum_to_total(self):
        rng = np.random.default_rng(401)
        for _ in range(20):
            cm = ConfusionMatrix(CLASS_LABELS, rng.integers(0, 30, size=(4, 4)))
            per_class, _, _, _ = precision_recall_f1(cm)
            assert sum(per_class[l]["support"] for l in CLASS_LABELS) == cm.total

    def test_all_rates_in_unit_interval(self):
        rng = np.random.default_rng(409)
        for _ in range(20):
            cm = ConfusionMatrix(CLASS_LABELS, rng.integers(0, 10, size=(4, 4)))
            per_class, macro, weighted, _ = precision_recall_f1(cm)
            for d in list(per_class.values()) + [macro, weighted]:
                for key in ("precision", "recall", "f1"):
                    assert 0.0 <= d[key] <= 1.0


class TestMicroF1:
    def test_equals_accuracy_on_random_matrices(self):
        rng = np.random.default_rng(419)
        for _ in range(30):
            cm = ConfusionMatrix(CLASS_LABELS, rng.integers(0, 25, size=(4, 4)))
            if cm.total == 0:
                continue
            acc, _ = accuracy(cm)
            mf1, _ = micro_f1(cm)
            assert_allclose(mf1, acc, atol=1e-15)

    def test_empty_flagged(self):
        mf1, flags = micro_f1(confusion_from_predictions([]))
        assert mf1 == 0.0 and "micro_f1_zero_division" in flags


class TestAucOvr:
    def test_perfect_separation(self):
        truths = ["Benign"] * 3 + ["EarlyPreB"] * 3 + ["PreB"] * 3 + ["ProB"] * 3
        scores = np.zeros((12, 4))
        for i, t in enumerate(truths):
            c = CLASS_LABELS.index(t)
            scores[i] = 0.1 / 3
            scores[i, c] = 0.9
        per_class, macro = auc_ovr(truths, scores)
        assert per_class == {l: 1.0 for l in CLASS_LABELS}
        assert macro == 1.0

    def test_identical_rows_chance_level(self):
        truths = ["Benign", "EarlyPreB", "PreB", "ProB"] * 3
        scores = np.tile(np.array([0.4, 0.3, 0.2, 0.1]), (12, 1))
        per_class, macro = auc_ovr(truths, scores)
        assert per_class == {l: 0.5 for l in CLASS_LABELS}
        assert macro == 0.5

    def test_six_sample_hand_count(self):
        """3 vs 3 with one tied pair: U = 3 + 1.5 + 1 = 5.5 of 9 pairs."""
        truths = ["A", "B", "A", "B", "A", "B"]
        col_a = np.array([0.9, 0.8, 0.55, 0.55, 0.3, 0.2])
        scores = np.column_stack([col_a, 1.0 - col_a])
        per_class, macro = auc_ovr(truths, scores, labels=("A", "B"))
        assert_allclose(per_class["A"], 5.5 / 9)
        assert_allclose(per_class["B"], 5.5 / 9)
        assert_allclose(macro, 5.5 / 9)
        assert_allclose(
            per_class["A"], pairwise_auc([0.9, 0.55, 0.3], [0.8, 0.55, 0.2])
        )

    def test_matches_pairwise_oracle_random(self):
        rng = np.random.default_rng(421)
        for _ in range(25):
            n = int(rng.integers(8, 24))
            truths = [CLASS_LABELS[i] for i in rng.integers(0, 4, size=n)]
            raw = rng.random((n, 4))
            raw = np.round(raw, 1)  # coarse grid to force score ties
            scores = raw / raw.sum(axis=1, keepdims=True)
            per_class, _ = auc_ovr(truths, scores)
            for c, label in enumerate(CLASS_LABELS):
                pos = [scores[i, c] for i in range(n) if truths[i] == label]
                neg = [scores[i, c] for i in range(n) if truths[i] != label]
                if not pos or not neg:
                    assert per_class[label] is None
                else:
                    assert_allclose(per_class[label], pairwise_auc(pos, neg), atol=1e-12)

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(431)
        col = rng.random(14)
        truths = ["A" if v else "B" for v in rng.integers(0, 2, size=14)]
        base = np.column_stack([col, 1.0 - col])
        squared = np.column_stack([col**2, 1.0 - col**2])
        a1, _ = auc_ovr(truths, base, labels=("A", "B"))
        a2, _ = auc_ovr(truths, squared, labels=("A", "B"))
        assert_allclose(a1["A"], a2["A"], atol=1e-12)
        assert_allclose(a1["B"], a2["B"], atol=1e-12)

    def test_single_class_undefined(self):
        truths = ["Benign"] * 5
        scores = np.tile(np.array([0.7, 0.1, 0.1, 0.1]), (5, 1))
        per_class, macro = auc_ovr(truths, scores)
        assert all(v is None for v in per_class.values())
        assert macro is None

    def test_macro_over_defined_only(self):
        truths = ["Benign", "Benign", "EarlyPreB", "EarlyPreB"]
        scores = np.array(
            [
                [0.7, 0.1, 0.1, 0.1],
                [0.6, 0.2, 0.1, 0.1],
                [0.2, 0.6, 0.1, 0.1],
                [0.1, 0.7, 0.1, 0.1],
            ]
        )
        per_class, macro = auc_ovr(truths, scores)
        assert per_class["Benign"] == 1.0
        assert per_class["EarlyPreB"] == 1.0
        assert per_class["PreB"] is None and per_class["ProB"] is None
        assert macro == 1.0

    def test_bad_rows_rejected(self):
        with pytest.raises(InvalidDistributionError):
            auc_ovr(["Benign"], np.array([[0.5, 0.2, 0.2, 0.2]]))
        with pytest.raises(ShapeMismatchError):
            auc_ovr(["Benign"], np.array([[0.5, 0.5]]))
        with pytest.raises(UnknownLabelError):
            auc_ovr(["Other"], np.array([[0.25, 0.25, 0.25, 0.25]]))


class TestReport:
    def test_key_order_and_round_trip(self):
        report = build_report(fixture_397_of_400())
        assert list(report.keys()) == [
            "labels",
            "total",
            "accuracy",
            "micro_f1",
            "per_class",
            "macro",
            "weighted",
            "confusion_matrix",
            "flags",
        ]
        assert json.loads(report_json(report)) == report

    def test_headline_value_in_json(self):
        text = report_json(build_report(fixture_397_of_400()))
        assert '"accuracy": 0.9925' in text

    def test_auc_omitted_without_scores(self):
        report = build_report(fixture_397_of_400())
        for label in CLASS_LABELS:
            assert "auc" not in report["per_class"][label]
        assert "auc" not in report["macro"]

    def test_auc_included_with_scores(self):
        truths = ["Benign", "EarlyPreB", "PreB", "ProB"]
        cm = confusion_from_predictions([(t, t) for t in truths])
        scores = np.full((4, 4), 0.25)
        report = build_report(cm, truths=truths, scores=scores)
        for label in CLASS_LABELS:
            assert report["per_class"][label]["auc"] == 0.5
        assert report["macro"]["auc"] == 0.5

    def test_undefined_auc_is_null_and_flagged(self):
        truths = ["Benign", "Benign"]
        cm = confusion_from_predictions([(t, t) for t in truths])
        scores = np.full((2, 4), 0.25)
        report = build_report(cm, truths=truths, scores=scores)
        assert report["per_class"]["Benign"]["auc"] is None
        assert "auc_undefined:Benign" in report["flags"]
        assert '"auc": null' in report_json(report)

    def test_scores_without_truths_rejected(self):
        with pytest.raises(ValueError):
            build_report(fixture_397_of_400(), scores=np.full((1, 4), 0.25))


class TestPredictionsCsv:
    def test_good_file(self, tmp_path):
        p = tmp_path / "preds.csv"
        p.write_text(
            "path,true_label,pred_label\n"
            "a.png,Benign,Benign\n"
            "b.png,PreB,ProB\n",
            encoding="utf-8",
        )
        assert read_predictions_csv(p) == [
            ("a.png", "Benign", "Benign"),
            ("b.png", "PreB", "ProB"),
        ]

    def test_bad_header(self, tmp_path):
        p = tmp_path / "preds.csv"
        p.write_text("file,truth,guess\na.png,Benign,Benign\n", encoding="utf-8")
        with pytest.raises(ValueError, match="line 1"):
            read_predictions_csv(p)

    def test_short_row_names_line(self, tmp_path):
        p = tmp_path / "preds.csv"
        p.write_text(
            "path,true_label,pred_label\na.png,Benign,Benign\nb.png,PreB\n",
            encoding="utf-8",
        )
        with pytest.raises(ValueError, match="line 3"):
            read_predictions_csv(p)


class TestScoresCsv:
    HEADER = "path,true_label,score_Benign,score_EarlyPreB,score_PreB,score_ProB\n"

    def test_good_file(self, tmp_path):
        p = tmp_path / "scores.csv"
        p.write_text(
            self.HEADER + "a.png,Benign,0.7,0.1,0.1,0.1\n" + "b.png,ProB,0.25,0.25,0.25,0.25\n",
            encoding="utf-8",
        )
        paths, truths, scores = read_scores_csv(p)
        assert paths == ["a.png", "b.png"]
        assert truths == ["Benign", "ProB"]
        assert_allclose(scores, [[0.7, 0.1, 0.1, 0.1], [0.25, 0.25, 0.25, 0.25]])

    def test_wrong_header(self, tmp_path):
        p = tmp_path / "scores.csv"
        p.write_text("path,true_label,s1,s2,s3,s4\n", encoding="utf-8")
        with pytest.raises(ValueError, match="line 1"):
            read_scores_csv(p)

    def test_unparsable_score_names_line(self, tmp_path):
        p = tmp_path / "scores.csv"
        p.write_text(
            self.HEADER + "a.png,Benign,0.7,0.1,0.1,0.1\n" + "b.png,PreB,0.4,oops,0.3,0.3\n",
            encoding="utf-8",
        )
        with pytest.raises(ValueError, match="line 3"):
            read_scores_csv(p)

    def test_field_count_checked(self, tmp_path):
        p = tmp_path / "scores.csv"
        p.write_text(self.HEADER + "a.png,Benign,0.7,0.1,0.2\n", encoding="utf-8")
        with pytest.raises(ValueError, match="line 2"):
            read_scores_csv(p)
