"""Multiclass evaluation: confusion matrices, P/R/F1, one-vs-rest AUC.

Rates follow the usual one-vs-rest decomposition of a k×k confusion
matrix (rows = true class, columns = predicted).  Degenerate
denominators never raise: the affected metric is reported as 0.0 and a
flag naming metric and class is attached to the report, so pipelines
over tiny or skewed fixtures stay alive.  AUC uses the rank-based
Mann-Whitney formulation with average ranks for ties, which equals
trapezoidal ROC integration over all distinct score thresholds; a class
with no positives or no negatives has no defined AUC and is reported as
absent rather than 0.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataprep import CLASS_LABELS
from .errors import InvalidDistributionError, ShapeMismatchError, UnknownLabelError


@dataclass
class ConfusionMatrix:
    """counts[i][j] = samples of true class i predicted as class j."""

    labels: tuple[str, ...]
    counts: np.ndarray

    def __post_init__(self) -> None:
        c = np.asarray(self.counts, dtype=np.int64)
        k = len(self.labels)
        if c.shape != (k, k):
            raise ShapeMismatchError(f"counts must be ({k}, {k}), got {c.shape}")
        if np.any(c < 0):
            raise ValueError("confusion counts must be non-negative")
        self.counts = c

    @property
    def k(self) -> int:
        return len(self.labels)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def merge(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        if self.labels != other.labels:
            raise ValueError("cannot merge confusion matrices with different labels")
        return ConfusionMatrix(self.labels, self.counts + other.counts)


def confusion_from_predictions(
    pairs, labels: tuple[str, ...] = CLASS_LABELS
) -> ConfusionMatrix:
    """Accumulate (true, predicted) label pairs into a confusion matrix."""
    index = {label: i for i, label in enumerate(labels)}
    counts = np.zeros((len(labels), len(labels)), dtype=np.int64)
    for true, pred in pairs:
        if true not in index:
            raise UnknownLabelError(f"unknown true label: {true!r}")
        if pred not in index:
            raise UnknownLabelError(f"unknown predicted label: {pred!r}")
        counts[index[true], index[pred]] += 1
    return ConfusionMatrix(tuple(labels), counts)


def accuracy(cm: ConfusionMatrix) -> tuple[float, list[str]]:
    """trace / total; an empty matrix scores 0.0 with a flag."""
    total = cm.total
    if total == 0:
        return 0.0, ["accuracy_zero_division"]
    return float(np.trace(cm.counts) / total), []


def precision_recall_f1(cm: ConfusionMatrix) -> tuple[dict, dict, dict, list[str]]:
    """Per-class one-vs-rest precision/recall/F1 plus macro and weighted means.

    Returns (per_class, macro, weighted, flags).  Macro averages are
    unweighted means over classes; weighted averages weight by support.
    Any zero denominator contributes 0.0 and a flag.
    """
    flags: list[str] = []
    per_class: dict[str, dict[str, float]] = {}
    supports = cm.counts.sum(axis=1)
    total = cm.total
    for i, label in enumerate(cm.labels):
        tp = int(cm.counts[i, i])
        fp = int(cm.counts[:, i].sum() - tp)
        fn = int(cm.counts[i, :].sum() - tp)
        if tp + fp > 0:
            precision = tp / (tp + fp)
        else:
            precision = 0.0
            flags.append(f"precision_zero_division:{label}")
        if tp + fn > 0:
            recall = tp / (tp + fn)
        else:
            recall = 0.0
            flags.append(f"recall_zero_division:{label}")
        if precision + recall > 0:
            f1 = 2 * precision * recall / (precision + recall)
        else:
            f1 = 0.0
            flags.append(f"f1_zero_division:{label}")
        per_class[label] = {
            "precision": precision,
            "recall": recall,
            "f1": f1,
            "support": int(supports[i]),
        }
    k = cm.k
    macro = {
        metric: sum(per_class[l][metric] for l in cm.labels) / k
        for metric in ("precision", "recall", "f1")
    }
    if total > 0:
        weighted = {
            metric: sum(per_class[l][metric] * per_class[l]["support"] for l in cm.labels)
            / total
            for metric in ("precision", "recall", "f1")
        }
    else:
        weighted = {metric: 0.0 for metric in ("precision", "recall", "f1")}
        flags.append("weighted_zero_division")
    return per_class, macro, weighted, flags


def micro_f1(cm: ConfusionMatrix) -> tuple[float, list[str]]:
    """Micro-averaged F1; equals accuracy for single-label multiclass.

    Micro TP = trace, and micro FP = micro FN = total − trace, so
    precision = recall = F1 = trace/total.  Computed through the pooled
    formula anyway so the identity is a checked property, not an alias.
    """
    total = cm.total
    if total == 0:
        return 0.0, ["micro_f1_zero_division"]
    tp = int(np.trace(cm.counts))
    fp = total - tp
    fn = total - tp
    denom = 2 * tp + fp + fn
    if denom == 0:
        return 0.0, ["micro_f1_zero_division"]
    return float(2 * tp / denom), []


def _rank_average(values: np.ndarray) -> np.ndarray:
    """Ranks 1..n with tied values sharing the mean of their rank range."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.size, dtype=np.float64)
    sorted_vals = values[order]
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        # ranks are 1-based; ties share the average of positions i..j
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def auc_ovr(
    truths: list[str], scores: np.ndarray, labels: tuple[str, ...] = CLASS_LABELS
) -> tuple[dict[str, float | None], float | None]:
    """One-vs-rest AUC per class via the Mann-Whitney U statistic.

    scores: (n, k) rows of per-class probabilities, columns ordered as
    ``labels``; each row must sum to 1 within 1e-6.  Returns
    (per_class, macro) where a class missing positives or negatives has
    AUC None and macro averages the defined values only (None when no
    class has a defined AUC).
    """
    s = np.asarray(scores, dtype=np.float64)
    n = len(truths)
    if s.shape != (n, len(labels)):
        raise ShapeMismatchError(f"scores must be ({n}, {len(labels)}), got {s.shape}")
    sums = s.sum(axis=1)
    bad = np.abs(sums - 1.0) > 1e-6
    if np.any(bad):
        row = int(np.argmax(bad))
        raise InvalidDistributionError(f"score row {row} sums to {sums[row]!r}, not 1")
    index = {label: i for i, label in enumerate(labels)}
    for t in truths:
        if t not in index:
            raise UnknownLabelError(f"unknown true label: {t!r}")
    truth_idx = np.array([index[t] for t in truths])

    per_class: dict[str, float | None] = {}
    for c, label in enumerate(labels):
        pos = truth_idx == c
        n_pos = int(pos.sum())
        n_neg = n - n_pos
        if n_pos == 0 or n_neg == 0:
            per_class[label] = None
            continue
        ranks = _rank_average(s[:, c])
        u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
        per_class[label] = float(u / (n_pos * n_neg))
    defined = [v for v in per_class.values() if v is not None]
    macro = sum(defined) / len(defined) if defined else None
    return per_class, macro


def build_report(
    cm: ConfusionMatrix,
    truths: list[str] | None = None,
    scores: np.ndarray | None = None,
) -> dict:
    """Assemble the full metrics report as a JSON-ready dict.

    Key order is fixed by construction.  AUC entries appear only when
    scores are supplied; a class with undefined AUC is reported as null
    with an explanatory flag.
    """
    acc, flags = accuracy(cm)
    per_class, macro, weighted, prf_flags = precision_recall_f1(cm)
    flags = flags + prf_flags
    mf1, mf1_flags = micro_f1(cm)
    flags += mf1_flags

    report: dict = {
        "labels": list(cm.labels),
        "total": cm.total,
        "accuracy": acc,
        "micro_f1": mf1,
        "per_class": per_class,
        "macro": dict(macro),
        "weighted": dict(weighted),
        "confusion_matrix": cm.counts.tolist(),
    }
    if scores is not None:
        if truths is None:
            raise ValueError("scores require the matching truth labels")
        auc_per_class, auc_macro = auc_ovr(truths, scores, cm.labels)
        for label in cm.labels:
            value = auc_per_class[label]
            report["per_class"][label]["auc"] = value
            if value is None:
                flags.append(f"auc_undefined:{label}")
        report["macro"]["auc"] = auc_macro
    report["flags"] = flags
    return report


def report_json(report: dict) -> str:
    return json.dumps(report, indent=2)


def read_predictions_csv(path: str | os.PathLike) -> list[tuple[str, str, str]]:
    """Read rows of (path, true_label, pred_label).

    The header must be exactly ``path,true_label,pred_label``.  A bad
    header or short/long row raises ValueError naming the line number.
    """
    p = Path(path)
    rows: list[tuple[str, str, str]] = []
    with p.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if lineno == 1:
                if row != ["path", "true_label", "pred_label"]:
                    raise ValueError("line 1: expected header path,true_label,pred_label")
                continue
            if not row:
                continue
            if len(row) != 3:
                raise ValueError(f"line {lineno}: expected 3 fields, got {len(row)}")
            rows.append((row[0], row[1], row[2]))
    return rows


def read_scores_csv(
    path: str | os.PathLike, labels: tuple[str, ...] = CLASS_LABELS
) -> tuple[list[str], list[str], np.ndarray]:
    """Read rows of (path, true_label, per-class scores).

    The header must be ``path,true_label`` followed by one
    ``score_<Label>`` column per class in label order.  Returns
    (paths, truths, scores) with scores as an (n, k) float array.
    Unparsable numbers or wrong field counts raise ValueError naming
    the line.
    """
    p = Path(path)
    expected_header = ["path", "true_label"] + [f"score_{label}" for label in labels]
    paths: list[str] = []
    truths: list[str] = []
    score_rows: list[list[float]] = []
    with p.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if lineno == 1:
                if row != expected_header:
                    raise ValueError(
                        f"line 1: expected header {','.join(expected_header)}"
                    )
                continue
            if not row:
                continue
            if len(row) != len(expected_header):
                raise ValueError(
                    f"line {lineno}: expected {len(expected_header)} fields, got {len(row)}"
                )
            try:
                values = [float(x) for x in row[2:]]
            except ValueError as exc:
                raise ValueError(f"line {lineno}: unparsable score ({exc})") from exc
            paths.append(row[0])
            truths.append(row[1])
            score_rows.append(values)
    scores = np.array(score_rows, dtype=np.float64).reshape(len(paths), len(labels))
    return paths, truths, scores
