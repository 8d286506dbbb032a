"""Confusion-matrix metrics, cross-validation and confidence triage.

Class-wise scores treat the 5-way problem as one-vs-all per class; global
scores are support-weighted means. Metric arithmetic runs on exact
rationals before conversion to float, which makes the multi-class identity
"weighted recall == overall accuracy" hold exactly rather than to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .calls import N_CLASSES, CallClass, ClassPrediction
from .rng import Rng


@dataclass(frozen=True)
class ConfusionMatrix:
    """5x5 counts, rows = true class, columns = predicted class."""

    counts: np.ndarray

    def __post_init__(self) -> None:
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.shape != (N_CLASSES, N_CLASSES):
            raise ValueError(f"expected {N_CLASSES}x{N_CLASSES} counts")
        if np.any(counts < 0):
            raise ValueError("counts must be non-negative")
        object.__setattr__(self, "counts", counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def support(self, k: int) -> int:
        return int(self.counts[k].sum())


def confusion(preds: list[CallClass | int], labels: list[CallClass | int]) -> ConfusionMatrix:
    if len(preds) != len(labels):
        raise ValueError(f"{len(preds)} predictions vs {len(labels)} labels")
    if not preds:
        raise ValueError("empty prediction list")
    counts = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
    for pred, label in zip(preds, labels):
        counts[int(label), int(pred)] += 1
    return ConfusionMatrix(counts)


@dataclass(frozen=True)
class ClassMetrics:
    accuracy: float
    recall: float
    precision: float
    specificity: float
    f1: float
    support: int
    empty: bool = False  # class had no samples; recall/precision defined as 0


@dataclass(frozen=True)
class MetricsReport:
    per_class: tuple[ClassMetrics, ...]
    overall_accuracy: float
    weighted_recall: float
    weighted_precision: float
    weighted_specificity: float
    weighted_f1: float
    total: int

    def to_dict(self) -> dict:
        return {
            "overall_accuracy": self.overall_accuracy,
            "weighted_recall": self.weighted_recall,
            "weighted_precision": self.weighted_precision,
            "weighted_specificity": self.weighted_specificity,
            "weighted_f1": self.weighted_f1,
            "total": self.total,
            "per_class": [vars(m) for m in self.per_class],
        }


def _ratio(num: int, den: int) -> tuple[Fraction, bool]:
    if den == 0:
        return Fraction(0), True
    return Fraction(num, den), False


def class_metrics(cm: ConfusionMatrix) -> MetricsReport:
    """One-vs-all metrics per class plus support-weighted aggregates.

    Empty classes get recall/precision 0 with a flag instead of an error so
    sweeps over sparse data still produce a total report.
    """
    counts = cm.counts
    total = cm.total
    if total == 0:
        raise ValueError("empty confusion matrix")

    per_class: list[ClassMetrics] = []
    weighted = {"recall": Fraction(0), "precision": Fraction(0), "specificity": Fraction(0), "f1": Fraction(0)}
    for k in range(N_CLASSES):
        tp = int(counts[k, k])
        fn = int(counts[k].sum()) - tp
        fp = int(counts[:, k].sum()) - tp
        tn = total - tp - fn - fp
        support = tp + fn

        accuracy = Fraction(tp + tn, total)
        recall, _ = _ratio(tp, tp + fn)
        precision, _ = _ratio(tp, tp + fp)
        specificity, _ = _ratio(tn, tn + fp)
        f1 = (
            2 * precision * recall / (precision + recall)
            if precision + recall > 0
            else Fraction(0)
        )
        per_class.append(
            ClassMetrics(
                accuracy=float(accuracy),
                recall=float(recall),
                precision=float(precision),
                specificity=float(specificity),
                f1=float(f1),
                support=support,
                empty=support == 0,
            )
        )
        for name, value in (("recall", recall), ("precision", precision), ("specificity", specificity), ("f1", f1)):
            weighted[name] += support * value

    trace = int(np.trace(counts))
    return MetricsReport(
        per_class=tuple(per_class),
        overall_accuracy=float(Fraction(trace, total)),
        weighted_recall=float(weighted["recall"] / total),
        weighted_precision=float(weighted["precision"] / total),
        weighted_specificity=float(weighted["specificity"] / total),
        weighted_f1=float(weighted["f1"] / total),
        total=total,
    )


def kfold_split(n: int, k: int, seed: int = 0) -> list[np.ndarray]:
    """k disjoint index sets covering 0..n-1 with sizes differing by <= 1."""
    if k < 1 or k > n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    perm = Rng(seed).split(0).generator().permutation(n)
    sizes = [n // k + (1 if i < n % k else 0) for i in range(k)]
    folds = []
    start = 0
    for size in sizes:
        folds.append(np.sort(perm[start : start + size]))
        start += size
    return folds


@dataclass(frozen=True)
class CrossValidationResult:
    fold_reports: tuple[MetricsReport, ...]
    mean_accuracy: float
    std_accuracy: float
    mean_weighted_f1: float
    std_weighted_f1: float

    @property
    def k(self) -> int:
        return len(self.fold_reports)


def cross_validate(
    build_model,
    train_fn,
    predict_fn,
    a_data: list,
    m_data: list,
    k: int = 10,
    seed: int = 0,
) -> CrossValidationResult:
    """k-fold cross-validation over a_data, with m_data always in training.

    For each fold a fresh model from `build_model()` is trained by
    `train_fn(model, items)` on the other k-1 folds plus all of m_data and
    scored by `predict_fn(model, items) -> list of predicted classes` on the
    held-out fold. Items are (sample, CallClass) pairs; fold summaries use
    the population standard deviation.
    """
    if k < 2:
        raise ValueError("cross-validation needs k >= 2 (no validation split otherwise)")
    folds = kfold_split(len(a_data), k, seed)
    reports: list[MetricsReport] = []
    for fold_id, val_idx in enumerate(folds):
        val_set = set(int(i) for i in val_idx)
        train_items = [item for i, item in enumerate(a_data) if i not in val_set] + list(m_data)
        val_items = [a_data[i] for i in val_idx]
        try:
            model = build_model()
            train_fn(model, train_items)
            preds = predict_fn(model, val_items)
        except Exception as exc:
            raise RuntimeError(f"fold {fold_id} failed: {exc}") from exc
        labels = [label for _, label in val_items]
        reports.append(class_metrics(confusion(list(preds), labels)))

    accs = np.array([r.overall_accuracy for r in reports])
    f1s = np.array([r.weighted_f1 for r in reports])
    return CrossValidationResult(
        fold_reports=tuple(reports),
        mean_accuracy=float(accs.mean()),
        std_accuracy=float(accs.std()),
        mean_weighted_f1=float(f1s.mean()),
        std_weighted_f1=float(f1s.std()),
    )


@dataclass(frozen=True)
class TriagePoint:
    threshold: float
    kept_fraction: float
    recall_on_kept: float
    empty_kept: bool = False  # nothing above threshold; recall defined as 1


def triage_curve(
    predictions: list[ClassPrediction],
    labels: list[CallClass | int],
    thresholds: list[float],
) -> list[TriagePoint]:
    """Kept fraction and accuracy-on-kept for each confidence threshold.

    A call is kept when its confidence is >= the threshold. Recall on the
    kept subset is the fraction of kept calls classified correctly (the
    weighted multi-class recall equals accuracy, so this is both).
    """
    if len(predictions) != len(labels):
        raise ValueError("predictions and labels differ in length")
    if not predictions:
        raise ValueError("empty prediction list")
    conf = np.array([p.confidence for p in predictions])
    correct = np.array([int(p.predicted_class) == int(label) for p, label in zip(predictions, labels)])
    points = []
    for p in thresholds:
        kept = conf >= p
        n_kept = int(kept.sum())
        if n_kept == 0:
            points.append(TriagePoint(float(p), 0.0, 1.0, empty_kept=True))
        else:
            points.append(
                TriagePoint(
                    float(p),
                    n_kept / len(predictions),
                    float(correct[kept].sum() / n_kept),
                )
            )
    return points


def triage_split(predictions: list[ClassPrediction], p: float) -> tuple[list[int], list[int]]:
    """Indices partitioned into (accepted, flagged) by confidence >= p."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("threshold must lie in [0, 1]")
    accepted = [i for i, pred in enumerate(predictions) if pred.confidence >= p]
    flagged = [i for i, pred in enumerate(predictions) if pred.confidence < p]
    return accepted, flagged


def metrics_to_csv(report: MetricsReport, path) -> None:
    """One row per class plus a weighted summary row."""
    import csv as _csv

    from .calls import CLASS_LABELS

    with open(path, "w", newline="") as f:
        writer = _csv.writer(f)
        writer.writerow(["class", "support", "accuracy", "recall", "precision", "specificity", "f1"])
        for k, m in enumerate(report.per_class):
            writer.writerow(
                [CLASS_LABELS[CallClass(k)], m.support, m.accuracy, m.recall, m.precision, m.specificity, m.f1]
            )
        writer.writerow(
            [
                "weighted",
                report.total,
                report.overall_accuracy,
                report.weighted_recall,
                report.weighted_precision,
                report.weighted_specificity,
                report.weighted_f1,
            ]
        )


def triage_to_csv(points: list[TriagePoint], path) -> None:
    """One row per threshold."""
    import csv as _csv

    with open(path, "w", newline="") as f:
        writer = _csv.writer(f)
        writer.writerow(["threshold", "kept_fraction", "recall_on_kept", "empty_kept"])
        for point in points:
            writer.writerow([point.threshold, point.kept_fraction, point.recall_on_kept, point.empty_kept])
