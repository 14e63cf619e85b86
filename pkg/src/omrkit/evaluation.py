"""The evaluation protocol: stratified k-fold CV, class metrics, grading accuracy.

Augmented variants always live in (and only in) the fold of their source
sample and are used for training only; held-out evaluation sees originals.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .classifiers import LabeledSample, classify
from .errors import LengthMismatch, TooFewSamples, ValidationError
from .grading import SheetGrade
from .types import AnswerClass


@dataclass
class ConfusionMatrix:
    classes: list[AnswerClass]
    counts: np.ndarray  # counts[true][predicted]

    @staticmethod
    def empty(classes) -> "ConfusionMatrix":
        classes = sorted(set(classes), key=int)
        return ConfusionMatrix(classes=classes,
                               counts=np.zeros((len(classes), len(classes)), dtype=np.int64))

    def add(self, true: AnswerClass, predicted: AnswerClass) -> None:
        self.counts[self.classes.index(true), self.classes.index(predicted)] += 1

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def accuracy(self) -> float:
        return float(np.trace(self.counts) / max(self.total, 1))

    def precision_recall_f(self) -> dict[AnswerClass, tuple[float, float, float]]:
        out = {}
        for i, c in enumerate(self.classes):
            tp = self.counts[i, i]
            predicted = self.counts[:, i].sum()
            actual = self.counts[i, :].sum()
            p = float(tp / predicted) if predicted else 0.0
            r = float(tp / actual) if actual else 0.0
            f = 2 * p * r / (p + r) if (p + r) > 0 else 0.0
            out[c] = (p, r, f)
        return out


@dataclass
class EvalReport:
    classifier: str
    class_subset: str
    k: int
    fold_accuracies: list[float]
    confusion: ConfusionMatrix
    per_class: dict[AnswerClass, tuple[float, float, float]]

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean(self.fold_accuracies))

    def to_dict(self) -> dict:
        return {
            "classifier": self.classifier,
            "class_subset": self.class_subset,
            "k": self.k,
            "fold_accuracies": self.fold_accuracies,
            "mean_accuracy": self.mean_accuracy,
            "confusion": {
                "classes": [int(c) for c in self.confusion.classes],
                "counts": self.confusion.counts.tolist(),
            },
            "per_class": {int(c): {"precision": p, "recall": r, "f": f}
                          for c, (p, r, f) in self.per_class.items()},
        }

    def to_text(self) -> str:
        lines = [
            f"classifier: {self.classifier}   classes: ({self.class_subset})   "
            f"{self.k}-fold cross-validation",
            "fold accuracies: " + "  ".join(f"{a:.4f}" for a in self.fold_accuracies),
            f"mean accuracy:   {self.mean_accuracy:.4f}",
            f"{'class':<14}{'precision':>10}{'recall':>10}{'F score':>10}",
        ]
        for c, (p, r, f) in self.per_class.items():
            lines.append(f"{c.name.lower():<14}{p:>10.4f}{r:>10.4f}{f:>10.4f}")
        return "\n".join(lines) + "\n"


def kfold_split(samples: list[LabeledSample], k: int = 5, seed: int = 0
                ) -> list[list[LabeledSample]]:
    """Stratified folds; augmented variants follow their source sample's fold."""
    originals = [s for s in samples if not s.augmented]
    augmented = [s for s in samples if s.augmented]

    by_class: dict[AnswerClass, list[LabeledSample]] = {}
    for s in originals:
        by_class.setdefault(s.label, []).append(s)
    for cls, group in by_class.items():
        if len(group) < k:
            raise TooFewSamples(f"class {cls.name} has {len(group)} samples < k={k}")

    rng = np.random.default_rng(seed)
    folds: list[list[LabeledSample]] = [[] for _ in range(k)]
    fold_of: dict[str, int] = {}
    offset = 0
    # stratify by class, then exam within class, dealing round-robin
    for cls in sorted(by_class, key=int):
        group = sorted(by_class[cls], key=lambda s: s.sample_id)
        group.sort(key=lambda s: s.exam_id)
        idx = np.arange(len(group))
        by_exam: dict[str, list[LabeledSample]] = {}
        for s in group:
            by_exam.setdefault(s.exam_id, []).append(s)
        ordered = []
        for exam in sorted(by_exam):
            perm = rng.permutation(len(by_exam[exam]))
            ordered.extend(by_exam[exam][i] for i in perm)
        for i, s in enumerate(ordered):
            fold = (i + offset) % k
            folds[fold].append(s)
            fold_of[s.sample_id] = fold
        offset = (offset + len(ordered)) % k

    for s in augmented:
        if s.source_id not in fold_of:
            raise ValidationError(
                f"augmented sample {s.sample_id} has no source in the split")
        folds[fold_of[s.source_id]].append(s)
    return folds


def train_test_for_fold(folds: list[list[LabeledSample]], i: int
                        ) -> tuple[list[LabeledSample], list[LabeledSample]]:
    """Training samples (incl. augmented) from other folds; fold i originals for test."""
    train = [s for j, fold in enumerate(folds) if j != i for s in fold]
    test = [s for s in folds[i] if not s.augmented]
    return train, test


Trainer = Callable[[list[LabeledSample], tuple, int], object]


def evaluate_classifier(samples: list[LabeledSample], trainer: Trainer,
                        class_subset, k: int = 5, seed: int = 0,
                        subset_name: str = "", classifier_name: str = ""
                        ) -> tuple[EvalReport, list]:
    """Per-fold training and held-out evaluation on a class subset."""
    subset = sorted(set(class_subset), key=int)
    use = [s for s in samples if s.label in subset]
    folds = kfold_split(use, k=k, seed=seed)
    confusion = ConfusionMatrix.empty(subset)
    fold_acc = []
    models = []
    for i in range(k):
        train, test = train_test_for_fold(folds, i)
        model = trainer(train, tuple(subset), seed + i)
        models.append(model)
        correct = 0
        for s in test:
            pred = classify(model, s.roi).predicted
            confusion.add(s.label, pred)
            correct += int(pred == s.label)
        fold_acc.append(correct / max(len(test), 1))
    report = EvalReport(
        classifier=classifier_name, class_subset=subset_name, k=k,
        fold_accuracies=fold_acc, confusion=confusion,
        per_class=confusion.precision_recall_f(),
    )
    return report, models


def grading_accuracy(graded: list[SheetGrade],
                     truth: list[dict[int, float]]) -> tuple[float, float]:
    """(question-based, sheet-based) accuracy of awarded marks against truth."""
    if len(graded) != len(truth):
        raise LengthMismatch(f"{len(graded)} graded sheets vs {len(truth)} truths")
    total_q = 0
    correct_q = 0
    correct_sheets = 0
    for grade, sheet_truth in zip(graded, truth):
        q_indices = {q.question_index for q in grade.questions}
        if q_indices != set(sheet_truth):
            raise LengthMismatch(
                f"sheet {grade.sheet_id}: question sets differ from truth")
        all_ok = True
        for q in grade.questions:
            ok = abs(q.awarded - sheet_truth[q.question_index]) < 1e-9
            correct_q += int(ok)
            all_ok = all_ok and ok
            total_q += 1
        correct_sheets += int(all_ok)
    if total_q == 0:
        raise LengthMismatch("no questions to evaluate")
    return correct_q / total_q, correct_sheets / len(graded)
