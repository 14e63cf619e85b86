"""Baseline recognizers: Otsu black-pixel thresholding and a mean-intensity SVM.

Both exist to demonstrate why the learned classifiers are needed; the
threshold rule can never emit a crossed-out verdict.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..features import mean_intensity
from ..imageops import otsu_threshold, to_gray
from ..types import AnswerClass, RoiImage
from .base import ClassScores, LabeledSample, softmax
from .svm import MultiSvm, train_multi_svm


@dataclass
class ThresholdModel:
    """Otsu binarization + black-pixel fraction rule (Confirmed if fraction > t)."""

    t: float = 0.5
    kind: str = "threshold"
    classes: tuple = (AnswerClass.CONFIRMED, AnswerClass.EMPTY)

    def classify(self, roi: RoiImage) -> ClassScores:
        return classify_threshold_otsu(roi, self.t)


def classify_threshold_otsu(roi: RoiImage, t: float = 0.5) -> ClassScores:
    gray = to_gray(roi.pixels)
    thresh = otsu_threshold(gray)
    fraction = float((gray < thresh).mean())
    predicted = AnswerClass.CONFIRMED if fraction > t else AnswerClass.EMPTY
    confidence = min(abs(fraction - t) * 2.0, 1.0)
    scores = {
        AnswerClass.CONFIRMED: fraction,
        AnswerClass.EMPTY: 1.0 - fraction,
    }
    return ClassScores(scores=scores, predicted=predicted, confidence=confidence)


@dataclass
class BaselineModel:
    """One-vs-all linear SVM over per-channel mean intensities."""

    svm: MultiSvm
    kind: str = "baseline"

    @property
    def classes(self):
        return tuple(self.svm.classes)

    def classify(self, roi: RoiImage) -> ClassScores:
        v = mean_intensity(roi)
        probs = softmax(self.svm.decision(v)[0])
        return ClassScores.from_probs(self.svm.classes, probs)


def train_baseline_svm(samples: list[LabeledSample], classes,
                       seed: int = 0, lam: float = 1e-4,
                       epochs: int = 200) -> BaselineModel:
    classes = sorted(set(classes), key=int)
    use = [s for s in samples if s.label in classes]
    x = np.stack([mean_intensity(s.roi) for s in use])
    labels = [s.label for s in use]
    svm = train_multi_svm(x, labels, classes, lam=lam, epochs=epochs, seed=seed)
    return BaselineModel(svm=svm)
