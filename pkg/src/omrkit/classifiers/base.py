"""Uniform classifier output and the shared sample type."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..errors import ModelClassMismatch
from ..types import AnswerClass, RoiImage


@dataclass
class ClassScores:
    """Per-class scores with the argmax prediction and a [0, 1] confidence."""

    scores: dict[AnswerClass, float]
    predicted: AnswerClass
    confidence: float

    def __post_init__(self):
        best = max(self.scores, key=lambda c: (self.scores[c], -int(c)))
        if self.scores[best] != self.scores[self.predicted]:
            raise ValueError("predicted class is not the argmax of the scores")
        self.confidence = float(min(max(self.confidence, 0.0), 1.0))

    @staticmethod
    def from_probs(classes, probs) -> "ClassScores":
        probs = np.asarray(probs, dtype=np.float64)
        idx = int(np.argmax(probs))
        return ClassScores(
            scores={c: float(p) for c, p in zip(classes, probs)},
            predicted=classes[idx],
            confidence=float(probs[idx]),
        )


@dataclass
class LabeledSample:
    roi: RoiImage
    label: AnswerClass
    exam_id: str
    sample_id: str = ""
    augmented: bool = False
    source_id: Optional[str] = None


def check_classes(model_classes, requested) -> None:
    if requested is not None and not set(requested) <= set(model_classes):
        raise ModelClassMismatch(
            f"model trained on {sorted(int(c) for c in model_classes)}, "
            f"requested {sorted(int(c) for c in requested)}")


def softmax(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()
