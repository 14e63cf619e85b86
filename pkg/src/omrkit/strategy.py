"""Classification strategies: straight-forward (SF) or two-stage (2S).

The two-stage strategy first separates filled from empty boxes; anything the
first stage deems non-empty is handed to a confirmed-vs-crossed-out second
stage. The deciding stage's confidence is reported as-is.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

from .classifiers import ClassScores, classify
from .errors import SpecInvalid
from .types import AnswerClass, RoiImage


class StrategyKind(str, enum.Enum):
    SF = "SF"
    TWO_STAGE = "2S"


@dataclass
class StrategySpec:
    kind: StrategyKind
    stage1: object  # any trained model exposing .classes and .classify
    stage2: Optional[object] = None

    def validate(self) -> None:
        if self.kind == StrategyKind.SF:
            if set(self.stage1.classes) != {AnswerClass.CONFIRMED,
                                            AnswerClass.CROSSED_OUT,
                                            AnswerClass.EMPTY}:
                raise SpecInvalid("SF requires a model trained on all three classes")
            if self.stage2 is not None:
                raise SpecInvalid("SF takes no second stage")
        elif self.kind == StrategyKind.TWO_STAGE:
            if self.stage2 is None:
                raise SpecInvalid("two-stage strategy needs both stages")
            if set(self.stage1.classes) != {AnswerClass.CONFIRMED, AnswerClass.EMPTY}:
                raise SpecInvalid("stage 1 must be a confirmed-vs-empty model")
            if set(self.stage2.classes) != {AnswerClass.CONFIRMED, AnswerClass.CROSSED_OUT}:
                raise SpecInvalid("stage 2 must be a confirmed-vs-crossed-out model")
        else:
            raise SpecInvalid(f"unknown strategy kind {self.kind!r}")


def classify_strategy(roi: RoiImage, spec: StrategySpec) -> ClassScores:
    spec.validate()
    first = classify(spec.stage1, roi)
    if spec.kind == StrategyKind.SF:
        return first
    if first.predicted == AnswerClass.EMPTY:
        return first
    return classify(spec.stage2, roi)
