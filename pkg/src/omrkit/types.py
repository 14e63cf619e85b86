"""Core domain types shared by every module."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np


class AnswerClass(enum.IntEnum):
    """The three answer-box classes; numeric codes are fixed by the dataset format."""

    CONFIRMED = 1
    CROSSED_OUT = 2
    EMPTY = 3


ALL_CLASSES = (AnswerClass.CONFIRMED, AnswerClass.CROSSED_OUT, AnswerClass.EMPTY)

# Class subsets used throughout evaluation: (a) all three, (b) confirmed/empty,
# (c) confirmed/crossed-out, (d) crossed-out/empty.
CLASS_SUBSETS = {
    "a": (AnswerClass.CONFIRMED, AnswerClass.CROSSED_OUT, AnswerClass.EMPTY),
    "b": (AnswerClass.CONFIRMED, AnswerClass.EMPTY),
    "c": (AnswerClass.CONFIRMED, AnswerClass.CROSSED_OUT),
    "d": (AnswerClass.CROSSED_OUT, AnswerClass.EMPTY),
}


@dataclass(frozen=True)
class RoiBox:
    """One answer box: rectangle in reference-image pixels plus its indices."""

    rect: tuple[int, int, int, int]  # (x, y, w, h)
    question_index: int
    choice_index: int


@dataclass
class RoiImage:
    """A color crop of one answer box (H x W x 3, uint8)."""

    pixels: np.ndarray
    source_box: Optional[RoiBox] = None

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]
