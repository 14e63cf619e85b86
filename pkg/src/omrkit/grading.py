"""Grade a registered answer sheet: extract ROIs, classify, award marks.

Per question: every confirmed box counts; two or more confirmed boxes zero
the question; a crossed-out box is taken as the answer only when no confirmed
box exists (the last such crossed-out box wins, and the question is flagged
for human review when that rule had to break a tie).
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Optional

import numpy as np

from .classifiers import ClassScores
from .errors import QuestionUnknown, RegistrationFailed, RoiOutOfBounds
from .registration import RegistrationConfig, RegistrationReport, register_sheet
from .strategy import StrategySpec, classify_strategy
from .types import AnswerClass, RoiImage

if TYPE_CHECKING:
    from .dataset import ExamMetadata

CLIP_TOLERANCE_PX = 2
DEFAULT_REVIEW_THRESHOLD = 0.6


@dataclass
class QuestionResult:
    question_index: int
    choice_classes: list[AnswerClass]
    choice_confidences: list[float]
    selected_choice: Optional[int]
    confirmed_count: int
    awarded: float
    flagged_for_review: bool

    def to_dict(self) -> dict:
        return {
            "question_index": self.question_index,
            "choice_classes": [int(c) for c in self.choice_classes],
            "choice_confidences": self.choice_confidences,
            "selected_choice": self.selected_choice,
            "confirmed_count": self.confirmed_count,
            "awarded": self.awarded,
            "flagged_for_review": self.flagged_for_review,
        }


@dataclass
class SheetGrade:
    sheet_id: str
    total: float
    questions: list[QuestionResult]
    registration: Optional[RegistrationReport] = None

    def to_dict(self) -> dict:
        return {
            "sheet_id": self.sheet_id,
            "total": self.total,
            "questions": [q.to_dict() for q in self.questions],
            "registration": self.registration.to_dict() if self.registration else None,
        }


def decide_question(labels: list[AnswerClass]) -> tuple[Optional[int], int]:
    """Selected choice index and confirmed count for one question's box labels."""
    answer: Optional[int] = None
    confirmed = 0
    for i, c in enumerate(labels):
        if (c == AnswerClass.CROSSED_OUT and confirmed == 0) or c == AnswerClass.CONFIRMED:
            answer = i
            if c == AnswerClass.CONFIRMED:
                confirmed += 1
    return answer, confirmed


def award(labels: list[AnswerClass], correct_choice: int, weight: float) -> float:
    """Marks awarded for one question under the grading rule."""
    answer, confirmed = decide_question(labels)
    if confirmed <= 1 and answer is not None and answer == correct_choice:
        return weight
    return 0.0


def score_question(labels: list[AnswerClass], correct_choice: int,
                   weight: float) -> tuple[Optional[int], int, float, bool]:
    """(selected, confirmed_count, awarded, ambiguous crossed-out tie)."""
    answer, confirmed = decide_question(labels)
    awarded = weight if (confirmed <= 1 and answer is not None
                         and answer == correct_choice) else 0.0
    crossed = sum(1 for c in labels if c == AnswerClass.CROSSED_OUT)
    ambiguous = confirmed == 0 and crossed >= 2
    return answer, confirmed, awarded, ambiguous


def extract_rois(registered: np.ndarray, metadata: "ExamMetadata",
                 question_index: int) -> list[RoiImage]:
    """One ROI per choice, cropped at the metadata rectangles."""
    question = None
    for q in metadata.questions:
        if q.index == question_index:
            question = q
            break
    if question is None:
        raise QuestionUnknown(f"question {question_index} not in metadata")
    h, w = registered.shape[:2]
    rois = []
    for box in question.choices:
        x, y, bw, bh = box.rect
        if (x < -CLIP_TOLERANCE_PX or y < -CLIP_TOLERANCE_PX
                or x + bw > w + CLIP_TOLERANCE_PX or y + bh > h + CLIP_TOLERANCE_PX):
            raise RoiOutOfBounds(
                f"question {question_index} choice {box.choice_index} rect {box.rect} "
                f"outside {w}x{h} image")
        x0 = max(x, 0)
        y0 = max(y, 0)
        x1 = min(x + bw, w)
        y1 = min(y + bh, h)
        rois.append(RoiImage(pixels=registered[y0:y1, x0:x1], source_box=box))
    return rois


def grade_sheet(registered: np.ndarray, metadata: "ExamMetadata",
                spec: StrategySpec, sheet_id: str = "",
                review_threshold: float = DEFAULT_REVIEW_THRESHOLD,
                registration: Optional[RegistrationReport] = None) -> SheetGrade:
    results = []
    total = 0.0
    for q in metadata.questions:
        rois = extract_rois(registered, metadata, q.index)
        scores: list[ClassScores] = [classify_strategy(roi, spec) for roi in rois]
        labels = [s.predicted for s in scores]
        confidences = [s.confidence for s in scores]
        selected, confirmed, awarded, ambiguous = score_question(
            labels, q.correct_choice, q.weight)
        flagged = ambiguous or any(c < review_threshold for c in confidences)
        results.append(QuestionResult(
            question_index=q.index,
            choice_classes=labels,
            choice_confidences=confidences,
            selected_choice=selected,
            confirmed_count=confirmed,
            awarded=awarded,
            flagged_for_review=flagged,
        ))
        total += awarded
    return SheetGrade(sheet_id=sheet_id, total=total, questions=results,
                      registration=registration)


@dataclass
class RunReport:
    rows: list[dict] = field(default_factory=list)

    @property
    def failures(self) -> list[dict]:
        return [r for r in self.rows if not r["ok"]]

    def to_dict(self) -> dict:
        return {"rows": self.rows}


def grade_batch(sheet_files: list, reference_image: np.ndarray,
                metadata: "ExamMetadata", spec: StrategySpec,
                reg_config: RegistrationConfig = RegistrationConfig(),
                review_threshold: float = DEFAULT_REVIEW_THRESHOLD,
                concurrency: int = 1) -> tuple[list[Optional[SheetGrade]], RunReport]:
    """Grade a batch of sheet image files; failures never abort the batch."""
    from PIL import Image

    from .registration import detect_features
    from .imageops import to_gray

    ref_gray = to_gray(np.asarray(reference_image))
    ref_features = detect_features(ref_gray, reg_config.detector)
    ref_size = (ref_gray.shape[1], ref_gray.shape[0])

    def grade_one(path) -> SheetGrade:
        sheet = np.asarray(Image.open(path).convert("RGB"))
        registered, _, report = register_sheet(sheet, ref_features, ref_size, reg_config)
        return grade_sheet(registered, metadata, spec, sheet_id=str(path),
                           review_threshold=review_threshold, registration=report)

    report = RunReport()
    results: list[Optional[SheetGrade]] = [None] * len(sheet_files)

    def run(i_path):
        i, path = i_path
        try:
            return i, grade_one(path), None
        except (RegistrationFailed, RoiOutOfBounds, QuestionUnknown, OSError) as exc:
            return i, None, exc

    if concurrency > 1 and len(sheet_files) > 1:
        with ThreadPoolExecutor(max_workers=concurrency) as pool:
            outcomes = list(pool.map(run, enumerate(sheet_files)))
    else:
        outcomes = [run(item) for item in enumerate(sheet_files)]

    for i, grade, exc in outcomes:
        path = sheet_files[i]
        if exc is None:
            results[i] = grade
            report.rows.append({"file": str(path), "ok": True, "error": None})
        else:
            report.rows.append({"file": str(path), "ok": False,
                                "error": f"{type(exc).__name__}: {exc}"})
    return results, report
