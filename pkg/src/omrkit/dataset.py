"""Exam metadata files, crossed-out augmentation, and synthetic exam generation.

Metadata is stored as canonical JSON whose keys mirror the dataset's variable
names (examId, questionWeight, questionAnswer, questionRect, ...). The
synthetic generator produces a reference sheet plus perturbed, marked answer
sheets with per-box ground truth, so the whole pipeline can be exercised
without any scanned data.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .classifiers import LabeledSample
from .errors import ConfigInvalid, DegenerateRoi, LabelMissing, ParseError, ValidationError
from .grading import award
from .imageops import rotation_about, to_uint8, warp_affine
from .types import ALL_CLASSES, AnswerClass, RoiBox, RoiImage


@dataclass
class Question:
    index: int
    weight: float
    correct_choice: int
    page: int
    choices: list[RoiBox]


@dataclass
class ExamMetadata:
    exam_id: str
    pages: int
    questions: list[Question]
    has_student_id: bool = False
    student_id_rect: Optional[tuple[int, int, int, int]] = None

    def validate(self) -> None:
        if self.pages < 1:
            raise ValidationError("examNumberOfPages must be >= 1")
        seen = set()
        for q in self.questions:
            if len(q.choices) < 2:
                raise ValidationError(f"question {q.index} has fewer than 2 choices")
            if not 0 <= q.correct_choice < len(q.choices):
                raise ValidationError(
                    f"question {q.index}: questionAnswer {q.correct_choice} out of range")
            if q.weight <= 0:
                raise ValidationError(f"question {q.index}: questionWeight must be > 0")
            if not 0 <= q.page < self.pages:
                raise ValidationError(f"question {q.index}: pageNumber out of range")
            for box in q.choices:
                key = (box.question_index, box.choice_index)
                if key in seen:
                    raise ValidationError(
                        f"duplicate (question, choice) pair {key}")
                seen.add(key)

    def question(self, index: int) -> Question:
        for q in self.questions:
            if q.index == index:
                return q
        raise ValidationError(f"question {index} not present")


def metadata_to_dict(meta: ExamMetadata) -> dict:
    return {
        "examId": meta.exam_id,
        "examNumberOfPages": meta.pages,
        "totalNumberOfQuestions": len(meta.questions),
        "isThereAStudentId": meta.has_student_id,
        "studentIdRect": list(meta.student_id_rect) if meta.student_id_rect else None,
        "questions": [
            {
                "questionIndex": q.index,
                "pageNumber": q.page,
                "questionWeight": q.weight,
                "questionAnswer": q.correct_choice,
                "questionChoices": len(q.choices),
                "questionRect": [list(box.rect) for box in q.choices],
            }
            for q in meta.questions
        ],
    }


def metadata_from_dict(obj: dict) -> ExamMetadata:
    try:
        questions = []
        for qd in obj["questions"]:
            idx = int(qd["questionIndex"])
            rects = qd["questionRect"]
            if int(qd.get("questionChoices", len(rects))) != len(rects):
                raise ValidationError(
                    f"question {idx}: questionChoices disagrees with questionRect")
            choices = [RoiBox(rect=tuple(int(v) for v in rect), question_index=idx,
                              choice_index=c) for c, rect in enumerate(rects)]
            questions.append(Question(
                index=idx,
                weight=float(qd["questionWeight"]),
                correct_choice=int(qd["questionAnswer"]),
                page=int(qd.get("pageNumber", 0)),
                choices=choices,
            ))
        meta = ExamMetadata(
            exam_id=str(obj["examId"]),
            pages=int(obj["examNumberOfPages"]),
            questions=questions,
            has_student_id=bool(obj.get("isThereAStudentId", False)),
            student_id_rect=tuple(obj["studentIdRect"]) if obj.get("studentIdRect") else None,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed metadata: {exc}") from exc
    if obj.get("totalNumberOfQuestions") is not None \
            and int(obj["totalNumberOfQuestions"]) != len(questions):
        raise ValidationError("totalNumberOfQuestions disagrees with the question list")
    meta.validate()
    return meta


def save_metadata(meta: ExamMetadata, path) -> None:
    Path(path).write_text(
        json.dumps(metadata_to_dict(meta), indent=2, sort_keys=True) + "\n",
        encoding="utf-8")


def load_metadata(path) -> ExamMetadata:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
    return metadata_from_dict(obj)


# ---------------------------------------------------------------------------
# augmentation


@dataclass(frozen=True)
class AugmentationConfig:
    translations_px: tuple[int, ...] = (1, 2, 3, 4)
    rotations_deg: tuple[float, ...] = (-3, -2, -1, 1, 2, 3)
    flips: tuple[str, ...] = ("horizontal", "vertical")

    def __post_init__(self):
        if 0 in self.rotations_deg:
            raise ConfigInvalid("0 degrees is the original, not an augmentation")
        if any(p <= 0 for p in self.translations_px):
            raise ConfigInvalid("translations must be positive pixel counts")

    @property
    def count(self) -> int:
        return 4 * len(self.translations_px) + len(self.rotations_deg) + len(self.flips)


def _translate(px: np.ndarray, dx: int, dy: int) -> np.ndarray:
    out = np.full_like(px, 255)
    h, w = px.shape[:2]
    sx0, sx1 = max(0, -dx), min(w, w - dx)
    sy0, sy1 = max(0, -dy), min(h, h - dy)
    out[sy0 + dy:sy1 + dy, sx0 + dx:sx1 + dx] = px[sy0:sy1, sx0:sx1]
    return out


def augment_crossed_out(roi: RoiImage, config: AugmentationConfig = AugmentationConfig()
                        ) -> list[RoiImage]:
    """Translated/rotated/flipped variants (default 16 + 6 + 2 = 24), originals excluded."""
    px = roi.pixels
    h, w = px.shape[:2]
    if h < 4 or w < 4:
        raise DegenerateRoi("ROI too small to augment")
    variants: list[np.ndarray] = []
    for p in config.translations_px:
        for dx, dy in ((p, 0), (-p, 0), (0, p), (0, -p)):
            variants.append(_translate(px, dx, dy))
    for deg in config.rotations_deg:
        m = rotation_about((w - 1) / 2.0, (h - 1) / 2.0, math.radians(deg))
        variants.append(to_uint8(warp_affine(px.astype(np.float64), m, (w, h), fill=255.0)))
    for flip in config.flips:
        if flip == "horizontal":
            variants.append(np.fliplr(px).copy())
        elif flip == "vertical":
            variants.append(np.flipud(px).copy())
        else:
            raise ConfigInvalid(f"unknown flip {flip!r}")
    return [RoiImage(pixels=v, source_box=roi.source_box) for v in variants]


def augment_samples(samples: list[LabeledSample],
                    config: AugmentationConfig = AugmentationConfig(),
                    target: AnswerClass = AnswerClass.CROSSED_OUT) -> list[LabeledSample]:
    """Augmented copies of every `target`-class sample, tagged with their source id."""
    out = []
    for s in samples:
        if s.label != target or s.augmented:
            continue
        for i, variant in enumerate(augment_crossed_out(s.roi, config)):
            out.append(LabeledSample(
                roi=variant, label=s.label, exam_id=s.exam_id,
                sample_id=f"{s.sample_id}#aug{i}", augmented=True,
                source_id=s.sample_id))
    return out


# ---------------------------------------------------------------------------
# synthetic exams


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    sheets: int = 30
    questions: int = 10
    choices: int = 4
    page_width: int = 850
    page_height: int = 1100
    box_size: int = 48
    class_mixture: tuple[float, float, float] = (0.25, 0.05, 0.70)  # confirmed, crossed, empty
    mark_on_correct_prob: float = 1.0  # unused hook; classes are drawn per box
    max_rotation_deg: float = 3.0
    max_shift_px: float = 10.0
    noise_std: float = 8.0

    def __post_init__(self):
        if abs(sum(self.class_mixture) - 1.0) > 1e-9 or min(self.class_mixture) < 0:
            raise ConfigInvalid("class mixture must be a probability vector")
        if self.questions < 1 or self.choices < 2 or self.sheets < 0:
            raise ConfigInvalid("degenerate exam geometry")
        if self.max_rotation_deg < 0 or self.max_shift_px < 0 or self.noise_std < 0:
            raise ConfigInvalid("perturbation ranges must be non-negative")


@dataclass
class SynthSheet:
    name: str
    image: np.ndarray
    labels: dict[tuple[int, int], AnswerClass]
    grade: float


def _fill(img: np.ndarray, x: int, y: int, w: int, h: int, value: float) -> None:
    img[max(y, 0):y + h, max(x, 0):x + w] = value


def _stroke(img: np.ndarray, p0, p1, thickness: int, value: float) -> None:
    n = int(max(abs(p1[0] - p0[0]), abs(p1[1] - p0[1])) * 2) + 2
    xs = np.linspace(p0[0], p1[0], n)
    ys = np.linspace(p0[1], p1[1], n)
    r = thickness // 2
    h, w = img.shape[:2]
    for x, y in zip(xs, ys):
        x0 = int(round(x)) - r
        y0 = int(round(y)) - r
        img[max(y0, 0):min(y0 + thickness, h), max(x0, 0):min(x0 + thickness, w)] = value


def _draw_glyph(img: np.ndarray, x: int, y: int, size: int, rng: np.random.Generator) -> None:
    """A small random blob of strokes, used for header text and question labels."""
    for _ in range(rng.integers(2, 5)):
        p0 = (x + rng.uniform(0, size), y + rng.uniform(0, size))
        p1 = (x + rng.uniform(0, size), y + rng.uniform(0, size))
        _stroke(img, p0, p1, int(rng.integers(2, 4)), float(rng.uniform(0, 60)))


def _draw_template(config: SynthConfig, rng: np.random.Generator
                   ) -> tuple[np.ndarray, ExamMetadata]:
    w, h = config.page_width, config.page_height
    page = np.full((h, w), 255.0)

    # corner fiducials and a header of glyph "text" give registration texture
    for fx, fy in ((30, 30), (w - 54, 30), (30, h - 54), (w - 54, h - 54)):
        _fill(page, fx, fy, 24, 24, 0.0)
    _fill(page, 60, 34, w - 150, 4, 0.0)
    for i in range(14):
        _draw_glyph(page, 60 + i * (w - 160) // 14, 60, 34, rng)

    box = config.box_size
    top = 160
    row_h = max((h - top - 60) // config.questions, box + 12)
    col_w = max((w - 220) // config.choices, box + 16)
    questions = []
    for qi in range(config.questions):
        y = top + qi * row_h
        _draw_glyph(page, 60, y + 6, 30, rng)
        choices = []
        for ci in range(config.choices):
            x = 180 + ci * col_w
            # box border sits outside the stored ROI rect (the interior)
            _fill(page, x - 3, y - 3, box + 6, 3, 90.0)
            _fill(page, x - 3, y + box, box + 6, 3, 90.0)
            _fill(page, x - 3, y, 3, box, 90.0)
            _fill(page, x + box, y, 3, box, 90.0)
            choices.append(RoiBox(rect=(x, y, box, box), question_index=qi,
                                  choice_index=ci))
        questions.append(Question(index=qi, weight=1.0,
                                  correct_choice=int(rng.integers(config.choices)),
                                  page=0, choices=choices))
    meta = ExamMetadata(exam_id=f"synth{config.seed}", pages=1, questions=questions)
    meta.validate()
    return page, meta


def _draw_confirmed(img: np.ndarray, rect, rng: np.random.Generator) -> None:
    x, y, w, h = rect
    ink = float(rng.uniform(10, 70))
    style = rng.integers(3)
    if style == 0:  # check mark
        t = int(rng.integers(3, 6))
        mx = x + 0.40 * w + rng.uniform(-2, 2)
        my = y + 0.80 * h + rng.uniform(-2, 2)
        _stroke(img, (x + 0.15 * w, y + 0.55 * h), (mx, my), t, ink)
        _stroke(img, (mx, my), (x + 0.88 * w, y + 0.12 * h), t, ink)
    elif style == 1:  # horizontal scribble
        t = int(rng.integers(2, 5))
        n = int(rng.integers(3, 6))
        for i in range(n):
            yy = y + h * (0.2 + 0.6 * i / max(n - 1, 1)) + rng.uniform(-2, 2)
            _stroke(img, (x + 0.15 * w, yy), (x + 0.85 * w, yy + rng.uniform(-4, 4)), t, ink)
    else:  # partial fill
        fw = int(w * rng.uniform(0.55, 0.85))
        fh = int(h * rng.uniform(0.55, 0.85))
        fx = x + int((w - fw) * rng.uniform(0.2, 0.8))
        fy = y + int((h - fh) * rng.uniform(0.2, 0.8))
        _fill(img, fx, fy, fw, fh, ink)


def _draw_crossed_out(img: np.ndarray, rect, rng: np.random.Generator) -> None:
    _draw_confirmed(img, rect, rng)
    x, y, w, h = rect
    ink = float(rng.uniform(0, 50))
    t = int(rng.integers(4, 7))
    pad = 2
    _stroke(img, (x - pad, y - pad), (x + w + pad, y + h + pad), t, ink)
    _stroke(img, (x + w + pad, y - pad), (x - pad, y + h + pad), t, ink)


def generate_synthetic_exam(config: SynthConfig
                            ) -> tuple[np.ndarray, ExamMetadata, list[SynthSheet]]:
    """Reference image, metadata, and perturbed marked sheets with ground truth."""
    rng = np.random.default_rng(config.seed)
    template, meta = _draw_template(config, rng)
    reference = to_uint8(np.stack([template] * 3, axis=-1))

    mixture = np.array(config.class_mixture)
    sheets = []
    for si in range(config.sheets):
        page = template.copy()
        labels: dict[tuple[int, int], AnswerClass] = {}
        for q in meta.questions:
            for box in q.choices:
                cls = ALL_CLASSES[int(rng.choice(3, p=mixture))]
                labels[(q.index, box.choice_index)] = cls
                if cls == AnswerClass.CONFIRMED:
                    _draw_confirmed(page, box.rect, rng)
                elif cls == AnswerClass.CROSSED_OUT:
                    _draw_crossed_out(page, box.rect, rng)

        theta = math.radians(rng.uniform(-config.max_rotation_deg, config.max_rotation_deg))
        dx = rng.uniform(-config.max_shift_px, config.max_shift_px)
        dy = rng.uniform(-config.max_shift_px, config.max_shift_px)
        m = rotation_about((config.page_width - 1) / 2.0,
                           (config.page_height - 1) / 2.0, theta)
        m[0, 2] += dx
        m[1, 2] += dy
        warped = warp_affine(page, m, (config.page_width, config.page_height), fill=255.0)
        if config.noise_std > 0:
            warped = warped + rng.normal(0.0, config.noise_std, warped.shape)
        image = to_uint8(np.stack([warped] * 3, axis=-1))

        grade = sum(
            award([labels[(q.index, c)] for c in range(len(q.choices))],
                  q.correct_choice, q.weight)
            for q in meta.questions)
        sheets.append(SynthSheet(
            name=f"{meta.exam_id}_{si}_0", image=image, labels=labels, grade=grade))
    return reference, meta, sheets


# ---------------------------------------------------------------------------
# labeled samples


def collect_labeled_samples(sheets: list[tuple[str, np.ndarray]],
                            metadata: ExamMetadata,
                            labels: dict[tuple[str, int, int], int]
                            ) -> list[LabeledSample]:
    """One sample per (sheet, answer box); labels keyed by (sheet_id, question, choice)."""
    from .grading import extract_rois

    samples = []
    for sheet_id, image in sheets:
        for q in metadata.questions:
            rois = extract_rois(image, metadata, q.index)
            for box, roi in zip(q.choices, rois):
                key = (sheet_id, q.index, box.choice_index)
                if key not in labels:
                    raise LabelMissing(f"no label for {key}")
                code = labels[key]
                try:
                    label = AnswerClass(code)
                except ValueError as exc:
                    raise LabelMissing(f"unknown answerType {code} for {key}") from exc
                samples.append(LabeledSample(
                    roi=roi, label=label, exam_id=metadata.exam_id,
                    sample_id=f"{sheet_id}:{q.index}:{box.choice_index}"))
    return samples


def save_labels(labels: dict[tuple[str, int, int], int], path) -> None:
    lines = ["image,question,choice,answerType"]
    for (sheet_id, q, c), code in sorted(labels.items()):
        lines.append(f"{sheet_id},{q},{c},{int(code)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_labels(path) -> dict[tuple[str, int, int], int]:
    text = Path(path).read_text(encoding="utf-8").strip().splitlines()
    if not text or text[0] != "image,question,choice,answerType":
        raise ParseError(f"{path}: missing labels header")
    labels = {}
    for i, line in enumerate(text[1:], start=2):
        parts = line.split(",")
        if len(parts) != 4:
            raise ParseError(f"{path}: line {i}: expected 4 fields")
        labels[(parts[0], int(parts[1]), int(parts[2]))] = int(parts[3])
    return labels
