"""Local HTTP service for annotation, grading, and review.

Thin plumbing over the library: the service never reimplements grading or
classification logic, it only stores metadata, runs the same batch pipeline
as the CLI, and lets a human review and override flagged boxes (the sheet
grade is then recomputed from the edited box labels with the same rule).

All endpoints live under /v1 and speak JSON, except the image endpoints
which return PNG bytes. Errors carry the raising module's error class name:
{"error": "ValidationError", "message": "..."}.
"""

from __future__ import annotations

import io
import threading
from pathlib import Path

import numpy as np
from fastapi import Body, FastAPI, Response
from fastapi.responses import JSONResponse
from PIL import Image

from .cli import format_grade, load_strategy
from .dataset import (ExamMetadata, load_metadata, metadata_from_dict,
                      metadata_to_dict, save_metadata)
from .errors import OmrError, QuestionUnknown, RegistrationFailed, ValidationError
from .grading import (DEFAULT_REVIEW_THRESHOLD, QuestionResult, SheetGrade,
                      grade_sheet, score_question)
from .imageops import to_gray
from .registration import RegistrationConfig, detect_features, register_sheet
from .strategy import StrategySpec, classify_strategy
from .types import AnswerClass, RoiImage


class ServiceStore:
    """Mutable service state: metadata, registered-image cache, grading results."""

    def __init__(self, data_dir: Path, review_threshold: float,
                 reg_config: RegistrationConfig):
        self.data_dir = Path(data_dir)
        self.review_threshold = review_threshold
        self.reg_config = reg_config
        self.grade_lock = threading.Lock()  # grading runs are serialized
        self.registered: dict[str, np.ndarray] = {}
        self.grades: dict[str, SheetGrade] = {}
        self.progress = {"state": "idle", "completed": 0, "total": 0}
        self._ref_features = None

    # -- files -------------------------------------------------------------

    def reference_path(self) -> Path:
        return self.data_dir / "reference.png"

    def metadata_path(self) -> Path:
        return self.data_dir / "metadata.json"

    def sheet_path(self, name: str) -> Path:
        path = (self.data_dir / "sheets" / name).with_suffix(".png")
        if path.parent != self.data_dir / "sheets":
            raise ValidationError(f"bad sheet name {name!r}")
        return path

    def sheet_names(self) -> list[str]:
        return sorted(p.stem for p in (self.data_dir / "sheets").glob("*.png"))

    def load_metadata(self) -> ExamMetadata:
        return load_metadata(self.metadata_path())

    # -- registration ------------------------------------------------------

    def reference_image(self) -> np.ndarray:
        return np.asarray(Image.open(self.reference_path()).convert("RGB"))

    def registered_image(self, name: str) -> np.ndarray:
        if name == "reference":
            return self.reference_image()
        if name not in self.registered:
            reference = self.reference_image()
            if self._ref_features is None:
                self._ref_features = detect_features(to_gray(reference),
                                                     self.reg_config.detector)
            sheet = np.asarray(Image.open(self.sheet_path(name)).convert("RGB"))
            image, _, _ = register_sheet(
                sheet, self._ref_features,
                (reference.shape[1], reference.shape[0]), self.reg_config)
            self.registered[name] = image
        return self.registered[name]

    # -- grading -----------------------------------------------------------

    def run_grade(self, spec: StrategySpec, names: list[str]) -> dict:
        metadata = self.load_metadata()
        with self.grade_lock:
            self.progress = {"state": "running", "completed": 0, "total": len(names)}
            graded = {}
            failures = []
            for name in names:
                try:
                    image = self.registered_image(name)
                    grade = grade_sheet(image, metadata, spec, sheet_id=name,
                                        review_threshold=self.review_threshold)
                    self.grades[name] = grade
                    graded[name] = grade
                except (RegistrationFailed, OSError) as exc:
                    failures.append({"sheet": name,
                                     "error": f"{type(exc).__name__}: {exc}"})
                self.progress["completed"] += 1
            self.progress["state"] = "done"
        return {
            "sheets": [self._grade_payload(name, g) for name, g in graded.items()],
            "failures": failures,
        }

    def _grade_payload(self, name: str, grade: SheetGrade) -> dict:
        payload = grade.to_dict()
        payload["sheet"] = name
        payload["display_total"] = format_grade(grade.total)
        return payload

    def apply_override(self, name: str, question: int, choice: int,
                       label: AnswerClass) -> dict:
        if name not in self.grades:
            raise ValidationError(f"sheet {name!r} has not been graded yet")
        metadata = self.load_metadata()
        q = metadata.question(question)
        if not 0 <= choice < len(q.choices):
            raise ValidationError(
                f"choice {choice} out of range for question {question}")

        grade = self.grades[name]
        questions = []
        total = 0.0
        for result in grade.questions:
            labels = list(result.choice_classes)
            confidences = list(result.choice_confidences)
            flagged = result.flagged_for_review
            if result.question_index == question:
                labels[choice] = label
                confidences[choice] = 1.0  # human decision
                meta_q = metadata.question(question)
                selected, confirmed, awarded, ambiguous = score_question(
                    labels, meta_q.correct_choice, meta_q.weight)
                flagged = ambiguous or any(
                    c < self.review_threshold for c in confidences)
                result = QuestionResult(
                    question_index=question, choice_classes=labels,
                    choice_confidences=confidences, selected_choice=selected,
                    confirmed_count=confirmed, awarded=awarded,
                    flagged_for_review=flagged)
            questions.append(result)
            total += result.awarded
        updated = SheetGrade(sheet_id=grade.sheet_id, total=total,
                             questions=questions, registration=grade.registration)
        self.grades[name] = updated
        return self._grade_payload(name, updated)

    def review_queue(self) -> list[dict]:
        queue = []
        for name in sorted(self.grades):
            for result in self.grades[name].questions:
                if result.flagged_for_review:
                    item = result.to_dict()
                    item["sheet"] = name
                    queue.append(item)
        return queue


def _error_response(exc: OmrError) -> JSONResponse:
    status = 404 if isinstance(exc, QuestionUnknown) else 422
    return JSONResponse(status_code=status,
                        content={"error": type(exc).__name__, "message": str(exc)})


def _png_response(image: np.ndarray) -> Response:
    buf = io.BytesIO()
    Image.fromarray(image).save(buf, format="PNG")
    return Response(content=buf.getvalue(), media_type="image/png")


def create_app(data_dir, review_threshold: float = DEFAULT_REVIEW_THRESHOLD,
               reg_config: RegistrationConfig = RegistrationConfig()) -> FastAPI:
    store = ServiceStore(Path(data_dir), review_threshold, reg_config)
    app = FastAPI(title="answer-sheet grading service", version="1")
    app.state.store = store

    @app.exception_handler(OmrError)
    async def _omr_error(request, exc: OmrError):
        return _error_response(exc)

    @app.exception_handler(FileNotFoundError)
    async def _missing(request, exc):
        return JSONResponse(status_code=404,
                            content={"error": "FileNotFoundError",
                                     "message": str(exc)})

    @app.get("/v1/reference")
    def get_reference():
        return _png_response(store.reference_image())

    @app.get("/v1/sheets")
    def list_sheets():
        return {"sheets": store.sheet_names()}

    @app.get("/v1/sheets/{name}")
    def get_sheet(name: str, registered: bool = False):
        if registered:
            return _png_response(store.registered_image(name))
        return _png_response(
            np.asarray(Image.open(store.sheet_path(name)).convert("RGB")))

    @app.get("/v1/metadata")
    def get_metadata():
        return metadata_to_dict(store.load_metadata())

    @app.put("/v1/metadata")
    def put_metadata(payload: dict = Body(...)):
        # validate fully before touching the stored file (atomic update)
        metadata = metadata_from_dict(payload)
        save_metadata(metadata, store.metadata_path())
        return metadata_to_dict(metadata)

    @app.post("/v1/classify-preview")
    def classify_preview(payload: dict = Body(...)):
        try:
            image_name = payload["image"]
            x, y, w, h = (int(v) for v in payload["rect"])
            strategy_file = payload["strategy"]
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"malformed preview request: {exc}") from exc
        spec = load_strategy(store.data_dir / strategy_file)
        image = store.registered_image(image_name)
        ih, iw = image.shape[:2]
        if w < 4 or h < 4 or x < 0 or y < 0 or x + w > iw or y + h > ih:
            raise ValidationError(f"rect {(x, y, w, h)} invalid for {iw}x{ih} image")
        scores = classify_strategy(RoiImage(pixels=image[y:y + h, x:x + w]), spec)
        return {"scores": {int(c): s for c, s in scores.scores.items()},
                "predicted": int(scores.predicted),
                "confidence": scores.confidence}

    @app.post("/v1/grade")
    def post_grade(payload: dict = Body(...)):
        try:
            strategy_file = payload["strategy"]
        except (KeyError, TypeError) as exc:
            raise ValidationError("grade request needs a strategy path") from exc
        spec = load_strategy(store.data_dir / strategy_file)
        names = payload.get("sheets") or store.sheet_names()
        if not isinstance(names, list) or not names:
            raise ValidationError("no sheets to grade")
        return store.run_grade(spec, [str(n) for n in names])

    @app.get("/v1/grade/status")
    def grade_status():
        return store.progress

    @app.get("/v1/grades/{name}")
    def get_grade(name: str):
        if name not in store.grades:
            raise ValidationError(f"sheet {name!r} has not been graded yet")
        return store._grade_payload(name, store.grades[name])

    @app.get("/v1/review-queue")
    def review_queue():
        return {"items": store.review_queue()}

    @app.post("/v1/override")
    def post_override(payload: dict = Body(...)):
        try:
            name = str(payload["sheet"])
            question = int(payload["question"])
            choice = int(payload["choice"])
            label = AnswerClass(int(payload["label"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"malformed override request: {exc}") from exc
        return store.apply_override(name, question, choice, label)

    return app
