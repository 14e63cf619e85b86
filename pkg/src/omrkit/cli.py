"""Command-line front end: synth / train / grade / eval / serve.

All commands take an explicit --seed (default 0) and write byte-reproducible
outputs for a fixed seed; timestamps appear only in log lines, never in
report files.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional

import numpy as np
from PIL import Image

from .classifiers import (CnnConfig, LabeledSample, ThresholdModel, load_model,
                          save_model, train_baseline_svm, train_bovw, train_cnn,
                          train_nbc)
from .dataset import (SynthConfig, augment_samples, collect_labeled_samples,
                      generate_synthetic_exam, load_labels, load_metadata,
                      save_labels, save_metadata)
from .errors import ConfigInvalid, OmrError, ParseError
from .evaluation import evaluate_classifier
from .grading import DEFAULT_REVIEW_THRESHOLD, grade_batch
from .imageops import to_gray
from .registration import RegistrationConfig, register_sheet, detect_features
from .strategy import StrategyKind, StrategySpec
from .types import CLASS_SUBSETS, AnswerClass

# ---------------------------------------------------------------------------
# report formats


def format_grade(grade: float) -> str:
    """Up to two decimals, trailing zeros (and a bare point) trimmed."""
    text = f"{grade:.2f}".rstrip("0").rstrip(".")
    return "0" if text in ("", "-", "-0") else text


def render_csv(rows: list[tuple[str, float]]) -> str:
    lines = ["image,grade"]
    lines.extend(f"{name},{format_grade(grade)}" for name, grade in rows)
    return "\n".join(lines) + "\n"


def _xml_attr(value: str) -> str:
    return (value.replace("&", "&amp;").replace("<", "&lt;")
            .replace(">", "&gt;").replace('"', "&quot;"))


def render_xml(rows: list[tuple[str, float]]) -> str:
    lines = ['<?xml version="1.0" encoding="UTF-8"?>', "<report>"]
    lines.extend(
        f'  <sheet image="{_xml_attr(name)}" grade="{format_grade(grade)}"/>'
        for name, grade in rows)
    lines.append("</report>")
    return "\n".join(lines) + "\n"


def _write_text(path: Path, text: str) -> None:
    path.write_bytes(text.encode("utf-8"))


def _write_json(path: Path, obj) -> None:
    _write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# dataset plumbing


def _load_image(path) -> np.ndarray:
    return np.asarray(Image.open(path).convert("RGB"))


def _save_image(image: np.ndarray, path) -> None:
    Image.fromarray(image).save(path, format="PNG")


def load_training_samples(data_dir: Path,
                          reg_config: RegistrationConfig = RegistrationConfig(),
                          log=lambda msg: None) -> list[LabeledSample]:
    """Register every labeled sheet in a dataset directory and cut out samples."""
    metadata = load_metadata(data_dir / "metadata.json")
    labels = load_labels(data_dir / "labels.csv")
    reference = _load_image(data_dir / "reference.png")
    ref_features = detect_features(to_gray(reference), reg_config.detector)
    ref_size = (reference.shape[1], reference.shape[0])

    names = sorted({key[0] for key in labels})
    registered = []
    for name in names:
        sheet = _load_image(data_dir / "sheets" / f"{name}.png")
        image, _, _ = register_sheet(sheet, ref_features, ref_size, reg_config)
        registered.append((name, image))
        log(f"registered {name}")
    return collect_labeled_samples(registered, metadata, labels)


# ---------------------------------------------------------------------------
# classifier construction


TRAINABLE = ("otsu", "baseline", "nbc", "bovw", "cnn")


def make_trainer(kind: str, args):
    """A (samples, classes, seed) -> model callable for the named classifier."""
    if kind == "otsu":
        def trainer(samples, classes, seed):
            return ThresholdModel()
    elif kind == "baseline":
        def trainer(samples, classes, seed):
            return train_baseline_svm(samples, classes, seed=seed)
    elif kind == "nbc":
        def trainer(samples, classes, seed):
            return train_nbc(samples, classes,
                             prior_override=_prior_override(args, classes))
    elif kind == "bovw":
        def trainer(samples, classes, seed):
            return train_bovw(samples, classes, k=args.clusters, seed=seed)
    elif kind == "cnn":
        def trainer(samples, classes, seed):
            config = CnnConfig(input_size=args.cnn_size, epochs=args.cnn_epochs)
            return train_cnn(samples, classes, config=config, seed=seed)
    else:
        raise ConfigInvalid(f"unknown classifier {kind!r}")
    return trainer


def _prior_override(args, classes) -> Optional[dict]:
    prior = getattr(args, "crossed_out_prior", None)
    if prior is None or AnswerClass.CROSSED_OUT not in classes:
        return None
    return {AnswerClass.CROSSED_OUT: prior}


def _maybe_augment(samples: list[LabeledSample], classes, augment: bool
                   ) -> list[LabeledSample]:
    if augment and AnswerClass.CROSSED_OUT in classes:
        return samples + augment_samples(samples)
    return samples


# ---------------------------------------------------------------------------
# commands


def cmd_synth(args) -> int:
    out = Path(args.out)
    (out / "sheets").mkdir(parents=True, exist_ok=True)
    mixture = tuple(float(v) for v in args.mixture.split(","))
    if len(mixture) != 3:
        raise ConfigInvalid("--mixture needs three comma-separated values")
    config = SynthConfig(
        seed=args.seed, sheets=args.sheets, questions=args.questions,
        choices=args.choices, box_size=args.box_size, class_mixture=mixture,
        max_rotation_deg=args.max_rotation, max_shift_px=args.max_shift,
        noise_std=args.noise_std)
    reference, metadata, sheets = generate_synthetic_exam(config)

    _save_image(reference, out / "reference.png")
    save_metadata(metadata, out / "metadata.json")
    labels = {}
    truth_rows = []
    for sheet in sheets:
        _save_image(sheet.image, out / "sheets" / f"{sheet.name}.png")
        for (q, c), cls in sheet.labels.items():
            labels[(sheet.name, q, c)] = int(cls)
        truth_rows.append((f"{sheet.name}.png", sheet.grade))
    save_labels(labels, out / "labels.csv")
    _write_text(out / "truth.csv", render_csv(sorted(truth_rows)))
    print(f"wrote {len(sheets)} sheets to {out}")
    return 0


def cmd_train(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    samples = load_training_samples(Path(args.data),
                                    log=lambda m: print(m, file=sys.stderr))

    if args.strategy == "SF":
        if args.classifier is None:
            raise ConfigInvalid("SF training needs --classifier")
        classes = CLASS_SUBSETS[args.classes]
        model = make_trainer(args.classifier, args)(
            _maybe_augment([s for s in samples if s.label in classes],
                           classes, not args.no_augment),
            classes, args.seed)
        StrategySpec(kind=StrategyKind.SF, stage1=model).validate()
        save_model(model, out / "model.npz")
        descriptor = {"kind": "SF", "stage1": "model.npz", "stage2": None,
                      "stage1Kind": args.classifier, "stage2Kind": None}
    else:
        if args.stage1 is None or args.stage2 is None:
            raise ConfigInvalid("2S training needs --stage1 and --stage2")
        stage_models = []
        for stage_kind, subset_name, fname in (
                (args.stage1, "b", "stage1.npz"), (args.stage2, "c", "stage2.npz")):
            classes = CLASS_SUBSETS[subset_name]
            model = make_trainer(stage_kind, args)(
                _maybe_augment([s for s in samples if s.label in classes],
                               classes, not args.no_augment),
                classes, args.seed)
            stage_models.append((model, fname))
        StrategySpec(kind=StrategyKind.TWO_STAGE, stage1=stage_models[0][0],
                     stage2=stage_models[1][0]).validate()
        for model, fname in stage_models:
            save_model(model, out / fname)
        descriptor = {"kind": "2S", "stage1": "stage1.npz", "stage2": "stage2.npz",
                      "stage1Kind": args.stage1, "stage2Kind": args.stage2}
    _write_json(out / "strategy.json", descriptor)
    print(f"wrote strategy to {out / 'strategy.json'}")
    return 0


def load_strategy(path) -> StrategySpec:
    """Build a StrategySpec from a strategy.json descriptor (paths relative to it)."""
    path = Path(path)
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
        kind = StrategyKind(obj["kind"])
        stage1 = load_model(path.parent / obj["stage1"])
        stage2 = load_model(path.parent / obj["stage2"]) if obj.get("stage2") else None
    except (KeyError, ValueError, OSError) as exc:
        raise ParseError(f"{path}: {exc}") from exc
    spec = StrategySpec(kind=kind, stage1=stage1, stage2=stage2)
    spec.validate()
    return spec


def cmd_grade(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    spec = load_strategy(args.strategy_file)
    metadata = load_metadata(args.metadata)
    reference = _load_image(args.reference)
    sheet_files = sorted(Path(args.sheets).glob("*.png"))
    if not sheet_files:
        raise ConfigInvalid(f"no .png sheets under {args.sheets}")

    grades, run_report = grade_batch(
        sheet_files, reference, metadata, spec,
        review_threshold=args.review_threshold, concurrency=args.concurrency)

    rows = [(Path(path).name, grade.total)
            for path, grade in zip(sheet_files, grades) if grade is not None]
    formats = args.formats.split(",")
    for fmt in formats:
        if fmt == "csv":
            _write_text(out / "report.csv", render_csv(rows))
        elif fmt == "xml":
            _write_text(out / "report.xml", render_xml(rows))
        else:
            raise ConfigInvalid(f"unknown report format {fmt!r}")
    sheet_dicts = []
    for g in grades:
        if g is None:
            continue
        d = g.to_dict()
        d["sheet_id"] = Path(d["sheet_id"]).name  # keep reports path-independent
        sheet_dicts.append(d)
    _write_json(out / "report.json", {
        "sheets": sheet_dicts,
        "failures": [{"file": Path(r["file"]).name, "error": r["error"]}
                     for r in run_report.failures],
    })

    if run_report.failures:
        for failure in run_report.failures:
            print(f"FAILED {Path(failure['file']).name}: {failure['error']}",
                  file=sys.stderr)
        print(f"graded {len(rows)}/{len(sheet_files)} sheets", file=sys.stderr)
        return 2
    print(f"graded {len(rows)} sheets; reports in {out}")
    return 0


def cmd_eval(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    samples = load_training_samples(Path(args.data),
                                    log=lambda m: print(m, file=sys.stderr))
    if not args.no_augment:
        samples = samples + augment_samples(samples)
    trainer = make_trainer(args.classifier, args)

    reports = []
    for subset_name in args.subsets.split(","):
        if subset_name not in CLASS_SUBSETS:
            raise ConfigInvalid(f"unknown class subset {subset_name!r}")
        report, _ = evaluate_classifier(
            samples, trainer, CLASS_SUBSETS[subset_name], k=args.k,
            seed=args.seed, subset_name=subset_name,
            classifier_name=args.classifier)
        reports.append(report)

    _write_text(out / "eval.txt", "\n".join(r.to_text() for r in reports))
    _write_json(out / "eval.json", [r.to_dict() for r in reports])
    for report in reports:
        print(f"({report.class_subset}) mean accuracy {report.mean_accuracy:.4f}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(Path(args.data), review_threshold=args.review_threshold)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def _add_classifier_opts(p: argparse.ArgumentParser) -> None:
    p.add_argument("--clusters", type=int, default=200,
                   help="visual-word vocabulary size (bovw)")
    p.add_argument("--cnn-epochs", type=int, default=40)
    p.add_argument("--cnn-size", type=int, default=64,
                   help="CNN input resolution")
    p.add_argument("--crossed-out-prior", type=float, default=None,
                   help="override the crossed-out class prior (nbc)")
    p.add_argument("--no-augment", action="store_true",
                   help="skip crossed-out training augmentation")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="omr", description="answer-sheet mark recognition and grading")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic exam dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sheets", type=int, default=30)
    p.add_argument("--questions", type=int, default=10)
    p.add_argument("--choices", type=int, default=4)
    p.add_argument("--box-size", type=int, default=48)
    p.add_argument("--mixture", default="0.25,0.05,0.70",
                   help="confirmed,crossed-out,empty probabilities")
    p.add_argument("--max-rotation", type=float, default=3.0)
    p.add_argument("--max-shift", type=float, default=10.0)
    p.add_argument("--noise-std", type=float, default=8.0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train classifier(s) and a strategy descriptor")
    p.add_argument("--data", required=True, help="dataset dir (synth layout)")
    p.add_argument("--out", required=True, help="output directory for model files")
    p.add_argument("--strategy", choices=("SF", "2S"), default="SF")
    p.add_argument("--classifier", choices=TRAINABLE, default=None,
                   help="classifier for the SF strategy")
    p.add_argument("--stage1", choices=TRAINABLE, default=None)
    p.add_argument("--stage2", choices=TRAINABLE, default=None)
    p.add_argument("--classes", choices=sorted(CLASS_SUBSETS), default="a",
                   help="class subset for SF training")
    p.add_argument("--seed", type=int, default=0)
    _add_classifier_opts(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("grade", help="grade a directory of scanned sheets")
    p.add_argument("--reference", required=True)
    p.add_argument("--metadata", required=True)
    p.add_argument("--sheets", required=True)
    p.add_argument("--strategy-file", required=True, help="strategy.json from train")
    p.add_argument("--out", required=True)
    p.add_argument("--formats", default="csv,xml")
    p.add_argument("--review-threshold", type=float, default=DEFAULT_REVIEW_THRESHOLD)
    p.add_argument("--concurrency", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_grade)

    p = sub.add_parser("eval", help="cross-validated classifier evaluation")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--classifier", choices=TRAINABLE, required=True)
    p.add_argument("--subsets", default="a,b,c,d")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    _add_classifier_opts(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("serve", help="run the local annotation/grading service")
    p.add_argument("--data", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--review-threshold", type=float, default=DEFAULT_REVIEW_THRESHOLD)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except OmrError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
