import filecmp
import json
import shutil
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from omrkit.cli import (format_grade, load_strategy, main, render_csv,
                        render_xml)

DATA = Path(__file__).parent / "data"

GOLDEN_ROWS = [("sheet_a.png", 10.0), ('b<&>".png', 2.5), ("c.png", 0.0)]


# -- report rendering ----------------------------------------------------------------


def test_format_grade():
    assert format_grade(10.0) == "10"
    assert format_grade(2.5) == "2.5"
    assert format_grade(2.25) == "2.25"
    assert format_grade(1.204) == "1.2"
    assert format_grade(0.0) == "0"
    assert format_grade(-0.0) == "0"


def test_render_csv_matches_golden():
    golden = (DATA / "golden_report.csv").read_bytes()
    assert render_csv(GOLDEN_ROWS).encode("utf-8") == golden


def test_render_xml_matches_golden():
    golden = (DATA / "golden_report.xml").read_bytes()
    assert render_xml(GOLDEN_ROWS).encode("utf-8") == golden


# -- synth ----------------------------------------------------------------------------


def synth(out, seed=5, sheets=3, questions=3):
    rc = main(["synth", "--out", str(out), "--seed", str(seed),
               "--sheets", str(sheets), "--questions", str(questions),
               "--choices", "4", "--mixture", "0.35,0.15,0.50",
               "--noise-std", "6"])
    assert rc == 0
    return Path(out)


def test_synth_layout_and_determinism(tmp_path):
    a = synth(tmp_path / "a")
    b = synth(tmp_path / "b")
    for name in ("reference.png", "metadata.json", "labels.csv", "truth.csv"):
        assert (a / name).exists()
        assert filecmp.cmp(a / name, b / name, shallow=False), name
    sheets_a = sorted((a / "sheets").glob("*.png"))
    assert len(sheets_a) == 3
    for p in sheets_a:
        assert filecmp.cmp(p, b / "sheets" / p.name, shallow=False)


def test_synth_different_seed_differs(tmp_path):
    a = synth(tmp_path / "a", seed=5)
    b = synth(tmp_path / "b", seed=6)
    assert not filecmp.cmp(a / "labels.csv", b / "labels.csv", shallow=False)


# -- train / grade -------------------------------------------------------------------


@pytest.fixture(scope="module")
def cli_data(tmp_path_factory):
    return synth(tmp_path_factory.mktemp("cli") / "data", sheets=4)


def train_nbc(data, out):
    rc = main(["train", "--data", str(data), "--out", str(out),
               "--strategy", "SF", "--classifier", "nbc", "--seed", "0"])
    assert rc == 0
    return Path(out) / "strategy.json"


def test_train_sf_writes_artifacts(tmp_path, cli_data):
    strategy = train_nbc(cli_data, tmp_path / "model")
    assert strategy.exists()
    assert (tmp_path / "model" / "model.npz").exists()
    desc = json.loads(strategy.read_text())
    assert desc["kind"] == "SF" and desc["stage1Kind"] == "nbc"
    spec = load_strategy(strategy)
    spec.validate()


def test_train_two_stage_writes_artifacts(tmp_path, cli_data):
    out = tmp_path / "model2s"
    rc = main(["train", "--data", str(cli_data), "--out", str(out),
               "--strategy", "2S", "--stage1", "baseline", "--stage2", "nbc",
               "--seed", "0"])
    assert rc == 0
    assert (out / "stage1.npz").exists() and (out / "stage2.npz").exists()
    spec = load_strategy(out / "strategy.json")
    assert spec.stage2 is not None


def test_train_sf_needs_classifier(tmp_path, cli_data):
    rc = main(["train", "--data", str(cli_data), "--out", str(tmp_path / "m")])
    assert rc == 1


def test_grade_byte_reproducible(tmp_path, cli_data):
    strategy = train_nbc(cli_data, tmp_path / "model")
    outs = []
    for run in ("r1", "r2"):
        out = tmp_path / run
        rc = main(["grade", "--reference", str(cli_data / "reference.png"),
                   "--metadata", str(cli_data / "metadata.json"),
                   "--sheets", str(cli_data / "sheets"),
                   "--strategy-file", str(strategy),
                   "--out", str(out), "--seed", "0"])
        assert rc == 0
        outs.append(out)
    for name in ("report.csv", "report.xml", "report.json"):
        assert filecmp.cmp(outs[0] / name, outs[1] / name, shallow=False), name
    csv = (outs[0] / "report.csv").read_text(encoding="utf-8")
    assert csv.startswith("image,grade\n")
    assert len(csv.strip().splitlines()) == 5  # header + 4 sheets


def test_grade_exit_2_on_failed_sheet(tmp_path, cli_data):
    strategy = train_nbc(cli_data, tmp_path / "model")
    sheets = tmp_path / "sheets"
    shutil.copytree(cli_data / "sheets", sheets)
    ref = np.asarray(Image.open(cli_data / "reference.png"))
    Image.fromarray(np.full_like(ref, 255)).save(sheets / "blank.png")

    out = tmp_path / "out"
    rc = main(["grade", "--reference", str(cli_data / "reference.png"),
               "--metadata", str(cli_data / "metadata.json"),
               "--sheets", str(sheets), "--strategy-file", str(strategy),
               "--out", str(out)])
    assert rc == 2
    report = json.loads((out / "report.json").read_text())
    assert len(report["failures"]) == 1
    assert report["failures"][0]["file"] == "blank.png"
    csv = (out / "report.csv").read_text(encoding="utf-8")
    assert "blank.png" not in csv
    assert len(csv.strip().splitlines()) == 5  # the other 4 sheets graded


def test_grade_missing_strategy_exits_1(tmp_path, cli_data):
    rc = main(["grade", "--reference", str(cli_data / "reference.png"),
               "--metadata", str(cli_data / "metadata.json"),
               "--sheets", str(cli_data / "sheets"),
               "--strategy-file", str(tmp_path / "nope.json"),
               "--out", str(tmp_path / "out")])
    assert rc == 1


# -- eval ------------------------------------------------------------------------------


def test_eval_writes_reports(tmp_path, cli_data):
    out = tmp_path / "eval"
    rc = main(["eval", "--data", str(cli_data), "--out", str(out),
               "--classifier", "otsu", "--subsets", "b", "--k", "3",
               "--seed", "0"])
    assert rc == 0
    text = (out / "eval.txt").read_text(encoding="utf-8")
    assert "mean accuracy" in text
    reports = json.loads((out / "eval.json").read_text())
    assert reports[0]["class_subset"] == "b" and reports[0]["k"] == 3
