"""Shared fixtures: small synthetic exams, registered samples, drawn ROIs."""

from __future__ import annotations

import numpy as np
import pytest

from omrkit.dataset import SynthConfig, generate_synthetic_exam
from omrkit.imageops import to_gray
from omrkit.registration import RegistrationConfig, detect_features, register_sheet
from omrkit.types import AnswerClass, RoiImage


SMALL_SYNTH = SynthConfig(seed=5, sheets=6, questions=4, choices=4,
                          class_mixture=(0.35, 0.15, 0.50), noise_std=6.0)


def make_roi(size: int = 64, draw=None, seed: int = 0) -> RoiImage:
    """A white square ROI with an optional draw callback (gray image, rng)."""
    img = np.full((size, size), 255.0)
    if draw is not None:
        draw(img, np.random.default_rng(seed))
    return RoiImage(pixels=np.stack([img] * 3, axis=-1).astype(np.uint8))


@pytest.fixture(scope="session")
def small_exam():
    """(reference, metadata, sheets) for a 6-sheet synthetic exam."""
    return generate_synthetic_exam(SMALL_SYNTH)


@pytest.fixture(scope="session")
def registered_sheets(small_exam):
    """[(name, registered image)] for every sheet of the small exam."""
    reference, metadata, sheets = small_exam
    config = RegistrationConfig()
    ref_features = detect_features(to_gray(reference), config.detector)
    ref_size = (reference.shape[1], reference.shape[0])
    out = []
    for sheet in sheets:
        image, _, _ = register_sheet(sheet.image, ref_features, ref_size, config)
        out.append((sheet.name, image))
    return out


@pytest.fixture(scope="session")
def small_samples(small_exam, registered_sheets):
    """Labeled box samples cut from the registered small-exam sheets."""
    from omrkit.dataset import collect_labeled_samples

    reference, metadata, sheets = small_exam
    labels = {}
    for sheet in sheets:
        for (q, c), cls in sheet.labels.items():
            labels[(sheet.name, q, c)] = int(cls)
    return collect_labeled_samples(registered_sheets, metadata, labels)


@pytest.fixture(scope="session")
def synth_dir(tmp_path_factory):
    """The small exam written to disk in the CLI dataset layout."""
    from omrkit.cli import main

    root = tmp_path_factory.mktemp("synthdata")
    code = main([
        "synth", "--out", str(root), "--seed", "5", "--sheets", "6",
        "--questions", "4", "--choices", "4",
        "--mixture", "0.35,0.15,0.50", "--noise-std", "6",
    ])
    assert code == 0
    return root


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Echo the acceptance pass/fail lines after the run; plain prints from
    inside passing tests are swallowed by output capture."""
    import sys

    module = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if module is not None and module.ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in module.ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
