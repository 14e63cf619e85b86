"""Answer-box classifiers behind a single uniform classify contract."""

from __future__ import annotations

from ..types import RoiImage
from .base import ClassScores, LabeledSample, check_classes
from .baseline import (BaselineModel, ThresholdModel, classify_threshold_otsu,
                       train_baseline_svm)
from .bovw import (BovwModel, Vocabulary, build_vocabulary, encode_bovw,
                   kmeans, train_bovw)
from .cnn import (CnnConfig, CnnModel, build_network, table_architecture_config,
                  train_cnn)
from .io import load_model, save_model
from .nbc import NbcModel, classify_nbc, train_nbc
from .svm import MultiSvm, hinge_loss, train_binary_svm, train_multi_svm


def classify(model, roi: RoiImage, allowed_classes=None) -> ClassScores:
    """Dispatch to the model's pipeline (features are applied internally)."""
    check_classes(model.classes, allowed_classes)
    return model.classify(roi)


__all__ = [
    "ClassScores", "LabeledSample", "classify",
    "ThresholdModel", "classify_threshold_otsu",
    "BaselineModel", "train_baseline_svm",
    "NbcModel", "train_nbc", "classify_nbc",
    "Vocabulary", "BovwModel", "build_vocabulary", "encode_bovw", "kmeans",
    "train_bovw",
    "CnnConfig", "CnnModel", "train_cnn", "build_network",
    "table_architecture_config",
    "MultiSvm", "train_binary_svm", "train_multi_svm", "hinge_loss",
    "save_model", "load_model",
]
