"""Model persistence: a self-describing npz container (JSON header + arrays).

The round-trip guarantee is bit-exact: save -> load -> classify produces
identical ClassScores for every model kind.
"""

from __future__ import annotations

import json

import numpy as np

from ..errors import ConfigInvalid
from ..types import AnswerClass
from .baseline import BaselineModel, ThresholdModel
from .bovw import BovwModel, Vocabulary
from .cnn import CnnConfig, CnnModel, build_network
from .nbc import NbcModel
from .svm import MultiSvm

FORMAT_VERSION = 1


def _meta(model) -> dict:
    return {
        "version": FORMAT_VERSION,
        "kind": model.kind,
        "classes": [int(c) for c in model.classes],
    }


def save_model(model, path) -> None:
    meta = _meta(model)
    arrays: dict[str, np.ndarray] = {}
    if isinstance(model, ThresholdModel):
        meta["t"] = model.t
    elif isinstance(model, BaselineModel):
        arrays["weights"] = model.svm.weights
        arrays["biases"] = model.svm.biases
    elif isinstance(model, NbcModel):
        arrays["means"] = model.means
        arrays["variances"] = model.variances
        arrays["priors"] = model.priors
    elif isinstance(model, BovwModel):
        meta["roi_size"] = model.roi_size
        arrays["centers"] = model.vocabulary.centers
        arrays["weights"] = model.svm.weights
        arrays["biases"] = model.svm.biases
    elif isinstance(model, CnnModel):
        cfg = model.config
        meta["config"] = {
            "input_size": cfg.input_size,
            "channels": cfg.channels,
            "layers": [list(spec) for spec in cfg.layers],
            "learning_rate": cfg.learning_rate,
            "momentum": cfg.momentum,
            "epochs": cfg.epochs,
            "batch_size": cfg.batch_size,
        }
        arrays["epoch_losses"] = np.array(model.epoch_losses)
        for i, p in enumerate(model.network.params()):
            arrays[f"param_{i}"] = p.value
    else:
        raise ConfigInvalid(f"cannot serialize model of type {type(model).__name__}")
    np.savez(path, __meta__=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8),
             **arrays)


def load_model(path):
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(bytes(data["__meta__"]).decode())
        if meta.get("version") != FORMAT_VERSION:
            raise ConfigInvalid(f"unsupported model format version {meta.get('version')}")
        classes = [AnswerClass(c) for c in meta["classes"]]
        kind = meta["kind"]
        if kind == "threshold":
            return ThresholdModel(t=meta["t"], classes=tuple(classes))
        if kind == "baseline":
            svm = MultiSvm(classes=classes, weights=data["weights"], biases=data["biases"])
            return BaselineModel(svm=svm)
        if kind == "nbc":
            return NbcModel(classes=classes, means=data["means"],
                            variances=data["variances"], priors=data["priors"])
        if kind == "bovw":
            svm = MultiSvm(classes=classes, weights=data["weights"], biases=data["biases"])
            return BovwModel(vocabulary=Vocabulary(centers=data["centers"]),
                             svm=svm, roi_size=int(meta["roi_size"]))
        if kind == "cnn":
            c = meta["config"]
            cfg = CnnConfig(
                input_size=c["input_size"], channels=c["channels"],
                layers=tuple(tuple(spec) for spec in c["layers"]),
                learning_rate=c["learning_rate"], momentum=c["momentum"],
                epochs=c["epochs"], batch_size=c["batch_size"],
            )
            net = build_network(cfg, len(classes), np.random.default_rng(0))
            for i, p in enumerate(net.params()):
                p.value = data[f"param_{i}"]
            return CnnModel(config=cfg, classes=classes, network=net,
                            epoch_losses=list(data["epoch_losses"]))
        raise ConfigInvalid(f"unknown model kind {kind!r}")
