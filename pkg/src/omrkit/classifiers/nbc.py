"""Gaussian naive Bayes over the 12-entry handcrafted feature vector.

Per-class per-feature Gaussians fitted by maximum likelihood, a variance
floor against constant features (blank boxes), multinoulli priors with an
optional override (e.g. lifting a rare class to 5%), and log-domain
posterior evaluation to avoid underflow.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DegenerateTrainingSet, DimensionMismatch
from ..features import HANDCRAFTED_DIM, handcrafted_vector
from ..types import AnswerClass, RoiImage
from .base import ClassScores, LabeledSample

VARIANCE_FLOOR = 1e-6


@dataclass
class NbcModel:
    classes: list[AnswerClass]
    means: np.ndarray      # (n_classes, 12)
    variances: np.ndarray  # (n_classes, 12), floored
    priors: np.ndarray     # (n_classes,), sums to 1
    kind: str = "nbc"

    def classify(self, roi: RoiImage) -> ClassScores:
        return classify_nbc(self, handcrafted_vector(roi))


def _resolve_priors(classes, empirical: np.ndarray, prior_override) -> np.ndarray:
    """Apply overrides and renormalize the remaining mass proportionally."""
    priors = empirical.copy()
    if prior_override:
        override_idx = []
        for cls, p in prior_override.items():
            cls = AnswerClass(cls)
            if cls not in classes:
                raise DegenerateTrainingSet(f"override for class {cls} absent from training set")
            if not 0.0 <= p <= 1.0:
                raise DegenerateTrainingSet("prior override outside [0, 1]")
            priors[classes.index(cls)] = p
            override_idx.append(classes.index(cls))
        rest = [i for i in range(len(classes)) if i not in override_idx]
        fixed_mass = priors[override_idx].sum()
        if fixed_mass > 1.0 + 1e-12:
            raise DegenerateTrainingSet("prior overrides exceed total probability mass")
        rest_emp = empirical[rest].sum()
        if rest:
            priors[rest] = empirical[rest] * ((1.0 - fixed_mass) / rest_emp)
    return priors / priors.sum()


def train_nbc(samples: list[LabeledSample], classes,
              prior_override: dict | None = None,
              features: np.ndarray | None = None) -> NbcModel:
    """Fit per-feature Gaussians; `features` may supply precomputed vectors."""
    classes = sorted(set(classes), key=int)
    if features is None:
        features = np.stack([handcrafted_vector(s.roi) for s in samples])
    labels = np.array([int(s.label) for s in samples])

    means = np.zeros((len(classes), HANDCRAFTED_DIM))
    variances = np.zeros_like(means)
    counts = np.zeros(len(classes))
    for k, c in enumerate(classes):
        rows = features[labels == int(c)]
        if len(rows) < 2:
            raise DegenerateTrainingSet(f"class {c} needs >= 2 samples to estimate variance")
        means[k] = rows.mean(axis=0)
        variances[k] = np.maximum(rows.var(axis=0), VARIANCE_FLOOR)
        counts[k] = len(rows)

    priors = _resolve_priors(classes, counts / counts.sum(), prior_override)
    return NbcModel(classes=classes, means=means, variances=variances, priors=priors)


def classify_nbc(model: NbcModel, v: np.ndarray) -> ClassScores:
    """Posterior over classes for a handcrafted vector, computed in the log domain."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (model.means.shape[1],):
        raise DimensionMismatch(f"expected vector of length {model.means.shape[1]}")
    with np.errstate(divide="ignore"):
        log_prior = np.log(model.priors)
    log_lik = -0.5 * (np.log(2.0 * np.pi * model.variances)
                      + (v - model.means) ** 2 / model.variances).sum(axis=1)
    log_post = log_prior + log_lik
    finite = np.isfinite(log_post)
    shifted = log_post - log_post[finite].max()
    probs = np.where(finite, np.exp(np.where(finite, shifted, 0.0)), 0.0)
    probs = probs / probs.sum()
    return ClassScores.from_probs(model.classes, probs)
