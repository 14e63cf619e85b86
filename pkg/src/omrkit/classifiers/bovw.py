"""Bag of visual words: k-means vocabulary over local descriptors + multi-SVM.

The vocabulary is learned with k-means++ initialization and Lloyd iterations
(SSE asserted non-increasing); each ROI becomes an L1-normalized histogram of
nearest visual words feeding a one-vs-all linear SVM.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InsufficientDescriptors
from ..features import ROI_DETECTOR, DescriptorBag, descriptor_bag, standardize_roi
from ..types import AnswerClass, RoiImage
from .base import ClassScores, LabeledSample, softmax
from .svm import MultiSvm, train_multi_svm

DEFAULT_K = 200
BOVW_ROI_SIZE = 64


@dataclass
class Vocabulary:
    centers: np.ndarray  # (k, d)

    @property
    def k(self) -> int:
        return self.centers.shape[0]


def _sq_dists(data: np.ndarray, centers: np.ndarray) -> np.ndarray:
    return np.maximum(
        (data * data).sum(1)[:, None] + (centers * centers).sum(1)[None, :]
        - 2.0 * data @ centers.T, 0.0)


def _kmeans_pp_init(data: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = data.shape[0]
    centers = np.empty((k, data.shape[1]))
    centers[0] = data[rng.integers(n)]
    d2 = _sq_dists(data, centers[:1]).min(axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total <= 0:
            # all remaining points coincide with a center; fall back to uniform draws
            centers[i] = data[rng.integers(n)]
            continue
        probs = d2 / total
        centers[i] = data[rng.choice(n, p=probs)]
        d2 = np.minimum(d2, _sq_dists(data, centers[i:i + 1]).min(axis=1))
    return centers


def kmeans(data: np.ndarray, k: int, seed: int = 0, max_iter: int = 300,
           tol: float = 1e-4) -> tuple[np.ndarray, np.ndarray, float]:
    """Lloyd's algorithm with k-means++ init; returns (centers, assignment, sse)."""
    data = np.asarray(data, dtype=np.float64)
    rng = np.random.default_rng(seed)
    centers = _kmeans_pp_init(data, k, rng)
    prev_sse = np.inf
    assign = np.zeros(len(data), dtype=np.int64)
    for _ in range(max_iter):
        d2 = _sq_dists(data, centers)
        assign = np.argmin(d2, axis=1)
        sse = float(d2[np.arange(len(data)), assign].sum())
        assert sse <= prev_sse + 1e-6 * max(prev_sse if np.isfinite(prev_sse) else 1.0, 1.0), \
            "k-means SSE increased across a Lloyd iteration"
        new_centers = centers.copy()
        shift = 0.0
        for j in range(k):
            members = data[assign == j]
            if len(members) == 0:
                # re-seed empty cluster at the point farthest from its center
                far = int(np.argmax(d2[np.arange(len(data)), assign]))
                new_centers[j] = data[far]
            else:
                new_centers[j] = members.mean(axis=0)
            shift = max(shift, float(np.linalg.norm(new_centers[j] - centers[j])))
        centers = new_centers
        if shift < tol:
            prev_sse = sse
            break
        prev_sse = sse
    d2 = _sq_dists(data, centers)
    assign = np.argmin(d2, axis=1)
    sse = float(d2[np.arange(len(data)), assign].sum())
    return centers, assign, sse


def build_vocabulary(bags: list[DescriptorBag], k: int = DEFAULT_K,
                     seed: int = 0, max_iter: int = 300,
                     max_descriptors: int | None = None) -> Vocabulary:
    """Cluster all training descriptors into k visual words."""
    stacks = [b.descriptors for b in bags if len(b) > 0]
    if not stacks:
        raise InsufficientDescriptors("no descriptors in any training bag")
    data = np.concatenate(stacks, axis=0)
    if data.shape[0] < k:
        raise InsufficientDescriptors(
            f"{data.shape[0]} descriptors < k={k}")
    if max_descriptors is not None and data.shape[0] > max_descriptors:
        rng = np.random.default_rng(seed)
        data = data[rng.choice(data.shape[0], size=max_descriptors, replace=False)]
    centers, _, _ = kmeans(data, k, seed=seed, max_iter=max_iter)
    # enforce pairwise-distinct centers: duplicates are re-seeded on far points
    d2c = _sq_dists(centers, centers)
    np.fill_diagonal(d2c, np.inf)
    if d2c.min() < 1e-12:
        rng = np.random.default_rng(seed + 1)
        seen = set()
        for i in range(k):
            key = centers[i].tobytes()
            while key in seen:
                centers[i] = data[rng.integers(len(data))] + rng.normal(0, 1e-6, centers.shape[1])
                key = centers[i].tobytes()
            seen.add(key)
    return Vocabulary(centers=centers)


def encode_bovw(vocab: Vocabulary, bag: DescriptorBag) -> np.ndarray:
    """L1-normalized histogram of nearest visual words; zeros for an empty bag."""
    hist = np.zeros(vocab.k)
    if len(bag) == 0:
        return hist
    assign = np.argmin(_sq_dists(bag.descriptors, vocab.centers), axis=1)
    np.add.at(hist, assign, 1.0)
    return hist / hist.sum()


@dataclass
class BovwModel:
    vocabulary: Vocabulary
    svm: MultiSvm
    roi_size: int = BOVW_ROI_SIZE
    kind: str = "bovw"

    @property
    def classes(self):
        return tuple(self.svm.classes)

    def _encode(self, roi: RoiImage) -> np.ndarray:
        std = standardize_roi(roi, self.roi_size)
        return encode_bovw(self.vocabulary, descriptor_bag(std))

    def classify(self, roi: RoiImage) -> ClassScores:
        probs = softmax(self.svm.decision(self._encode(roi))[0])
        return ClassScores.from_probs(self.svm.classes, probs)


def train_bovw(samples: list[LabeledSample], classes, k: int = DEFAULT_K,
               seed: int = 0, lam: float = 1e-4, epochs: int = 100,
               roi_size: int = BOVW_ROI_SIZE, max_iter: int = 300,
               bags: list[DescriptorBag] | None = None,
               max_descriptors: int | None = 50000) -> BovwModel:
    """Vocabulary from the training descriptors, then one-vs-all SVMs on histograms."""
    classes = sorted(set(classes), key=int)
    use_idx = [i for i, s in enumerate(samples) if s.label in classes]
    if bags is None:
        bags = [descriptor_bag(standardize_roi(samples[i].roi, roi_size)) for i in use_idx]
    else:
        bags = [bags[i] for i in use_idx]
    vocab = build_vocabulary(bags, k=k, seed=seed, max_iter=max_iter,
                             max_descriptors=max_descriptors)
    hists = np.stack([encode_bovw(vocab, b) for b in bags])
    labels = [samples[i].label for i in use_idx]
    svm = train_multi_svm(hists, labels, classes, lam=lam, epochs=epochs, seed=seed)
    return BovwModel(vocabulary=vocab, svm=svm, roi_size=roi_size)
