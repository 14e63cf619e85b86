"""Numeric representations of answer-box ROIs consumed by the classifiers.

Four representations are produced here:
  * a 12-entry handcrafted vector (gradient statistics + 9 orientation-histogram
    summaries) for the naive Bayes classifier,
  * a bag of local descriptors for the visual-words model,
  * per-channel mean intensity for the baseline SVM,
  * the standardized raster itself (via standardize_roi) for the CNN.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigMismatch, DegenerateRoi
from .imageops import resize_bilinear, to_gray, to_uint8
from .registration import DetectorConfig, Keypoint, detect_features
from .types import RoiImage

CANONICAL_SIZE = 227
HOG_BINS = 8
HOG_CELL = 4
HOG_CROP = 216  # centered crop of the canonical ROI; 54x54 cells of 4x4 px

HANDCRAFTED_DIM = 12

# detector tuned for small standardized ROIs: finer threshold, single octave
# resolution is enough at 64-96 px
ROI_DETECTOR = DetectorConfig(octaves=2, rel_threshold=0.005, nms_radius=2,
                              border=6, max_keypoints=200, abs_threshold=5e4)


@dataclass
class DescriptorBag:
    """Local descriptors extracted inside one ROI; possibly empty for blank boxes."""

    descriptors: np.ndarray  # (n, d), L2-normalized rows
    keypoints: list[Keypoint] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.descriptors)


def standardize_roi(roi: RoiImage, canonical_size: int = CANONICAL_SIZE) -> RoiImage:
    """Resample the ROI to canonical_size x canonical_size with bilinear interpolation."""
    h, w = roi.pixels.shape[:2]
    if h < 4 or w < 4:
        raise DegenerateRoi(f"ROI is {w}x{h}, need at least 4 px a side")
    out = resize_bilinear(roi.pixels, canonical_size, canonical_size)
    return RoiImage(pixels=to_uint8(out), source_box=roi.source_box)


def gradient_magnitude(roi_gray: np.ndarray) -> np.ndarray:
    """Per-pixel |d/dx| + |d/dy| with central differences (one-sided at borders)."""
    g = np.asarray(roi_gray, dtype=np.float64)
    if g.ndim != 2 or g.shape[0] < 2 or g.shape[1] < 2:
        raise DegenerateRoi("gradient needs a 2-D image of at least 2x2")
    dy, dx = np.gradient(g)
    return np.abs(dx) + np.abs(dy)


def hog_features(roi_gray: np.ndarray, bins: int = HOG_BINS,
                 cell: int = HOG_CELL, crop: int = HOG_CROP
                 ) -> tuple[np.ndarray, np.ndarray]:
    """Orientation-histogram features over uniform cells of a centered crop.

    Returns the flattened per-cell histogram (cell-major, orientation bin
    fastest) and the 9 summary values: the mean absolute first difference of
    the full vector, then of each bin's series across cells.

    With the reference configuration (227x227 input, 8 bins, 4-px cells over a
    216-px crop) the full vector has length 23328.
    """
    g = np.asarray(roi_gray, dtype=np.float64)
    if g.ndim != 2:
        raise ConfigMismatch("expected a grayscale image")
    h, w = g.shape
    if h < crop or w < crop:
        raise ConfigMismatch(f"image {w}x{h} is smaller than the {crop}-px crop")
    if crop % cell != 0:
        raise ConfigMismatch("crop must be a multiple of the cell size")

    dy, dx = np.gradient(g)
    y0 = (h - crop) // 2
    x0 = (w - crop) // 2
    dx = dx[y0:y0 + crop, x0:x0 + crop]
    dy = dy[y0:y0 + crop, x0:x0 + crop]

    mag = np.abs(dx) + np.abs(dy)
    # unsigned orientation in [0, pi), hard-assigned to one of `bins` bins
    theta = np.mod(np.arctan2(dy, dx), np.pi)
    bin_idx = np.minimum((theta / (np.pi / bins)).astype(np.int64), bins - 1)

    n_cells = crop // cell
    hist = np.zeros((n_cells, n_cells, bins))
    cy = np.arange(crop) // cell
    cyy, cxx = np.meshgrid(cy, cy, indexing="ij")
    np.add.at(hist, (cyy.ravel(), cxx.ravel(), bin_idx.ravel()), mag.ravel())

    full = hist.reshape(-1)
    if full.size == 0:
        raise ConfigMismatch("empty histogram")

    summaries = np.empty(1 + bins)
    summaries[0] = np.abs(np.diff(full)).mean() if full.size > 1 else 0.0
    for b in range(bins):
        series = hist[:, :, b].reshape(-1)
        summaries[1 + b] = np.abs(np.diff(series)).mean() if series.size > 1 else 0.0
    return full, summaries


def handcrafted_vector(roi: RoiImage) -> np.ndarray:
    """[max(g), median(g), mean(g), 9 orientation-histogram summaries]; length 12."""
    std = standardize_roi(roi, CANONICAL_SIZE)
    gray = to_gray(std.pixels)
    g = gradient_magnitude(gray)
    _, summaries = hog_features(gray)
    v = np.concatenate(([g.max(), np.median(g), g.mean()], summaries))
    assert v.shape == (HANDCRAFTED_DIM,)
    assert np.all(np.isfinite(v)) and np.all(v >= 0)
    return v


def descriptor_bag(roi: RoiImage, config: DetectorConfig = ROI_DETECTOR) -> DescriptorBag:
    """Local descriptors at interest points within the ROI; empty for blank boxes."""
    kps = detect_features(to_gray(roi.pixels), config)
    if not kps:
        return DescriptorBag(descriptors=np.zeros((0, 0)))
    return DescriptorBag(descriptors=np.stack([k.descriptor for k in kps]), keypoints=kps)


def mean_intensity(roi: RoiImage) -> np.ndarray:
    """Per-channel mean of the ROI, scaled to [0, 1]."""
    px = np.asarray(roi.pixels, dtype=np.float64)
    if px.ndim == 2:
        px = np.stack([px] * 3, axis=-1)
    return px.reshape(-1, px.shape[-1]).mean(axis=0) / 255.0
