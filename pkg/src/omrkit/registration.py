"""Align scanned answer sheets to the model-answer reference image.

Pipeline: multi-octave Harris corner detection with rotation-normalized
gradient-histogram descriptors, nearest/second-nearest ratio matching,
MSAC affine estimation, and bilinear warping into the reference frame.

The detector is scale/rotation robust and fully deterministic; the MSAC
stage is deterministic given the seed in MsacConfig.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy import ndimage

from .errors import (DescriptorMismatch, EmptyImage, InsufficientMatches,
                     NoConsensus, RegistrationFailed, SingularTransform)
from .imageops import sample_bilinear, to_gray, warp_affine

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class DetectorConfig:
    name: str = "harris"
    octaves: int = 3
    smoothing_sigma: float = 1.0
    harris_sigma: float = 1.5
    harris_k: float = 0.05
    rel_threshold: float = 0.01
    abs_threshold: float = 1e3  # suppresses sensor-noise corners on blank regions
    nms_radius: int = 4
    border: int = 16           # patch support; keypoints closer to the edge are dropped
    max_keypoints: int = 2000
    base_scale: float = 2.0


@dataclass(frozen=True)
class MsacConfig:
    threshold_px: float = 3.0
    max_iterations: int = 2000
    min_inliers: int = 10
    confidence: float = 0.99
    seed: int = 0


@dataclass(frozen=True)
class RegistrationConfig:
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    msac: MsacConfig = field(default_factory=MsacConfig)
    ratio: float = 0.7


@dataclass
class Keypoint:
    x: float
    y: float
    scale: float
    orientation: float  # radians in [0, 2*pi)
    descriptor: np.ndarray
    response: float = 0.0
    detector: str = "harris"


@dataclass
class MatchSet:
    pairs: list[tuple[int, int, float]]  # (sheet index, reference index, distance)

    def __len__(self) -> int:
        return len(self.pairs)


@dataclass(frozen=True)
class Transform:
    """3x3 affine matrix in homogeneous coordinates; bottom row is exactly [0, 0, 1]."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.shape != (3, 3):
            raise SingularTransform("transform matrix must be 3x3")
        if not np.array_equal(m[2], [0.0, 0.0, 1.0]):
            raise SingularTransform("bottom row must be exactly [0, 0, 1]")
        if abs(np.linalg.det(m)) <= 1e-9:
            raise SingularTransform("transform is singular")
        object.__setattr__(self, "matrix", m)

    @staticmethod
    def identity() -> "Transform":
        return Transform(np.eye(3))

    @staticmethod
    def from_linear(a: np.ndarray, d: np.ndarray) -> "Transform":
        m = np.eye(3)
        m[:2, :2] = a
        m[:2, 2] = d
        return Transform(m)

    def apply(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        out = pts @ self.matrix[:2, :2].T + self.matrix[:2, 2]
        return out if np.asarray(points).ndim > 1 else out[0]

    def inverse(self) -> "Transform":
        inv = np.linalg.inv(self.matrix)
        inv[2] = [0.0, 0.0, 1.0]
        return Transform(inv)


@dataclass
class RegistrationReport:
    sheet_keypoints: int
    reference_keypoints: int
    matches: int
    inliers: int
    mean_reprojection_error: float

    def to_dict(self) -> dict:
        return {
            "sheet_keypoints": self.sheet_keypoints,
            "reference_keypoints": self.reference_keypoints,
            "matches": self.matches,
            "inliers": self.inliers,
            "mean_reprojection_error": self.mean_reprojection_error,
        }


# ---------------------------------------------------------------------------
# detection


def _downsample2(img: np.ndarray) -> np.ndarray:
    h, w = img.shape
    h2, w2 = h // 2, w // 2
    return img[: 2 * h2, : 2 * w2].reshape(h2, 2, w2, 2).mean(axis=(1, 3))


def _harris_response(gx: np.ndarray, gy: np.ndarray, sigma: float, k: float) -> np.ndarray:
    ixx = ndimage.gaussian_filter(gx * gx, sigma)
    iyy = ndimage.gaussian_filter(gy * gy, sigma)
    ixy = ndimage.gaussian_filter(gx * gy, sigma)
    det = ixx * iyy - ixy * ixy
    tr = ixx + iyy
    return det - k * tr * tr


def _subpixel_offset(r: np.ndarray, ys: np.ndarray, xs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Quadratic refinement of peak locations, clamped to +-0.5 px per axis."""
    def axis_offset(m1, c, p1):
        denom = m1 - 2.0 * c + p1
        off = np.where(np.abs(denom) > 1e-12, 0.5 * (m1 - p1) / np.where(denom == 0, 1, denom), 0.0)
        return np.clip(off, -0.5, 0.5)

    dx = axis_offset(r[ys, xs - 1], r[ys, xs], r[ys, xs + 1])
    dy = axis_offset(r[ys - 1, xs], r[ys, xs], r[ys + 1, xs])
    return dx, dy


def _dominant_orientations(gx: np.ndarray, gy: np.ndarray,
                           xs: np.ndarray, ys: np.ndarray, radius: int = 8) -> np.ndarray:
    """Peak of a Gaussian-weighted 36-bin orientation histogram per keypoint."""
    n_bins = 36
    off = np.arange(-radius, radius + 1, dtype=np.float64)
    ou, ov = np.meshgrid(off, off)
    ou = ou.ravel()
    ov = ov.ravel()
    weight = np.exp(-(ou**2 + ov**2) / (2.0 * (radius / 2.0) ** 2))

    px = np.round(xs[:, None] + ou[None, :]).astype(np.int64)
    py = np.round(ys[:, None] + ov[None, :]).astype(np.int64)
    h, w = gx.shape
    px = np.clip(px, 0, w - 1)
    py = np.clip(py, 0, h - 1)
    sgx = gx[py, px]
    sgy = gy[py, px]
    mag = np.hypot(sgx, sgy)
    ang = np.mod(np.arctan2(sgy, sgx), TWO_PI)
    bins = np.minimum((ang / (TWO_PI / n_bins)).astype(np.int64), n_bins - 1)

    hist = np.zeros((len(xs), n_bins))
    rows = np.repeat(np.arange(len(xs)), len(ou))
    np.add.at(hist, (rows, bins.ravel()), (mag * weight[None, :]).ravel())

    peak = np.argmax(hist, axis=1)
    left = hist[np.arange(len(xs)), (peak - 1) % n_bins]
    center = hist[np.arange(len(xs)), peak]
    right = hist[np.arange(len(xs)), (peak + 1) % n_bins]
    denom = left - 2.0 * center + right
    frac = np.where(np.abs(denom) > 1e-12, 0.5 * (left - right) / np.where(denom == 0, 1, denom), 0.0)
    frac = np.clip(frac, -0.5, 0.5)
    return np.mod((peak + frac + 0.5) * (TWO_PI / n_bins), TWO_PI)


# descriptor geometry: 16x16 sample grid, 4x4 spatial cells, 8 orientation bins
_D_GRID = 16
_D_CELLS = 4
_D_BINS = 8
_du, _dv = np.meshgrid(np.arange(_D_GRID) - (_D_GRID - 1) / 2.0,
                       np.arange(_D_GRID) - (_D_GRID - 1) / 2.0)
_du = _du.ravel()
_dv = _dv.ravel()
_D_GAUSS = np.exp(-(_du**2 + _dv**2) / (2.0 * (_D_GRID / 2.0) ** 2))

DESCRIPTOR_LENGTH = _D_CELLS * _D_CELLS * _D_BINS


def _descriptors(gx: np.ndarray, gy: np.ndarray, xs: np.ndarray, ys: np.ndarray,
                 thetas: np.ndarray) -> np.ndarray:
    """Rotation-normalized 128-d descriptors for a batch of keypoints."""
    n = len(xs)
    cos_t = np.cos(thetas)[:, None]
    sin_t = np.sin(thetas)[:, None]
    px = xs[:, None] + cos_t * _du[None, :] - sin_t * _dv[None, :]
    py = ys[:, None] + sin_t * _du[None, :] + cos_t * _dv[None, :]

    sgx = sample_bilinear(gx, px, py, fill=0.0)
    sgy = sample_bilinear(gy, px, py, fill=0.0)
    mag = np.hypot(sgx, sgy) * _D_GAUSS[None, :]
    ori = np.mod(np.arctan2(sgy, sgx) - thetas[:, None], TWO_PI)

    # spatial cell coordinates of each sample (fixed, shared by all keypoints)
    cell_w = _D_GRID / _D_CELLS
    cu = (_du + _D_GRID / 2.0) / cell_w - 0.5
    cv = (_dv + _D_GRID / 2.0) / cell_w - 0.5
    cu0 = np.floor(cu).astype(np.int64)
    cv0 = np.floor(cv).astype(np.int64)
    fu = cu - cu0
    fv = cv - cv0

    ob = ori / (TWO_PI / _D_BINS)
    ob0 = np.floor(ob).astype(np.int64) % _D_BINS
    fo = ob - np.floor(ob)
    ob1 = (ob0 + 1) % _D_BINS

    desc = np.zeros((n, _D_CELLS * _D_CELLS * _D_BINS))
    rows = np.broadcast_to(np.arange(n)[:, None], (n, _D_GRID * _D_GRID))
    for iu, wu in ((cu0, 1.0 - fu), (cu0 + 1, fu)):
        valid_u = (iu >= 0) & (iu < _D_CELLS)
        for iv, wv in ((cv0, 1.0 - fv), (cv0 + 1, fv)):
            valid = valid_u & (iv >= 0) & (iv < _D_CELLS)
            w_spatial = np.where(valid, wu * wv, 0.0)
            cell = (np.clip(iv, 0, _D_CELLS - 1) * _D_CELLS
                    + np.clip(iu, 0, _D_CELLS - 1)) * _D_BINS
            for obin, wo in ((ob0, 1.0 - fo), (ob1, fo)):
                idx = cell[None, :] + obin
                np.add.at(desc, (rows, idx), mag * wo * w_spatial[None, :])

    norms = np.linalg.norm(desc, axis=1, keepdims=True)
    desc = np.divide(desc, norms, out=np.zeros_like(desc), where=norms > 1e-12)
    desc = np.minimum(desc, 0.2)
    norms = np.linalg.norm(desc, axis=1, keepdims=True)
    desc = np.divide(desc, norms, out=np.zeros_like(desc), where=norms > 1e-12)
    return desc


def detect_features(image: np.ndarray, config: DetectorConfig = DetectorConfig()) -> list[Keypoint]:
    """Detect corner keypoints with L2-normalized descriptors.

    Deterministic for a fixed image and config. A constant image yields no
    keypoints (no gradient, no interest points).
    """
    gray = to_gray(np.asarray(image))
    if gray.size == 0 or 0 in gray.shape:
        raise EmptyImage("image has a zero dimension")

    keypoints: list[Keypoint] = []
    octave_img = gray
    for octave in range(config.octaves):
        h, w = octave_img.shape
        if min(h, w) < 2 * config.border + 2:
            break
        smooth = ndimage.gaussian_filter(octave_img, config.smoothing_sigma)
        gy, gx = np.gradient(smooth)
        resp = _harris_response(gx, gy, config.harris_sigma, config.harris_k)
        rmax = resp.max()
        if rmax <= max(config.abs_threshold, 1e-6):
            octave_img = _downsample2(octave_img)
            continue
        threshold = max(config.rel_threshold * rmax, config.abs_threshold)
        size = 2 * config.nms_radius + 1
        local_max = resp == ndimage.maximum_filter(resp, size=size)
        mask = local_max & (resp > threshold)
        mask[: config.border] = False
        mask[-config.border:] = False
        mask[:, : config.border] = False
        mask[:, -config.border:] = False
        ys, xs = np.nonzero(mask)
        if len(xs) == 0:
            octave_img = _downsample2(octave_img)
            continue

        dx, dy = _subpixel_offset(resp, ys, xs)
        fx = xs + dx
        fy = ys + dy
        thetas = _dominant_orientations(gx, gy, fx, fy)
        descs = _descriptors(gx, gy, fx, fy, thetas)
        scale_factor = float(2**octave)
        for i in range(len(xs)):
            if np.linalg.norm(descs[i]) < 0.5:  # no gradient support, drop
                continue
            keypoints.append(Keypoint(
                x=(fx[i] + 0.5) * scale_factor - 0.5,
                y=(fy[i] + 0.5) * scale_factor - 0.5,
                scale=config.base_scale * scale_factor,
                orientation=float(thetas[i]),
                descriptor=descs[i],
                response=float(resp[ys[i], xs[i]] * scale_factor**4),
                detector=config.name,
            ))
        octave_img = _downsample2(octave_img)

    keypoints.sort(key=lambda k: (-k.response, k.y, k.x, k.scale))
    keypoints = keypoints[: config.max_keypoints]
    keypoints.sort(key=lambda k: (k.y, k.x, k.scale))
    return keypoints


# ---------------------------------------------------------------------------
# matching


def match_features(sheet_kps: list[Keypoint], ref_kps: list[Keypoint],
                   ratio: float = 0.7) -> MatchSet:
    """Nearest/second-nearest distance-ratio matching of descriptors."""
    if sheet_kps and ref_kps:
        lens = {len(k.descriptor) for k in sheet_kps} | {len(k.descriptor) for k in ref_kps}
        if len(lens) != 1:
            raise DescriptorMismatch("descriptor lengths differ")
        names = {k.detector for k in sheet_kps} | {k.detector for k in ref_kps}
        if len(names) != 1:
            raise DescriptorMismatch("keypoints come from different detector configurations")
    if not sheet_kps or not ref_kps:
        return MatchSet(pairs=[])

    a = np.stack([k.descriptor for k in sheet_kps])
    b = np.stack([k.descriptor for k in ref_kps])
    d2 = np.maximum(
        (a * a).sum(1)[:, None] + (b * b).sum(1)[None, :] - 2.0 * (a @ b.T), 0.0)
    dists = np.sqrt(d2)

    pairs = []
    for i in range(len(sheet_kps)):
        row = dists[i]
        if len(row) == 1:
            pairs.append((i, 0, float(row[0])))
            continue
        order = np.argpartition(row, 1)[:2]
        if row[order[0]] > row[order[1]]:
            order = order[::-1]
        d1, d2nd = row[order[0]], row[order[1]]
        if d2nd > 0 and d1 <= ratio * d2nd:
            pairs.append((i, int(order[0]), float(d1)))
    return MatchSet(pairs=pairs)


# ---------------------------------------------------------------------------
# MSAC


def _solve_affine(src: np.ndarray, dst: np.ndarray) -> Optional[np.ndarray]:
    """Least-squares affine mapping src -> dst as a 3x3 matrix."""
    n = len(src)
    a = np.zeros((2 * n, 6))
    a[0::2, 0:2] = src
    a[0::2, 2] = 1.0
    a[1::2, 3:5] = src
    a[1::2, 5] = 1.0
    rhs = dst.reshape(-1)
    sol, _, rank, _ = np.linalg.lstsq(a, rhs, rcond=None)
    if rank < 6:
        return None
    m = np.eye(3)
    m[0, :2] = sol[0:2]
    m[0, 2] = sol[2]
    m[1, :2] = sol[3:5]
    m[1, 2] = sol[5]
    return m


def _residuals(m: np.ndarray, src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    mapped = src @ m[:2, :2].T + m[:2, 2]
    return np.linalg.norm(mapped - dst, axis=1)


def estimate_transform(matches: MatchSet, sheet_kps: list[Keypoint],
                       ref_kps: list[Keypoint],
                       config: MsacConfig = MsacConfig()) -> Transform:
    """MSAC estimate of the affine transform mapping sheet to reference coordinates."""
    if len(matches) < 3:
        raise InsufficientMatches(f"need >= 3 matches, got {len(matches)}")
    src = np.array([[sheet_kps[i].x, sheet_kps[i].y] for i, _, _ in matches.pairs])
    dst = np.array([[ref_kps[j].x, ref_kps[j].y] for _, j, _ in matches.pairs])
    n = len(src)

    rng = np.random.default_rng(config.seed)
    t2 = config.threshold_px**2
    best_score = np.inf
    best_model = None
    max_iters = config.max_iterations
    it = 0
    while it < max_iters:
        it += 1
        idx = rng.choice(n, size=3, replace=False)
        tri = src[idx]
        area = abs((tri[1, 0] - tri[0, 0]) * (tri[2, 1] - tri[0, 1])
                   - (tri[2, 0] - tri[0, 0]) * (tri[1, 1] - tri[0, 1]))
        if area < 1e-6:
            continue
        m = _solve_affine(src[idx], dst[idx])
        if m is None:
            continue
        r = _residuals(m, src, dst)
        score = float(np.minimum(r * r, t2).sum())
        if score < best_score:
            best_score = score
            best_model = m
            inlier_ratio = float((r * r < t2).mean())
            if 0.0 < inlier_ratio < 1.0:
                needed = math.log(max(1.0 - config.confidence, 1e-12)) / math.log(1.0 - inlier_ratio**3)
                max_iters = min(config.max_iterations, max(int(math.ceil(needed)), 1))
            elif inlier_ratio >= 1.0:
                break

    if best_model is None:
        raise NoConsensus("no valid minimal sample produced a model")
    r = _residuals(best_model, src, dst)
    inliers = r * r < t2
    if inliers.sum() < max(config.min_inliers, 3):
        raise NoConsensus(
            f"best model has {int(inliers.sum())} inliers < min_inliers={config.min_inliers}")
    refined = _solve_affine(src[inliers], dst[inliers])
    if refined is None:
        refined = best_model
    refined[2] = [0.0, 0.0, 1.0]
    if abs(np.linalg.det(refined)) <= 1e-9:
        raise NoConsensus("refined model is singular")
    return Transform(refined)


# ---------------------------------------------------------------------------
# warping and the full pipeline


def warp(image: np.ndarray, t: Transform, out_size: tuple[int, int]) -> np.ndarray:
    """Warp a color image by `t` into a (w, h) canvas; out-of-source fill is white."""
    warped = warp_affine(np.asarray(image, dtype=np.float64), t.matrix, out_size, fill=255.0)
    return np.clip(np.round(warped), 0, 255).astype(np.uint8)


def register_sheet(sheet: np.ndarray, reference_features: list[Keypoint],
                   ref_size: tuple[int, int],
                   config: RegistrationConfig = RegistrationConfig()
                   ) -> tuple[np.ndarray, Transform, RegistrationReport]:
    """detect -> match -> estimate -> warp, with a summary report."""
    sheet_kps = detect_features(to_gray(sheet), config.detector)
    if not sheet_kps:
        raise RegistrationFailed("no features detected on the sheet")
    matches = match_features(sheet_kps, reference_features, config.ratio)
    try:
        t = estimate_transform(matches, sheet_kps, reference_features, config.msac)
    except (InsufficientMatches, NoConsensus) as exc:
        raise RegistrationFailed(str(exc)) from exc

    src = np.array([[sheet_kps[i].x, sheet_kps[i].y] for i, _, _ in matches.pairs])
    dst = np.array([[reference_features[j].x, reference_features[j].y]
                    for _, j, _ in matches.pairs])
    r = _residuals(t.matrix, src, dst)
    inliers = r < config.msac.threshold_px
    report = RegistrationReport(
        sheet_keypoints=len(sheet_kps),
        reference_keypoints=len(reference_features),
        matches=len(matches),
        inliers=int(inliers.sum()),
        mean_reprojection_error=float(r[inliers].mean()) if inliers.any() else float("nan"),
    )
    registered = warp(sheet, t, ref_size)
    return registered, t, report
