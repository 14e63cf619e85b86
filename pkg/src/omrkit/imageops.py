"""Low-level raster operations shared by registration, features, and dataset code.

Images are numpy arrays: grayscale (H, W) float64 in [0, 255] or color
(H, W, 3) uint8. Bilinear sampling is the single interpolation primitive;
warping, resizing, and ROI rotation all go through it.
"""

from __future__ import annotations

import numpy as np

LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


def to_gray(image: np.ndarray) -> np.ndarray:
    """Convert a color image to float64 grayscale using the luma weights."""
    if image.ndim == 2:
        return image.astype(np.float64)
    return image[..., :3].astype(np.float64) @ LUMA_WEIGHTS


def sample_bilinear(image: np.ndarray, xs: np.ndarray, ys: np.ndarray,
                    fill: float = 255.0) -> np.ndarray:
    """Sample `image` at real-valued coordinates with bilinear interpolation.

    Samples outside the source extent take the fill value (white by default,
    because answer sheets are white paper).
    """
    h, w = image.shape[:2]
    img = image.astype(np.float64)

    x0 = np.floor(xs)
    y0 = np.floor(ys)
    fx = xs - x0
    fy = ys - y0
    x0 = x0.astype(np.int64)
    y0 = y0.astype(np.int64)

    inside = (xs >= 0) & (xs <= w - 1) & (ys >= 0) & (ys <= h - 1)

    x0c = np.clip(x0, 0, w - 1)
    y0c = np.clip(y0, 0, h - 1)
    x1c = np.clip(x0 + 1, 0, w - 1)
    y1c = np.clip(y0 + 1, 0, h - 1)

    w00 = (1 - fx) * (1 - fy)
    w10 = fx * (1 - fy)
    w01 = (1 - fx) * fy
    w11 = fx * fy
    if img.ndim == 3:
        w00 = w00[..., None]
        w10 = w10[..., None]
        w01 = w01[..., None]
        w11 = w11[..., None]
        inside_mask = inside[..., None]
    else:
        inside_mask = inside

    out = (w00 * img[y0c, x0c] + w10 * img[y0c, x1c]
           + w01 * img[y1c, x0c] + w11 * img[y1c, x1c])
    return np.where(inside_mask, out, fill)


def resize_bilinear(image: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Resize with bilinear interpolation, aligning pixel centers."""
    h, w = image.shape[:2]
    if (out_h, out_w) == (h, w):
        return image.astype(np.float64)
    ys = (np.arange(out_h) + 0.5) * (h / out_h) - 0.5
    xs = (np.arange(out_w) + 0.5) * (w / out_w) - 0.5
    gx, gy = np.meshgrid(xs, ys)
    # Center alignment can step marginally outside the source; clamp so a
    # constant image stays constant instead of blending with the fill color.
    gx = np.clip(gx, 0, w - 1)
    gy = np.clip(gy, 0, h - 1)
    return sample_bilinear(image, gx, gy)


def warp_affine(image: np.ndarray, matrix: np.ndarray,
                out_size: tuple[int, int], fill: float = 255.0) -> np.ndarray:
    """Warp `image` by the forward 3x3 affine `matrix` into an (w, h) canvas.

    Output pixel p receives the source sample at matrix^-1 @ p (inverse
    mapping with bilinear interpolation).
    """
    out_w, out_h = out_size
    inv = np.linalg.inv(matrix)
    gx, gy = np.meshgrid(np.arange(out_w, dtype=np.float64),
                         np.arange(out_h, dtype=np.float64))
    src_x = inv[0, 0] * gx + inv[0, 1] * gy + inv[0, 2]
    src_y = inv[1, 0] * gx + inv[1, 1] * gy + inv[1, 2]
    return sample_bilinear(image, src_x, src_y, fill=fill)


def rotation_about(cx: float, cy: float, angle_rad: float) -> np.ndarray:
    """Affine matrix rotating by `angle_rad` about the point (cx, cy)."""
    c, s = np.cos(angle_rad), np.sin(angle_rad)
    m = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    t_fwd = np.array([[1, 0, cx], [0, 1, cy], [0, 0, 1]], dtype=np.float64)
    t_back = np.array([[1, 0, -cx], [0, 1, -cy], [0, 0, 1]], dtype=np.float64)
    return t_fwd @ m @ t_back


def otsu_threshold(gray: np.ndarray) -> float:
    """Otsu's optimal threshold of a grayscale image in [0, 255]."""
    vals = np.clip(np.round(gray), 0, 255).astype(np.int64).ravel()
    hist = np.bincount(vals, minlength=256).astype(np.float64)
    total = hist.sum()
    if total == 0:
        return 127.5
    p = hist / total
    omega = np.cumsum(p)
    mu = np.cumsum(p * np.arange(256))
    mu_t = mu[-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        sigma_b = (mu_t * omega - mu) ** 2 / (omega * (1.0 - omega))
    sigma_b[~np.isfinite(sigma_b)] = -1.0
    return float(np.argmax(sigma_b)) + 0.5


def to_uint8(image: np.ndarray) -> np.ndarray:
    return np.clip(np.round(image), 0, 255).astype(np.uint8)
