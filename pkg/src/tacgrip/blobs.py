"""Dark-blob marker detection over a determinant-of-Hessian scale space.

Markers are small dark disks on a light membrane image. For each scale
sigma the frame is smoothed, second derivatives are taken, and the
scale-normalized determinant of the Hessian sigma^4*(Ixx*Iyy - Ixy^2)
is computed. Dark blobs are gated by a positive Laplacian (local
intensity minimum). Candidates are local maxima of the response stack,
deduplicated by greedy non-maximum suppression and refined to sub-pixel
positions with a per-axis quadratic fit.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy import ndimage


@dataclass
class DetectorConfig:
    # Scales in px; markers of ~4 px radius respond strongest near r/sqrt(2).
    scales: Tuple[float, ...] = (2.0, 2.83, 4.0)
    # Candidate threshold: relative to the frame's peak response, with an
    # absolute floor so a blank (noise-only) frame yields no detections.
    threshold_rel: float = 0.15
    threshold_abs: float = 1e-4
    min_separation: float = 4.0
    refine: bool = True

    def __post_init__(self):
        if not self.scales or any(s <= 0 for s in self.scales):
            raise ValueError("scales must be positive")
        if self.min_separation <= 0:
            raise ValueError("min_separation must be positive")


@dataclass
class MarkerSet:
    """Detected (or synthetic) marker centroids for one frame.

    centroids: (M, 2) float64 array, columns (x, y) in pixels.
    """

    centroids: np.ndarray
    frame_timestamp: float = 0.0

    def __post_init__(self):
        c = np.asarray(self.centroids, dtype=np.float64)
        if c.size == 0:
            c = c.reshape(0, 2)
        if c.ndim != 2 or c.shape[1] != 2:
            raise ValueError("centroids must be an (M, 2) array")
        self.centroids = c

    def __len__(self):
        return self.centroids.shape[0]

    def validate(self, width, height, min_separation=4.0):
        """Check the in-bounds and minimum-separation invariants."""
        c = self.centroids
        if len(self) == 0:
            return self
        if c[:, 0].min() < 0 or c[:, 0].max() > width - 1 \
                or c[:, 1].min() < 0 or c[:, 1].max() > height - 1:
            raise ValueError("centroid outside frame bounds")
        if len(self) > 1:
            d2 = np.sum((c[:, None, :] - c[None, :, :]) ** 2, axis=2)
            np.fill_diagonal(d2, np.inf)
            if d2.min() < min_separation ** 2:
                raise ValueError(
                    f"centroids closer than {min_separation} px"
                )
        return self


def _quadratic_offset(vm, v0, vp):
    den = vm - 2.0 * v0 + vp
    if abs(den) < 1e-12:
        return 0.0
    return float(np.clip(0.5 * (vm - vp) / den, -0.5, 0.5))


def detect_markers(frame, config=None):
    """Detect dark circular markers in a preprocessed frame.

    Deterministic for a given frame and config. An empty MarkerSet is a
    valid result (blank frame).
    """
    config = config or DetectorConfig()
    img = frame.pixels.astype(np.float32)
    h, w = img.shape

    resp = None
    for sigma in config.scales:
        dyy = ndimage.gaussian_filter(img, sigma, order=(2, 0),
                                      mode="nearest", truncate=3.0)
        dxx = ndimage.gaussian_filter(img, sigma, order=(0, 2),
                                      mode="nearest", truncate=3.0)
        dxy = ndimage.gaussian_filter(img, sigma, order=(1, 1),
                                      mode="nearest", truncate=3.0)
        det = (sigma ** 4) * (dxx * dyy - dxy * dxy)
        # Dark blobs only: intensity minima have a positive Laplacian.
        det[(dxx + dyy) <= 0] = 0.0
        resp = det if resp is None else np.maximum(resp, det)

    peak = float(resp.max())
    threshold = max(config.threshold_abs, config.threshold_rel * peak)
    local_max = resp >= ndimage.maximum_filter(resp, size=3, mode="nearest")
    ys, xs = np.nonzero(local_max & (resp > threshold))
    if len(ys) == 0:
        return MarkerSet(np.empty((0, 2)), frame_timestamp=frame.timestamp)

    vals = resp[ys, xs]
    order = np.lexsort((xs, ys, -vals))
    ys, xs, vals = ys[order], xs[order], vals[order]

    # Greedy NMS in response order; ties resolved by (y, x).
    min_sep2 = config.min_separation ** 2
    kept_x = np.empty(len(xs), dtype=np.int64)
    kept_y = np.empty(len(ys), dtype=np.int64)
    n_kept = 0
    for x, y in zip(xs, ys):
        kx = kept_x[:n_kept]
        ky = kept_y[:n_kept]
        if n_kept == 0 or ((x - kx) ** 2 + (y - ky) ** 2 >= min_sep2).all():
            kept_x[n_kept] = x
            kept_y[n_kept] = y
            n_kept += 1
    kept_x = kept_x[:n_kept]
    kept_y = kept_y[:n_kept]

    cx = kept_x.astype(np.float64)
    cy = kept_y.astype(np.float64)
    if config.refine:
        for i, (x, y) in enumerate(zip(kept_x, kept_y)):
            if 0 < x < w - 1:
                cx[i] += _quadratic_offset(resp[y, x - 1], resp[y, x], resp[y, x + 1])
            if 0 < y < h - 1:
                cy[i] += _quadratic_offset(resp[y - 1, x], resp[y, x], resp[y + 1, x])

    out = np.lexsort((cx, cy))
    centroids = np.column_stack([cx[out], cy[out]])
    return MarkerSet(centroids, frame_timestamp=frame.timestamp)
