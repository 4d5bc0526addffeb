"""Synthetic marker-grid tactile sensor.

Generates frames with ground truth so the perception pipeline and the
controller can run closed-loop without hardware. A nominal marker grid
is deformed by a parameterized contact (markers spread radially away
from the indentation, which lowers the local marker density), then
rendered as dark anti-aliased disks on a light background with seeded
pixel noise.
"""

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .blobs import MarkerSet
from .pgm import frame_filename, write_pgm
from .tactile import FRAME_HEIGHT, FRAME_WIDTH, TactileFrame

# Subpixel sample offsets for 4x supersampled disk coverage.
_SS = (np.arange(4) + 0.5) / 4.0 - 0.5


@dataclass
class SensorModel:
    width: int = FRAME_WIDTH
    height: int = FRAME_HEIGHT
    grid_rows: int = 15
    grid_cols: int = 20
    spacing: float = 15.0
    marker_radius: float = 4.0
    marker_intensity: float = 0.15
    background: float = 0.95
    # Radial marker travel per mm of indentation depth.
    displacement_gain_k: float = 10.0
    noise_sigma: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if self.spacing <= 2 * self.marker_radius:
            raise ValueError("spacing must exceed the marker diameter")
        span_x = (self.grid_cols - 1) * self.spacing
        span_y = (self.grid_rows - 1) * self.spacing
        if span_x + 2 * self.marker_radius >= self.width \
                or span_y + 2 * self.marker_radius >= self.height:
            raise ValueError("nominal marker grid does not fit in the frame")
        if not 0.0 <= self.marker_intensity < self.background <= 1.0:
            raise ValueError("need 0 <= marker_intensity < background <= 1")


@dataclass
class ContactStimulus:
    """One parameterized contact: a Gaussian indentation footprint.

    x, y: contact center in px. depth: indentation in mm. radius: envelope
    width in px. shear: lateral marker offset in px at the contact center.
    """

    x: float
    y: float
    depth: float = 0.0
    radius: float = 40.0
    shear_x: float = 0.0
    shear_y: float = 0.0
    timestamp: float = 0.0

    def __post_init__(self):
        if self.depth < 0:
            raise ValueError("depth must be >= 0")
        if self.radius <= 0:
            raise ValueError("radius must be > 0")


def nominal_grid(model):
    """Rest marker positions: a centered grid, row-major, (M, 2) as (x, y)."""
    x0 = (model.width - 1 - (model.grid_cols - 1) * model.spacing) / 2.0
    y0 = (model.height - 1 - (model.grid_rows - 1) * model.spacing) / 2.0
    xs = x0 + model.spacing * np.arange(model.grid_cols)
    ys = y0 + model.spacing * np.arange(model.grid_rows)
    gx, gy = np.meshgrid(xs, ys)
    return np.column_stack([gx.ravel(), gy.ravel()])


def displace_markers(model, stimulus=None):
    """Deform the nominal grid under a contact stimulus.

    Each marker at distance r from the contact center moves radially
    outward by depth * k * exp(-r^2 / (2 radius^2)) px, plus the shear
    offset scaled by the same envelope. A marker exactly at the center
    has no radial direction and gets no radial term. depth = 0 and zero
    shear return the nominal grid exactly.
    """
    pos = nominal_grid(model)
    if stimulus is None:
        return MarkerSet(pos, frame_timestamp=0.0)
    delta = pos - np.array([stimulus.x, stimulus.y])
    r = np.hypot(delta[:, 0], delta[:, 1])
    envelope = np.exp(-(r ** 2) / (2.0 * stimulus.radius ** 2))
    r_safe = np.where(r > 0, r, 1.0)
    direction = np.where(r[:, None] > 0, delta / r_safe[:, None], 0.0)
    radial = model.displacement_gain_k * stimulus.depth * envelope
    shear = np.array([stimulus.shear_x, stimulus.shear_y])
    pos = pos + direction * radial[:, None] + shear * envelope[:, None]
    return MarkerSet(pos, frame_timestamp=stimulus.timestamp)


def _stamp_disk(coverage, cx, cy, radius):
    h, w = coverage.shape
    x0 = max(int(np.floor(cx - radius - 1)), 0)
    x1 = min(int(np.ceil(cx + radius + 1)) + 1, w)
    y0 = max(int(np.floor(cy - radius - 1)), 0)
    y1 = min(int(np.ceil(cy + radius + 1)) + 1, h)
    if x0 >= x1 or y0 >= y1:
        return
    sub_x = (np.arange(x0, x1)[:, None] + _SS[None, :]).ravel() - cx
    sub_y = (np.arange(y0, y1)[:, None] + _SS[None, :]).ravel() - cy
    inside = (sub_y[:, None] ** 2 + sub_x[None, :] ** 2) <= radius ** 2
    ny, nx = y1 - y0, x1 - x0
    local = inside.reshape(ny, 4, nx, 4).mean(axis=(1, 3))
    np.maximum(coverage[y0:y1, x0:x1], local, out=coverage[y0:y1, x0:x1])


# Closed-loop runs render the same marker layout for many consecutive
# frames (only the noise stream advances), so the supersampled coverage
# image is memoized on the exact centroid bytes.
_coverage_cache = {}
_COVERAGE_CACHE_MAX = 4


def _disk_coverage(markers, model):
    key = (markers.centroids.tobytes(), model.marker_radius,
           model.width, model.height)
    hit = _coverage_cache.get(key)
    if hit is not None:
        return hit
    coverage = np.zeros((model.height, model.width))
    for mx, my in markers.centroids:
        _stamp_disk(coverage, mx, my, model.marker_radius)
    if len(_coverage_cache) >= _COVERAGE_CACHE_MAX:
        _coverage_cache.pop(next(iter(_coverage_cache)))
    _coverage_cache[key] = coverage
    return coverage


def render_frame(markers, model, finger_id=1, seq=0):
    """Render marker centroids as dark anti-aliased disks plus seeded noise.

    Deterministic: the noise stream is keyed by (model.seed, finger_id, seq).
    """
    coverage = _disk_coverage(markers, model)
    pixels = model.background - coverage * (model.background - model.marker_intensity)
    if model.noise_sigma > 0:
        rng = np.random.default_rng((model.seed, finger_id, seq))
        pixels = pixels + rng.normal(0.0, model.noise_sigma, pixels.shape)
    pixels = np.clip(pixels, 0.0, 1.0)
    return TactileFrame(pixels=pixels, timestamp=markers.frame_timestamp,
                        finger_id=finger_id)


def write_frames(directory, model, marker_sets, finger_id=1, start_seq=0):
    """Write rendered PGM frames plus a ground-truth sidecar CSV.

    The sidecar truth_<finger>.csv has one row per marker per frame:
    seq, marker index, x, y.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    truth_path = directory / f"truth_{finger_id}.csv"
    with open(truth_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["seq", "marker", "x", "y"])
        for offset, markers in enumerate(marker_sets):
            seq = start_seq + offset
            frame = render_frame(markers, model, finger_id=finger_id, seq=seq)
            write_pgm(directory / frame_filename(finger_id, seq), frame.pixels,
                      comment=f"t={frame.timestamp:.6f}")
            for idx, (mx, my) in enumerate(markers.centroids):
                writer.writerow([seq, idx, f"{mx:.4f}", f"{my:.4f}"])
    return truth_path
