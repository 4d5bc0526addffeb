"""Contact-center time series and inter-frame displacement.

The displacement D(t) between consecutive contact centers, converted to
mm through the pixel scale, is the controller's core signal.
"""

import csv
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from .errors import NonMonotonicTimeError


@dataclass
class ContactTrack:
    """Per-finger time series of contact centers and displacements.

    displacements[i] is the mm distance between centers[i] and
    centers[i+1]; disp_timestamps[i] is the time of the newer center.
    A single-entry track has no displacement yet.
    """

    finger_id: int = 1
    timestamps: List[float] = field(default_factory=list)
    centers: List[Tuple[float, float]] = field(default_factory=list)
    disp_timestamps: List[float] = field(default_factory=list)
    displacements: List[float] = field(default_factory=list)

    def __len__(self):
        return len(self.centers)

    @property
    def last_timestamp(self):
        return self.timestamps[-1] if self.timestamps else None

    @property
    def latest_displacement(self):
        return self.displacements[-1] if self.displacements else None


def track_displacement(track, new_center, timestamp, config):
    """Append a center, computing the displacement to the previous one.

    D = pixel_scale_s * |new - prev| in mm. Mutates and returns the
    track. Raises NonMonotonicTime if the timestamp does not advance.
    """
    timestamp = float(timestamp)
    last = track.last_timestamp
    if last is not None and timestamp <= last:
        raise NonMonotonicTimeError(
            f"timestamp {timestamp} does not advance past {last}"
        )
    x, y = float(new_center[0]), float(new_center[1])
    if track.centers:
        px, py = track.centers[-1]
        d = config.pixel_scale_s * float(np.hypot(x - px, y - py))
        track.displacements.append(d)
        track.disp_timestamps.append(timestamp)
    track.centers.append((x, y))
    track.timestamps.append(timestamp)
    return track


def write_track_csv(track, path):
    """Track CSV: t, x, y, d_mm (d_mm empty on the first row)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "x", "y", "d_mm"])
        for i, (t, (x, y)) in enumerate(zip(track.timestamps, track.centers)):
            d = f"{track.displacements[i - 1]:.9f}" if i > 0 else ""
            writer.writerow([f"{t:.6f}", f"{x:.4f}", f"{y:.4f}", d])


def read_track_csv(path, finger_id=1):
    track = ContactTrack(finger_id=finger_id)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:3] != ["t", "x", "y"]:
            raise ValueError(f"{path}: not a track CSV (header {header})")
        for row in reader:
            if not row:
                continue
            t, x, y = float(row[0]), float(row[1]), float(row[2])
            track.timestamps.append(t)
            track.centers.append((x, y))
            if len(row) > 3 and row[3] != "":
                track.displacements.append(float(row[3]))
                track.disp_timestamps.append(t)
    return track


def rebuild_displacements(track, config):
    """Recompute displacements from the stored centers (replay path)."""
    track.displacements = []
    track.disp_timestamps = []
    for i in range(1, len(track.centers)):
        x0, y0 = track.centers[i - 1]
        x1, y1 = track.centers[i]
        track.displacements.append(
            config.pixel_scale_s * float(np.hypot(x1 - x0, y1 - y0))
        )
        track.disp_timestamps.append(track.timestamps[i])
    return track
