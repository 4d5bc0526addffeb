"""Binary PGM (P5, 8-bit) reading and writing.

Frame streams on disk are directories of files named
``frame_<finger>_<seq>.pgm``; density heatmaps use the same container with
the value range recorded in a comment line.
"""

import re
from pathlib import Path

import numpy as np

_FRAME_RE = re.compile(r"^frame_(\d+)_(\d+)\.pgm$")


def write_pgm(path, image, comment=None):
    """Write a 2-D array as binary PGM (P5, maxval 255).

    Float input is interpreted on [0, 1] and quantized; integer input is
    written as-is and must fit in a byte.
    """
    image = np.asarray(image)
    if image.ndim != 2:
        raise ValueError(f"PGM needs a 2-D array, got shape {image.shape}")
    if np.issubdtype(image.dtype, np.floating):
        data = np.clip(np.rint(image * 255.0), 0, 255).astype(np.uint8)
    else:
        if image.min() < 0 or image.max() > 255:
            raise ValueError("integer image out of byte range")
        data = image.astype(np.uint8)
    h, w = data.shape
    header = bytearray(b"P5\n")
    if comment:
        for line in str(comment).splitlines():
            header += f"# {line}\n".encode("ascii")
    header += f"{w} {h}\n255\n".encode("ascii")
    with open(path, "wb") as f:
        f.write(bytes(header))
        f.write(data.tobytes())


def read_pgm(path):
    """Read a binary PGM file, returning a uint8 array of shape (h, w)."""
    with open(path, "rb") as f:
        blob = f.read()
    if not blob.startswith(b"P5"):
        raise ValueError(f"{path}: not a binary (P5) PGM file")
    # Header tokens: magic, width, height, maxval; comments run to end of line.
    tokens = []
    pos = 2
    while len(tokens) < 3:
        while pos < len(blob) and blob[pos : pos + 1].isspace():
            pos += 1
        if pos < len(blob) and blob[pos : pos + 1] == b"#":
            while pos < len(blob) and blob[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(blob) and not blob[pos : pos + 1].isspace():
            pos += 1
        tokens.append(blob[start:pos])
    pos += 1  # single whitespace byte after maxval
    w, h, maxval = (int(t) for t in tokens)
    if maxval != 255:
        raise ValueError(f"{path}: unsupported maxval {maxval}")
    data = np.frombuffer(blob, dtype=np.uint8, count=w * h, offset=pos)
    return data.reshape(h, w).copy()


def frame_filename(finger_id, seq):
    return f"frame_{finger_id}_{seq:06d}.pgm"


def iter_frame_files(directory):
    """Yield (finger_id, seq, path) for frame PGMs in a directory.

    Sorted by (finger_id, seq) so streams replay in capture order.
    """
    entries = []
    for p in Path(directory).iterdir():
        m = _FRAME_RE.match(p.name)
        if m:
            entries.append((int(m.group(1)), int(m.group(2)), p))
    entries.sort(key=lambda e: (e[0], e[1]))
    return entries
