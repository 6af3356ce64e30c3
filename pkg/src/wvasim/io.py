"""Frame and profile serialization: 16-bit binary PGM with a JSON sidecar."""

import csv
import json
from pathlib import Path

import numpy as np

from .detector import CcdFrame

PGM_MAX = 65535


def write_pgm(path, frame, noise=None):
    """Write a frame as binary P5 PGM (16-bit, big-endian) plus ``.json`` sidecar.

    Counts above 65535 are clipped; the sidecar records how many were.
    """
    path = Path(path)
    counts = frame.counts
    clipped = int(np.count_nonzero(counts > PGM_MAX))
    data = np.minimum(counts, PGM_MAX).astype(">u2")
    rows, cols = counts.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{cols} {rows}\n{PGM_MAX}\n".encode("ascii"))
        fh.write(data.tobytes())
    sidecar = {
        "exposure_s": frame.exposure,
        "seed": list(frame.seed),
        "pixel_pitch_m": frame.pixel_pitch,
        "clipped_pixels": clipped,
        "noise": None if noise is None else {
            "gain_jitter_rms": noise.gain_jitter_rms,
            "pointing_jitter_rms_m": noise.pointing_jitter_rms,
            "dark_rate_per_s": noise.dark_rate,
        },
    }
    path.with_suffix(".json").write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    return path


def _tokens(buf, count):
    """Read ``count`` whitespace-separated header tokens, skipping comments."""
    out, pos = [], 0
    while len(out) < count:
        while buf[pos:pos + 1].isspace():
            pos += 1
        if buf[pos:pos + 1] == b"#":
            pos = buf.index(b"\n", pos) + 1
            continue
        start = pos
        while not buf[pos:pos + 1].isspace():
            pos += 1
        out.append(buf[start:pos].decode("ascii"))
    return out, pos + 1


def read_pgm(path):
    """Read a P5 PGM written by ``write_pgm``; returns a ``CcdFrame``.

    The sidecar is used for exposure, seed and pitch when present.
    """
    path = Path(path)
    buf = path.read_bytes()
    (magic, cols, rows, maxval), pos = _tokens(buf, 4)
    if magic != "P5":
        raise ValueError(f"{path}: not a binary PGM (magic {magic!r})")
    cols, rows, maxval = int(cols), int(rows), int(maxval)
    dtype = ">u2" if maxval > 255 else "u1"
    counts = np.frombuffer(buf, dtype=dtype, count=rows * cols, offset=pos)
    counts = counts.reshape(rows, cols).astype(np.int64)
    meta = {}
    side = path.with_suffix(".json")
    if side.exists():
        meta = json.loads(side.read_text())
    return CcdFrame(counts, float(meta.get("exposure_s", 0.0)), tuple(meta.get("seed", ())),
                    float(meta.get("pixel_pitch_m", 3.45e-6)))


def write_profiles_csv(path, columns):
    """Write row profiles as CSV: a ``row`` index and one column per label."""
    labels = list(columns)
    data = [np.asarray(columns[k], dtype=float) for k in labels]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["row"] + labels)
        for m in range(len(data[0]) if data else 0):
            writer.writerow([m] + [repr(float(d[m])) for d in data])


def write_table(path, header, rows):
    """Plain CSV with floats written via ``repr`` (exact round-trip)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) if isinstance(v, float) else v for v in row])
