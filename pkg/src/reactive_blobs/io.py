"""Plain-text blob configurations and solve-report tables."""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass

import numpy as np

from .kernels import BlobSet, KernelKind

_HEADER = re.compile(r"^#\s*(.*)$")


class FormatError(ValueError):
    """Malformed input file; the message carries the file and line."""


@dataclass
class BlobFile:
    blobs: BlobSet
    dim: int
    h: float


def _parse_header(text: str, where: str) -> dict:
    out = {}
    for item in text.split():
        if "=" not in item:
            raise FormatError(f"{where}: expected key=value in header, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    missing = {"d", "h", "kernel"} - out.keys()
    if missing:
        raise FormatError(f"{where}: header lacks {', '.join(sorted(missing))}")
    return out


def read_blobs(path) -> BlobFile:
    """Read ``# d=<2|3> h=<spacing> kernel=<3|4>`` followed by ``x [y] [z] kappa`` rows.

    ``kappa`` may be ``inf`` for a diffusion-limited blob.
    """
    header = None
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            where = f"{path}:{lineno}"
            line = line.strip()
            if not line:
                continue
            m = _HEADER.match(line)
            if m:
                if header is None:
                    header = _parse_header(m.group(1), where)
                continue
            if header is None:
                raise FormatError(f"{where}: missing '# d=.. h=.. kernel=..' header")
            try:
                vals = [float(t) for t in line.split()]
            except ValueError:
                raise FormatError(f"{where}: non-numeric entry in {line!r}") from None
            rows.append((where, vals))
    if header is None:
        raise FormatError(f"{path}: empty blob file")
    try:
        dim = int(header["d"])
        h = float(header["h"])
        kernel = KernelKind.parse(header["kernel"])
    except ValueError as exc:
        raise FormatError(f"{path}: bad header value ({exc})") from None
    if dim not in (2, 3) or not h > 0:
        raise FormatError(f"{path}: need d in (2, 3) and h > 0")
    if not rows:
        raise FormatError(f"{path}: no blobs listed")
    for where, vals in rows:
        if len(vals) != dim + 1:
            raise FormatError(f"{where}: expected {dim + 1} columns, got {len(vals)}")
    data = np.array([v for _, v in rows])
    try:
        blobs = BlobSet(data[:, :dim], data[:, dim], kernel)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None
    return BlobFile(blobs, dim, h)


def write_blobs(path, blobs: BlobSet, h: float = 1.0):
    pos = np.atleast_2d(blobs.positions)
    kappa = np.broadcast_to(np.asarray(blobs.kappa, dtype=float), (len(pos),))
    with open(path, "w") as fh:
        fh.write(f"# d={pos.shape[1]} h={h!r} kernel={int(blobs.kernel)}\n")
        for q, k in zip(pos, kappa):
            cols = [f"{x:.16e}" for x in q] + ["inf" if math.isinf(k) else f"{k:.16e}"]
            fh.write(" ".join(cols) + "\n")


REPORT_COLUMNS = ["experiment", "L", "N", "precond", "m", "n", "outer_iters", "total_cycles",
                  "final_residual"]


def write_report(path, rows):
    """Solve report, one row per solve, columns ``REPORT_COLUMNS``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(REPORT_COLUMNS)
        for r in rows:
            w.writerow([f"{r[c]:.16e}" if isinstance(r[c], float) else r[c] for c in REPORT_COLUMNS])
