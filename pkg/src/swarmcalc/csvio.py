"""CSV schemas and run manifests.

All files are UTF-8, comma-separated, '.' decimal, floats printed with 9
significant digits (which round-trips stably through one write/read
cycle), rows ascending by the first column and then the second.

Schemas:
  curve:     x,y[,yerr]           generic curves (trajectories, pi, sigma, ...)
  histogram: phi,B,frequency      final-state histograms over a feedback grid
  log:       s,r_b,r_r,visits[,window]   revision logs, optionally windowed
"""
from __future__ import annotations

import hashlib
import json
import time
from pathlib import Path

import numpy as np

from .urn import RevisionLog

__all__ = [
    "CsvFormatError",
    "fmt",
    "write_curve",
    "read_curve",
    "write_histogram",
    "write_log",
    "read_log",
    "write_manifest",
    "read_manifest",
    "file_digest",
]


class CsvFormatError(ValueError):
    """Malformed CSV input; carries the 1-based offending line number."""

    def __init__(self, path, line_no, message):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = str(path)
        self.line_no = line_no


def fmt(value):
    """Format a float with 9 significant digits."""
    return format(float(value), ".9g")


def _write_rows(path, header, rows):
    rows = sorted(rows, key=lambda r: (r[0], r[1] if len(r) > 1 else 0.0))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) if isinstance(v, float) else str(v) for v in row) + "\n")


def write_curve(path, x, y, yerr=None):
    header = ["x", "y"] + (["yerr"] if yerr is not None else [])
    cols = [np.asarray(x, dtype=float), np.asarray(y, dtype=float)]
    if yerr is not None:
        cols.append(np.asarray(yerr, dtype=float))
    _write_rows(path, header, [tuple(float(c[i]) for c in cols) for i in range(len(cols[0]))])


def read_curve(path):
    """Parse a curve file into (x, y, yerr-or-None)."""
    rows = _read_numeric(path, minimum_columns=2, maximum_columns=3)
    arr = np.asarray(rows, dtype=float)
    if arr.shape[1] == 2:
        return arr[:, 0], arr[:, 1], None
    return arr[:, 0], arr[:, 1], arr[:, 2]


def _read_numeric(path, minimum_columns, maximum_columns):
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError:
        raise
    if not lines:
        raise CsvFormatError(path, 1, "empty file")
    rows = []
    for i, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if not minimum_columns <= len(parts) <= maximum_columns:
            raise CsvFormatError(
                path, i, f"expected {minimum_columns}-{maximum_columns} columns, got {len(parts)}"
            )
        try:
            rows.append([float(p) for p in parts])
        except ValueError:
            raise CsvFormatError(path, i, f"non-numeric field in {line!r}")
    if not rows:
        raise CsvFormatError(path, 1, "no data rows")
    return rows


def write_histogram(path, phis, hist):
    hist = np.asarray(hist, dtype=float)
    rows = []
    for i, phi in enumerate(phis):
        for b in range(hist.shape[1]):
            rows.append((float(phi), float(b), float(hist[i, b])))
    _write_rows(path, ["phi", "B", "frequency"], rows)


def write_log(path, logs, n=None):
    """Write one RevisionLog or a windowed sequence of them."""
    windowed = not isinstance(logs, RevisionLog)
    seq = list(logs) if windowed else [logs]
    header = ["s", "r_b", "r_r", "visits"] + (["window"] if windowed else [])
    rows = []
    for w, log in enumerate(seq):
        for k in range(log.n + 1):
            row = (k / log.n, int(log.r_b[k]), int(log.r_r[k]), int(log.visits[k]))
            rows.append(row + ((w,) if windowed else ()))
    _write_rows(path, header, rows)


def read_log(path):
    """Parse a log file into a RevisionLog (windowed files are summed
    per window and returned as a list)."""
    rows = _read_numeric(path, minimum_columns=4, maximum_columns=5)
    windowed = len(rows[0]) == 5
    by_window = {}
    states = sorted({r[0] for r in rows})
    n = len(states) - 1
    grid = np.arange(n + 1) / max(n, 1)
    if n < 1 or not np.allclose(states, grid, atol=1e-9):
        raise CsvFormatError(path, 2, "s values do not form a k/n grid")
    for r in rows:
        w = int(r[4]) if windowed else 0
        log = by_window.setdefault(w, RevisionLog(n))
        k = int(round(r[0] * n))
        log.r_b[k] += int(r[1])
        log.r_r[k] += int(r[2])
        log.visits[k] += int(r[3])
    logs = [by_window[w] for w in sorted(by_window)]
    return logs if windowed else logs[0]


def file_digest(path):
    digest = hashlib.sha256()
    digest.update(Path(path).read_bytes())
    return digest.hexdigest()


def write_manifest(path, command, seed, inputs=(), outputs=(), started=None):
    """Record what produced a set of output files.

    Replaying the recorded command reproduces the outputs byte for byte
    (outputs embed no timestamps; all randomness is seed-derived).
    """
    from . import __version__

    payload = {
        "command": list(command),
        "seed": seed,
        "version": __version__,
        "inputs": {str(p): file_digest(p) for p in inputs},
        "outputs": [str(p) for p in outputs],
        "wall_clock_s": None if started is None else round(time.time() - started, 6),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_manifest(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)
