"""CSV and PGM export of attention / dissimilarity maps."""

from pathlib import Path

import numpy as np

from .errors import ParseError


def write_map_csv(path, m: np.ndarray):
    """Row-major CSV, unscaled values, 17 significant digits (exact round-trip)."""
    m = np.asarray(m, dtype=np.float64)
    with open(Path(path), "w") as fh:
        for row in m:
            fh.write(",".join(f"{v:.17g}" for v in row))
            fh.write("\n")


def read_map_csv(path) -> np.ndarray:
    rows = []
    with open(Path(path)) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append([float(v) for v in line.split(",")])
            except ValueError as exc:
                raise ParseError(f"bad map value ({exc})", line_no) from None
    if not rows:
        raise ParseError("empty map file")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise ParseError("ragged map rows")
    return np.array(rows)


def write_map_pgm(path, m: np.ndarray):
    """8-bit ASCII PGM, min-max normalized per map; constant maps are mid-gray."""
    m = np.asarray(m, dtype=np.float64)
    lo, hi = m.min(), m.max()
    if hi > lo:
        pixels = np.rint((m - lo) / (hi - lo) * 255).astype(int)
    else:
        pixels = np.full(m.shape, 128, dtype=int)
    with open(Path(path), "w") as fh:
        fh.write(f"P2\n{m.shape[1]} {m.shape[0]}\n255\n")
        for row in pixels:
            fh.write(" ".join(str(v) for v in row))
            fh.write("\n")
