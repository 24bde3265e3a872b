"""CSV and PGM emitters for run output."""

import csv
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np

from rnpsim.core.models import CSV_COLUMNS

PathLike = Union[str, Path]


def _format(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(records: Iterable, path: PathLike, columns: Sequence[str] = CSV_COLUMNS) -> Path:
    """
    Write records as CSV: fixed header, shortest round-trip floats, LF line endings.

    Args:
        records: Objects with an ``as_row()`` method in column order
        path: Target file
        columns: Header names

    Returns:
        The written path

    Raises:
        OSError: With the path in the message when the file cannot be written
    """
    path = Path(path)
    try:
        with open(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(columns)
            for rec in records:
                row = rec.as_row()
                if len(row) != len(columns):
                    raise ValueError(f"record has {len(row)} values, header has {len(columns)}")
                writer.writerow([_format(v) for v in row])
    except OSError as e:
        raise OSError(e.errno, f"cannot write {path}: {e.strerror}") from e
    return path


def read_csv(path: PathLike) -> tuple[list[str], list[list[float]]]:
    """Read a file written by write_csv back into (header, rows of floats)."""
    with open(Path(path), encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, [])
        rows = [[float(v) for v in row] for row in reader if row]
    return header, rows


def pgm_bytes(values: np.ndarray, lo: float, hi: float) -> bytes:
    """
    Binary P5 image of a cell field: one pixel per cell, top row at the largest y.

    Values are mapped linearly from [lo, hi] to 0..255 and clamped.
    """
    if not hi > lo:
        raise ValueError(f"PGM range needs hi > lo, got [{lo}, {hi}]")
    values = np.asarray(values, dtype=float)
    if values.ndim != 2:
        raise ValueError(f"PGM needs a 2-D field, got shape {values.shape}")
    scaled = np.clip((values - lo) / (hi - lo), 0.0, 1.0)
    pixels = np.rint(scaled * 255.0).astype(np.uint8)
    image = pixels.T[::-1]  # rows over y, descending
    nx, ny = values.shape
    header = f"P5\n{nx} {ny}\n255\n".encode("ascii")
    return header + np.ascontiguousarray(image).tobytes()


def write_pgm(values: np.ndarray, path: PathLike, lo: float = 0.0, hi: float = 1.0) -> Path:
    """Write a cell field as a P5 PGM file."""
    path = Path(path)
    data = pgm_bytes(getattr(values, "values", values), lo, hi)
    try:
        path.write_bytes(data)
    except OSError as e:
        raise OSError(e.errno, f"cannot write {path}: {e.strerror}") from e
    return path
