"""Run sinks - receive records, mean samples and snapshots while a run advances."""

from pathlib import Path
from typing import Any, Sequence

import numpy as np

from rnpsim.config.logging import get_logger
from rnpsim.core.models import CSV_COLUMNS, ChoState, MeanSample, SimState
from rnpsim.output.writers import write_csv, write_pgm

CSV_FILENAME = "diagnostics.csv"
SNAPSHOT_DIRNAME = "snapshots"


def snapshot_fields(state: Any) -> dict[str, tuple[np.ndarray, float, float]]:
    """Named cell fields of a state with the display range of each."""
    if isinstance(state, ChoState):
        return {"phi": (state.phi, -1.0, 1.0)}
    if isinstance(state, SimState):
        return {
            "phi1": (state.phi[0], 0.0, 1.0),
            "phi2": (state.phi[1], 0.0, 1.0),
            "P": (state.P, 0.0, 1.0),
            "R1": (state.R[0], 0.0, 1.0),
            "R2": (state.R[1], 0.0, 1.0),
        }
    raise TypeError(f"no snapshot layout for {type(state).__name__}")


class MemorySink:
    """Keeps everything in lists, for programmatic runs and tests."""

    def __init__(self) -> None:
        self.records: list = []
        self.samples: list[MeanSample] = []
        self.snapshots: list = []
        self.flushes = 0

    def on_record(self, record) -> None:
        self.records.append(record)

    def on_sample(self, sample: MeanSample) -> None:
        self.samples.append(sample)

    def on_snapshot(self, state) -> None:
        self.snapshots.append(state)

    def flush(self) -> None:
        self.flushes += 1


class DirectorySink:
    """
    Writes a run into an output directory.

    The CSV is rewritten in full on every flush, so a run aborted by a numerical
    failure still leaves every record produced so far on disk.
    """

    def __init__(
        self,
        out_dir: Path,
        columns: Sequence[str] = CSV_COLUMNS,
        csv_name: str = CSV_FILENAME,
    ) -> None:
        """
        Initialize the sink.

        Args:
            out_dir: Output directory (created if missing)
            columns: CSV header matching the records' as_row()
            csv_name: CSV file name inside out_dir
        """
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.columns = tuple(columns)
        self.csv_path = self.out_dir / csv_name
        self.records: list = []
        self.snapshot_paths: list[Path] = []
        self._logger = get_logger()

    def on_record(self, record) -> None:
        self.records.append(record)

    def on_sample(self, sample: MeanSample) -> None:
        pass

    def on_snapshot(self, state) -> None:
        snap_dir = self.out_dir / SNAPSHOT_DIRNAME
        snap_dir.mkdir(exist_ok=True)
        for name, (values, lo, hi) in snapshot_fields(state).items():
            path = snap_dir / f"{name}_{state.step_index:06d}.pgm"
            write_pgm(values, path, lo, hi)
            self.snapshot_paths.append(path)
        self._logger.debug("Snapshot written for step %d", state.step_index)

    def flush(self) -> None:
        write_csv(self.records, self.csv_path, self.columns)
        self._logger.debug("Wrote %d records to %s", len(self.records), self.csv_path)
