import csv
from pathlib import Path
from typing import List, Optional

from loguru import logger

from .config import ExperimentConfig
from .exceptions import ProblemValidationError
from .extraction import FrequencyTable, frequencies_from_samples

FREQUENCY_SUFFIXES = {".csv"}


class DataFileProcessor:
    """Reads extraction inputs and decides where results go."""

    def __init__(self, config: ExperimentConfig):
        self.config = config

    def load_frequency_input(self, path: Optional[Path] = None) -> FrequencyTable:
        """Frequency CSV (f1,f2,f3,f4[,count]) or a raw sample file, chosen by suffix."""
        path = Path(path or self.config.input)
        if not path.exists():
            raise FileNotFoundError(f"Input file not found: {path}")
        if path.suffix.lower() in FREQUENCY_SUFFIXES:
            return self.load_frequency_csv(path)
        return self.load_samples(path)

    def load_frequency_csv(self, path: Path) -> FrequencyTable:
        with path.open(newline="", encoding="utf-8") as handle:
            rows = [row for row in csv.reader(handle) if row and not row[0].lstrip().startswith("#")]
        if not rows:
            raise ProblemValidationError(f"No data rows in {path}")

        header = [cell.strip().lower() for cell in rows[0]]
        if header[:4] == ["f1", "f2", "f3", "f4"]:
            rows = rows[1:]
        if len(rows) != 1:
            raise ProblemValidationError(f"Expected exactly one frequency row in {path}, got {len(rows)}")
        values = rows[0]
        if len(values) not in (4, 5):
            raise ProblemValidationError(f"Expected columns f1,f2,f3,f4[,count] in {path}")
        try:
            f = tuple(float(x) for x in values[:4])
            count = int(float(values[4])) if len(values) == 5 and values[4].strip() else None
        except ValueError as e:
            raise ProblemValidationError(f"Unparsable frequency row in {path}: {e}") from e

        logger.info(f"Loaded frequency table from {path}")
        return FrequencyTable(f=f, count=count)

    def load_samples(self, path: Path) -> FrequencyTable:
        with path.open(encoding="utf-8") as handle:
            table = frequencies_from_samples(handle)
        logger.info(f"Counted {table.count} samples from {path}")
        return table

    def get_output_path(self, kind: str = "sweep") -> Path:
        """Result file for a run kind; the configured path is used for sweeps."""
        output = self.config.output
        if kind == "sweep":
            return output
        return output.with_name(f"{output.stem}_{kind}{output.suffix or '.csv'}")

    @staticmethod
    def manifest_path(result_path: Path) -> Path:
        """JSON sidecar next to a result file."""
        return result_path.with_suffix(".json")

    def validate_output_path(self, output_path: Path) -> None:
        """Validate that output path is writable."""
        try:
            output_path.parent.mkdir(parents=True, exist_ok=True)

            test_file = output_path.parent / ".write_test"
            test_file.touch()
            test_file.unlink()

        except PermissionError:
            raise PermissionError(f"No write permission for: {output_path.parent}")
        except Exception as e:
            raise RuntimeError(f"Cannot write to output path {output_path}: {e}")

    def get_sweep_stats(self, times_ns: List[float]) -> dict:
        return {
            "points": len(times_ns),
            "first_ns": min(times_ns) if times_ns else None,
            "last_ns": max(times_ns) if times_ns else None,
        }
