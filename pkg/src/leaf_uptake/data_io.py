"""Experimental dataset ingestion and result artifact writers."""

import io
import logging
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Dict, List, NamedTuple, Optional, TextIO, Tuple, Union

import pandas as pd

from leaf_uptake.errors import DatasetError, MissingDataError
from leaf_uptake.model import COMPARTMENTS, Compartment, Compound
from leaf_uptake.utils.files import ensure_dir, safe_write, safe_write_csv, safe_write_json

logger = logging.getLogger(__name__)

DATASET_HEADER = "t_min,compound,compartment,mean_pct,ci_lo_pct,ci_hi_pct"
DATASET_COLUMNS = DATASET_HEADER.split(",")
CLOSURE_TOLERANCE = 2.0

BUNDLED_DATASET = "uptake_reconstructed.csv"
BUNDLED_CONFIG = "reference_defaults.yaml"

Key = Tuple[Compound, Compartment, float]


class Measurement(NamedTuple):
    mean: float
    lo: float
    hi: float


class ClosureViolation(NamedTuple):
    compound: Compound
    t: float
    total: float


@dataclass(frozen=True)
class DatasetSeries:
    """Validated compartment percentages with 95% confidence bands.

    Rows are held in canonical order: time, then compound, then compartment.
    """
    rows: Tuple[Tuple[float, Compound, Compartment, float, float, float], ...]
    closure_violations: Tuple[ClosureViolation, ...] = ()
    _lookup: Dict[Key, Measurement] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_lookup", {(r[1], r[2], r[0]): Measurement(*r[3:]) for r in self.rows})

    def __len__(self) -> int:
        return len(self.rows)

    def get(self, compound: Compound, compartment: Compartment, t: float) -> Optional[Measurement]:
        return self._lookup.get((Compound(compound), Compartment(compartment), float(t)))

    def times(self, compound: Compound) -> List[float]:
        compound = Compound(compound)
        return sorted({r[0] for r in self.rows if r[1] is compound})

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [(t, c.value, p.value, mean, lo, hi) for t, c, p, mean, lo, hi in self.rows],
            columns=DATASET_COLUMNS,
        )


def _sort_key(row) -> tuple:
    compound_order = list(Compound).index(row[1])
    compartment_order = COMPARTMENTS.index(row[2])
    return (row[0], compound_order, compartment_order)


def _parse_number(value: str, column: str, row: int) -> float:
    try:
        number = float(str(value))
    except ValueError:
        raise DatasetError(f"{column} is not a number: {value!r}", row=row) from None
    if not math.isfinite(number):
        raise DatasetError(f"{column} must be finite, got {value!r}", row=row)
    return number


def load_dataset(source: Union[str, Path, TextIO]) -> DatasetSeries:
    """
    Load and validate an experimental dataset CSV.

    Args:
        source: Path to the CSV file or an open text stream

    Returns:
        Validated DatasetSeries

    Raises:
        FileNotFoundError: If a path does not exist
        DatasetError: On header mismatch, malformed or out-of-range values,
            CI ordering violations or duplicate keys; the message names the row
            (1-based, header is row 1)
    """
    if isinstance(source, (str, Path)):
        path = Path(source)
        if not path.exists():
            raise FileNotFoundError(f"Dataset file not found: {path}")
        text = path.read_text(encoding="utf-8")
    else:
        text = source.read()

    if not text.strip():
        raise DatasetError("dataset is empty; expected header " + DATASET_HEADER)
    header = text.splitlines()[0]
    if header != DATASET_HEADER:
        raise DatasetError(f"header mismatch: expected {DATASET_HEADER!r}, got {header!r}", row=1)

    try:
        raw = pd.read_csv(io.StringIO(text), dtype=str, keep_default_na=False, skip_blank_lines=True)
    except pd.errors.ParserError as e:
        raise DatasetError(f"malformed CSV: {e}") from None

    rows = []
    seen = set()
    for index, record in enumerate(raw.itertuples(index=False)):
        row = index + 2
        t = _parse_number(record.t_min, "t_min", row)
        if t < 0:
            raise DatasetError(f"t_min must be non-negative, got {t}", row=row)
        try:
            compound = Compound(str(record.compound).strip())
        except ValueError:
            raise DatasetError(f"unknown compound {record.compound!r}", row=row) from None
        try:
            compartment = Compartment(str(record.compartment).strip())
        except ValueError:
            raise DatasetError(f"unknown compartment {record.compartment!r}", row=row) from None

        mean = _parse_number(record.mean_pct, "mean_pct", row)
        lo = _parse_number(record.ci_lo_pct, "ci_lo_pct", row)
        hi = _parse_number(record.ci_hi_pct, "ci_hi_pct", row)
        for column, value in (("mean_pct", mean), ("ci_lo_pct", lo), ("ci_hi_pct", hi)):
            if not 0.0 <= value <= 100.0:
                raise DatasetError(f"{column}={value} outside [0, 100]", row=row)
        if not lo <= mean <= hi:
            raise DatasetError(f"confidence band violates ci_lo <= mean <= ci_hi: ({lo}, {mean}, {hi})", row=row)

        key = (compound, compartment, t)
        if key in seen:
            raise DatasetError(f"duplicate key ({compound.value}, {compartment.value}, t={t:g})", row=row)
        seen.add(key)
        rows.append((t, compound, compartment, mean, lo, hi))

    if not rows:
        raise DatasetError("dataset has a header but no rows")

    rows.sort(key=_sort_key)
    return DatasetSeries(rows=tuple(rows), closure_violations=tuple(_closure_violations(rows)))


def _closure_violations(rows) -> List[ClosureViolation]:
    groups: Dict[Tuple[Compound, float], List[float]] = {}
    for t, compound, _, mean, _, _ in rows:
        groups.setdefault((compound, t), []).append(mean)

    violations = []
    for (compound, t), means in sorted(groups.items(), key=lambda item: (item[0][1], item[0][0].value)):
        if len(means) == len(COMPARTMENTS):
            total = sum(means)
            if abs(total - 100.0) > CLOSURE_TOLERANCE:
                logger.warning("%s at t=%g: compartment means sum to %.3f%%", compound.value, t, total)
                violations.append(ClosureViolation(compound, t, total))
    return violations


def band_at(dataset: DatasetSeries, compound: Compound, compartment: Compartment, t: float) -> Tuple[float, float]:
    """
    Confidence band (ci_lo, ci_hi) of one measurement.

    Raises:
        MissingDataError: If the key is absent
    """
    value = dataset.get(compound, compartment, t)
    if value is None:
        raise MissingDataError([(Compound(compound).value, Compartment(compartment).value, float(t))])
    return value.lo, value.hi


def format_dataset(dataset: DatasetSeries) -> str:
    """Canonical CSV text: canonical row order, shortest round-trip floats."""
    lines = [DATASET_HEADER]
    for t, compound, compartment, mean, lo, hi in dataset.rows:
        lines.append(",".join((repr(t), compound.value, compartment.value, repr(mean), repr(lo), repr(hi))))
    return "\n".join(lines) + "\n"


def write_dataset(dataset: DatasetSeries, path: Path | str) -> Path:
    path = Path(path)
    safe_write(path, format_dataset(dataset))
    return path


def bundled_path(name: str) -> Path:
    """Path of a file shipped in the package's data directory."""
    return Path(str(resources.files("leaf_uptake").joinpath("data", name)))


def load_bundled_dataset() -> DatasetSeries:
    return load_dataset(bundled_path(BUNDLED_DATASET))


def write_table(frame: pd.DataFrame, out_dir: Path | str, filename: str) -> Path:
    """Write a result table into ``out_dir`` (created if needed)."""
    path = ensure_dir(out_dir) / filename
    safe_write_csv(path, frame)
    return path


def write_report(report: dict, out_dir: Path | str, filename: str) -> Path:
    path = ensure_dir(out_dir) / filename
    safe_write_json(path, report)
    return path
