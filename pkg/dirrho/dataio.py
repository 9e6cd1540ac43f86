"""
Dataset ingestion and result output (CSV, JSON or an aligned text table).
"""

import json
import logging
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple

import numpy as np
import pandas as pd
from rich import box
from rich.console import Console
from rich.table import Table

from dirrho.core import DataMatrix
from dirrho.errors import ConfigError, DataValidationError

logger = logging.getLogger(__name__)

FORMATS = ("csv", "json", "table")
TABLE_WIDTH = 120


@dataclass(frozen=True)
class Dataset:
    """Named columns of observations read from ``source``."""

    names: Tuple[str, ...]
    data: DataMatrix
    source: Optional[str] = None

    def __post_init__(self):
        if len(set(self.names)) != len(self.names):
            raise DataValidationError(f"column names must be unique, got {list(self.names)}")
        if len(self.names) != self.data.d:
            raise DataValidationError(f"{len(self.names)} names for {self.data.d} columns")

    @property
    def n(self):
        return self.data.n

    @property
    def d(self):
        return self.data.d


def _select_columns(frame, columns):
    if not columns:
        return frame
    chosen = []
    for item in columns:
        item = str(item).strip()
        if item in frame.columns:
            chosen.append(item)
        elif item.isdigit() and int(item) < frame.shape[1]:
            chosen.append(frame.columns[int(item)])
        else:
            raise DataValidationError(f"no column {item!r}; available: {list(frame.columns)}")
    return frame[chosen]


def ingest_csv(path, header=True, delimiter=",", columns=None):
    """
    Read numeric observations from a delimited UTF-8 file.

    Args:
        path (str or Path): Input file
        header (bool): First line holds column names
        delimiter (str): Field separator
        columns (list): Names or 0-based positions of the columns to keep

    Returns:
        Dataset: Validated dataset with at least 2 rows and 2 columns
    """
    path = Path(path)
    if not path.is_file():
        raise DataValidationError(f"input file {path} not found")
    try:
        frame = pd.read_csv(
            path,
            sep=delimiter,
            header=0 if header else None,
            dtype=str,
            keep_default_na=False,
            skip_blank_lines=True,
            encoding="utf-8",
        )
    except pd.errors.ParserError as exc:
        raise DataValidationError(f"ragged rows in {path}: {exc}") from None
    except (pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise DataValidationError(f"cannot read {path}: {exc}") from None

    if not header:
        frame.columns = [f"x{i + 1}" for i in range(frame.shape[1])]
    frame = _select_columns(frame, columns)
    if frame.shape[1] < 2:
        raise DataValidationError(f"need at least 2 numeric columns, got {frame.shape[1]}")

    values = np.empty(frame.shape, dtype=float)
    for j, name in enumerate(frame.columns):
        raw = frame[name]
        parsed = pd.to_numeric(raw, errors="coerce")
        bad = parsed.isna().to_numpy()
        if bad.any():
            row = int(np.argmax(bad))
            cell = raw.iloc[row]
            text = "" if pd.isna(cell) else str(cell).strip()
            what = f"non-numeric cell {text!r}" if text else "blank cell"
            raise DataValidationError(what, row=row + 1, column=name)
        values[:, j] = parsed.to_numpy(dtype=float)

    dataset = Dataset(tuple(str(c) for c in frame.columns), DataMatrix(values), str(path))
    logger.info("read %d row(s) x %d column(s) from %s", dataset.n, dataset.d, path)
    return dataset


@dataclass(frozen=True)
class OutputSpec:
    """Output format, destination (None for standard output) and printed precision."""

    format: str = "table"
    destination: Optional[str] = None
    precision: int = 4

    def __post_init__(self):
        if self.format not in FORMATS:
            raise ConfigError(f"output format must be one of {FORMATS}, got {self.format!r}")
        if not 1 <= int(self.precision) <= 15:
            raise ConfigError(f"precision must lie in [1, 15], got {self.precision}")


def _json_default(value):
    if isinstance(value, np.generic):
        return value.item()
    raise TypeError(f"cannot serialize {type(value).__name__}")


def _json_safe(record):
    return {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in record.items()}


def _format_cell(value, precision):
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return "" if math.isnan(value) else f"{value:.{precision}f}"
    return str(value)


def render_table(frame, precision=4, title=None):
    """Build an aligned rich table; numbers are right-aligned."""
    table = Table(title=title, box=box.SIMPLE_HEAD)
    for name in frame.columns:
        numeric = pd.api.types.is_numeric_dtype(frame[name])
        table.add_column(str(name), justify="right" if numeric else "left")
    for record in frame.itertuples(index=False):
        table.add_row(*(_format_cell(v, precision) for v in record))
    return table


def _emit(spec, stream, text=None, renderable=None):
    if spec.destination is not None:
        with open(spec.destination, "w", encoding="utf-8", newline="") as f:
            _emit(OutputSpec(spec.format, None, spec.precision), f, text, renderable)
        logger.info("wrote %s output to %s", spec.format, spec.destination)
        return
    stream = stream or sys.stdout
    if renderable is not None:
        Console(file=stream, width=TABLE_WIDTH, color_system=None, highlight=False, soft_wrap=False).print(renderable)
    else:
        stream.write(text)


def write_table(frame, spec, title=None, metadata=None, stream=None):
    """
    Write a result table in the requested format.

    CSV and the text table round to ``spec.precision`` decimals; JSON keeps full doubles.

    Args:
        frame (pandas.DataFrame): Result rows
        spec (OutputSpec): Format, destination and precision
        title (str): Table title for the text format
        metadata (dict): Extra fields for the JSON document
        stream (file): Destination when ``spec.destination`` is None; defaults to stdout
    """
    if spec.format == "csv":
        text = frame.to_csv(index=False, float_format=f"%.{spec.precision}f", lineterminator="\n")
        _emit(spec, stream, text=text)
    elif spec.format == "json":
        document = {
            "metadata": metadata or {},
            "rows": [_json_safe(r) for r in frame.to_dict(orient="records")],
        }
        _emit(spec, stream, text=json.dumps(document, indent=2, default=_json_default) + "\n")
    else:
        _emit(spec, stream, renderable=render_table(frame, spec.precision, title))


def write_samples_csv(sample, destination=None, names=None, stream=None):
    """
    Write a sample as CSV with round-trip precision.

    Args:
        sample (numpy.ndarray): n x d sample
        destination (str): Output path, or None for ``stream``/stdout
        names (list of str): Column names, default u1..ud
    """
    sample = np.asarray(sample, dtype=float)
    names = names or [f"u{i + 1}" for i in range(sample.shape[1])]
    text = pd.DataFrame(sample, columns=names).to_csv(index=False, float_format="%.17g", lineterminator="\n")
    _emit(OutputSpec("csv", destination), stream, text=text)
