"""
Utilities for the Young measure toolkit: logging and atomic report writers
"""

import csv
import io
import json
import logging
import math
import os
import tempfile
from pathlib import Path

import numpy as np

SCHEMA = "ym/1"


# Configure logger for the ym package
def setup_logger(level=logging.INFO):
    """Setup logger for the ym package"""
    logger = logging.getLogger("ym")

    if not logger.handlers:  # Avoid duplicate handlers
        handler = logging.StreamHandler()
        formatter = logging.Formatter(
            "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
        )
        handler.setFormatter(formatter)
        logger.addHandler(handler)

    logger.setLevel(level)
    return logger


# Global logger instance
logger = setup_logger()


def to_jsonable(value):
    """Convert numpy scalars/arrays and non-finite floats into plain JSON values"""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def dumps_report(payload: dict) -> str:
    """Deterministic JSON text for a report payload"""
    document = {"schema": SCHEMA} | to_jsonable(payload)
    return json.dumps(document, sort_keys=True, indent=2, allow_nan=False) + "\n"


def atomic_write(path: Path, text: str) -> Path:
    """Write text through a temp file in the same directory, then rename"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(tmp_name, path)
    except BaseException:
        Path(tmp_name).unlink(missing_ok=True)
        raise
    logger.debug(f"Wrote {path}")
    return path


def write_report(path: Path, payload: dict) -> Path:
    return atomic_write(path, dumps_report(payload))


def write_csv(path: Path, header: list, rows) -> Path:
    """Write a CSV grid (header row, '.' decimal, repr floats)"""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_csv_cell(v) for v in row])
    return atomic_write(path, buffer.getvalue())


def _csv_cell(value):
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return repr(value) if math.isfinite(value) else ""
    return value
