import csv
import json
import logging
import math
import re
from pathlib import Path

import numpy as np


logger = logging.getLogger(__name__)

SCHEMA_VERSION = "1"
BRANCH_CSV_COLUMNS = ("step", "T", "amplitude", "max_abs_z", "samples")


def normalize_label_for_filename(text: str) -> str:
    """
    Normalize a label for use inside a file name.
    - Keeps alphanumerics, dots, dashes and underscores.
    - Replaces every other run of characters with a single underscore.
    """
    if not text:
        return "unnamed"
    text = re.sub(r"[^\w.-]+", "_", text, flags=re.UNICODE)
    return text.strip("_") or "unnamed"


def ensure_dir_exists(dir_path: Path):
    """
    Make sure a directory exists, creating it when missing.
    """
    if not dir_path.exists():
        try:
            dir_path.mkdir(parents=True, exist_ok=True)
            logger.info(f"Directory created: {dir_path}")
        except OSError as e:
            logger.error(f"Error creating directory {dir_path}: {e}")
            raise
    else:
        logger.debug(f"Directory already exists: {dir_path}")


def round_floats(obj):
    """
    Recursively convert a report to plain JSON types.

    Floats keep 12 significant digits, non-finite floats become None, numpy
    scalars and arrays become Python numbers and lists, tuples become lists.
    """
    if isinstance(obj, dict):
        return {str(k): round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [round_floats(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [round_floats(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return None
        return float(f"{x:.12g}")
    return obj


def dumps_report(payload: dict) -> str:
    """Versioned JSON document with fixed field order and float formatting."""
    document = {"schema": SCHEMA_VERSION, **round_floats(payload)}
    return json.dumps(document, indent=2, ensure_ascii=False)


def write_branch_csv(file_path: Path, rows: list[dict]) -> Path:
    """
    Write one continued branch as CSV with the columns step, T, amplitude, max_abs_z, samples.

    Returns:
        The path written.
    """
    ensure_dir_exists(file_path.parent)
    with file_path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(BRANCH_CSV_COLUMNS)
        for row in rows:
            writer.writerow(
                [
                    int(row["step"]),
                    f"{float(row['T']):.12g}",
                    f"{float(row['amplitude']):.12g}",
                    f"{float(row['max_abs_z']):.12g}",
                    int(row["samples"]),
                ]
            )
    logger.info(f"Branch saved to: {file_path} ({len(rows)} orbits)")
    return file_path
