import json
import os
from typing import Any, Dict, List

import numpy as np
import pandas as pd

from src.state import ChainOutput
from src.utils.errors import ConfigError, InvalidInput
from src.utils.logger import get_logger

logger = get_logger(__name__)

METADATA_COLUMNS = ["energy", "proposed_energy", "accepted", "failed", "drift"]
FLOAT_FORMAT = "%.17g"


def coordinate_names(ambient_dim: int) -> List[str]:
    return [f"x{i}" for i in range(ambient_dim)]


def coordinate_columns(frame: pd.DataFrame) -> List[str]:
    """Coordinate columns of a sample table, in file order."""
    return [c for c in frame.columns if c not in METADATA_COLUMNS]


def samples_frame(output: ChainOutput) -> pd.DataFrame:
    """One row per retained sample: ambient coordinates then transition metadata."""
    frame = pd.DataFrame(output.samples, columns=coordinate_names(output.samples.shape[1]))
    records = output.records
    frame["energy"] = [r["energy"] for r in records]
    frame["proposed_energy"] = [r["proposed_energy"] for r in records]
    frame["accepted"] = [int(r["accepted"]) for r in records]
    frame["failed"] = [int(r["failed"]) for r in records]
    frame["drift"] = [r["drift"] for r in records]
    return frame


def write_samples(path: str, output: ChainOutput) -> str:
    logger.info(f"Entering write_samples with path: {path}, n_samples: {output.n_samples}")
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    samples_frame(output).to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return path


def read_samples(path: str) -> pd.DataFrame:
    """Load a sample file written by `write_samples`."""
    logger.info(f"Entering read_samples with path: {path}")
    if not os.path.exists(path):
        raise InvalidInput(f"sample file not found: {path}")
    frame = pd.read_csv(path, float_precision="round_trip")
    missing = [c for c in METADATA_COLUMNS if c not in frame.columns]
    if missing:
        raise InvalidInput(f"{path} is not a sample file (missing columns {missing})")
    return frame


def write_summary(path: str, summary: Dict[str, Any]) -> str:
    logger.info(f"Entering write_summary with path: {path}")
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
        f.write("\n")
    return path


def load_matrix_file(path: str) -> np.ndarray:
    """Read a whitespace-separated text matrix (one row per line, '#' comments allowed)."""
    logger.info(f"Entering load_matrix_file with path: {path}")
    if not os.path.exists(path):
        raise ConfigError(f"mass matrix file not found: {path}")
    try:
        frame = pd.read_csv(path, sep=r"\s+", header=None, comment="#", engine="python")
        matrix = frame.to_numpy(dtype=float)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, ValueError) as e:
        raise ConfigError(f"cannot parse matrix file: {e}", source=path)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ConfigError(f"matrix file holds a {matrix.shape[0]}x{matrix.shape[1]} matrix, expected square", source=path)
    if not np.all(np.isfinite(matrix)):
        raise ConfigError("matrix file has non-finite entries", source=path)
    return matrix
