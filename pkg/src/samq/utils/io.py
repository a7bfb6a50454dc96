"""Dataset persistence: a transitions CSV plus a sidecar JSON metadata file."""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
import pandas as pd
from pydantic import ValidationError

from ..exceptions import InvalidArgumentError
from ..models.data import Dataset, DatasetMeta

logger = logging.getLogger(__name__)

WEIGHT_COLUMN = "w"


def meta_path(path: Path) -> Path:
    """Sidecar location: ``data.csv`` -> ``data.meta.json``."""
    return path.with_suffix(".meta.json")


def save_dataset(dataset: Dataset, path: Path) -> Path:
    """Write ``s_0..s_{d-1}, a, snext_0..snext_{d-1}`` (plus ``w`` when weighted)."""
    path.parent.mkdir(parents=True, exist_ok=True)
    dim = dataset.dim
    frame = pd.DataFrame(dataset.states, columns=[f"s_{k}" for k in range(dim)])
    frame["a"] = dataset.actions
    for k in range(dim):
        frame[f"snext_{k}"] = dataset.next_states[:, k]
    if dataset.is_weighted:
        frame[WEIGHT_COLUMN] = dataset.weights
    frame.to_csv(path, index=False, float_format="%.17g")
    meta = dataset.meta.model_copy(update={"weighted": dataset.is_weighted})
    meta_path(path).write_text(meta.model_dump_json(indent=2), encoding="utf-8")
    logger.debug(f"Saved {dataset.n} transitions to {path}")
    return path


def load_dataset(path: Path) -> Dataset:
    """Read a dataset written by :func:`save_dataset`.

    Raises:
        InvalidArgumentError: Missing sidecar, malformed header, or state and
            next-state columns of different dimension.
    """
    sidecar = meta_path(path)
    if not sidecar.exists():
        raise InvalidArgumentError(f"Missing metadata file {sidecar}")
    try:
        meta = DatasetMeta.model_validate_json(sidecar.read_text(encoding="utf-8"))
    except ValidationError as e:
        raise InvalidArgumentError(f"Invalid metadata in {sidecar}: {e}") from e

    frame = pd.read_csv(path, float_precision="round_trip")
    state_cols = [c for c in frame.columns if c.startswith("s_")]
    next_cols = [c for c in frame.columns if c.startswith("snext_")]
    if "a" not in frame.columns or not state_cols:
        raise InvalidArgumentError(f"{path} lacks the s_k / a / snext_k columns")
    if len(state_cols) != len(next_cols):
        raise InvalidArgumentError(
            f"{path}: {len(state_cols)} state columns but {len(next_cols)} next-state columns"
        )
    expected = [f"s_{k}" for k in range(len(state_cols))]
    if state_cols != expected or next_cols != [f"snext_{k}" for k in range(len(next_cols))]:
        raise InvalidArgumentError(f"{path}: state columns must be numbered from 0")

    weights = (
        frame[WEIGHT_COLUMN].to_numpy(dtype=np.float64)
        if WEIGHT_COLUMN in frame.columns
        else np.empty(0)
    )
    return Dataset(
        frame[state_cols].to_numpy(dtype=np.float64),
        frame["a"].to_numpy(dtype=np.int64),
        frame[next_cols].to_numpy(dtype=np.float64),
        meta,
        weights=weights,
    )
