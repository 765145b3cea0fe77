"""Shared bits for model serialization."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np


class ModelMismatchError(RuntimeError):
    """A model file was trained against a different artist index than the
    catalog it is being used with."""


def check_index_hash(stored: str, expected: str | None, path: str | Path) -> None:
    if expected is not None and stored != expected:
        raise ModelMismatchError(f"{path}: model was trained on a different catalog (index hash mismatch)")


def config_to_json(config) -> str:
    from dataclasses import asdict

    return json.dumps(asdict(config), sort_keys=True)


def scalar_str(npz_value: np.ndarray) -> str:
    return str(npz_value.item() if npz_value.shape == () else npz_value)
