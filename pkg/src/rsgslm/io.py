"""CSV / JSON persistence helpers shared by every stage."""

import hashlib
import json
import os
from pathlib import Path

import numpy as np

from rsgslm.errors import DatasetError

FLOAT_FMT = "%.17g"
ARTIFACT_ROOT_ENV = "RSGSLM_ARTIFACT_ROOT"


def artifact_root(default="artifacts"):
    return Path(os.environ.get(ARTIFACT_ROOT_ENV, default))


def write_matrix(path, matrix):
    """Write a 2-D float array as CSV with round-trip precision."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    matrix = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    np.savetxt(path, matrix, fmt=FLOAT_FMT, delimiter=",")


def read_matrix(path):
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"missing matrix file: {path}")
    try:
        data = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    except ValueError as exc:
        raise DatasetError(f"non-numeric cell in {path}: {exc}") from exc
    return data


def write_vector(path, values, fmt=FLOAT_FMT):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, np.asarray(values).reshape(-1), fmt=fmt)


def read_vector(path, dtype=np.float64):
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"missing file: {path}")
    try:
        return np.loadtxt(path, dtype=dtype, ndmin=1)
    except ValueError as exc:
        raise DatasetError(f"non-numeric entry in {path}: {exc}") from exc


def write_json(path, obj):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def read_json(path):
    return json.loads(Path(path).read_text())


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def stable_hash(mapping):
    """SHA-256 of a flat mapping, independent of key order."""
    lines = [f"{key}={mapping[key]!r}" for key in sorted(mapping)]
    return hashlib.sha256("\n".join(lines).encode()).hexdigest()


def fingerprint_files(paths):
    digest = hashlib.sha256()
    for path in sorted(Path(p) for p in paths):
        digest.update(path.name.encode())
        digest.update(path.read_bytes())
    return digest.hexdigest()
