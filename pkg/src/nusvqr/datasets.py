"""Dataset container and CSV / UCI Servo readers."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class DataFormatError(ValueError):
    """Malformed input file; the message names the offending row when there is one."""


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        y = np.asarray(self.y, dtype=float).ravel()
        if X.ndim != 2 or X.shape[0] != y.shape[0]:
            raise ValueError(f"X has shape {X.shape} but y has {y.shape[0]} entries")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    def __len__(self):
        return self.y.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    def subset(self, idx) -> "Dataset":
        return Dataset(self.X[idx], self.y[idx])


# columns that never count as features when reading a CSV
TRUTH_COLUMN = "q_tau"
TARGET_COLUMN = "y"


def _parse_rows(text: str, source: str):
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise DataFormatError(f"{source}: empty file (a header row is required)") from None
    header = [h.strip() for h in header]
    rows = []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            raise DataFormatError(
                f"{source}: row {lineno} has {len(row)} fields, header has {len(header)}")
        try:
            rows.append([float(cell) for cell in row])
        except ValueError:
            raise DataFormatError(f"{source}: row {lineno} contains a non-numeric value") from None
    return header, np.array(rows, dtype=float).reshape(-1, len(header))


def read_csv(path, target: str = TARGET_COLUMN, require_target: bool = True):
    """Read a comma-separated file with a header row.

    Returns ``(Dataset or None, feature_names, truth_or_None)``. The target
    column is ``y``; a ``q_tau`` column (true quantiles written by the
    generator) is returned separately and never used as a feature.
    """
    path = Path(path)
    header, data = _parse_rows(path.read_text(encoding="utf-8"), str(path))
    truth = None
    if TRUTH_COLUMN in header:
        truth = data[:, header.index(TRUTH_COLUMN)]
    feature_cols = [k for k, h in enumerate(header) if h not in (target, TRUTH_COLUMN)]
    names = [header[k] for k in feature_cols]
    if not feature_cols:
        raise DataFormatError(f"{path}: no feature columns")
    X = data[:, feature_cols]
    if target in header:
        return Dataset(X, data[:, header.index(target)]), names, truth
    if require_target:
        raise DataFormatError(f"{path}: missing target column {target!r}")
    return X, names, truth


def write_csv(path, header, columns) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    cols = [np.asarray(c, dtype=float).ravel() for c in columns]
    with path.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in zip(*cols):
            w.writerow([repr(float(v)) for v in row])


# UCI Servo: motor,screw,pgain,vgain,class with motor/screw in {A..E}.
SERVO_LEVELS = ("A", "B", "C", "D", "E")
SERVO_ENCODING = "servo-onehot-v1"
SERVO_FEATURES = ([f"motor_{c}" for c in SERVO_LEVELS] + [f"screw_{c}" for c in SERVO_LEVELS]
                  + ["pgain", "vgain"])


def load_servo(path) -> Dataset:
    """Load the UCI Servo file (``servo.data``, 167 rows, no header).

    Encoding ``servo-onehot-v1``: motor and screw are one-hot encoded over
    levels A-E (10 columns), pgain and vgain are passed through as numbers,
    and the rise time ``class`` is the response.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(
            f"Servo data not found at {path}. Expected the UCI 'servo.data' file: "
            "167 comma-separated rows 'motor,screw,pgain,vgain,class' with motor/screw "
            "in A-E and no header.")
    X, y = [], []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 5 or parts[0] not in SERVO_LEVELS or parts[1] not in SERVO_LEVELS:
            raise DataFormatError(f"{path}: row {lineno} is not a Servo record")
        try:
            pgain, vgain, rise = float(parts[2]), float(parts[3]), float(parts[4])
        except ValueError:
            raise DataFormatError(f"{path}: row {lineno} contains a non-numeric value") from None
        onehot = [1.0 if parts[0] == c else 0.0 for c in SERVO_LEVELS]
        onehot += [1.0 if parts[1] == c else 0.0 for c in SERVO_LEVELS]
        X.append(onehot + [pgain, vgain])
        y.append(rise)
    if not y:
        raise DataFormatError(f"{path}: no records")
    return Dataset(np.array(X), np.array(y))


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, X) -> "Standardizer":
        X = np.asarray(X, dtype=float)
        sd = X.std(axis=0)
        return cls(X.mean(axis=0), np.where(sd > 0, sd, 1.0))

    def transform(self, X) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.mean) / self.scale

    def to_dict(self) -> dict:
        return {"type": "standardize", "mean": self.mean.tolist(), "scale": self.scale.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Standardizer":
        return cls(np.array(d["mean"], dtype=float), np.array(d["scale"], dtype=float))
