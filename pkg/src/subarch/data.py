"""Binary-labelled datasets: container, CSV round-trip and synthetic generators."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, PreconditionError

__all__ = ["Dataset", "load_dataset", "save_dataset", "gen_data", "dataset_to_csv"]


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y).astype(int)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
            raise PreconditionError(f"inconsistent dataset shapes {X.shape} and {y.shape}")
        if y.size and not np.isin(y, (0, 1)).all():
            raise FormatError("labels must be 0 or 1")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @classmethod
    def from_points(cls, points) -> Dataset:
        points = list(points)
        if not points:
            return cls(np.zeros((0, 1)), np.zeros(0, dtype=int))
        return cls(np.array([p[0] for p in points], dtype=float), np.array([p[1] for p in points]))

    def __len__(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def subset(self, indices) -> Dataset:
        idx = np.asarray(indices, dtype=int)
        return Dataset(self.X[idx], self.y[idx])

    def sample(self, size: int, seed: int) -> Dataset:
        """Seeded subset without replacement; the whole set when ``size >= len``."""
        if size >= len(self):
            return self
        if size < 1:
            raise PreconditionError("batch size must be positive")
        idx = np.sort(np.random.default_rng(seed).permutation(len(self))[:size])
        return self.subset(idx)


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def dataset_to_csv(data: Dataset) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    for x, y in zip(data.X, data.y):
        writer.writerow([repr(float(v)) for v in x] + [int(y)])
    return buf.getvalue()


def save_dataset(data: Dataset, path) -> None:
    Path(path).write_text(dataset_to_csv(data))


def load_dataset(path) -> Dataset:
    """Parse a CSV of feature columns followed by a 0/1 label column.

    A header row is detected by the presence of non-numeric cells.
    """
    path = Path(path)
    if not path.is_file():
        raise FormatError(f"dataset file {path} not found")
    rows = [r for r in csv.reader(path.read_text().splitlines()) if r and any(c.strip() for c in r)]
    if rows and not all(_is_number(c) for c in rows[0]):
        rows = rows[1:]
    if not rows:
        raise FormatError(f"{path}: no data rows")
    width = len(rows[0])
    if width < 2:
        raise FormatError(f"{path}: need at least one feature column and a label")
    X, y = [], []
    for lineno, row in enumerate(rows, 1):
        if len(row) != width:
            raise FormatError(f"{path}: row {lineno} has {len(row)} cells, expected {width}")
        try:
            values = [float(c) for c in row]
        except ValueError:
            raise FormatError(f"{path}: row {lineno} is not numeric") from None
        if values[-1] not in (0.0, 1.0):
            raise FormatError(f"{path}: row {lineno} has label {row[-1]!r}, expected 0 or 1")
        X.append(values[:-1])
        y.append(int(values[-1]))
    return Dataset(np.array(X), np.array(y))


def gen_data(kind: str, n: int, p: int, noise: float = 0.0, seed: int = 0) -> Dataset:
    """Deterministic synthetic binary data.

    ``blobs``: Gaussian clusters around +1 (label 1) and -1 (label 0) in every
    coordinate.  ``linear``: standard normal inputs labelled by a random
    hyperplane through the origin, labels flipped with probability ``noise``.
    ``xor``: parity of the signs of the first two coordinates of uniform
    inputs in [-1, 1]^p, features jittered by ``noise``.
    """
    if n < 1 or p < 1:
        raise PreconditionError("n and p must be at least 1")
    rng = np.random.default_rng(seed)
    if kind == "blobs":
        y = rng.integers(0, 2, size=n)
        centers = np.where(y[:, None] == 1, 1.0, -1.0) * np.ones((n, p))
        X = centers + noise * rng.standard_normal((n, p))
    elif kind == "linear":
        w = rng.standard_normal(p)
        X = rng.standard_normal((n, p))
        y = (X @ w >= 0).astype(int)
        flip = rng.random(n) < noise
        y = np.where(flip, 1 - y, y)
    elif kind == "xor":
        if p < 2:
            raise PreconditionError("xor data needs p >= 2")
        X = rng.uniform(-1.0, 1.0, size=(n, p))
        y = ((X[:, 0] > 0) ^ (X[:, 1] > 0)).astype(int)
        X = X + noise * rng.standard_normal((n, p))
    else:
        raise PreconditionError(f"unknown dataset kind {kind!r}")
    return Dataset(X, y)
