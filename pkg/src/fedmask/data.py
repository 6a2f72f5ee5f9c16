"""Datasets, CSV I/O and IID client partitioning."""

from __future__ import annotations

import csv
import gzip
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class DataError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Dataset:
    features: np.ndarray  # (n, d) float64
    labels: np.ndarray  # (n,) int64
    num_classes: int

    def __post_init__(self):
        x = np.array(self.features, dtype=np.float64)
        y = np.array(self.labels, dtype=np.int64)
        if x.ndim != 2:
            raise DataError(f"features must be 2-D, got shape {x.shape}")
        if y.ndim != 1 or y.shape[0] != x.shape[0]:
            raise DataError(f"{y.shape[0] if y.ndim == 1 else y.shape} labels for {x.shape[0]} feature rows")
        if y.size and (y.min() < 0 or y.max() >= self.num_classes):
            raise DataError(f"labels must lie in [0, {self.num_classes})")
        x.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", y)

    def __len__(self) -> int:
        return self.labels.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(self.features[idx], self.labels[idx], self.num_classes)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.num_classes == other.num_classes
            and np.array_equal(self.features, other.features)
            and np.array_equal(self.labels, other.labels)
        )


def generate_blobs(n: int, d: int, classes: int, spread: float = 1.0, seed: int = 0,
                   separation: float = 3.0) -> Dataset:
    """Class-balanced isotropic Gaussian clusters.

    Class means are drawn once from ``N(0, separation^2 I)``; each row is its
    class mean plus ``N(0, spread^2 I)`` noise. When ``n`` is not a multiple of
    ``classes`` the first ``n % classes`` classes get one extra row. Rows are
    shuffled so that class order carries no information.
    """
    if classes < 1 or d < 1:
        raise DataError("need classes >= 1 and d >= 1")
    if n < classes:
        raise DataError(f"n={n} is smaller than classes={classes}")
    if spread < 0:
        raise DataError("spread must be non-negative")
    rng = np.random.default_rng(seed)
    means = rng.normal(0.0, separation, size=(classes, d))
    counts = np.full(classes, n // classes)
    counts[: n % classes] += 1
    labels = np.repeat(np.arange(classes), counts)
    feats = means[labels] + rng.normal(0.0, 1.0, size=(n, d)) * spread
    order = rng.permutation(n)
    return Dataset(feats[order], labels[order], classes)


def train_test_split(ds: Dataset, test_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    if not 0.0 < test_fraction < 1.0:
        raise DataError("test_fraction must be in (0, 1)")
    n = len(ds)
    n_test = int(round(n * test_fraction))
    if n_test < 1 or n_test >= n:
        raise DataError(f"test_fraction={test_fraction} leaves an empty split for n={n}")
    perm = np.random.default_rng(seed).permutation(n)
    return ds.subset(np.sort(perm[n_test:])), ds.subset(np.sort(perm[:n_test]))


def _open_text(path: Path, mode: str):
    if path.suffix == ".gz":
        return io.TextIOWrapper(gzip.open(path, mode + "b"), encoding="utf-8", newline="")
    return open(path, mode, encoding="utf-8", newline="")


def load_csv(path: str | Path, num_classes: int | None = None) -> Dataset:
    """Read ``label,f1,...,fd`` rows. A ``.gz`` suffix selects gzip decoding."""
    path = Path(path)
    labels: list[int] = []
    rows: list[list[float]] = []
    width = None
    with _open_text(path, "r") as fh:
        for lineno, rec in enumerate(csv.reader(fh), start=1):
            if not rec or all(not f.strip() for f in rec):
                continue
            if width is None:
                width = len(rec)
                if width < 2:
                    raise DataError(f"{path}:{lineno}: need a label and at least one feature")
            elif len(rec) != width:
                raise DataError(f"{path}:{lineno}: expected {width} fields, got {len(rec)}")
            try:
                label = int(rec[0])
            except ValueError:
                raise DataError(f"{path}:{lineno}: label {rec[0]!r} is not an integer") from None
            if label < 0:
                raise DataError(f"{path}:{lineno}: negative label {label}")
            try:
                feats = [float(f) for f in rec[1:]]
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: non-numeric field ({exc})") from None
            if not all(np.isfinite(feats)):
                raise DataError(f"{path}:{lineno}: non-finite feature value")
            labels.append(label)
            rows.append(feats)
    if not rows:
        raise DataError(f"{path}: empty dataset")
    k = max(labels) + 1
    if num_classes is not None:
        if num_classes < k:
            raise DataError(f"{path}: label {k - 1} exceeds num_classes={num_classes}")
        k = num_classes
    return Dataset(np.array(rows), np.array(labels), k)


def save_csv(ds: Dataset, path: str | Path) -> None:
    path = Path(path)
    with _open_text(path, "w") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for label, row in zip(ds.labels.tolist(), ds.features.tolist()):
            w.writerow([label, *map(repr, row)])


def partition_iid(n: int | Dataset, num_clients: int, seed: int) -> list[np.ndarray]:
    """Shuffle ``range(n)`` and deal it round-robin into ``num_clients`` shards.

    Shard sizes differ by at most one; the first ``n % num_clients`` shards
    hold the extra rows.
    """
    if isinstance(n, Dataset):
        n = len(n)
    if num_clients < 1:
        raise DataError("need at least one client")
    if num_clients > n:
        raise DataError(f"cannot split {n} rows across {num_clients} clients")
    perm = np.random.default_rng(seed).permutation(n)
    return [perm[i::num_clients].copy() for i in range(num_clients)]
