"""Dataset ingestion, synthetic generation, and stratified splitting.

Labels are stored internally as contiguous integers 1..k (all algorithm
indexing assumes that range); the mapping back to the labels found in the
input file is kept on the dataset.  Feature storage is dense: stump
sorting and projection products are dense operations, so sparse inputs
are densified on load.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError
from . import rng

# Shared covariance and per-class means of the four-Gaussian toy problem.
TOY_COVARIANCE = np.array([[2.5, 1.5], [1.5, 1.0]])
TOY_MEANS = np.array([[-3.0, 2.0], [-3.0, -2.0], [3.0, 4.0], [3.0, 0.0]])


@dataclass(frozen=True)
class Dataset:
    """Dense feature matrix with integer class labels 1..k.

    Immutable after construction; safe to share read-only across threads.
    `label_map` lists the original label for each internal class, in order
    of first appearance in the source.
    """

    features: np.ndarray
    labels: np.ndarray
    k: int
    label_map: tuple = ()

    def __post_init__(self):
        feats = np.ascontiguousarray(np.asarray(self.features, dtype=np.float64))
        labs = np.asarray(self.labels, dtype=np.int64)
        if feats.ndim != 2:
            raise DataError("features must be a 2-D matrix")
        if feats.shape[0] == 0 or feats.shape[1] == 0:
            raise DataError("no samples")
        if labs.shape != (feats.shape[0],):
            raise DataError("labels length must match sample count")
        if not np.all(np.isfinite(feats)):
            raise DataError("non-finite feature values")
        if self.k < 2:
            raise DataError("k >= 2 required")
        if labs.min() < 1 or labs.max() > self.k:
            raise DataError(f"labels must lie in 1..{self.k}")
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labs)
        if not self.label_map:
            object.__setattr__(self, "label_map", tuple(range(1, self.k + 1)))
        elif len(self.label_map) != self.k:
            raise DataError("label_map must have one entry per class")

    @property
    def m(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def take(self, indices: np.ndarray) -> "Dataset":
        """Row subset sharing this dataset's class declaration."""
        idx = np.asarray(indices, dtype=np.int64)
        if idx.size == 0:
            raise DataError("no samples")
        return Dataset(self.features[idx], self.labels[idx], self.k, self.label_map)

    def equals(self, other: "Dataset") -> bool:
        return (
            self.k == other.k
            and self.label_map == other.label_map
            and np.array_equal(self.features, other.features)
            and np.array_equal(self.labels, other.labels)
        )


@dataclass(frozen=True)
class SplitSpec:
    """Deterministic stratified split: same (dataset, spec) -> same partition."""

    train_fraction: float
    seed: int = 0


def _declare_classes(raw_labels: list) -> tuple[np.ndarray, tuple]:
    """Remap labels to contiguous 1..k preserving first-appearance order."""
    mapping: dict = {}
    out = np.empty(len(raw_labels), dtype=np.int64)
    for i, lab in enumerate(raw_labels):
        if lab not in mapping:
            mapping[lab] = len(mapping) + 1
        out[i] = mapping[lab]
    return out, tuple(mapping.keys())


def _open_input(path):
    try:
        return open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read dataset file: {exc}") from None


def _parse_label(token: str, lineno: int) -> int | float:
    try:
        value = float(token)
    except ValueError:
        raise DataError(f"line {lineno}: non-numeric label {token!r}") from None
    if value == int(value):
        return int(value)
    return value


def load_libsvm(path) -> Dataset:
    """Parse `label idx:value ...` lines with 1-based ascending indices.

    Missing indices densify to 0.0; labels are remapped to contiguous 1..k.
    """
    rows: list[dict[int, float]] = []
    raw_labels: list = []
    max_index = 0
    with _open_input(path) as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            tokens = line.split()
            raw_labels.append(_parse_label(tokens[0], lineno))
            entries: dict[int, float] = {}
            prev = 0
            for tok in tokens[1:]:
                try:
                    idx_str, val_str = tok.split(":", 1)
                    idx = int(idx_str)
                    val = float(val_str)
                except ValueError:
                    raise DataError(f"line {lineno}: malformed entry {tok!r}") from None
                if idx in entries:
                    raise DataError(f"line {lineno}: duplicate index {idx}")
                if idx < 1 or idx <= prev:
                    raise DataError(f"line {lineno}: indices must be 1-based ascending")
                entries[idx] = val
                prev = idx
                max_index = max(max_index, idx)
            rows.append(entries)
    if not rows:
        raise DataError("no samples")
    d = max(max_index, 1)
    features = np.zeros((len(rows), d))
    for i, entries in enumerate(rows):
        for idx, val in entries.items():
            features[i, idx - 1] = val
    labels, label_map = _declare_classes(raw_labels)
    return Dataset(features, labels, len(label_map), label_map)


def write_libsvm(ds: Dataset, path) -> None:
    """Write a dataset in LIBSVM text form, densely so a reload is identical.

    Zero entries are written out: omitting them could shrink the inferred
    dimension and break the round-trip guarantee.
    """
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for i in range(ds.m):
            lab = ds.label_map[ds.labels[i] - 1]
            parts = [repr(lab)] + [
                f"{j + 1}:{float(ds.features[i, j])!r}" for j in range(ds.d)
            ]
            handle.write(" ".join(parts) + "\n")


def load_csv(path) -> Dataset:
    """Parse a rectangular numeric CSV with the label in the last column.

    A header is auto-detected when the first row fails numeric parsing.
    """
    rows: list[list[float]] = []
    raw_labels: list = []
    width = None
    saw_content = False
    with _open_input(path) as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            tokens = [t.strip() for t in line.split(",")]
            if not saw_content:
                saw_content = True
                try:
                    [float(t) for t in tokens]
                except ValueError:
                    continue  # header row
            if width is None:
                width = len(tokens)
                if width < 2:
                    raise DataError(f"line {lineno}: need at least one feature and a label")
            elif len(tokens) != width:
                raise DataError(f"line {lineno}: ragged row ({len(tokens)} fields, expected {width})")
            try:
                values = [float(t) for t in tokens[:-1]]
            except ValueError:
                raise DataError(f"line {lineno}: non-numeric feature value") from None
            raw_labels.append(_parse_label(tokens[-1], lineno))
            rows.append(values)
    if not rows:
        raise DataError("no samples")
    labels, label_map = _declare_classes(raw_labels)
    if len(label_map) < 2:
        raise DataError("k >= 2 required")
    return Dataset(np.asarray(rows), labels, len(label_map), label_map)


def write_csv(ds: Dataset, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for i in range(ds.m):
            lab = ds.label_map[ds.labels[i] - 1]
            fields = [repr(float(v)) for v in ds.features[i]] + [repr(lab)]
            handle.write(",".join(fields) + "\n")


def gen_diagonal_gaussians(per_class: int, seed: int) -> Dataset:
    """Four diagonally-elongated Gaussian classes in the plane.

    Shared covariance [2.5, 1.5; 1.5, 1.0]; means (-3,2), (-3,-2), (3,4),
    (3,0); d=2, k=4, m=4*per_class.
    """
    if per_class < 1:
        raise DataError("per_class must be >= 1")
    chol = np.linalg.cholesky(TOY_COVARIANCE)
    blocks = []
    for c in range(4):
        key = rng.derive(seed, c)
        z = rng.normals(key, per_class * 2).reshape(per_class, 2)
        blocks.append(z @ chol.T + TOY_MEANS[c])
    features = np.vstack(blocks)
    labels = np.repeat(np.arange(1, 5), per_class)
    return Dataset(features, labels, 4)


def split(ds: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    """Stratified deterministic split into (train, test).

    Per-class train counts follow largest-remainder apportionment of the
    overall train size round(fraction*m), so each class count is within
    1 of fraction * class size.
    """
    if not 0.0 < spec.train_fraction < 1.0:
        raise DataError("train_fraction must lie strictly inside (0, 1)")
    total_train = int(round(spec.train_fraction * ds.m))
    if total_train == 0 or total_train == ds.m:
        raise DataError("split would leave an empty part")
    class_indices = [np.flatnonzero(ds.labels == c) for c in range(1, ds.k + 1)]
    quotas = [spec.train_fraction * len(idx) for idx in class_indices]
    counts = [int(np.floor(q)) for q in quotas]
    leftover = total_train - sum(counts)
    # Hand leftover seats to the largest fractional remainders, ties to the
    # lower class index; clamp so no class exceeds its population.
    order = sorted(range(ds.k), key=lambda c: (-(quotas[c] - counts[c]), c))
    pos = 0
    while leftover > 0:
        c = order[pos % ds.k]
        if counts[c] < len(class_indices[c]):
            counts[c] += 1
            leftover -= 1
        pos += 1
    while leftover < 0:
        c = order[(pos - 1) % ds.k]
        if counts[c] > 0:
            counts[c] -= 1
            leftover += 1
        pos -= 1
    train_parts, test_parts = [], []
    for c in range(ds.k):
        idx = class_indices[c]
        perm = rng.permutation(rng.derive(spec.seed, c), len(idx))
        shuffled = idx[perm]
        train_parts.append(shuffled[: counts[c]])
        test_parts.append(shuffled[counts[c] :])
    train_idx = np.sort(np.concatenate(train_parts))
    test_idx = np.sort(np.concatenate(test_parts))
    if train_idx.size == 0 or test_idx.size == 0:
        raise DataError("split would leave an empty part")
    return ds.take(train_idx), ds.take(test_idx)
