"""Seeded per-class Gaussian projection banks.

A bank holds one matrix per class.  Entry (i, j) of the class-r matrix is
a_ij / sqrt(rows) with a_ij drawn i.i.d. N(0,1) from substream r of the
master seed, filled in row-major counter order.  Because the substream
key depends only on (seed, r), growing k leaves earlier matrices
untouched, and a bank can always be regenerated bit-identically from its
(seed, shape) descriptor; model files therefore store the descriptor
instead of O(k * rows * cols) matrix entries.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from . import rng

BANK_FORMAT_VERSION = 1

VARIANT_RANK = "rank"  # matrices are n x d, applied to raw feature vectors
VARIANT_PROJ = "proj"  # matrices are n x T, applied to weak-output vectors


@dataclass
class ProjectionBank:
    """k seeded Gaussian matrices of shape rows x cols."""

    k: int
    rows: int
    cols: int
    seed: int
    variant: str
    matrices: list = field(repr=False)

    def matrix(self, r: int) -> np.ndarray:
        if not 1 <= r <= self.k:
            raise DataError(f"class index {r} outside 1..{self.k}")
        return self.matrices[r - 1]

    def descriptor(self) -> dict:
        return {
            "seed": int(self.seed),
            "k": int(self.k),
            "rows": int(self.rows),
            "cols": int(self.cols),
            "variant": self.variant,
            "generator_id": rng.GENERATOR_ID,
            "version": BANK_FORMAT_VERSION,
        }


@dataclass(frozen=True)
class ProjectedViews:
    """Per-class projections of a feature matrix, plus their memory footprint."""

    arrays: tuple
    memory_reals: int


def class_matrix(seed: int, r: int, rows: int, cols: int) -> np.ndarray:
    """The class-r member of the bank keyed by `seed`, regenerated from scratch."""
    key = rng.derive(seed, r)
    entries = rng.normals(key, rows * cols).reshape(rows, cols)
    return entries / np.sqrt(rows)


def build_bank(k: int, rows: int, cols: int, seed: int, variant: str) -> ProjectionBank:
    if rows < 1 or cols < 1:
        raise DataError("projection dimensions must be >= 1")
    if k < 2:
        raise DataError("k >= 2 required")
    if variant not in (VARIANT_RANK, VARIANT_PROJ):
        raise DataError(f"unknown bank variant {variant!r}")
    matrices = [class_matrix(seed, r, rows, cols) for r in range(1, k + 1)]
    return ProjectionBank(k=k, rows=rows, cols=cols, seed=int(seed), variant=variant, matrices=matrices)


def bank_from_descriptor(desc: dict) -> ProjectionBank:
    """Regenerate a bank from its serialized descriptor."""
    gen = desc.get("generator_id")
    if gen != rng.GENERATOR_ID:
        raise DataError(f"unsupported generator {gen!r}")
    version = int(desc.get("version", 0))
    if version > BANK_FORMAT_VERSION:
        raise DataError(f"bank descriptor version {version} is newer than supported {BANK_FORMAT_VERSION}")
    return build_bank(int(desc["k"]), int(desc["rows"]), int(desc["cols"]), int(desc["seed"]), desc["variant"])


def project(bank: ProjectionBank, r: int, x: np.ndarray) -> np.ndarray:
    """Exact matrix-vector product P^(r) x."""
    vec = np.asarray(x, dtype=np.float64)
    if vec.shape != (bank.cols,):
        raise DataError(f"vector length {vec.shape} does not match bank cols {bank.cols}")
    return bank.matrix(r) @ vec


def project_views(bank: ProjectionBank, ds) -> ProjectedViews:
    """All k projected copies of ds.features, memoized on the bank.

    Rank variant only; the result caches {P^(r) x_i} so stump training can
    reuse one sorted index over all m*k projected points.
    """
    if bank.variant != VARIANT_RANK:
        raise DataError("projected views are defined for rank-variant banks only")
    if ds.d != bank.cols:
        raise DataError(f"dataset dimension {ds.d} does not match bank cols {bank.cols}")
    cached = getattr(bank, "_views_cache", None)
    if cached is not None and cached[0] is ds:
        return cached[1]
    arrays = tuple(ds.features @ bank.matrix(r).T for r in range(1, bank.k + 1))
    views = ProjectedViews(arrays=arrays, memory_reals=bank.k * ds.m * bank.rows)
    bank._views_cache = (ds, views)
    return views
