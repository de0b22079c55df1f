"""Seeded observational sampling from a CGL-SCM.

Random stream layout
--------------------
A dataset of ``n`` rows for a model with ``K`` confounders and ``p`` nodes
consumes exactly ``n * (K + p)`` 64-bit words from a Philox4x64-10
counter-based generator keyed with the seed (``numpy.random.Philox(key=seed)``,
counter starting at zero). Words are used row by row; within a row the first
``K`` words drive ``U_1..U_K`` and the next ``p`` drive ``eps_1..eps_p``.
Each word ``w`` becomes a uniform ``((w >> 11) + 0.5) / 2**53`` in the open
interval (0, 1) and then a standard normal through the inverse normal CDF
(``scipy.special.ndtri``).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .model import CglScm

__all__ = ["Dataset", "sample", "standard_normals", "read_csv", "write_csv"]

_MAX_SEED = 2**64


@dataclass(frozen=True, eq=False)
class Dataset:
    columns: tuple[str, ...]
    values: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        object.__setattr__(self, "columns", tuple(self.columns))
        if values.ndim != 2 or values.shape[1] != len(self.columns):
            raise ValueError(
                f"values have shape {values.shape}; expected (N, {len(self.columns)})")
        if values.shape[0] < 1:
            raise ValueError("a dataset needs at least one row")
        if not np.all(np.isfinite(values)):
            raise ValueError("dataset contains non-finite entries")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def reordered(self, nodes) -> "Dataset":
        """Columns permuted into ``nodes`` order (must be the same set)."""
        nodes = tuple(nodes)
        if sorted(nodes) != sorted(self.columns):
            raise ValueError(f"data columns {self.columns} do not match nodes {nodes}")
        idx = [self.columns.index(v) for v in nodes]
        return Dataset(nodes, self.values[:, idx], self.seed)


def standard_normals(seed: int, shape) -> np.ndarray:
    if not 0 <= int(seed) < _MAX_SEED:
        raise ValueError("seed must be an unsigned 64-bit integer")
    count = int(np.prod(shape))
    bits = np.random.Philox(key=int(seed)).random_raw(count).astype(np.uint64)
    u = ((bits >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
    return ndtri(u).reshape(shape)


def sample(m: CglScm, n: int, seed: int) -> Dataset:
    if n < 1:
        raise ValueError("n must be at least 1")
    k, p = m.diagram.n_confounders, m.diagram.n_nodes
    z = standard_normals(seed, (n, k + p))
    u, e = z[:, :k], z[:, k:] * np.sqrt(m.psi2)
    B = m.B
    X = (m.mu + u @ m.C + e) @ B
    return Dataset(m.diagram.nodes, X, int(seed))


def write_csv(data: Dataset, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(data.columns) + "\n")
        for row in data.values:
            fh.write(",".join(format(v, ".17g") for v in row) + "\n")


def read_csv(path) -> Dataset:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    body = [r for r in rows[1:] if r]
    if not body:
        raise ValueError(f"{path}: no data rows")
    try:
        values = np.array([[float(v) for v in r] for r in body])
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None
    return Dataset(header, values)
