"""Weighted k-nearest-neighbor regression and the shared neighbor search.

The search is an exact linear scan; every experiment in this package works
with at most a few thousand training samples, so index structures are not
worth their complexity.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError, DegenerateWeightsError
from .kernels import EPSILON, RANK, Kernel, weights
from .series import EmbeddedDataset


@dataclass(frozen=True)
class NeighborSet:
    """Indices and ascending distances of the k nearest training samples."""

    indices: np.ndarray
    distances: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "indices", np.asarray(self.indices, dtype=int))
        object.__setattr__(self, "distances", np.asarray(self.distances, dtype=float))

    @property
    def k(self) -> int:
        return len(self.indices)


def nearest_of_distances(d: np.ndarray, k: int, exclude: int | None = None) -> NeighborSet:
    """Pick the k smallest entries of a distance vector.

    Ties are broken by ascending index (stable sort), and ``exclude`` removes
    one training index from consideration (leave-one-out support).
    """
    d = np.asarray(d, dtype=float)
    n = len(d)
    available = n - (1 if exclude is not None else 0)
    if k < 1 or k > available:
        raise ArgumentError(f"k={k} out of range; {available} candidate samples available")
    if exclude is not None:
        d = d.copy()
        d[exclude] = np.inf
    order = np.argsort(d, kind="stable")[:k]
    return NeighborSet(indices=order, distances=d[order])


def euclidean_distances(query: np.ndarray, inputs: np.ndarray) -> np.ndarray:
    query = np.asarray(query, dtype=float)
    inputs = np.asarray(inputs, dtype=float)
    if query.ndim != 1 or inputs.ndim != 2 or inputs.shape[1] != query.shape[0]:
        raise ArgumentError(
            f"dimension mismatch: query has {query.shape} and inputs have {inputs.shape}"
        )
    return np.linalg.norm(inputs - query, axis=1)


def knn_search(query, inputs, k: int, exclude: int | None = None) -> NeighborSet:
    """Exact k-nearest-neighbor search under the Euclidean distance."""
    return nearest_of_distances(euclidean_distances(query, inputs), k, exclude=exclude)


def kernel_weights_for(kernel: Kernel, neighbors: NeighborSet, b=1.0) -> np.ndarray:
    """Kernel weights for a neighbor set; rank kernels use the set as context."""
    b = np.atleast_1d(np.asarray(b, dtype=float))
    if len(b) not in (1, neighbors.k):
        raise ArgumentError(f"b must be scalar or length {neighbors.k}, got length {len(b)}")
    if kernel.kind == RANK:
        return weights(kernel, neighbors.distances)
    return weights(kernel, neighbors.distances, b if len(b) > 1 else float(b[0]))


def wknn_predict(query, ds: EmbeddedDataset, k: int, kernel: Kernel, b=1.0) -> float:
    """Kernel-weighted average of the targets of the k nearest neighbors."""
    neighbors = knn_search(query, ds.inputs, k)
    w = kernel_weights_for(kernel, neighbors, b)
    total = float(np.sum(w))
    if total < EPSILON or not np.isfinite(total):
        raise DegenerateWeightsError(
            f"kernel weights sum to {total:.3e} over the {k} nearest neighbors"
        )
    return float(np.dot(w, ds.targets[neighbors.indices]) / total)
