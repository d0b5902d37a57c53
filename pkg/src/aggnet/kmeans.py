"""Lloyd's k-means with k-means++ seeding."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import InitError


class KMeansResult(NamedTuple):
    centroids: np.ndarray
    labels: np.ndarray
    inertia: float
    n_iter: int


def _sq_dists(X, C):
    diff = X[:, None, :] - C[None, :, :]
    return np.einsum("nkd,nkd->nk", diff, diff)


def kmeans_pp_seed(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(X)
    centers = [int(rng.integers(n))]
    closest = _sq_dists(X, X[centers])[:, 0]
    for _ in range(1, k):
        total = closest.sum()
        if total <= 0.0:
            # every point already coincides with a center; take any unused index
            remaining = np.setdiff1d(np.arange(n), centers)
            idx = int(rng.choice(remaining))
        else:
            idx = int(rng.choice(n, p=closest / total))
        centers.append(idx)
        closest = np.minimum(closest, _sq_dists(X, X[idx:idx + 1])[:, 0])
    return X[centers].copy()


def kmeans(X: np.ndarray, k: int, rng: np.random.Generator, max_iter: int = 100,
           rel_tol: float = 1e-6) -> KMeansResult:
    """Cluster rows of X. Stops after ``max_iter`` rounds or when the relative
    change of inertia drops below ``rel_tol``."""
    X = np.asarray(X, dtype=np.float64)
    if k < 1 or len(X) < k:
        raise InitError(f"k-means needs at least k={k} points, got {len(X)}")
    C = kmeans_pp_seed(X, k, rng)
    prev = None
    it = 0
    for it in range(1, max_iter + 1):
        d = _sq_dists(X, C)
        labels = np.argmin(d, axis=1)
        inertia = float(d[np.arange(len(X)), labels].sum())
        for j in range(k):
            members = X[labels == j]
            if len(members):
                C[j] = members.mean(0)
            else:
                # re-seed an empty cluster at the point farthest from its center
                far = int(np.argmax(d[np.arange(len(X)), labels]))
                C[j] = X[far]
        if prev is not None and abs(prev - inertia) <= rel_tol * max(prev, 1e-300):
            break
        prev = inertia
    d = _sq_dists(X, C)
    labels = np.argmin(d, axis=1)
    inertia = float(d[np.arange(len(X)), labels].sum())
    return KMeansResult(C, labels, inertia, it)
