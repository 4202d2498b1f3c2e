"""Cluster separation of embeddings by opponent identity."""
from __future__ import annotations

import numpy as np


class MetricError(ValueError):
    pass


def _encode_labels(ids):
    labels, inv = np.unique(np.asarray(ids), return_inverse=True)
    return labels, inv


def _centroids(z: np.ndarray, inv: np.ndarray, M: int) -> np.ndarray:
    return np.stack([z[inv == m].mean(axis=0) for m in range(M)])


def separation_ratio(z, ids) -> float:
    """Mean pairwise distance between identity centroids over the mean
    distance of samples to their own centroid. 0/0 is reported as 0."""
    z = np.asarray(z, dtype=float)
    labels, inv = _encode_labels(ids)
    M = len(labels)
    if M < 2:
        raise MetricError("separation needs at least two identities")
    cents = _centroids(z, inv, M)
    iu = np.triu_indices(M, k=1)
    inter = float(np.linalg.norm(cents[:, None] - cents[None], axis=-1)[iu].mean())
    intra = float(np.linalg.norm(z - cents[inv], axis=-1).mean())
    if intra == 0.0:
        return 0.0 if inter == 0.0 else float("inf")
    return inter / intra


def _tie_credit(dist: np.ndarray, true: np.ndarray) -> np.ndarray:
    """Per-row credit 1/k when the true class is among k nearest ties."""
    best = dist.min(axis=1, keepdims=True)
    tied = np.isclose(dist, best, rtol=0.0, atol=1e-12)
    hit = tied[np.arange(len(true)), true]
    return hit / tied.sum(axis=1)


def loo_centroid_accuracy(z, ids) -> float:
    """Leave-one-out nearest-centroid classification accuracy. Ties are
    split evenly, so identical embeddings score chance."""
    z = np.asarray(z, dtype=float)
    labels, inv = _encode_labels(ids)
    M = len(labels)
    counts = np.bincount(inv, minlength=M)
    if (counts < 2).any():
        raise MetricError("leave-one-out needs at least two samples per identity")
    sums = np.stack([z[inv == m].sum(axis=0) for m in range(M)])
    cents = sums / counts[:, None]
    # distances to every full centroid, then replace the own-class one with the held-out centroid
    dist = np.linalg.norm(z[:, None, :] - cents[None], axis=-1)
    own = (sums[inv] - z) / (counts[inv] - 1)[:, None]
    dist[np.arange(len(z)), inv] = np.linalg.norm(z - own, axis=-1)
    return float(_tie_credit(dist, inv).mean())


def heldout_centroid_accuracy(z_train, ids_train, z_test, ids_test) -> float:
    """Centroids from a reference set, accuracy on held-out embeddings."""
    z_train, z_test = np.asarray(z_train, dtype=float), np.asarray(z_test, dtype=float)
    labels, inv = _encode_labels(ids_train)
    index = {l: i for i, l in enumerate(labels.tolist())}
    unknown = set(np.asarray(ids_test).tolist()) - set(index)
    if unknown:
        raise MetricError(f"held-out identities without a centroid: {sorted(map(str, unknown))}")
    cents = _centroids(z_train, inv, len(labels))
    true = np.array([index[i] for i in np.asarray(ids_test).tolist()])
    dist = np.linalg.norm(z_test[:, None, :] - cents[None], axis=-1)
    return float(_tie_credit(dist, true).mean())


def separation_metrics(z, ids) -> dict:
    return {"ratio": separation_ratio(z, ids), "accuracy": loo_centroid_accuracy(z, ids), "n_samples": int(len(z))}
