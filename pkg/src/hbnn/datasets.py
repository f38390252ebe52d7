"""Synthetic dataset generators and the CSV interchange format.

Files are plain CSV with a header; the label column is named "label" and
holds 0-based contiguous integer classes, every other column is a float64
feature.  Generation is deterministic per seed, including the byte-level
file contents.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .errors import UsageError


def make_blobs(
    classes: int,
    points: int,
    n: int,
    seed: int,
    radius: float = 2.0,
    spread: float = 0.35,
) -> tuple[np.ndarray, np.ndarray]:
    """Gaussian clusters with centers spaced on a circle in a random plane.

    Center separation is at least 2 r sin(pi/C), which at the default radius
    dwarfs the cluster spread, so the classes are linearly separable for
    desk-scale C.
    """
    _check_gen_args(classes, points, n)
    rng = np.random.default_rng(seed)
    basis = _random_plane(rng, n)
    angles = 2.0 * np.pi * np.arange(classes) / classes
    centers = radius * (
        np.cos(angles)[:, None] * basis[0] + np.sin(angles)[:, None] * basis[1]
    )
    labels = np.arange(points) % classes
    X = centers[labels] + spread * rng.standard_normal((points, n))
    return X, labels


def make_tree(
    classes: int,
    points: int,
    n: int,
    seed: int,
    depth: int = 4,
    step: float = 1.0,
    noise: float = 0.25,
) -> tuple[np.ndarray, np.ndarray]:
    """Nodes of a random rooted tree embedded by noisy branch directions.

    The root has one child per class; each sampled node picks a class, a
    depth, and walks outward along a direction that drifts a little at every
    level.  Distance from the origin grows with depth, so class regions fan
    out like subtrees: shallow nodes of different classes sit close together
    near the root while deep nodes separate.
    """
    _check_gen_args(classes, points, n)
    if depth < 1:
        raise UsageError("depth must be >= 1")
    rng = np.random.default_rng(seed)
    branch = rng.standard_normal((classes, n))
    branch /= np.linalg.norm(branch, axis=1, keepdims=True)
    X = np.empty((points, n))
    labels = np.arange(points) % classes
    for i in range(points):
        c = labels[i]
        node_depth = 1 + rng.integers(depth)
        direction = branch[c].copy()
        position = np.zeros(n)
        for _ in range(node_depth):
            direction = direction + noise * rng.standard_normal(n)
            direction /= np.linalg.norm(direction)
            position = position + step * direction
        X[i] = position
    return X, labels


def _check_gen_args(classes: int, points: int, n: int) -> None:
    if classes < 2:
        raise UsageError("need at least 2 classes")
    if points < classes * 20:
        raise UsageError(f"need at least {classes * 20} points for {classes} classes")
    if n < 1:
        raise UsageError("feature dimension must be >= 1")


def _random_plane(rng, n: int) -> np.ndarray:
    if n == 1:
        return np.array([[1.0], [0.0]])
    raw = rng.standard_normal((2, n))
    q, _ = np.linalg.qr(raw.T)
    return q.T[:2]


def save_csv(path, X: np.ndarray, labels: np.ndarray) -> None:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label"] + [f"f{i}" for i in range(X.shape[1])])
        for y, row in zip(labels, X):
            writer.writerow([int(y)] + [repr(float(v)) for v in row])


def load_csv(path) -> tuple[np.ndarray, np.ndarray]:
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise UsageError(f"{path}: empty file") from None
        if "label" not in header:
            raise UsageError(f"{path}: no column named 'label'")
        label_col = header.index("label")
        rows = list(reader)
    if not rows:
        raise UsageError(f"{path}: no data rows")
    width = len(header)
    labels = np.empty(len(rows), dtype=np.int64)
    X = np.empty((len(rows), width - 1))
    for i, row in enumerate(rows):
        if len(row) != width:
            raise UsageError(f"{path}: row {i + 2} has {len(row)} fields, header has {width}")
        labels[i] = int(row[label_col])
        X[i] = [float(v) for j, v in enumerate(row) if j != label_col]
    present = np.unique(labels)
    if labels.min() < 0 or not np.array_equal(present, np.arange(present.size)):
        raise UsageError(f"{path}: labels must be 0-based contiguous integers")
    if not np.all(np.isfinite(X)):
        raise UsageError(f"{path}: non-finite feature values")
    return X, labels
