"""Seeded random geometry generators shared by tests and the verify suites."""

from __future__ import annotations

import numpy as np

from .busemann import Direction
from .manifold import (
    LorentzModel,
    LorentzPoint,
    ManifoldPoint,
    PoincareBall,
    TangentVector,
    exp_map,
    lorentz_inner,
    origin,
)


def random_direction(n: int, rng: np.random.Generator) -> Direction:
    return Direction.unit(rng.standard_normal(n))


def random_point(
    space: PoincareBall | LorentzModel,
    rng: np.random.Generator,
    max_dist: float = 2.0,
) -> ManifoldPoint:
    """A point at Riemannian distance at most max_dist from the origin."""
    e = origin(space)
    direction = rng.standard_normal(space.n)
    norm = float(np.linalg.norm(direction))
    if norm < 1e-12:
        return e
    radius = rng.uniform(0.0, max_dist)
    direction *= radius / norm
    if isinstance(space, PoincareBall):
        # Euclidean tangent norm at the origin is half the Riemannian one.
        return exp_map(e, TangentVector(e, direction / 2.0))
    return exp_map(e, TangentVector(e, np.concatenate(([0.0], direction))))


def random_tangent(
    x: ManifoldPoint,
    rng: np.random.Generator,
    scale: float = 1.0,
) -> TangentVector:
    """A random tangent vector at x with coordinates of the given scale."""
    raw = rng.standard_normal(x.coords.shape[0]) * scale
    if isinstance(x, LorentzPoint):
        # Orthogonalize against x in the Minkowski sense to stay tangent.
        raw = raw - x.space.k * lorentz_inner(x.coords, raw) * x.coords
    return TangentVector(x, raw)
