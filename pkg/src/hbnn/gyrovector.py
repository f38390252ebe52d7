"""Gyrovector operations: the group-like addition and scalar multiplication
that hyperbolic space supports in each model.

Both models share the same algebraic laws (left identity, left inverse,
gyroassociativity, gyrocommutativity, and the scalar distributive laws);
the closed forms differ.  Addition here is the manifold analogue of vector
translation: x (+) y equals exp_x applied to the parallel transport of
log_e y from the origin to x.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import NumericError, UsageError
from .manifold import (
    MIN_NORM,
    LorentzModel,
    LorentzPoint,
    ManifoldPoint,
    PoincareBall,
    PoincarePoint,
    mobius_add_raw,
    origin,
    project,
    same_space,
)


def mobius_add(x: PoincarePoint, y: PoincarePoint) -> PoincarePoint:
    """Mobius addition on the ball."""
    same_space(x, y)
    try:
        out, _ = mobius_add_raw(x.space.k, x.coords, y.coords)
    except NumericError:
        # Near-boundary operands can sink the denominator; pull both inside
        # the margin and retry once before giving up.
        x = project(x.space, x.coords)
        y = project(y.space, y.coords)
        out, _ = mobius_add_raw(x.space.k, x.coords, y.coords)
    return project(x.space, out)


def mobius_scalar(t: float, x: PoincarePoint) -> PoincarePoint:
    """Mobius scalar multiplication t (.) x on the ball."""
    if not isinstance(x, PoincarePoint):
        raise UsageError("mobius_scalar is defined on the Poincare ball")
    kappa = x.space.kappa
    norm = float(np.linalg.norm(x.coords))
    if norm < MIN_NORM or t == 0.0:
        return origin(x.space)
    arg = min(kappa * norm, 1.0 - 1e-12)
    scaled = math.tanh(t * math.atanh(arg)) / kappa
    return project(x.space, (scaled / norm) * x.coords)


def lorentz_gyro_add(x: LorentzPoint, y: LorentzPoint) -> LorentzPoint:
    """Gyro addition on the hyperboloid (same algebra as mobius_add)."""
    same_space(x, y)
    k = x.space.k
    kappa = x.space.kappa
    if float(np.linalg.norm(y.coords[1:])) < MIN_NORM:
        return x
    if float(np.linalg.norm(x.coords[1:])) < MIN_NORM:
        return y
    xs, ys = x.coords[1:], y.coords[1:]
    a = 1.0 + kappa * float(x.coords[0])
    b = 1.0 + kappa * float(y.coords[0])
    nx = float(xs @ xs)
    ny = float(ys @ ys)
    sxy = float(xs @ ys)
    d = a * a * b * b - 2.0 * k * a * b * sxy + k * k * nx * ny
    n = a * a * ny + 2.0 * a * b * sxy + b * b * nx
    den = d + k * n
    if den < MIN_NORM:
        raise NumericError("Lorentz gyro addition denominator vanished")
    coef_x = a * b * b - 2.0 * k * b * sxy - k * a * ny
    coef_y = b * (a * a + k * nx)
    spatial = 2.0 * (coef_x * xs + coef_y * ys) / den
    return project(x.space, spatial)


def lorentz_gyro_scalar(t: float, x: LorentzPoint) -> LorentzPoint:
    """Gyro scalar multiplication t (.) x on the hyperboloid."""
    if not isinstance(x, LorentzPoint):
        raise UsageError("lorentz_gyro_scalar is defined on the Lorentz model")
    kappa = x.space.kappa
    xs = x.coords[1:]
    norm = float(np.linalg.norm(xs))
    if norm < MIN_NORM or t == 0.0:
        return origin(x.space)
    theta = math.acosh(max(kappa * float(x.coords[0]), 1.0))
    spatial = (math.sinh(t * theta) / (kappa * norm)) * xs
    return project(x.space, spatial)


def gyro_add(x: ManifoldPoint, y: ManifoldPoint) -> ManifoldPoint:
    """Model-dispatching gyro addition."""
    if isinstance(x, PoincarePoint):
        return mobius_add(x, y)
    if isinstance(x, LorentzPoint):
        return lorentz_gyro_add(x, y)
    raise UsageError(f"unsupported point type {type(x).__name__}")


def gyro_scalar(t: float, x: ManifoldPoint) -> ManifoldPoint:
    """Model-dispatching gyro scalar multiplication."""
    if isinstance(x, PoincarePoint):
        return mobius_scalar(t, x)
    if isinstance(x, LorentzPoint):
        return lorentz_gyro_scalar(t, x)
    raise UsageError(f"unsupported point type {type(x).__name__}")


def gyro_inverse(x: ManifoldPoint) -> ManifoldPoint:
    """The gyro inverse: negation of ball coords, or spatial flip."""
    if isinstance(x, PoincarePoint):
        return PoincarePoint(x.space, -x.coords)
    if isinstance(x, LorentzPoint):
        flipped = x.coords.copy()
        flipped[1:] = -flipped[1:]
        return LorentzPoint(x.space, flipped)
    raise UsageError(f"unsupported point type {type(x).__name__}")


def gyration(x: ManifoldPoint, y: ManifoldPoint, z: ManifoldPoint) -> ManifoldPoint:
    """gyr[x, y] z, via its defining composition.

    The gyration is the isometry correcting the failure of commutativity:
    gyr[x, y] z = (-(x (+) y)) (+) (x (+) (y (+) z)).
    """
    same_space(x, y)
    same_space(x, z)
    xy = gyro_add(x, y)
    return gyro_add(gyro_inverse(xy), gyro_add(x, gyro_add(y, z)))
