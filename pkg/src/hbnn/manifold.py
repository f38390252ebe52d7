"""Core geometry for two models of hyperbolic space at curvature K < 0.

The Poincare ball keeps points inside the open ball of radius 1/sqrt(-K);
the Lorentz (hyperboloid) model keeps points on the upper sheet of
<x, x>_L = 1/K where <., .>_L is the Minkowski inner product with one
temporal coordinate first.  All arrays are float64.  Points are immutable
and carry the space they live on; mixing spaces is a hard error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericError, UsageError

# Margin kept between projected points and the ball boundary.
BALL_EPS = 1e-5
# Lower clamp for log arguments in closed forms with O(1) operands.
MIN_LOG = 1e-15
# Lower clamp for norms and denominators that are divided by.
MIN_NORM = 1e-15
# atanh magnitude clamp.
ATANH_BOUND = 1.0 - 1e-12
# Below this tangent norm, exp is the identity and log returns zero.
ZERO_TANGENT = 1e-12
# Smallest positive normal float64; used instead of MIN_LOG in the stable
# distance path, where legitimately tiny log arguments encode large distances.
_TINY = float(np.finfo(np.float64).tiny)


def _as_coords(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise UsageError(f"{name} must be a 1-d coordinate array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"non-finite entries in {name}")
    arr = arr.copy()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Curvature:
    """Validated curvature value K < 0."""

    k: float

    def __post_init__(self):
        if not math.isfinite(self.k) or self.k >= 0.0:
            raise UsageError(f"curvature must be a finite negative real, got {self.k}")

    @property
    def kappa(self) -> float:
        """sqrt(-K), the scale factor appearing in every closed form."""
        return math.sqrt(-self.k)


@dataclass(frozen=True)
class PoincareBall:
    """Poincare ball of dimension n at curvature k."""

    k: float
    n: int

    def __post_init__(self):
        Curvature(self.k)
        if not isinstance(self.n, int) or self.n < 1:
            raise UsageError(f"dimension must be a positive integer, got {self.n}")

    @property
    def kappa(self) -> float:
        return math.sqrt(-self.k)

    @property
    def max_radius(self) -> float:
        """Open-ball radius 1/sqrt(-K)."""
        return 1.0 / self.kappa


@dataclass(frozen=True)
class LorentzModel:
    """Upper hyperboloid sheet of dimension n (ambient dimension n + 1)."""

    k: float
    n: int

    def __post_init__(self):
        Curvature(self.k)
        if not isinstance(self.n, int) or self.n < 1:
            raise UsageError(f"dimension must be a positive integer, got {self.n}")

    @property
    def kappa(self) -> float:
        return math.sqrt(-self.k)


class PoincarePoint:
    """A point strictly inside the ball, tagged with its space."""

    __slots__ = ("space", "coords")

    def __init__(self, space: PoincareBall, coords):
        if not isinstance(space, PoincareBall):
            raise UsageError("PoincarePoint needs a PoincareBall space")
        arr = _as_coords(coords, "coords")
        if arr.shape[0] != space.n:
            raise UsageError(f"expected dimension {space.n}, got {arr.shape[0]}")
        if float(arr @ arr) >= -1.0 / space.k:
            raise NumericError("point is on or outside the ball boundary")
        object.__setattr__(self, "space", space)
        object.__setattr__(self, "coords", arr)

    def __setattr__(self, name, value):
        raise AttributeError("PoincarePoint is immutable")

    def __repr__(self):
        return f"PoincarePoint(k={self.space.k}, coords={self.coords})"


class LorentzPoint:
    """A point on the upper hyperboloid sheet, tagged with its space."""

    __slots__ = ("space", "coords")

    def __init__(self, space: LorentzModel, coords):
        if not isinstance(space, LorentzModel):
            raise UsageError("LorentzPoint needs a LorentzModel space")
        arr = _as_coords(coords, "coords")
        if arr.shape[0] != space.n + 1:
            raise UsageError(f"expected ambient dimension {space.n + 1}, got {arr.shape[0]}")
        xt = float(arr[0])
        if xt <= 0.0:
            raise NumericError("temporal coordinate must be positive")
        residual = abs(float(lorentz_inner(arr, arr)) - 1.0 / space.k)
        # The absolute residual cannot beat float64 conditioning for far
        # points (it scales with x_t^2 * eps), hence the second term.
        tol = 1e-9 * max(1.0, -1.0 / space.k) + 1e-12 * xt * xt
        if residual > tol:
            raise NumericError(f"hyperboloid residual {residual:.3e} exceeds tolerance {tol:.3e}")
        object.__setattr__(self, "space", space)
        object.__setattr__(self, "coords", arr)

    def __setattr__(self, name, value):
        raise AttributeError("LorentzPoint is immutable")

    def __repr__(self):
        return f"LorentzPoint(k={self.space.k}, coords={self.coords})"


ManifoldPoint = PoincarePoint | LorentzPoint


class TangentVector:
    """A tangent vector attached to a base point."""

    __slots__ = ("base", "coords")

    def __init__(self, base: ManifoldPoint, coords):
        arr = _as_coords(coords, "tangent coords")
        if arr.shape != base.coords.shape:
            raise UsageError("tangent vector dimension does not match its base point")
        if isinstance(base, LorentzPoint):
            drift = abs(float(lorentz_inner(base.coords, arr)))
            norm = float(np.linalg.norm(arr))
            xt = float(base.coords[0])
            if drift > (1e-9 + 1e-12 * xt) * (1.0 + norm):
                raise NumericError(f"vector is not tangent to the hyperboloid (drift {drift:.3e})")
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "coords", arr)

    def __setattr__(self, name, value):
        raise AttributeError("TangentVector is immutable")

    def __repr__(self):
        return f"TangentVector(base={self.base!r}, coords={self.coords})"


def lorentz_inner(a: np.ndarray, b: np.ndarray) -> float:
    """Minkowski inner product -a_t b_t + <a_s, b_s> on raw arrays."""
    return float(-a[0] * b[0] + a[1:] @ b[1:])


def same_space(x: ManifoldPoint, y: ManifoldPoint) -> None:
    if type(x) is not type(y) or x.space != y.space:
        raise UsageError(f"points live on different spaces: {x.space} vs {y.space}")


def origin(space: PoincareBall | LorentzModel) -> ManifoldPoint:
    """The model origin: ball center, or (1/sqrt(-K), 0, ..., 0)."""
    if isinstance(space, PoincareBall):
        return PoincarePoint(space, np.zeros(space.n))
    if isinstance(space, LorentzModel):
        coords = np.zeros(space.n + 1)
        coords[0] = 1.0 / space.kappa
        return LorentzPoint(space, coords)
    raise UsageError(f"unknown space {space!r}")


def make_space(model: str, k: float, n: int) -> PoincareBall | LorentzModel:
    """Construct a space from a model name, 'poincare' or 'lorentz'."""
    if model == "poincare":
        return PoincareBall(k, n)
    if model == "lorentz":
        return LorentzModel(k, n)
    raise UsageError(f"unknown model {model!r}")


def project(space: PoincareBall | LorentzModel, raw) -> ManifoldPoint:
    """Pull raw coordinates onto the model.

    Poincare: radial rescale to radius (1 - BALL_EPS)/sqrt(-K) when outside
    that margin.  Lorentz: the temporal coordinate is recomputed from the
    spatial part, which lands exactly on the upper sheet.
    """
    arr = np.asarray(raw, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise NumericError("cannot project non-finite coordinates")
    if isinstance(space, PoincareBall):
        if arr.shape != (space.n,):
            raise UsageError(f"expected shape ({space.n},), got {arr.shape}")
        norm = float(np.linalg.norm(arr))
        limit = (1.0 - BALL_EPS) * space.max_radius
        if norm > limit:
            arr = arr * (limit / norm)
        return PoincarePoint(space, arr)
    if isinstance(space, LorentzModel):
        if arr.shape == (space.n + 1,):
            spatial = arr[1:]
        elif arr.shape == (space.n,):
            spatial = arr
        else:
            raise UsageError(f"expected shape ({space.n + 1},) or ({space.n},), got {arr.shape}")
        xt = math.sqrt(-1.0 / space.k + float(spatial @ spatial))
        return LorentzPoint(space, np.concatenate(([xt], spatial)))
    raise UsageError(f"unknown space {space!r}")


def tangent(base: ManifoldPoint, coords) -> TangentVector:
    return TangentVector(base, coords)


def conformal_factor(x: PoincarePoint) -> float:
    """lambda_x = 2 / (1 + K ||x||^2); grows without bound near the boundary."""
    if not isinstance(x, PoincarePoint):
        raise UsageError("conformal_factor is defined on the Poincare ball")
    den = 1.0 + x.space.k * float(x.coords @ x.coords)
    if den <= BALL_EPS:
        x = project(x.space, x.coords)
        den = 1.0 + x.space.k * float(x.coords @ x.coords)
    return 2.0 / den


def tangent_norm(v: TangentVector) -> float:
    """Riemannian length of a tangent vector at its base point."""
    if isinstance(v.base, PoincarePoint):
        return conformal_factor(v.base) * float(np.linalg.norm(v.coords))
    sq = lorentz_inner(v.coords, v.coords)
    return math.sqrt(max(sq, 0.0))


# -- Mobius machinery on raw arrays (shared with the gyrovector module) ------


def mobius_add_raw(k: float, x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, float]:
    """Mobius addition on ball coordinates; returns (result, denominator)."""
    x2 = float(x @ x)
    y2 = float(y @ y)
    xy = float(x @ y)
    den = 1.0 - 2.0 * k * xy + k * k * x2 * y2
    if den < MIN_NORM:
        raise NumericError("Mobius addition denominator vanished")
    num = (1.0 - 2.0 * k * xy - k * y2) * x + (1.0 + k * x2) * y
    return num / den, den


def _ball_distance_raw(k: float, x: np.ndarray, y: np.ndarray) -> float:
    """Distance on ball coordinates via a cancellation-free log form.

    With u = (-x) (+) y and D the Mobius denominator of that sum,
    1 + K ||u||^2 = (1 + K||x||^2)(1 + K||y||^2) / D holds exactly, so the
    quantity that underflows near the boundary is formed as a product of
    well-scaled factors instead of as 1 - (something close to 1).
    """
    kappa = math.sqrt(-k)
    u, den = mobius_add_raw(k, -x, y)
    m = float(np.linalg.norm(u))
    a = (1.0 + k * float(x @ x)) * (1.0 + k * float(y @ y)) / den
    d = math.log((1.0 + kappa * m) ** 2 / max(a, _TINY)) / kappa
    return max(d, 0.0)


# -- Distances ---------------------------------------------------------------


def distance(x: ManifoldPoint, y: ManifoldPoint) -> float:
    """Geodesic distance between two points of the same space."""
    same_space(x, y)
    if isinstance(x, PoincarePoint):
        return _ball_distance_raw(x.space.k, x.coords, y.coords)
    arg = x.space.k * lorentz_inner(x.coords, y.coords)
    # The argument is >= 1 on the hyperboloid; rounding can dip below.
    return math.acosh(max(arg, 1.0)) / x.space.kappa


# -- Exponential and logarithmic maps ----------------------------------------


def exp_map(x: ManifoldPoint, v: TangentVector) -> ManifoldPoint:
    """Follow the geodesic from x with initial velocity v for unit time."""
    if v.base is not x:
        same_space(x, v.base)
        if not np.array_equal(v.base.coords, x.coords):
            raise UsageError("tangent vector is not based at x")
    if isinstance(x, PoincarePoint):
        k = x.space.k
        kappa = x.space.kappa
        norm = float(np.linalg.norm(v.coords))
        if norm < ZERO_TANGENT:
            return x
        lam = conformal_factor(x)
        scale = math.tanh(kappa * lam * norm / 2.0) / (kappa * norm)
        moved, _ = mobius_add_raw(k, x.coords, scale * v.coords)
        return project(x.space, moved)
    sq = lorentz_inner(v.coords, v.coords)
    alpha = x.space.kappa * math.sqrt(max(sq, 0.0))
    if alpha < ZERO_TANGENT:
        return x
    coords = math.cosh(alpha) * x.coords + (math.sinh(alpha) / alpha) * v.coords
    return project(x.space, coords)


def log_map(x: ManifoldPoint, y: ManifoldPoint) -> TangentVector:
    """Inverse of exp_map: the initial velocity of the geodesic from x to y."""
    same_space(x, y)
    if isinstance(x, PoincarePoint):
        u, _ = mobius_add_raw(x.space.k, -x.coords, y.coords)
        m = float(np.linalg.norm(u))
        if m < ZERO_TANGENT:
            return TangentVector(x, np.zeros_like(x.coords))
        d = distance(x, y)
        return TangentVector(x, (d / conformal_factor(x)) * (u / m))
    beta = x.space.k * lorentz_inner(x.coords, y.coords)
    if beta <= 1.0 + 1e-14:
        return TangentVector(x, np.zeros_like(x.coords))
    factor = math.acosh(beta) / math.sqrt(beta * beta - 1.0)
    return TangentVector(x, factor * (y.coords - beta * x.coords))


# -- Parallel transport ------------------------------------------------------


def _gyration_raw(k: float, a: np.ndarray, b: np.ndarray, z: np.ndarray) -> np.ndarray:
    """gyr[a, b] z on ball coordinates via the defining composition."""
    ab, _ = mobius_add_raw(k, a, b)
    bz, _ = mobius_add_raw(k, b, z)
    inner, _ = mobius_add_raw(k, a, bz)
    out, _ = mobius_add_raw(k, -ab, inner)
    return out


def parallel_transport(x: ManifoldPoint, y: ManifoldPoint, v: TangentVector) -> TangentVector:
    """Transport v from T_x to T_y along the connecting geodesic."""
    same_space(x, y)
    if isinstance(x, PoincarePoint):
        norm = float(np.linalg.norm(v.coords))
        if norm < ZERO_TANGENT:
            return TangentVector(y, np.zeros_like(v.coords))
        # Gyrations are linear, so evaluate on a safely small multiple of v
        # (the composition needs in-ball operands) and scale back.
        rho = 0.1 * x.space.max_radius
        rotated = _gyration_raw(x.space.k, y.coords, -x.coords, (rho / norm) * v.coords)
        rotated *= norm / rho
        factor = conformal_factor(x) / conformal_factor(y)
        return TangentVector(y, factor * rotated)
    k = x.space.k
    den = 1.0 + k * lorentz_inner(x.coords, y.coords)
    if abs(den) < MIN_NORM:
        raise NumericError("parallel transport between antipodal-degenerate points")
    coef = k * lorentz_inner(y.coords, v.coords) / den
    return TangentVector(y, v.coords - coef * (x.coords + y.coords))


# -- Cross-model maps --------------------------------------------------------


def to_lorentz(p: PoincarePoint) -> LorentzPoint:
    """Isometry from ball to hyperboloid coordinates (same curvature)."""
    if not isinstance(p, PoincarePoint):
        raise UsageError("to_lorentz takes a Poincare point")
    kappa = p.space.kappa
    u = kappa * p.coords
    den = 1.0 - float(u @ u)
    if den <= 0.0:
        raise NumericError("point is too close to the ball boundary to lift")
    spatial = (2.0 / (kappa * den)) * u
    target = LorentzModel(p.space.k, p.space.n)
    return project(target, spatial)


def to_poincare(x: LorentzPoint) -> PoincarePoint:
    """Inverse isometry from hyperboloid to ball coordinates."""
    if not isinstance(x, LorentzPoint):
        raise UsageError("to_poincare takes a Lorentz point")
    kappa = x.space.kappa
    coords = x.coords[1:] / (1.0 + kappa * x.coords[0])
    return PoincarePoint(PoincareBall(x.space.k, x.space.n), coords)
