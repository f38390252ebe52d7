"""Busemann functions and horospheres.

The Busemann function for an ideal direction v measures signed "depth
toward infinity": B(x) = lim_{t->inf} d(x, gamma(t)) - t along the
unit-speed geodesic ray gamma leaving the origin toward v.  Both models
admit closed forms, and the level sets are horospheres: limit spheres
centered at the ideal point.  Layers built on these functions live in
`hbnn.layers`; this module owns the geometry and its checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericError, UsageError
from .manifold import (
    MIN_LOG,
    LorentzModel,
    LorentzPoint,
    ManifoldPoint,
    PoincareBall,
    PoincarePoint,
    TangentVector,
    distance,
    exp_map,
    lorentz_inner,
    origin,
    to_lorentz,
    to_poincare,
)


class Direction:
    """A unit vector in R^n naming an ideal boundary point."""

    __slots__ = ("v",)

    def __init__(self, v):
        arr = np.asarray(v, dtype=np.float64)
        if arr.ndim != 1:
            raise UsageError("direction must be a 1-d vector")
        if not np.all(np.isfinite(arr)):
            raise NumericError("non-finite direction")
        norm = float(np.linalg.norm(arr))
        if abs(norm - 1.0) > 1e-12:
            raise UsageError(f"direction must be unit length, got norm {norm}")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "v", arr)

    def __setattr__(self, name, value):
        raise AttributeError("Direction is immutable")

    @classmethod
    def unit(cls, v) -> "Direction":
        """Normalize an arbitrary nonzero vector into a Direction."""
        arr = np.asarray(v, dtype=np.float64)
        norm = float(np.linalg.norm(arr))
        if norm < 1e-12:
            raise UsageError("cannot normalize a near-zero vector")
        return cls(arr / norm)

    @property
    def n(self) -> int:
        return self.v.shape[0]


@dataclass(frozen=True)
class Horosphere:
    """Level set of a Busemann function.

    Parameterized the way the layers use it: the set of x with
    -alpha * B_v(x) + b = 0, i.e. the level B_v = b / alpha.
    """

    direction: Direction
    alpha: float
    b: float

    def __post_init__(self):
        if not math.isfinite(self.alpha) or self.alpha <= 0.0:
            raise UsageError(f"alpha must be positive, got {self.alpha}")
        if not math.isfinite(self.b):
            raise UsageError("b must be finite")

    @property
    def level(self) -> float:
        return self.b / self.alpha


def _check_direction(v: Direction, n: int) -> None:
    if not isinstance(v, Direction):
        raise UsageError("expected a Direction")
    if v.n != n:
        raise UsageError(f"direction dimension {v.n} does not match space dimension {n}")


def busemann_poincare(v: Direction, x: PoincarePoint) -> float:
    """Closed form on the ball: log(||v - sqrt(-K) x||^2 / (1 + K ||x||^2)) / sqrt(-K)."""
    if not isinstance(x, PoincarePoint):
        raise UsageError("busemann_poincare takes a Poincare point")
    _check_direction(v, x.space.n)
    kappa = x.space.kappa
    diff = v.v - kappa * x.coords
    num = float(diff @ diff)
    den = 1.0 + x.space.k * float(x.coords @ x.coords)
    return math.log(max(num, MIN_LOG) / max(den, MIN_LOG)) / kappa


def busemann_lorentz(v: Direction, x: LorentzPoint) -> float:
    """Closed form on the hyperboloid: log(sqrt(-K) (x_t - <x_s, v>)) / sqrt(-K)."""
    if not isinstance(x, LorentzPoint):
        raise UsageError("busemann_lorentz takes a Lorentz point")
    _check_direction(v, x.space.n)
    kappa = x.space.kappa
    arg = kappa * (float(x.coords[0]) - float(x.coords[1:] @ v.v))
    return math.log(max(arg, MIN_LOG)) / kappa


def busemann(v: Direction, x: ManifoldPoint) -> float:
    """Model-dispatching Busemann value."""
    if isinstance(x, PoincarePoint):
        return busemann_poincare(v, x)
    if isinstance(x, LorentzPoint):
        return busemann_lorentz(v, x)
    raise UsageError(f"unsupported point type {type(x).__name__}")


def busemann_ray_oracle(v: Direction, x: ManifoldPoint, t: float) -> float:
    """Truncated ray limit d(x, gamma(t)) - t; independent of the closed forms.

    gamma is the unit-speed geodesic from the origin toward v, realized with
    exp_map.  Ball coordinates cannot represent gamma(t) for large t (they
    round onto the boundary), so Poincare inputs are evaluated through the
    hyperboloid chart, which is exactly distance-preserving.
    """
    if isinstance(x, PoincarePoint):
        _check_direction(v, x.space.n)
        return busemann_ray_oracle(v, to_lorentz(x), t)
    if not isinstance(x, LorentzPoint):
        raise UsageError(f"unsupported point type {type(x).__name__}")
    _check_direction(v, x.space.n)
    e = origin(x.space)
    velocity = TangentVector(e, np.concatenate(([0.0], v.v)))
    ray_point = exp_map(e, TangentVector(e, t * velocity.coords))
    return distance(x, ray_point) - t


def point_to_horosphere(x: ManifoldPoint, h: Horosphere) -> float:
    """Geodesic distance from x to the horosphere: |B_v(x) - level|."""
    return abs(busemann(h.direction, x) - h.level)


def horosphere_sample(
    space: PoincareBall | LorentzModel,
    h: Horosphere,
    count: int,
    seed: int,
    spread: float = 0.5,
) -> list[ManifoldPoint]:
    """Deterministic points on the horosphere, exact to rounding.

    Construction is native to the hyperboloid: with tau the level,
    c = exp(sqrt(-K) tau) / sqrt(-K), and w a random vector orthogonal to v,
    the spatial part a v + w with a = (-1/K + ||w||^2 - c^2) / (2 c) lies on
    the horosphere, with temporal part a + c.  Ball samples are the image
    under the model isometry.
    """
    if count < 1:
        raise UsageError("count must be positive")
    _check_direction(h.direction, space.n)
    k = space.k
    kappa = space.kappa
    tau = h.level
    c = math.exp(kappa * tau) / kappa
    rng = np.random.default_rng(seed)
    lorentz_space = space if isinstance(space, LorentzModel) else LorentzModel(k, space.n)
    vv = h.direction.v
    out: list[ManifoldPoint] = []
    for _ in range(count):
        g = rng.standard_normal(space.n) * (spread / kappa)
        w = g - float(g @ vv) * vv
        a = (-1.0 / k + float(w @ w) - c * c) / (2.0 * c)
        spatial = a * vv + w
        # a + c is algebraically sqrt(-1/K + ||spatial||^2) and never cancels.
        coords = np.concatenate(([a + c], spatial))
        point = LorentzPoint(lorentz_space, coords)
        out.append(point if isinstance(space, LorentzModel) else to_poincare(point))
    return out


def _busemann_gradient(v: Direction, x: LorentzPoint) -> TangentVector:
    """Riemannian gradient of B_v at x; unit length by construction."""
    kappa = x.space.kappa
    s = float(x.coords[0]) - float(x.coords[1:] @ v.v)
    if s <= 0.0:
        raise NumericError("degenerate Busemann gradient")
    ambient = np.concatenate(([-1.0], -v.v)) / (kappa * s)
    return TangentVector(x, ambient + kappa * x.coords)


def _foot_point(v: Direction, x: LorentzPoint, target_level: float) -> LorentzPoint:
    """Project x onto the horosphere at target_level along the asymptotic geodesic.

    The flow of -grad B_v through x is a unit-speed geodesic along which the
    Busemann value is exactly linear, so following it for B(x) - target_level
    lands on the target level set at minimal distance.
    """
    step = busemann_lorentz(v, x) - target_level
    grad = _busemann_gradient(v, x)
    return exp_map(x, TangentVector(x, -step * grad.coords))


@dataclass(frozen=True)
class EquidistanceReport:
    """Outcome of the horosphere equidistance check."""

    expected: float
    estimate: float
    coarse_min: float
    max_deviation: float
    level_residual: float

    @property
    def passed(self) -> bool:
        return self.max_deviation <= 1e-3 and abs(self.estimate - self.expected) <= 1e-3


def horosphere_distance_check(
    space: PoincareBall | LorentzModel,
    h1: Horosphere,
    h2: Horosphere,
    samples: int = 16,
    seed: int = 0,
) -> EquidistanceReport:
    """Verify that two horospheres sharing a direction are equidistant.

    Samples points on each sphere, takes the coarse minimum over cross
    pairs, then refines each sample with its geodesic foot point on the
    other sphere.  For nested horospheres the true distance is the level
    gap |tau2 - tau1| at every point, so the report carries the worst
    deviation over all refined samples, not just the minimum.
    """
    if not np.array_equal(h1.direction.v, h2.direction.v):
        raise UsageError("equidistance check requires a shared direction")
    expected = abs(h2.level - h1.level)
    pts1 = horosphere_sample(space, h1, samples, seed)
    pts2 = horosphere_sample(space, h2, samples, seed + 1)
    coarse = min(distance(p, q) for p in pts1 for q in pts2)

    to_native = (lambda p: p) if isinstance(space, LorentzModel) else to_lorentz
    from_native = (lambda p: p) if isinstance(space, LorentzModel) else to_poincare
    v = h1.direction
    deviations = []
    residuals = []
    refined = []
    for pts, other in ((pts1, h2), (pts2, h1)):
        for p in pts:
            foot = _foot_point(v, to_native(p), other.level)
            d = distance(p, from_native(foot))
            refined.append(d)
            deviations.append(abs(d - expected))
            residuals.append(abs(busemann_lorentz(v, foot) - other.level))
    estimate = min(min(refined), coarse)
    return EquidistanceReport(
        expected=expected,
        estimate=estimate,
        coarse_min=coarse,
        max_deviation=max(deviations),
        level_residual=max(residuals),
    )


@dataclass(frozen=True)
class FeasibilityResult:
    """Existence check for a point with prescribed Busemann values."""

    discriminant: float
    feasible: bool


def bfc_horosphere_feasibility(u, k: float, model: str) -> FeasibilityResult:
    """Decide whether some point attains Busemann value u_j along each axis.

    The fully connected layers prescribe m Busemann values along the m
    coordinate directions of the output space; a point attaining them exists
    iff a scalar quadratic has a root in the model's admissible range.  The
    reduced discriminant T^2 - (m - 1)(1 + q) with t_j = exp(-sqrt(-K) u_j),
    T = sum t_j, q = sum t_j^2 is shared by both models.
    """
    if not math.isfinite(k) or k >= 0.0:
        raise UsageError(f"curvature must be negative, got {k}")
    arr = np.asarray(u, dtype=np.float64)
    if arr.ndim != 1 or arr.shape[0] < 1:
        raise UsageError("u must be a nonempty 1-d array")
    if not np.all(np.isfinite(arr)):
        raise NumericError("non-finite Busemann targets")
    m = arr.shape[0]
    kappa = math.sqrt(-k)
    t = np.exp(-kappa * arr)
    big_t = float(np.sum(t))
    q = float(np.sum(t * t))
    disc = big_t * big_t - (m - 1) * (1.0 + q)
    if disc < 0.0:
        return FeasibilityResult(discriminant=disc, feasible=False)

    feasible = False
    if model == "poincare":
        # Quadratic in the squared radius R = ||y||^2, admissible 0 <= R < -1/K.
        a2 = (-k / 4.0) * (m + 2.0 * big_t + q)
        a1 = (m - q) / 2.0
        a0 = (m - 2.0 * big_t + q) / (4.0 * (-k))
        root_disc = math.sqrt(max((a1 - 1.0) ** 2 - 4.0 * a2 * a0, 0.0))
        for sign in (1.0, -1.0):
            r = (-(a1 - 1.0) + sign * root_disc) / (2.0 * a2)
            if 0.0 <= r < -1.0 / k:
                feasible = True
    elif model == "lorentz":
        # Quadratic in the temporal coordinate, admissible y_t > 0.
        if m == 1:
            feasible = True
        else:
            root_disc = math.sqrt(max(4.0 * (-k) * disc, 0.0))
            for sign in (1.0, -1.0):
                yt = (-2.0 * kappa * big_t + sign * root_disc) / (2.0 * (m - 1) * k)
                if yt > 0.0:
                    feasible = True
    else:
        raise UsageError(f"unknown model {model!r}")
    return FeasibilityResult(discriminant=disc, feasible=feasible)
