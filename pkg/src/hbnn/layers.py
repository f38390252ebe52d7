"""Classification heads and fully connected layers on hyperbolic space.

The Busemann heads score a point by its signed distances to C learned
horospheres; the closed forms reduce to one matrix product per batch plus
elementwise work, which is what makes them cheap at large class counts.
Every baseline head and layer from the comparison families is implemented
here as well, each under its published formula.

Forward passes build autodiff graphs (`hbnn.autodiff.Tensor`), so the same
code path serves training and plain evaluation; call `.data` on the result
when only numbers are wanted.  Constrained parameters are stored raw and
realized on read: alpha through softplus, directions through row
normalization, manifold-valued parameters through the origin exponential.
"""

from __future__ import annotations

import math

import numpy as np

from .autodiff import Tensor
from .busemann import Direction, Horosphere, busemann, point_to_horosphere
from .errors import NumericError, UsageError
from .manifold import (
    BALL_EPS,
    MIN_LOG,
    LorentzModel,
    LorentzPoint,
    PoincareBall,
    PoincarePoint,
    lorentz_inner,
)

# sinh overflows past ~710; clamp its argument and count how often.
SINH_CLAMP = 700.0
# Additive guard inside sqrt for norms that sit under a division.  Small
# enough to vanish against any live value, large enough to keep gradients
# finite at exactly zero.
_GUARD = 1e-45

ACTIVATIONS = ("identity", "tanh", "relu")


def _softplus_np(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, x)


def _rows_unit_np(raw: np.ndarray) -> np.ndarray:
    norms = np.maximum(np.linalg.norm(raw, axis=-1, keepdims=True), 1e-12)
    return raw / norms


def _apply_activation(u: Tensor, name: str) -> Tensor:
    if name == "identity":
        return u
    if name == "tanh":
        return u.tanh()
    if name == "relu":
        return u.relu()
    raise UsageError(f"unknown activation {name!r}; expected one of {ACTIVATIONS}")


# -- input plumbing ----------------------------------------------------------


def _coords_batch(X, width: int, label: str) -> tuple[Tensor, np.ndarray]:
    """Accept an ndarray, a Tensor, or a list of points; return (tensor, data)."""
    if isinstance(X, Tensor):
        if X.data.ndim != 2 or X.data.shape[1] != width:
            raise UsageError(f"{label}: expected shape (B, {width}), got {X.data.shape}")
        return X, X.data
    if isinstance(X, (list, tuple)):
        X = np.stack([p.coords for p in X])
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != width:
        raise UsageError(f"{label}: expected shape (B, {width}), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"{label}: non-finite inputs")
    if not arr.flags.writeable:
        arr = arr.copy()
    return Tensor(arr), arr


def _check_ball_batch(data: np.ndarray, k: float, label: str) -> None:
    radii = np.sum(data * data, axis=1)
    if np.any(radii >= -1.0 / k):
        raise UsageError(f"{label}: input rows outside the ball; project first")


def _check_hyperboloid_batch(data: np.ndarray, k: float, label: str) -> None:
    if np.any(data[:, 0] <= 0.0):
        raise UsageError(f"{label}: nonpositive temporal coordinates; project first")
    inner = -data[:, 0] ** 2 + np.sum(data[:, 1:] ** 2, axis=1)
    tol = 1e-9 * max(1.0, -1.0 / k) + 1e-12 * data[:, 0] ** 2
    if np.any(np.abs(inner - 1.0 / k) > tol):
        raise UsageError(f"{label}: input rows off the hyperboloid; project first")


# -- small tensor-formula helpers --------------------------------------------


def _safe_norm_rows(t: Tensor) -> Tensor:
    return (t.norm_sq(axis=1, keepdims=True) + _GUARD).sqrt()


def _exp0_ball_rows(raw: Tensor, kappa: float) -> Tensor:
    """Origin exponential on the ball, row-wise: tanh(kappa r)/(kappa r) * raw."""
    r = _safe_norm_rows(raw)
    return ((r * kappa).tanh() / (r * kappa)) * raw


def _mobius_add_t(k: float, x: Tensor, y: Tensor) -> Tensor:
    """Mobius addition on ball coordinate rows, broadcasting over the batch."""
    x2 = x.norm_sq(axis=1, keepdims=True)
    y2 = y.norm_sq(axis=1, keepdims=True)
    xy = (x * y).sum(axis=1, keepdims=True)
    den = 1.0 + (-2.0 * k) * xy + (k * k) * (x2 * y2)
    num = (1.0 + (-2.0 * k) * xy + (-k) * y2) * x + (1.0 + k * x2) * y
    return num / den


def _lorentz_gyro_add_t(k: float, x: Tensor, y: Tensor) -> Tensor:
    """Hyperboloid gyro addition on coordinate rows; temporal part recomputed
    from the spatial result so the constraint holds to rounding."""
    kappa = math.sqrt(-k)
    xs, xt = x[:, 1:], x[:, :1]
    ys, yt = y[:, 1:], y[:, :1]
    a = 1.0 + kappa * xt
    b = 1.0 + kappa * yt
    nx = xs.norm_sq(axis=1, keepdims=True)
    ny = ys.norm_sq(axis=1, keepdims=True)
    sxy = (xs * ys).sum(axis=1, keepdims=True)
    dq = (a * a) * (b * b) + (-2.0 * k) * (a * b * sxy) + (k * k) * (nx * ny)
    nq = (a * a) * ny + 2.0 * (a * b * sxy) + (b * b) * nx
    den = dq + k * nq
    cx = a * (b * b) + (-2.0 * k) * (b * sxy) + (-k) * (a * ny)
    cy = b * ((a * a) + k * nx)
    zs = (2.0 * (cx * xs + cy * ys)) / den
    zt = ((-1.0 / k) + zs.norm_sq(axis=1, keepdims=True)).sqrt()
    from .autodiff import concat

    return concat([zt, zs], axis=1)


def _busemann_matrix_poincare(X: Tensor, V: Tensor, k: float) -> Tensor:
    """All-pairs Busemann values on the ball as one (B, C) block.

    The inner products for every class come from a single (B, n) x (n, C)
    product; nothing loops over classes.
    """
    kappa = math.sqrt(-k)
    r2 = X.norm_sq(axis=1, keepdims=True)
    S = X @ V.T
    num = 1.0 + (-2.0 * kappa) * S + (kappa * kappa) * r2
    den = 1.0 + k * r2
    logs = num.clamp(lo=MIN_LOG).log() - den.clamp(lo=MIN_LOG).log()
    return logs * (1.0 / kappa)


def _busemann_matrix_lorentz(X: Tensor, V: Tensor, k: float) -> Tensor:
    kappa = math.sqrt(-k)
    xt = X[:, :1]
    S = X[:, 1:] @ V.T
    return ((xt - S) * kappa).clamp(lo=MIN_LOG).log() * (1.0 / kappa)


# -- parameter containers ----------------------------------------------------


class _ParamBase:
    kind = "?"
    decay_exempt: tuple[str, ...] = ("b",)

    def leaves(self) -> dict[str, Tensor]:
        raise NotImplementedError

    def scalar_count(self) -> int:
        return sum(leaf.data.size for leaf in self.leaves().values())


class BmlrParams(_ParamBase):
    """Busemann multinomial logistic regression head, either model."""

    def __init__(self, model: str, k: float, n: int, classes: int, seed: int = 0):
        if model not in ("poincare", "lorentz"):
            raise UsageError(f"model must be poincare or lorentz, got {model!r}")
        if classes < 1 or n < 1:
            raise UsageError("need at least 1 class and dimension >= 1")
        if not math.isfinite(k) or k >= 0:
            raise UsageError(f"curvature must be negative, got {k}")
        rng = np.random.default_rng(seed)
        self.model = model
        self.kind = "bmlr_poincare" if model == "poincare" else "bmlr_lorentz"
        self.k = float(k)
        self.n = n
        self.classes = classes
        # softplus(0.5413) is 1 to five digits, so alpha starts at 1.
        self.raw_alpha = Tensor(np.full(classes, 0.5413))
        self.raw_v = Tensor(rng.standard_normal((classes, n)))
        self.b = Tensor(np.zeros(classes))

    def leaves(self):
        return {"raw_alpha": self.raw_alpha, "raw_v": self.raw_v, "b": self.b}


class EuclideanMlrParams(_ParamBase):
    kind = "euclidean_mlr"

    def __init__(self, n: int, classes: int, seed: int = 0):
        rng = np.random.default_rng(seed)
        self.k = 0.0
        self.model = "euclidean"
        self.n = n
        self.classes = classes
        self.a = Tensor(rng.standard_normal((classes, n)) / math.sqrt(n))
        self.b = Tensor(np.zeros(classes))

    def leaves(self):
        return {"a": self.a, "b": self.b}


class PoincareHyperplaneMlrParams(_ParamBase):
    """Geodesic-hyperplane head with a per-class base point (loop-bound)."""

    kind = "poincare_hyperplane_mlr"
    decay_exempt = ()

    def __init__(self, k: float, n: int, classes: int, seed: int = 0):
        rng = np.random.default_rng(seed)
        self.model = "poincare"
        self.k = float(k)
        self.n = n
        self.classes = classes
        self.raw_p = Tensor(np.zeros((classes, n)))
        self.a = Tensor(rng.standard_normal((classes, n)) / math.sqrt(n))

    def leaves(self):
        return {"raw_p": self.raw_p, "a": self.a}


class PoincareReparamMlrParams(_ParamBase):
    """Re-parameterized geodesic-hyperplane head (scalar offset, unit normal)."""

    kind = "poincare_reparam_mlr"

    def __init__(self, k: float, n: int, classes: int, seed: int = 0):
        rng = np.random.default_rng(seed)
        self.model = "poincare"
        self.k = float(k)
        self.n = n
        self.classes = classes
        self.raw_alpha = Tensor(np.full(classes, 0.5413))
        self.raw_v = Tensor(rng.standard_normal((classes, n)))
        self.b = Tensor(np.zeros(classes))

    def leaves(self):
        return {"raw_alpha": self.raw_alpha, "raw_v": self.raw_v, "b": self.b}


class PseudoBusemannMlrParams(_ParamBase):
    """Head scoring by distance-weighted Busemann direction at a base point."""

    kind = "poincare_pseudo_busemann_mlr"
    decay_exempt = ()

    def __init__(self, k: float, n: int, classes: int, seed: int = 0):
        rng = np.random.default_rng(seed)
        self.model = "poincare"
        self.k = float(k)
        self.n = n
        self.classes = classes
        self.raw_p = Tensor(np.zeros((classes, n)))
        self.raw_v = Tensor(rng.standard_normal((classes, n)))

    def leaves(self):
        return {"raw_p": self.raw_p, "raw_v": self.raw_v}


class LorentzHyperplaneMlrParams(_ParamBase):
    """Ambient Minkowski hyperplane head on the hyperboloid."""

    kind = "lorentz_hyperplane_mlr"

    def __init__(self, k: float, n: int, classes: int, seed: int = 0):
        rng = np.random.default_rng(seed)
        self.model = "lorentz"
        self.k = float(k)
        self.n = n
        self.classes = classes
        self.z = Tensor(rng.standard_normal((classes, n)) / math.sqrt(n))
        self.b = Tensor(np.zeros(classes))

    def leaves(self):
        return {"z": self.z, "b": self.b}


class BfcParams(_ParamBase):
    """Busemann fully connected layer, either model.

    Optional trailing gyro bias is stored as a raw tangent vector at the
    origin and realized through the origin exponential, so the optimizer
    never has to respect a manifold constraint.
    """

    decay_exempt = ("b", "raw_bias")

    def __init__(
        self,
        model: str,
        k: float,
        n: int,
        m: int,
        activation: str = "identity",
        gyro_bias: bool = False,
        seed: int = 0,
    ):
        if model not in ("poincare", "lorentz"):
            raise UsageError(f"model must be poincare or lorentz, got {model!r}")
        if activation not in ACTIVATIONS:
            raise UsageError(f"unknown activation {activation!r}")
        rng = np.random.default_rng(seed)
        self.model = model
        self.kind = "bfc_poincare" if model == "poincare" else "bfc_lorentz"
        self.k = float(k)
        self.n = n
        self.m = m
        self.activation = activation
        self.gyro_bias = gyro_bias
        self.saturation_events = 0
        self.raw_alpha = Tensor(np.full(m, 0.5413))
        self.raw_v = Tensor(rng.standard_normal((m, n)))
        self.b = Tensor(np.zeros(m))
        self.raw_bias = Tensor(np.zeros(m)) if gyro_bias else None

    def leaves(self):
        out = {"raw_alpha": self.raw_alpha, "raw_v": self.raw_v, "b": self.b}
        if self.raw_bias is not None:
            out["raw_bias"] = self.raw_bias
        return out


class MobiusFcParams(_ParamBase):
    """Tangent-space linear map on the ball (matrix only)."""

    kind = "mobius_fc"
    decay_exempt = ()

    def __init__(self, k: float, n: int, m: int, seed: int = 0):
        rng = np.random.default_rng(seed)
        self.model = "poincare"
        self.k = float(k)
        self.n = n
        self.m = m
        self.w = Tensor(rng.standard_normal((m, n)) / math.sqrt(n))

    def leaves(self):
        return {"w": self.w}


class PoincareFcParams(_ParamBase):
    """Intrinsic ball FC layer driven by the re-parameterized logits."""

    kind = "poincare_fc"

    def __init__(self, k: float, n: int, m: int, seed: int = 0):
        rng = np.random.default_rng(seed)
        self.model = "poincare"
        self.k = float(k)
        self.n = n
        self.m = m
        self.raw_alpha = Tensor(np.full(m, 0.5413))
        self.raw_v = Tensor(rng.standard_normal((m, n)))
        self.b = Tensor(np.zeros(m))

    def leaves(self):
        return {"raw_alpha": self.raw_alpha, "raw_v": self.raw_v, "b": self.b}


class LorentzFcParams(_ParamBase):
    """Ambient Minkowski FC layer with scaling gate on the hyperboloid."""

    kind = "lorentz_fc"
    decay_exempt = ("b", "b_prime")

    def __init__(self, k: float, n: int, m: int, activation: str = "identity", seed: int = 0):
        if activation not in ACTIVATIONS:
            raise UsageError(f"unknown activation {activation!r}")
        rng = np.random.default_rng(seed)
        self.model = "lorentz"
        self.k = float(k)
        self.n = n
        self.m = m
        self.activation = activation
        self.w = Tensor(rng.standard_normal((m, n + 1)) / math.sqrt(n + 1))
        self.b = Tensor(np.zeros(m))
        self.v = Tensor(rng.standard_normal(n + 1) / math.sqrt(n + 1))
        self.b_prime = Tensor(np.zeros(1))
        self.raw_lam = Tensor(np.full(1, 0.5413))

    def leaves(self):
        return {
            "w": self.w,
            "b": self.b,
            "v": self.v,
            "b_prime": self.b_prime,
            "raw_lam": self.raw_lam,
        }


class LorentzTangentFcParams(_ParamBase):
    """Origin-tangent linear map on the hyperboloid (log, matrix, exp)."""

    kind = "lorentz_tangent_fc"
    decay_exempt = ()

    def __init__(self, k: float, n: int, m: int, seed: int = 0):
        rng = np.random.default_rng(seed)
        self.model = "lorentz"
        self.k = float(k)
        self.n = n
        self.m = m
        self.w = Tensor(rng.standard_normal((m, n)) / math.sqrt(n))

    def leaves(self):
        return {"w": self.w}


# -- Busemann MLR ------------------------------------------------------------


def bmlr_logits(params: BmlrParams, X) -> Tensor:
    """Batch logits -alpha_k B_k(x) + b_k as a (B, C) tensor."""
    if params.model == "poincare":
        Xt, data = _coords_batch(X, params.n, "bmlr input")
        _check_ball_batch(data, params.k, "bmlr input")
        bmat = _busemann_matrix_poincare(Xt, params.raw_v.row_normalize(), params.k)
    else:
        Xt, data = _coords_batch(X, params.n + 1, "bmlr input")
        _check_hyperboloid_batch(data, params.k, "bmlr input")
        bmat = _busemann_matrix_lorentz(Xt, params.raw_v.row_normalize(), params.k)
    return -(params.raw_alpha.softplus() * bmat) + params.b


def _params_space(params):
    if params.model == "poincare":
        return PoincareBall(params.k, params.n)
    return LorentzModel(params.k, params.n)


def _points_of(params, X) -> list:
    space = _params_space(params)
    width = params.n if params.model == "poincare" else params.n + 1
    _, data = _coords_batch(X, width, "input")
    cls = PoincarePoint if params.model == "poincare" else LorentzPoint
    return [cls(space, row) for row in data]


def bmlr_logits_per_sample(params: BmlrParams, X) -> np.ndarray:
    """Reference path: one Busemann evaluation per sample and class."""
    points = _points_of(params, X)
    alpha = _softplus_np(params.raw_alpha.data)
    dirs = [Direction(row) for row in _rows_unit_np(params.raw_v.data)]
    out = np.empty((len(points), params.classes))
    for i, p in enumerate(points):
        for j, d in enumerate(dirs):
            out[i, j] = -alpha[j] * busemann(d, p) + params.b.data[j]
    return out


def bmlr_logits_via_distance(params: BmlrParams, X) -> np.ndarray:
    """Equivalent route through signed point-to-horosphere distances.

    Each logit is sign(u) * alpha_k * dist(x, H_k) where H_k is the head's
    horosphere; agreement with `bmlr_logits` is exact up to rounding.
    """
    points = _points_of(params, X)
    alpha = _softplus_np(params.raw_alpha.data)
    units = _rows_unit_np(params.raw_v.data)
    spheres = [
        Horosphere(Direction(units[j]), float(alpha[j]), float(params.b.data[j]))
        for j in range(params.classes)
    ]
    out = np.empty((len(points), params.classes))
    for i, p in enumerate(points):
        for j, h in enumerate(spheres):
            raw = -alpha[j] * busemann(h.direction, p) + params.b.data[j]
            out[i, j] = math.copysign(1.0, raw) * alpha[j] * point_to_horosphere(p, h) if raw != 0.0 else 0.0
    return out


# -- baseline MLR heads ------------------------------------------------------


def baseline_mlr_logits(params, X) -> Tensor:
    """Logits for any comparison head, dispatched on params.kind."""
    kind = params.kind
    if kind == "euclidean_mlr":
        Xt, _ = _coords_batch(X, params.n, "euclidean input")
        return Xt @ params.a.T + params.b
    if kind == "poincare_hyperplane_mlr":
        return _hyperplane_logits_poincare(params, X)
    if kind == "poincare_reparam_mlr":
        return _reparam_logits(params, X)
    if kind == "poincare_pseudo_busemann_mlr":
        return _pseudo_busemann_logits(params, X)
    if kind == "lorentz_hyperplane_mlr":
        return _hyperplane_logits_lorentz(params, X)
    raise UsageError(f"unknown MLR kind {kind!r}")


def _hyperplane_logits_poincare(params, X) -> Tensor:
    """Per-class loop: each class needs its own Mobius translation of the batch."""
    k, kappa = params.k, math.sqrt(-params.k)
    Xt, data = _coords_batch(X, params.n, "hyperplane input")
    _check_ball_batch(data, k, "hyperplane input")
    p_all = _exp0_ball_rows(params.raw_p, kappa)
    cols = []
    for j in range(params.classes):
        if np.linalg.norm(params.a.data[j]) < 1e-12:
            # Degenerate hyperplane: this class scores exactly zero.
            cols.append(Tensor(np.zeros((data.shape[0], 1))))
            continue
        pj = p_all[j : j + 1, :]
        aj = params.a[j : j + 1, :]
        w = _mobius_add_t(k, -pj, Xt)
        w2 = w.norm_sq(axis=1, keepdims=True)
        wa = (w * aj).sum(axis=1, keepdims=True)
        na = (aj.norm_sq(axis=1, keepdims=True) + _GUARD).sqrt()
        p2 = pj.norm_sq(axis=1, keepdims=True)
        lam_p = 2.0 / (1.0 + k * p2)
        arg = (2.0 * kappa) * wa / ((1.0 + k * w2) * na)
        cols.append((lam_p * na * (1.0 / kappa)) * arg.asinh())
    from .autodiff import concat

    return concat(cols, axis=1)


def _reparam_logits(params, X) -> Tensor:
    k, kappa = params.k, math.sqrt(-params.k)
    Xt, data = _coords_batch(X, params.n, "reparam input")
    _check_ball_batch(data, k, "reparam input")
    alpha = params.raw_alpha.softplus()
    V = params.raw_v.row_normalize()
    r2 = Xt.norm_sq(axis=1, keepdims=True)
    lam = 2.0 / (1.0 + k * r2)
    S = Xt @ V.T
    two_kb = (2.0 * kappa) * params.b
    a_term = (lam * kappa) * S * two_kb.cosh()
    b_term = (lam - 1.0) * two_kb.sinh()
    return (2.0 / kappa) * alpha * (a_term - b_term).asinh()


def _pseudo_busemann_logits(params, X) -> Tensor:
    """Per-class loop; note the deliberate extra minus in front."""
    k, kappa = params.k, math.sqrt(-params.k)
    Xt, data = _coords_batch(X, params.n, "pseudo input")
    _check_ball_batch(data, k, "pseudo input")
    p_all = _exp0_ball_rows(params.raw_p, kappa)
    V = params.raw_v.row_normalize()
    cols = []
    for j in range(params.classes):
        pj = p_all[j : j + 1, :]
        vj = V[j : j + 1, :]
        w = _mobius_add_t(k, -pj, Xt)
        w2 = w.norm_sq(axis=1, keepdims=True)
        m = (w2 + _GUARD).sqrt()
        dist = (2.0 / kappa) * (m * kappa).clamp(hi=1.0 - 1e-12).atanh()
        wv = (w * vj).sum(axis=1, keepdims=True)
        num = 1.0 + (-2.0 * kappa) * wv + (kappa * kappa) * w2
        den = 1.0 + k * w2
        bus = (num.clamp(lo=MIN_LOG).log() - den.clamp(lo=MIN_LOG).log()) * (1.0 / kappa)
        cols.append(-(dist * bus / m))
    from .autodiff import concat

    return concat(cols, axis=1)


def _hyperplane_logits_lorentz(params, X) -> Tensor:
    k, kappa = params.k, math.sqrt(-params.k)
    Xt, data = _coords_batch(X, params.n + 1, "hyperplane input")
    _check_hyperboloid_batch(data, k, "hyperplane input")
    xt = Xt[:, :1]
    S = Xt[:, 1:] @ params.z.T
    nz = (params.z.norm_sq(axis=1) + _GUARD).sqrt()
    kb = kappa * params.b
    alpha = kb.cosh() * S - (kb.sinh() * nz) * xt
    # sign(alpha)*|asinh(kappa alpha/beta)| collapses to asinh by oddness.
    logits = (nz * (1.0 / kappa)) * ((kappa * alpha) / nz).asinh()
    live = (np.linalg.norm(params.z.data, axis=1) >= 1e-12).astype(np.float64)
    if np.all(live):
        return logits
    # Degenerate hyperplanes score exactly zero.
    return logits * Tensor(live)


def baseline_mlr_logits_broadcast(params, X) -> np.ndarray:
    """Broadcast evaluation of the loop-bound ball heads.

    Materializes (B, C, n) intermediates, trading a factor-C memory blowup
    for the per-class loop; useful only to time and to bound that cost.
    """
    kind = params.kind
    if kind not in ("poincare_hyperplane_mlr", "poincare_pseudo_busemann_mlr"):
        raise UsageError(f"broadcast path only exists for loop-bound heads, got {kind!r}")
    k, kappa = params.k, math.sqrt(-params.k)
    _, data = _coords_batch(X, params.n, "broadcast input")
    _check_ball_batch(data, k, "broadcast input")
    raw_p = params.raw_p.data
    r = np.sqrt(np.sum(raw_p * raw_p, axis=1, keepdims=True) + _GUARD)
    p = (np.tanh(kappa * r) / (kappa * r)) * raw_p

    x = data[:, None, :]  # (B, 1, n)
    mp = -p[None, :, :]  # (1, C, n)
    x2 = np.sum(x * x, axis=2, keepdims=True)
    p2 = np.sum(mp * mp, axis=2, keepdims=True)
    xp = np.sum(mp * x, axis=2, keepdims=True)
    den = 1.0 - 2.0 * k * xp + k * k * p2 * x2
    w = ((1.0 - 2.0 * k * xp - k * x2) * mp + (1.0 + k * p2) * x) / den  # (B, C, n)
    w2 = np.sum(w * w, axis=2)

    if kind == "poincare_hyperplane_mlr":
        a = params.a.data
        na = np.sqrt(np.sum(a * a, axis=1) + _GUARD)
        wa = np.einsum("bcn,cn->bc", w, a)
        lam_p = 2.0 / (1.0 + k * np.sum(p * p, axis=1))
        arg = 2.0 * kappa * wa / ((1.0 + k * w2) * na)
        return (lam_p * na / kappa) * np.arcsinh(arg)

    v = _rows_unit_np(params.raw_v.data)
    m = np.sqrt(w2 + _GUARD)
    dist = (2.0 / kappa) * np.arctanh(np.minimum(kappa * m, 1.0 - 1e-12))
    wv = np.einsum("bcn,cn->bc", w, v)
    num = np.maximum(1.0 - 2.0 * kappa * wv + kappa * kappa * w2, MIN_LOG)
    den2 = np.maximum(1.0 + k * w2, MIN_LOG)
    bus = (np.log(num) - np.log(den2)) / kappa
    return -(dist * bus / m)


def broadcast_transient_floats(batch: int, classes: int, n: int) -> int:
    """Float count of one (B, C, n) intermediate in the broadcast path."""
    return batch * classes * n


# -- Busemann FC -------------------------------------------------------------


def _bfc_preactivation(params: BfcParams, X) -> Tensor:
    if params.model == "poincare":
        Xt, data = _coords_batch(X, params.n, "bfc input")
        _check_ball_batch(data, params.k, "bfc input")
        bmat = _busemann_matrix_poincare(Xt, params.raw_v.row_normalize(), params.k)
    else:
        Xt, data = _coords_batch(X, params.n + 1, "bfc input")
        _check_hyperboloid_batch(data, params.k, "bfc input")
        bmat = _busemann_matrix_lorentz(Xt, params.raw_v.row_normalize(), params.k)
    u = -(params.raw_alpha.softplus() * bmat) + params.b
    u = _apply_activation(u, params.activation)
    kappa = math.sqrt(-params.k)
    limit = SINH_CLAMP / kappa
    over = int(np.sum(np.abs(u.data) > limit))
    if over:
        params.saturation_events += over
    return u.clamp(lo=-limit, hi=limit)


def bfc_poincare(params: BfcParams, X) -> Tensor:
    """Ball-to-ball fully connected layer; output rows stay strictly inside."""
    if params.model != "poincare":
        raise UsageError("bfc_poincare needs poincare params")
    k, kappa = params.k, math.sqrt(-params.k)
    u = _bfc_preactivation(params, X)
    omega = (u * kappa).sinh() * (1.0 / kappa)
    # sqrt(1 - K||w||^2) via a row scale so saturated rows cannot overflow
    # when squared; with scale 1 this is the plain formula.
    scale = float(max(1.0, np.max(np.abs(omega.data))))
    q = (omega * (1.0 / scale)).norm_sq(axis=1, keepdims=True)
    cs = kappa * scale
    root = (q + 1.0 / (cs * cs)).sqrt() * cs
    y = omega / (1.0 + root)
    if params.raw_bias is not None:
        bias = _exp0_ball_rows(params.raw_bias.reshape((1, params.m)), kappa)
        y = _mobius_add_t(k, y, bias)
    if np.any(np.sum(y.data * y.data, axis=1) >= -1.0 / k):
        raise NumericError("bfc output left the ball")
    return y


def bfc_lorentz(params: BfcParams, X) -> Tensor:
    """Hyperboloid-to-hyperboloid fully connected layer."""
    if params.model != "lorentz":
        raise UsageError("bfc_lorentz needs lorentz params")
    k, kappa = params.k, math.sqrt(-params.k)
    u = _bfc_preactivation(params, X)
    ys = (u * kappa).sinh() * (1.0 / kappa)
    # Temporal coordinate through a row scale: saturated spatial parts stay
    # finite under squaring, and scale 1 reduces to the plain formula.
    scale = float(max(1.0, np.max(np.abs(ys.data))))
    q = (ys * (1.0 / scale)).norm_sq(axis=1, keepdims=True)
    yt = (q + (-1.0 / k) / (scale * scale)).sqrt() * scale
    from .autodiff import concat

    y = concat([yt, ys], axis=1)
    if params.raw_bias is not None:
        raw = params.raw_bias.reshape((1, params.m))
        r = (raw.norm_sq(axis=1, keepdims=True) + _GUARD).sqrt()
        bs = ((r * kappa).sinh() / (r * kappa)) * raw
        bt = (r * kappa).cosh() * (1.0 / kappa)
        bias = concat([bt, bs], axis=1)
        y = _lorentz_gyro_add_t(k, y, bias)
    # Residual check on row-scaled coordinates so saturated rows cannot turn
    # the check into inf - inf.
    row_scale = np.maximum(1.0, y.data[:, 0])
    scaled = y.data / row_scale[:, None]
    inner = -scaled[:, 0] ** 2 + np.sum(scaled[:, 1:] ** 2, axis=1)
    with np.errstate(over="ignore"):
        sq = row_scale * row_scale
    target = (1.0 / k) / sq
    tol = (1e-9 * max(1.0, -1.0 / k)) / sq + 1e-12 * scaled[:, 0] ** 2
    if not np.all(np.abs(inner - target) <= tol):
        raise NumericError("bfc output left the hyperboloid")
    return y


def bfc_forward(params: BfcParams, X) -> Tensor:
    return bfc_poincare(params, X) if params.model == "poincare" else bfc_lorentz(params, X)


# -- baseline FC layers ------------------------------------------------------


def baseline_fc(params, X) -> Tensor:
    kind = params.kind
    if kind == "mobius_fc":
        return _mobius_fc(params, X)
    if kind == "poincare_fc":
        return _poincare_fc(params, X)
    if kind == "lorentz_fc":
        return _lorentz_fc(params, X)
    if kind == "lorentz_tangent_fc":
        return _lorentz_tangent_fc(params, X)
    raise UsageError(f"unknown FC kind {kind!r}")


def _mobius_fc(params, X) -> Tensor:
    k, kappa = params.k, math.sqrt(-params.k)
    Xt, data = _coords_batch(X, params.n, "mobius input")
    _check_ball_batch(data, k, "mobius input")
    wx = Xt @ params.w.T
    nx = _safe_norm_rows(Xt)
    nwx = _safe_norm_rows(wx)
    ratio = nwx / nx
    arg = (nx * kappa).clamp(hi=1.0 - 1e-12).atanh()
    scale = (ratio * arg).tanh() * (1.0 / kappa)
    return scale * (wx / nwx)


def _poincare_fc(params, X) -> Tensor:
    """Same outer ball map as the Busemann FC, driven by reparam logits."""
    k, kappa = params.k, math.sqrt(-params.k)
    u = _reparam_logits(params, X)
    limit = SINH_CLAMP / kappa
    u = u.clamp(lo=-limit, hi=limit)
    omega = (u * kappa).sinh() * (1.0 / kappa)
    w2 = omega.norm_sq(axis=1, keepdims=True)
    return omega / (1.0 + (1.0 - k * w2).sqrt())


def _lorentz_fc(params, X) -> Tensor:
    k, kappa = params.k, math.sqrt(-params.k)
    Xt, data = _coords_batch(X, params.n + 1, "lorentz fc input")
    _check_hyperboloid_batch(data, k, "lorentz fc input")
    lam = params.raw_lam.softplus()
    phi_x = _apply_activation(Xt, params.activation)
    num = phi_x @ params.w.T + params.b
    gate_arg = Xt @ params.v.reshape((params.n + 1, 1)) + params.b_prime
    # Sigmoid through tanh keeps the graph free of large exponentials.
    gate = 0.5 * (1.0 + (gate_arg * 0.5).tanh())
    psi = (lam * gate) * (num / _safe_norm_rows(num))
    yt = (psi.norm_sq(axis=1, keepdims=True) + (-1.0 / k)).sqrt()
    from .autodiff import concat

    return concat([yt, psi], axis=1)


def _lorentz_tangent_fc(params, X) -> Tensor:
    k, kappa = params.k, math.sqrt(-params.k)
    Xt, data = _coords_batch(X, params.n + 1, "tangent fc input")
    _check_hyperboloid_batch(data, k, "tangent fc input")
    xt = Xt[:, :1]
    xs = Xt[:, 1:]
    ns = _safe_norm_rows(xs)
    # log at the origin: acosh(kappa x_t) along the spatial direction.
    theta = _acosh(kappa * xt)
    tang = (theta / (kappa * ns)) * xs
    z = tang @ params.w.T
    nz = _safe_norm_rows(z)
    ys = ((nz * kappa).sinh() / (nz * kappa)) * z
    yt = (nz * kappa).cosh() * (1.0 / kappa)
    from .autodiff import concat

    return concat([yt, ys], axis=1)


def _acosh(t: Tensor) -> Tensor:
    """acosh composed from primitives: log(x + sqrt(x^2 - 1)), clamped at 1."""
    x = t.clamp(lo=1.0)
    return (x + (x * x - 1.0 + _GUARD).sqrt()).log()
