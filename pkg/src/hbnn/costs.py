"""Analytic operation and parameter counts for every layer family.

`flop_count` and `param_count` return the published closed-form polynomials
for a forward pass over one input (counts are per sample, all classes or all
output units).  `counted_mlr_flops` runs an instrumented scalar
implementation of each classification head and reports the floating
operations it actually performed; the published polynomials carry an
unstated costing convention for transcendentals, so the instrumented number
is a sanity band (within 2x), not an equality.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import UsageError

MLR_KINDS = (
    "euclidean_mlr",
    "poincare_hyperplane_mlr",
    "poincare_reparam_mlr",
    "poincare_pseudo_busemann_mlr",
    "lorentz_hyperplane_mlr",
    "bmlr_poincare",
    "bmlr_lorentz",
)

FC_KINDS = (
    "mobius_fc",
    "poincare_fc",
    "lorentz_fc",
    "bfc_poincare",
    "bfc_lorentz",
)

_FLOPS = {
    "euclidean_mlr": lambda n, c: c * 2 * n,
    "poincare_hyperplane_mlr": lambda n, c: c * (19 * n + 29),
    "poincare_reparam_mlr": lambda n, c: c * (4 * n + 52),
    "poincare_pseudo_busemann_mlr": lambda n, c: c * (19 * n + 34),
    "lorentz_hyperplane_mlr": lambda n, c: c * (4 * n + 52),
    "bmlr_poincare": lambda n, c: c * (6 * n + 12),
    "bmlr_lorentz": lambda n, c: c * (2 * n + 12),
    "mobius_fc": lambda n, m: 2 * n * m + 2 * n + 2 * m + 24,
    "poincare_fc": lambda n, m: 4 * n * m + 71 * m + 4,
    "lorentz_fc": lambda n, m: 2 * n * m + 8 * m + 2 * n + 10,
    "bfc_poincare": lambda n, m: 6 * n * m + 29 * m + 4,
    "bfc_lorentz": lambda n, m: 2 * n * m + 30 * m + 2,
}

_PARAMS = {
    "euclidean_mlr": lambda n, c: c * (n + 1),
    "poincare_hyperplane_mlr": lambda n, c: 2 * c * n,
    "poincare_reparam_mlr": lambda n, c: c * (n + 2),
    "poincare_pseudo_busemann_mlr": lambda n, c: 2 * c * n,
    "lorentz_hyperplane_mlr": lambda n, c: c * (n + 1),
    "bmlr_poincare": lambda n, c: c * (n + 2),
    "bmlr_lorentz": lambda n, c: c * (n + 2),
    "mobius_fc": lambda n, m: m * n,
    "poincare_fc": lambda n, m: m * (n + 2),
    "lorentz_fc": lambda n, m: m * (n + 1) + m + (n + 1) + 2,
    "bfc_poincare": lambda n, m: m * (n + 2),
    "bfc_lorentz": lambda n, m: m * (n + 2),
    "lorentz_tangent_fc": lambda n, m: m * n,
}


def flop_count(kind: str, n: int, m_or_c: int) -> int:
    """Published per-sample operation count for a layer kind."""
    if n < 1 or m_or_c < 1:
        raise UsageError("dimensions must be >= 1")
    try:
        return _FLOPS[kind](n, m_or_c)
    except KeyError:
        raise UsageError(f"no published operation count for kind {kind!r}") from None


def param_count(kind: str, n: int, m_or_c: int) -> int:
    """Published parameter count; matches the constructed object's scalars."""
    if n < 1 or m_or_c < 1:
        raise UsageError("dimensions must be >= 1")
    try:
        return _PARAMS[kind](n, m_or_c)
    except KeyError:
        raise UsageError(f"unknown layer kind {kind!r}") from None


# -- instrumented counting ---------------------------------------------------


class OpCounter:
    """Tally of scalar float operations; transcendentals cost 1 each."""

    __slots__ = ("flops",)

    def __init__(self):
        self.flops = 0

    def arith(self, count: int = 1):
        self.flops += count

    def dot(self, a: np.ndarray, b: np.ndarray) -> float:
        self.flops += 2 * a.shape[0] - 1
        return float(a @ b)

    def fn(self, f, x: float) -> float:
        self.flops += 1
        return f(x)


def counted_mlr_flops(kind: str, n: int, classes: int, k: float = -1.0, seed: int = 0) -> int:
    """Run one sample through an explicitly counted scalar head forward.

    Parameter realization (softplus, normalization) is not counted; the
    published polynomials cost inference with parameters in hand.
    """
    if kind not in MLR_KINDS:
        raise UsageError(f"not a classification head kind: {kind!r}")
    rng = np.random.default_rng(seed)
    kappa = math.sqrt(-k)
    counter = OpCounter()

    alpha = np.logaddexp(0.0, rng.standard_normal(classes))
    v = rng.standard_normal((classes, n))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    b = rng.standard_normal(classes)
    p = rng.standard_normal((classes, n))
    p *= 0.3 / (kappa * np.maximum(1.0, np.linalg.norm(p, axis=1, keepdims=True)))
    a = rng.standard_normal((classes, n))
    z = rng.standard_normal((classes, n))

    if kind in ("bmlr_lorentz", "lorentz_hyperplane_mlr"):
        xs = rng.standard_normal(n) * 0.5
        xt = math.sqrt(-1.0 / k + float(xs @ xs))
    else:
        x = rng.standard_normal(n)
        x *= 0.5 / (kappa * max(1.0, float(np.linalg.norm(x))))

    for j in range(classes):
        if kind == "euclidean_mlr":
            counter.arith(1)
            counter.dot(a[j], x)
        elif kind == "bmlr_poincare":
            s = counter.dot(v[j], x)
            r2 = counter.dot(x, x)
            counter.arith(4)  # num = 1 - 2 kappa s + kappa^2 r2
            counter.arith(2)  # den = 1 + k r2
            num = 1.0 - 2.0 * kappa * s + kappa * kappa * r2
            den = 1.0 + k * r2
            bus = (counter.fn(math.log, num) - counter.fn(math.log, den)) / kappa
            counter.arith(2)  # subtract logs, divide by kappa
            counter.arith(2)  # -alpha * bus + b
            _ = -alpha[j] * bus + b[j]
        elif kind == "bmlr_lorentz":
            s = counter.dot(v[j], xs)
            counter.arith(2)  # kappa * (xt - s)
            bus = counter.fn(math.log, kappa * (xt - s)) / kappa
            counter.arith(1)
            counter.arith(2)
            _ = -alpha[j] * bus + b[j]
        elif kind == "poincare_reparam_mlr":
            r2 = counter.dot(x, x)
            counter.arith(2)
            lam = 2.0 / (1.0 + k * r2)
            s = counter.dot(v[j], x)
            counter.arith(1)  # 2 kappa b
            arg = 2.0 * kappa * b[j]
            ch = counter.fn(math.cosh, arg)
            sh = counter.fn(math.sinh, arg)
            counter.arith(3)  # lam * kappa * s * ch
            counter.arith(2)  # (lam - 1) * sh
            counter.arith(1)  # difference
            inner = lam * kappa * s * ch - (lam - 1.0) * sh
            counter.arith(2)  # (2/kappa) * alpha * asinh
            _ = (2.0 / kappa) * alpha[j] * counter.fn(math.asinh, inner)
        elif kind == "lorentz_hyperplane_mlr":
            nz = math.sqrt(counter.dot(z[j], z[j]))
            counter.arith(1)
            s = counter.dot(z[j], xs)
            counter.arith(1)
            kb = kappa * b[j]
            ch = counter.fn(math.cosh, kb)
            sh = counter.fn(math.sinh, kb)
            counter.arith(4)  # ch*s - sh*nz*xt
            av = ch * s - sh * nz * xt
            counter.arith(2)  # kappa*av/nz
            counter.arith(2)  # (nz/kappa)*asinh
            _ = (nz / kappa) * counter.fn(math.asinh, kappa * av / nz)
        else:
            u = _counted_translated(counter, kind, k, kappa, p[j], x, a[j], v[j])
            _ = u
    return counter.flops


def _counted_translated(counter, kind, k, kappa, pj, x, aj, vj) -> float:
    """Shared counted path for the two heads that recenter at p_k."""
    mp = -pj
    counter.arith(mp.shape[0])  # negate p
    x2 = counter.dot(x, x)
    p2 = counter.dot(mp, mp)
    xy = counter.dot(mp, x)
    counter.arith(5)
    den = 1.0 - 2.0 * k * xy + k * k * p2 * x2
    counter.arith(5)
    c1 = 1.0 - 2.0 * k * xy - k * x2
    c2 = 1.0 + k * p2
    n_ = x.shape[0]
    counter.arith(4 * n_)  # c1*mp + c2*x, divide by den
    w = (c1 * mp + c2 * x) / den
    w2 = counter.dot(w, w)
    if kind == "poincare_hyperplane_mlr":
        wa = counter.dot(w, aj)
        na = math.sqrt(counter.dot(aj, aj))
        counter.arith(1)
        lp2 = p2  # reuse; lam_p from p2
        counter.arith(2)
        lam_p = 2.0 / (1.0 + k * lp2)
        counter.arith(5)
        arg = 2.0 * kappa * wa / ((1.0 + k * w2) * na)
        counter.arith(3)
        return (lam_p * na / kappa) * counter.fn(math.asinh, arg)
    m = math.sqrt(w2)
    counter.arith(1)
    counter.arith(3)
    dist = (2.0 / kappa) * counter.fn(math.atanh, min(kappa * m, 1.0 - 1e-12))
    wv = counter.dot(w, vj)
    counter.arith(4)
    num = 1.0 - 2.0 * kappa * wv + kappa * kappa * w2
    counter.arith(2)
    den2 = 1.0 + k * w2
    bus = (counter.fn(math.log, num) - counter.fn(math.log, den2)) / kappa
    counter.arith(2)
    counter.arith(3)
    return -(dist * bus / m)
