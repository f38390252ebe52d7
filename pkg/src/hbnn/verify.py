"""Runnable property suites over the geometry, algebra, and layer stack.

Each suite draws seeded random inputs, measures the worst violation of a
stated identity, and returns one row per property.  The CLI prints the
rows as a table and exits nonzero if anything failed.  Trial counts here
are sized for an interactive run; the test suite repeats the critical
properties at their full advertised counts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, finite_diff_check, softmax_cross_entropy
from .busemann import (
    Direction,
    Horosphere,
    bfc_horosphere_feasibility,
    busemann,
    busemann_lorentz,
    busemann_poincare,
    busemann_ray_oracle,
    horosphere_distance_check,
    horosphere_sample,
    point_to_horosphere,
)
from .gyrovector import (
    gyro_add,
    gyro_inverse,
    gyro_scalar,
    gyration,
    lorentz_gyro_add,
)
from .layers import (
    BfcParams,
    BmlrParams,
    EuclideanMlrParams,
    baseline_mlr_logits,
    baseline_mlr_logits_broadcast,
    bfc_forward,
    bmlr_logits,
    bmlr_logits_per_sample,
    bmlr_logits_via_distance,
)
from .costs import FC_KINDS, MLR_KINDS, param_count
from .errors import UsageError
from .manifold import (
    LorentzModel,
    LorentzPoint,
    PoincareBall,
    PoincarePoint,
    distance,
    exp_map,
    log_map,
    origin,
    parallel_transport,
    project,
    tangent,
    tangent_norm,
    to_lorentz,
    to_poincare,
)
from .sampling import random_direction, random_point, random_tangent
from .trainer import make_head

SUITES = ("manifold", "gyro", "busemann", "layers", "grads", "limits")


@dataclass
class PropertyResult:
    name: str
    max_error: float
    tolerance: float
    trials: int

    @property
    def passed(self) -> bool:
        return self.max_error <= self.tolerance


def _coord_diff(a, b) -> float:
    return float(np.max(np.abs(a.coords - b.coords)))


# -- manifold ----------------------------------------------------------------


def verify_manifold(seed: int = 0, trials: int = 300) -> list[PropertyResult]:
    rng = np.random.default_rng(seed)
    results = []

    worst = 0.0
    total = 0
    for k in (-0.25, -1.0, -4.0):
        for model in ("poincare", "lorentz"):
            space = PoincareBall(k, 3) if model == "poincare" else LorentzModel(k, 3)
            for _ in range(trials):
                raw = rng.standard_normal(3) * 3.0
                x = project(space, raw)
                if model == "poincare":
                    margin = float(np.linalg.norm(x.coords)) - (1.0 - 1e-5) / space.kappa
                    worst = max(worst, margin)
                else:
                    inner = -x.coords[0] ** 2 + float(x.coords[1:] @ x.coords[1:])
                    worst = max(worst, abs(inner - 1.0 / k) / max(1.0, abs(1.0 / k)))
                total += 1
    results.append(PropertyResult("projection lands on the model domain", worst, 1e-9, total))

    for k in (-0.25, -1.0, -4.0):
        sym = tri = 0.0
        for model in ("poincare", "lorentz"):
            space = PoincareBall(k, 3) if model == "poincare" else LorentzModel(k, 3)
            for _ in range(trials // 3):
                x = random_point(space, rng)
                y = random_point(space, rng)
                z = random_point(space, rng)
                sym = max(sym, abs(distance(x, y) - distance(y, x)))
                tri = max(tri, distance(x, z) - distance(x, y) - distance(y, z))
        results.append(
            PropertyResult(f"distance symmetry (K={k})", sym, 1e-9, 2 * (trials // 3))
        )
        results.append(
            PropertyResult(f"triangle inequality (K={k})", max(tri, 0.0), 1e-9, 2 * (trials // 3))
        )

    rt = 0.0
    norm_err = 0.0
    iso_err = 0.0
    pt_err = 0.0
    for model in ("poincare", "lorentz"):
        space = PoincareBall(-1.0, 3) if model == "poincare" else LorentzModel(-1.0, 3)
        for _ in range(trials):
            x = random_point(space, rng, max_dist=2.5)
            y = random_point(space, rng, max_dist=2.5)
            v = log_map(x, y)
            back = exp_map(x, v)
            rt = max(rt, _coord_diff(back, y))
            norm_err = max(norm_err, abs(tangent_norm(v) - distance(x, y)))
            w = random_tangent(x, rng)
            moved = parallel_transport(x, y, w)
            pt_err = max(pt_err, abs(tangent_norm(moved) - tangent_norm(w)))
    results.append(PropertyResult("exp/log round trip", rt, 1e-8, 2 * trials))
    results.append(PropertyResult("log norm equals distance", norm_err, 1e-8, 2 * trials))
    results.append(PropertyResult("transport preserves norm", pt_err, 1e-9, 2 * trials))

    ball = PoincareBall(-1.0, 3)
    for _ in range(trials):
        p = random_point(ball, rng, max_dist=2.5)
        q = random_point(ball, rng, max_dist=2.5)
        iso_err = max(
            iso_err, abs(distance(p, q) - distance(to_lorentz(p), to_lorentz(q)))
        )
        round_trip = to_poincare(to_lorentz(p))
        iso_err = max(iso_err, _coord_diff(round_trip, p))
    results.append(PropertyResult("model change preserves distance", iso_err, 1e-8, trials))
    return results


# -- gyrovector --------------------------------------------------------------


def verify_gyro(seed: int = 0, trials: int = 250) -> list[PropertyResult]:
    rng = np.random.default_rng(seed)
    axioms = {
        "gyro left identity": 0.0,
        "gyro left inverse": 0.0,
        "left gyroassociativity": 0.0,
        "left loop property": 0.0,
        "gyrocommutativity": 0.0,
    }
    scalars = {
        "scalar distributes over gyroaddition": 0.0,
        "scalar association": 0.0,
        "gyration commutes with scalar map": 0.0,
        "double equals self-addition": 0.0,
    }
    iso = 0.0
    consistency = 0.0
    total = 0
    for k in (-0.25, -1.0):
        for n in (2, 8):
            ball = PoincareBall(k, n)
            hyper = LorentzModel(k, n)
            for space in (ball, hyper):
                e = origin(space)
                for _ in range(trials // 4):
                    total += 1
                    x = random_point(space, rng, max_dist=1.5)
                    y = random_point(space, rng, max_dist=1.5)
                    z = random_point(space, rng, max_dist=1.5)
                    axioms["gyro left identity"] = max(
                        axioms["gyro left identity"], _coord_diff(gyro_add(e, x), x)
                    )
                    axioms["gyro left inverse"] = max(
                        axioms["gyro left inverse"],
                        _coord_diff(gyro_add(gyro_inverse(x), x), e),
                    )
                    lhs = gyro_add(x, gyro_add(y, z))
                    rhs = gyro_add(gyro_add(x, y), gyration(x, y, z))
                    axioms["left gyroassociativity"] = max(
                        axioms["left gyroassociativity"], _coord_diff(lhs, rhs)
                    )
                    axioms["left loop property"] = max(
                        axioms["left loop property"],
                        _coord_diff(gyration(x, y, z), gyration(gyro_add(x, y), y, z)),
                    )
                    axioms["gyrocommutativity"] = max(
                        axioms["gyrocommutativity"],
                        _coord_diff(gyro_add(x, y), gyration(x, y, gyro_add(y, x))),
                    )
                    s, t = rng.uniform(-3, 3, size=2)
                    scalars["scalar distributes over gyroaddition"] = max(
                        scalars["scalar distributes over gyroaddition"],
                        _coord_diff(
                            gyro_scalar(s + t, x),
                            gyro_add(gyro_scalar(s, x), gyro_scalar(t, x)),
                        ),
                    )
                    scalars["scalar association"] = max(
                        scalars["scalar association"],
                        _coord_diff(gyro_scalar(s * t, x), gyro_scalar(s, gyro_scalar(t, x))),
                    )
                    scalars["gyration commutes with scalar map"] = max(
                        scalars["gyration commutes with scalar map"],
                        _coord_diff(
                            gyration(y, z, gyro_scalar(t, x)),
                            gyro_scalar(t, gyration(y, z, x)),
                        ),
                    )
                    scalars["double equals self-addition"] = max(
                        scalars["double equals self-addition"],
                        _coord_diff(gyro_scalar(2.0, x), gyro_add(x, x)),
                    )
            for _ in range(trials // 4):
                p = random_point(ball, rng, max_dist=1.5)
                q = random_point(ball, rng, max_dist=1.5)
                iso = max(
                    iso,
                    _coord_diff(to_lorentz(gyro_add(p, q)), gyro_add(to_lorentz(p), to_lorentz(q))),
                )
                a = to_lorentz(p)
                b = to_lorentz(q)
                via_transport = exp_map(
                    a, parallel_transport(origin(hyper), a, log_map(origin(hyper), b))
                )
                consistency = max(consistency, _coord_diff(lorentz_gyro_add(a, b), via_transport))
    results = [PropertyResult(name, err, 1e-8, total) for name, err in axioms.items()]
    results += [PropertyResult(name, err, 1e-7, total) for name, err in scalars.items()]
    results.append(PropertyResult("gyroaddition commutes with model change", iso, 1e-7, total))
    results.append(
        PropertyResult("hyperboloid addition matches transport form", consistency, 1e-7, total)
    )
    return results


# -- busemann ----------------------------------------------------------------


def verify_busemann(seed: int = 0, trials: int = 100) -> list[PropertyResult]:
    rng = np.random.default_rng(seed)
    results = []

    ray_err = 0.0
    mono = 0.0
    total = 0
    for k in (-0.25, -1.0, -4.0):
        for model in ("poincare", "lorentz"):
            space = PoincareBall(k, 3) if model == "poincare" else LorentzModel(k, 3)
            for _ in range(trials // 2):
                total += 1
                v = random_direction(3, rng)
                x = random_point(space, rng, max_dist=2.0)
                closed = busemann(v, x)
                far = busemann_ray_oracle(v, x, 20.0)
                ray_err = max(ray_err, abs(closed - far))
                near = busemann_ray_oracle(v, x, 10.0)
                mono = max(mono, far - near)
    results.append(
        PropertyResult("closed form matches ray limit at t=20", ray_err, 1e-6, total)
    )
    results.append(PropertyResult("ray values decrease with t", max(mono, 0.0), 1e-12, total))

    lip = 0.0
    cross = 0.0
    ball = PoincareBall(-1.0, 3)
    for _ in range(trials):
        v = random_direction(3, rng)
        p = random_point(ball, rng, max_dist=2.5)
        q = random_point(ball, rng, max_dist=2.5)
        lip = max(lip, abs(busemann(v, p) - busemann(v, q)) - distance(p, q))
        cross = max(cross, abs(busemann_poincare(v, p) - busemann_lorentz(v, to_lorentz(p))))
    results.append(PropertyResult("unit slope bound along any pair", max(lip, 0.0), 1e-9, trials))
    results.append(PropertyResult("ball and hyperboloid values agree", cross, 1e-8, trials))

    level = 0.0
    scale_inv = 0.0
    hyper = LorentzModel(-1.0, 3)
    for trial in range(10):
        v = random_direction(3, rng)
        tau = float(rng.uniform(-2, 2))
        alpha = float(rng.uniform(0.5, 2.0))
        h = Horosphere(v, alpha, alpha * tau)
        for x in horosphere_sample(hyper, h, 20, seed=seed + trial):
            level = max(level, abs(busemann(v, x) - tau))
            c = float(rng.uniform(0.5, 3.0))
            scaled = Horosphere(v, c * alpha, c * alpha * tau)
            scale_inv = max(
                scale_inv, abs(point_to_horosphere(x, h) - point_to_horosphere(x, scaled))
            )
    results.append(PropertyResult("sampled points sit on their level set", level, 1e-10, 200))
    results.append(
        PropertyResult("horosphere distance ignores parameter scaling", scale_inv, 1e-10, 200)
    )

    eq_err = 0.0
    for model in ("poincare", "lorentz"):
        space = PoincareBall(-1.0, 3) if model == "poincare" else LorentzModel(-1.0, 3)
        for trial in range(4):
            v = random_direction(3, rng)
            t1, t2 = rng.uniform(-3, 3, size=2)
            report = horosphere_distance_check(
                space,
                Horosphere(v, 1.0, float(t1)),
                Horosphere(v, 1.0, float(t2)),
                samples=15,
                seed=seed + trial,
            )
            eq_err = max(eq_err, abs(report.estimate - report.expected))
    results.append(
        PropertyResult("gap between nested horospheres equals level gap", eq_err, 1e-3, 8)
    )

    feas = 0.0
    r1 = bfc_horosphere_feasibility(np.zeros(2), -1.0, "poincare")
    feas = max(feas, abs(r1.discriminant - 1.0))
    r2 = bfc_horosphere_feasibility(np.array([1.0, 1.0]), -1.0, "poincare")
    feas = max(feas, abs(r2.discriminant - (2.0 * math.exp(-2.0) - 1.0)))
    r3 = bfc_horosphere_feasibility(np.array([0.7]), -1.0, "lorentz")
    ok_flags = (r1.feasible is True) and (r2.feasible is False) and (r3.feasible is True)
    results.append(PropertyResult("shared-point discriminant worked cases", feas, 1e-9, 3))
    results.append(
        PropertyResult("feasibility flags on worked cases", 0.0 if ok_flags else 1.0, 0.0, 3)
    )
    return results


# -- layers ------------------------------------------------------------------


def _random_batch(model: str, k: float, n: int, rng, batch: int = 8) -> np.ndarray:
    space = PoincareBall(k, n) if model == "poincare" else LorentzModel(k, n)
    return np.stack([random_point(space, rng, max_dist=1.5).coords for _ in range(batch)])


def verify_layers(seed: int = 0, trials: int = 60) -> list[PropertyResult]:
    rng = np.random.default_rng(seed)
    results = []

    dual = 0.0
    via = 0.0
    for model in ("poincare", "lorentz"):
        for trial in range(trials // 10):
            params = BmlrParams(model, -1.0, 4, 3, seed=seed + trial)
            params.b.data[:] = rng.standard_normal(3)
            X = _random_batch(model, -1.0, 4, rng)
            batch = bmlr_logits(params, X).data
            dual = max(dual, float(np.max(np.abs(batch - bmlr_logits_per_sample(params, X)))))
            via = max(via, float(np.max(np.abs(batch - bmlr_logits_via_distance(params, X)))))
    results.append(PropertyResult("batch and per-sample logits agree", dual, 1e-12, 2 * (trials // 10)))
    results.append(PropertyResult("logits match signed horosphere distances", via, 1e-10, 2 * (trials // 10)))

    loop_vs_broadcast = 0.0
    for kind in ("poincare_hyperplane_mlr", "poincare_pseudo_busemann_mlr"):
        for trial in range(3):
            params = make_head(kind, -1.0, 4, 3, seed=seed + trial)
            params.raw_p.data[:] = rng.standard_normal((3, 4)) * 0.3
            X = _random_batch("poincare", -1.0, 4, rng)
            loop = baseline_mlr_logits(params, X).data
            wide = baseline_mlr_logits_broadcast(params, X)
            loop_vs_broadcast = max(loop_vs_broadcast, float(np.max(np.abs(loop - wide))))
    results.append(
        PropertyResult("loop and broadcast baseline paths agree", loop_vs_broadcast, 1e-10, 6)
    )

    ball_margin = -1.0
    residual = 0.0
    for trial in range(trials // 6):
        for model in ("poincare", "lorentz"):
            params = BfcParams(
                model, -1.0, 4, 3,
                activation=("tanh" if trial % 2 else "identity"),
                gyro_bias=bool(trial % 2),
                seed=seed + trial,
            )
            params.b.data[:] = rng.standard_normal(3) * 2.0
            if params.raw_bias is not None:
                params.raw_bias.data[:] = rng.standard_normal(3) * 0.5
            X = _random_batch(model, -1.0, 4, rng)
            out = bfc_forward(params, X).data
            if model == "poincare":
                ball_margin = max(ball_margin, float(np.max(np.sum(out * out, axis=1))) - 1.0)
            else:
                inner = -out[:, 0] ** 2 + np.sum(out[:, 1:] ** 2, axis=1)
                residual = max(residual, float(np.max(np.abs(inner + 1.0))))
    results.append(
        PropertyResult("ball layer outputs stay strictly inside", ball_margin, -1e-12, trials // 6)
    )
    results.append(
        PropertyResult("hyperboloid layer outputs stay on sheet", residual, 1e-9, trials // 6)
    )

    shift_bad = 0.0
    for trial in range(5):
        params = BmlrParams("poincare", -1.0, 4, 3, seed=seed + trial)
        X = _random_batch("poincare", -1.0, 4, rng)
        before = np.argmax(bmlr_logits(params, X).data, axis=1)
        params.b.data += 3.7
        after = np.argmax(bmlr_logits(params, X).data, axis=1)
        shift_bad = max(shift_bad, float(np.mean(before != after)))
    results.append(
        PropertyResult("argmax unchanged by constant bias shift", shift_bad, 0.0, 5)
    )

    count_mismatch = 0
    checked = 0
    for kind in MLR_KINDS:
        if kind == "euclidean_mlr":
            params = EuclideanMlrParams(6, 4)
        else:
            params = make_head(kind, -1.0, 6, 4)
        checked += 1
        if params.scalar_count() != param_count(kind, 6, 4):
            count_mismatch += 1
    for kind in FC_KINDS + ("lorentz_tangent_fc",):
        from .serialize import construct_params

        params = construct_params({"kind": kind, "model": "poincare" if "poincare" in kind or kind == "mobius_fc" else "lorentz", "k": -1.0, "n": 6, "m": 4})
        checked += 1
        if params.scalar_count() != param_count(kind, 6, 4):
            count_mismatch += 1
    results.append(
        PropertyResult("declared parameter counts match objects", float(count_mismatch), 0.0, checked)
    )
    return results


# -- gradients ---------------------------------------------------------------


def verify_grads(seed: int = 0, trials: int = 2) -> list[PropertyResult]:
    rng = np.random.default_rng(seed)
    results = []
    n, classes, batch = 4, 3, 4
    labels = rng.integers(classes, size=batch)
    for kind in ("bmlr_poincare", "bmlr_lorentz", "poincare_hyperplane_mlr"):
        worst = 0.0
        for trial in range(trials):
            params = make_head(kind, -1.0, n, classes, seed=seed + trial)
            model = getattr(params, "model", "poincare")
            X = _random_batch(model, -1.0, n, rng, batch)

            def loss():
                return softmax_cross_entropy(
                    bmlr_logits(params, X) if kind.startswith("bmlr") else baseline_mlr_logits(params, X),
                    labels,
                )

            worst = max(worst, finite_diff_check(loss, params.leaves()))
        results.append(
            PropertyResult(f"backprop matches finite differences: {kind}", worst, 1e-5, trials)
        )
    for model in ("poincare", "lorentz"):
        worst = 0.0
        for trial in range(trials):
            fc = BfcParams(model, -1.0, n, 3, activation="tanh", gyro_bias=True, seed=seed + trial)
            width = 3 if model == "poincare" else 4
            head = EuclideanMlrParams(width, classes, seed=seed + trial)
            X = _random_batch(model, -1.0, n, rng, batch)
            leaves = dict(fc.leaves())
            leaves.update({f"head_{k}": v for k, v in head.leaves().items()})

            def loss():
                hidden = bfc_forward(fc, X)
                return softmax_cross_entropy(hidden @ head.a.T + head.b, labels)

            worst = max(worst, finite_diff_check(loss, leaves))
        results.append(
            PropertyResult(f"backprop matches finite differences: bfc_{model} stack", worst, 1e-5, trials)
        )
    return results


# -- curvature limits --------------------------------------------------------


def verify_limits(seed: int = 0, trials: int = 50) -> list[PropertyResult]:
    rng = np.random.default_rng(seed)
    k = -1e-8
    results = []

    bus_p = bus_l = 0.0
    for _ in range(trials):
        v = random_direction(3, rng)
        x = rng.standard_normal(3)
        x /= max(1.0, float(np.linalg.norm(x)))
        p = PoincarePoint(PoincareBall(k, 3), x)
        bus_p = max(bus_p, abs(busemann_poincare(v, p) + 2.0 * float(v.v @ x)))
        xt = math.sqrt(-1.0 / k + float(x @ x))
        xl = LorentzPoint(LorentzModel(k, 3), np.concatenate([[xt], x]))
        bus_l = max(bus_l, abs(busemann_lorentz(v, xl) + float(v.v @ x)))
    results.append(PropertyResult("flat limit of ball Busemann values", bus_p, 1e-3, trials))
    results.append(PropertyResult("flat limit of hyperboloid Busemann values", bus_l, 1e-3, trials))

    mlr_p = mlr_l = 0.0
    fc_p = fc_l = 0.0
    for trial in range(trials):
        head_p = BmlrParams("poincare", k, 3, 4, seed=seed + trial)
        head_p.b.data[:] = rng.standard_normal(4) * 0.5
        X = rng.standard_normal((5, 3))
        X /= np.maximum(1.0, np.linalg.norm(X, axis=1, keepdims=True))
        alpha = np.logaddexp(0.0, head_p.raw_alpha.data)
        v = head_p.raw_v.data / np.linalg.norm(head_p.raw_v.data, axis=1, keepdims=True)
        expected = 2.0 * alpha * (X @ v.T) + head_p.b.data
        mlr_p = max(mlr_p, float(np.max(np.abs(bmlr_logits(head_p, X).data - expected))))

        head_l = BmlrParams("lorentz", k, 3, 4, seed=seed + trial)
        head_l.b.data[:] = rng.standard_normal(4) * 0.5
        alpha_l = np.logaddexp(0.0, head_l.raw_alpha.data)
        v_l = head_l.raw_v.data / np.linalg.norm(head_l.raw_v.data, axis=1, keepdims=True)
        xt = np.sqrt(-1.0 / k + np.sum(X * X, axis=1, keepdims=True))
        XL = np.concatenate([xt, X], axis=1)
        expected_l = alpha_l * (X @ v_l.T) + head_l.b.data
        mlr_l = max(mlr_l, float(np.max(np.abs(bmlr_logits(head_l, XL).data - expected_l))))

        fc = BfcParams("poincare", k, 3, 4, seed=seed + trial)
        fc.b.data[:] = rng.standard_normal(4) * 0.5
        a2 = np.logaddexp(0.0, fc.raw_alpha.data)
        v2 = fc.raw_v.data / np.linalg.norm(fc.raw_v.data, axis=1, keepdims=True)
        want = a2 * (X @ v2.T) + fc.b.data / 2.0
        fc_p = max(fc_p, float(np.max(np.abs(bfc_forward(fc, X).data - want))))

        fcl = BfcParams("lorentz", k, 3, 4, seed=seed + trial)
        fcl.b.data[:] = rng.standard_normal(4) * 0.5
        a3 = np.logaddexp(0.0, fcl.raw_alpha.data)
        v3 = fcl.raw_v.data / np.linalg.norm(fcl.raw_v.data, axis=1, keepdims=True)
        want_l = a3 * (X @ v3.T) + fcl.b.data
        got = bfc_forward(fcl, XL).data[:, 1:]
        fc_l = max(fc_l, float(np.max(np.abs(got - want_l))))
    results.append(PropertyResult("flat limit of ball classifier logits", mlr_p, 1e-3, trials))
    results.append(PropertyResult("flat limit of hyperboloid classifier logits", mlr_l, 1e-3, trials))
    results.append(PropertyResult("flat limit of ball layer outputs", fc_p, 1e-3, trials))
    results.append(PropertyResult("flat limit of hyperboloid layer outputs", fc_l, 1e-3, trials))
    return results


_SUITE_FNS = {
    "manifold": verify_manifold,
    "gyro": verify_gyro,
    "busemann": verify_busemann,
    "layers": verify_layers,
    "grads": verify_grads,
    "limits": verify_limits,
}


def run_suites(selector: str, seed: int = 0) -> list[PropertyResult]:
    if selector == "all":
        names = SUITES
    elif selector in _SUITE_FNS:
        names = (selector,)
    else:
        raise UsageError(f"unknown suite {selector!r}; pick one of {SUITES + ('all',)}")
    results = []
    for name in names:
        results.extend(_SUITE_FNS[name](seed=seed))
    return results


def format_report(results: list[PropertyResult]) -> str:
    width = max(len(r.name) for r in results)
    lines = [f"{'property'.ljust(width)}  {'max error':>12}  {'tolerance':>12}  verdict"]
    for r in results:
        verdict = "pass" if r.passed else "FAIL"
        lines.append(
            f"{r.name.ljust(width)}  {r.max_error:12.3e}  {r.tolerance:12.3e}  {verdict}"
        )
    failed = sum(not r.passed for r in results)
    lines.append(f"{len(results)} properties, {failed} failed")
    return "\n".join(lines)
