"""Acceptance gates for the toolkit, one test per gate.

Each test pins the tolerances, trial counts, and wall-clock budgets the
package commits to: geometric closed forms against their defining limits,
algebraic axioms, layer invariants, gradient checks, cost polynomials,
the batch-throughput direction, end-to-end training, and bitwise
deterministic metrics.  Budgets are seconds on a laptop-class machine.
With `pytest -v` each gate reports as a single pass/fail line.
"""

import math
import time

import numpy as np
import pytest

from hbnn import cli
from hbnn.autodiff import Tensor, finite_diff_check, softmax_cross_entropy
from hbnn.bench import run_bench
from hbnn.busemann import (
    Horosphere,
    bfc_horosphere_feasibility,
    busemann,
    busemann_ray_oracle,
    horosphere_distance_check,
)
from hbnn.costs import FC_KINDS, MLR_KINDS, flop_count, param_count
from hbnn.datasets import make_blobs, make_tree
from hbnn.errors import UsageError
from hbnn.gyrovector import gyro_add, gyro_inverse, gyro_scalar, gyration
from hbnn.layers import (
    BfcParams,
    BmlrParams,
    LorentzFcParams,
    LorentzTangentFcParams,
    MobiusFcParams,
    PoincareFcParams,
    baseline_fc,
    baseline_mlr_logits,
    bfc_forward,
    bmlr_logits,
    bmlr_logits_via_distance,
)
from hbnn.manifold import make_space, origin
from hbnn.sampling import random_direction, random_point
from hbnn.trainer import EmbedConfig, OptimConfig, embed_config_for, make_head, train


def _coord_diff(a, b) -> float:
    return float(np.max(np.abs(a.coords - b.coords)))


def _batch(model, k, n, rng, batch=8, max_dist=1.5):
    space = make_space(model, k, n)
    return np.stack(
        [random_point(space, rng, max_dist=max_dist).coords for _ in range(batch)]
    )


# -- gate 1: closed forms vs the defining ray limit --------------------------


def test_busemann_closed_forms_match_ray_limit():
    started = time.perf_counter()
    rng = np.random.default_rng(0)
    worst = 0.0
    for k in (-0.25, -1.0, -4.0):
        for model in ("poincare", "lorentz"):
            space = make_space(model, k, 3)
            for _ in range(500):
                v = random_direction(3, rng)
                x = random_point(space, rng, max_dist=2.0)
                closed = busemann(v, x)
                oracle = busemann_ray_oracle(v, x, 20.0)
                worst = max(worst, abs(closed - oracle))
    elapsed = time.perf_counter() - started
    assert worst < 1e-6
    assert elapsed < 10.0


# -- gate 2: horospheres sharing a direction are equidistant ------------------


def test_horospheres_sharing_a_direction_are_equidistant():
    started = time.perf_counter()
    rng = np.random.default_rng(1)
    cases = []
    for _ in range(20):
        v = random_direction(3, rng)
        tau1, tau2 = rng.uniform(-3.0, 3.0, size=2)
        cases.append((v, float(tau1), float(tau2)))
    for model in ("poincare", "lorentz"):
        space = make_space(model, -1.0, 3)
        for trial, (v, tau1, tau2) in enumerate(cases):
            h1 = Horosphere(v, 1.0, tau1)
            h2 = Horosphere(v, 1.0, tau2)
            report = horosphere_distance_check(space, h1, h2, seed=trial)
            assert abs(report.estimate - report.expected) <= 1e-3
            assert report.max_deviation <= 1e-3
            assert report.passed
    assert time.perf_counter() - started < 60.0


# -- gate 3: flat-curvature limit recovers the Euclidean layers ---------------


def test_flat_curvature_limit_recovers_euclidean_layers():
    rng = np.random.default_rng(2)
    k = -1e-8
    mlr_p = mlr_l = fc_p = fc_l = 0.0
    for trial in range(200):
        X = rng.standard_normal((5, 3))
        X /= np.maximum(1.0, np.linalg.norm(X, axis=1, keepdims=True))
        xt = np.sqrt(-1.0 / k + np.sum(X * X, axis=1, keepdims=True))
        XL = np.concatenate([xt, X], axis=1)

        head_p = BmlrParams("poincare", k, 3, 4, seed=trial)
        head_p.b.data[:] = rng.standard_normal(4) * 0.5
        alpha = np.logaddexp(0.0, head_p.raw_alpha.data)
        v = head_p.raw_v.data / np.linalg.norm(head_p.raw_v.data, axis=1, keepdims=True)
        expected = 2.0 * alpha * (X @ v.T) + head_p.b.data
        mlr_p = max(mlr_p, float(np.max(np.abs(bmlr_logits(head_p, X).data - expected))))

        head_l = BmlrParams("lorentz", k, 3, 4, seed=trial)
        head_l.b.data[:] = rng.standard_normal(4) * 0.5
        alpha_l = np.logaddexp(0.0, head_l.raw_alpha.data)
        v_l = head_l.raw_v.data / np.linalg.norm(head_l.raw_v.data, axis=1, keepdims=True)
        expected_l = alpha_l * (X @ v_l.T) + head_l.b.data
        mlr_l = max(mlr_l, float(np.max(np.abs(bmlr_logits(head_l, XL).data - expected_l))))

        fc = BfcParams("poincare", k, 3, 4, seed=trial)
        fc.b.data[:] = rng.standard_normal(4) * 0.5
        a2 = np.logaddexp(0.0, fc.raw_alpha.data)
        v2 = fc.raw_v.data / np.linalg.norm(fc.raw_v.data, axis=1, keepdims=True)
        want = a2 * (X @ v2.T) + fc.b.data / 2.0
        fc_p = max(fc_p, float(np.max(np.abs(bfc_forward(fc, X).data - want))))

        fcl = BfcParams("lorentz", k, 3, 4, seed=trial)
        fcl.b.data[:] = rng.standard_normal(4) * 0.5
        a3 = np.logaddexp(0.0, fcl.raw_alpha.data)
        v3 = fcl.raw_v.data / np.linalg.norm(fcl.raw_v.data, axis=1, keepdims=True)
        want_l = a3 * (X @ v3.T) + fcl.b.data
        fc_l = max(fc_l, float(np.max(np.abs(bfc_forward(fcl, XL).data[:, 1:] - want_l))))
    assert mlr_p < 1e-3
    assert mlr_l < 1e-3
    assert fc_p < 1e-3
    assert fc_l < 1e-3


# -- gate 4: logits are signed point-to-horosphere distances ------------------


def test_logits_equal_signed_horosphere_distances():
    rng = np.random.default_rng(3)
    worst = 0.0
    for model in ("poincare", "lorentz"):
        for trial in range(125):
            params = BmlrParams(model, -1.0, 4, 3, seed=trial)
            params.b.data[:] = rng.standard_normal(3)
            X = _batch(model, -1.0, 4, rng, batch=8)
            direct = bmlr_logits(params, X).data
            via = bmlr_logits_via_distance(params, X)
            worst = max(worst, float(np.max(np.abs(direct - via))))
    assert worst < 1e-10


# -- gate 5: gyrogroup and scalar-map axioms ----------------------------------


def test_gyrovector_axioms_hold_on_both_models():
    rng = np.random.default_rng(4)
    worst = 0.0
    for model in ("poincare", "lorentz"):
        space = make_space(model, -1.0, 4)
        e = origin(space)
        for _ in range(1000):
            x = random_point(space, rng, max_dist=1.5)
            y = random_point(space, rng, max_dist=1.5)
            z = random_point(space, rng, max_dist=1.5)
            s, t = rng.uniform(-3.0, 3.0, size=2)
            checks = (
                _coord_diff(gyro_add(e, x), x),
                _coord_diff(gyro_add(gyro_inverse(x), x), e),
                _coord_diff(
                    gyro_add(x, gyro_add(y, z)),
                    gyro_add(gyro_add(x, y), gyration(x, y, z)),
                ),
                _coord_diff(gyration(x, y, z), gyration(gyro_add(x, y), y, z)),
                _coord_diff(gyro_add(x, y), gyration(x, y, gyro_add(y, x))),
                _coord_diff(gyro_scalar(1.0, x), x),
                _coord_diff(
                    gyro_scalar(s + t, x),
                    gyro_add(gyro_scalar(s, x), gyro_scalar(t, x)),
                ),
                _coord_diff(gyro_scalar(s * t, x), gyro_scalar(s, gyro_scalar(t, x))),
                _coord_diff(
                    gyro_scalar(t, gyration(y, z, x)),
                    gyration(y, z, gyro_scalar(t, x)),
                ),
            )
            worst = max(worst, max(checks))
    assert worst < 1e-7


# -- gate 6: layer outputs never leave the manifold ---------------------------


def test_fc_outputs_stay_on_manifold():
    rng = np.random.default_rng(5)
    ball_max = 0.0
    residual = 0.0
    calls = 0
    while calls < 1000:
        for model in ("poincare", "lorentz"):
            for activation in ("identity", "tanh"):
                for gyro_bias in (False, True):
                    params = BfcParams(
                        model, -1.0, 4, 3,
                        activation=activation,
                        gyro_bias=gyro_bias,
                        seed=calls,
                    )
                    params.b.data[:] = rng.standard_normal(3) * 2.0
                    raw_bias = getattr(params, "raw_bias", None)
                    if raw_bias is not None:
                        raw_bias.data[:] = rng.standard_normal(3) * 0.5
                    X = _batch(model, -1.0, 4, rng)
                    out = bfc_forward(params, X).data
                    if model == "poincare":
                        ball_max = max(ball_max, float(np.max(np.sum(out * out, axis=1))))
                    else:
                        inner = -out[:, 0] ** 2 + np.sum(out[:, 1:] ** 2, axis=1)
                        residual = max(residual, float(np.max(np.abs(inner + 1.0))))
                    calls += 1
    assert ball_max < 1.0
    assert residual < 1e-9


# -- gate 7: backprop matches finite differences for every layer --------------


def test_backprop_matches_finite_differences_for_all_layers():
    started = time.perf_counter()
    n, m, classes, batch = 6, 5, 4, 8
    worst = {}
    for kind in MLR_KINDS:
        err = 0.0
        for seed in range(5):
            rng = np.random.default_rng(100 + seed)
            labels = rng.integers(classes, size=batch)
            params = make_head(kind, -1.0, n, classes, seed=seed)
            if kind == "euclidean_mlr":
                X = rng.standard_normal((batch, n))
            else:
                X = _batch(params.model, -1.0, n, rng, batch)

            def loss():
                if kind.startswith("bmlr"):
                    logits = bmlr_logits(params, X)
                else:
                    logits = baseline_mlr_logits(params, X)
                return softmax_cross_entropy(logits, labels)

            err = max(err, finite_diff_check(loss, params.leaves()))
        worst[kind] = err

    fc_makers = {
        "mobius_fc": lambda seed: MobiusFcParams(-1.0, n, m, seed=seed),
        "poincare_fc": lambda seed: PoincareFcParams(-1.0, n, m, seed=seed),
        "lorentz_fc": lambda seed: LorentzFcParams(-1.0, n, m, seed=seed),
        "lorentz_tangent_fc": lambda seed: LorentzTangentFcParams(-1.0, n, m, seed=seed),
        "bfc_poincare": lambda seed: BfcParams(
            "poincare", -1.0, n, m, activation="tanh", gyro_bias=True, seed=seed
        ),
        "bfc_lorentz": lambda seed: BfcParams(
            "lorentz", -1.0, n, m, activation="tanh", gyro_bias=True, seed=seed
        ),
    }
    assert set(fc_makers) == set(FC_KINDS) | {"lorentz_tangent_fc"}
    for kind, maker in fc_makers.items():
        err = 0.0
        for seed in range(5):
            rng = np.random.default_rng(200 + seed)
            labels = rng.integers(classes, size=batch)
            params = maker(seed)
            for name in ("b", "b_prime"):
                leaf = getattr(params, name, None)
                if leaf is not None:
                    leaf.data[:] = rng.standard_normal(leaf.data.shape) * 0.5
            raw_bias = getattr(params, "raw_bias", None)
            if raw_bias is not None:
                raw_bias.data[:] = rng.standard_normal(m) * 0.5
            X = _batch(params.model, -1.0, n, rng, batch)
            width = m if params.model == "poincare" else m + 1
            readout = Tensor(rng.standard_normal((width, classes)) * 0.5)

            def loss():
                if kind.startswith("bfc"):
                    out = bfc_forward(params, X)
                else:
                    out = baseline_fc(params, X)
                return softmax_cross_entropy(out @ readout, labels)

            err = max(err, finite_diff_check(loss, params.leaves()))
        worst[kind] = err

    elapsed = time.perf_counter() - started
    bad = {kind: err for kind, err in worst.items() if not err < 1e-5}
    assert not bad, f"gradient mismatch beyond 1e-5: {bad}"
    assert elapsed < 120.0


# -- gate 8: cost polynomials and head sizes ----------------------------------


def test_flop_and_param_counts_match_declared_polynomials():
    mlr_flops = {
        "euclidean_mlr": lambda n, c: c * 2 * n,
        "poincare_hyperplane_mlr": lambda n, c: c * (19 * n + 29),
        "poincare_reparam_mlr": lambda n, c: c * (4 * n + 52),
        "poincare_pseudo_busemann_mlr": lambda n, c: c * (19 * n + 34),
        "lorentz_hyperplane_mlr": lambda n, c: c * (4 * n + 52),
        "bmlr_poincare": lambda n, c: c * (6 * n + 12),
        "bmlr_lorentz": lambda n, c: c * (2 * n + 12),
    }
    mlr_params = {
        "euclidean_mlr": lambda n, c: c * (n + 1),
        "poincare_hyperplane_mlr": lambda n, c: 2 * c * n,
        "poincare_reparam_mlr": lambda n, c: c * (n + 2),
        "poincare_pseudo_busemann_mlr": lambda n, c: 2 * c * n,
        "lorentz_hyperplane_mlr": lambda n, c: c * (n + 1),
        "bmlr_poincare": lambda n, c: c * (n + 2),
        "bmlr_lorentz": lambda n, c: c * (n + 2),
    }
    fc_flops = {
        "mobius_fc": lambda n, m: 2 * n * m + 2 * n + 2 * m + 24,
        "poincare_fc": lambda n, m: 4 * n * m + 71 * m + 4,
        "lorentz_fc": lambda n, m: 2 * n * m + 8 * m + 2 * n + 10,
        "bfc_poincare": lambda n, m: 6 * n * m + 29 * m + 4,
        "bfc_lorentz": lambda n, m: 2 * n * m + 30 * m + 2,
    }
    fc_params = {
        "mobius_fc": lambda n, m: m * n,
        "poincare_fc": lambda n, m: m * (n + 2),
        "lorentz_fc": lambda n, m: m * (n + 1) + m + (n + 1) + 2,
        "lorentz_tangent_fc": lambda n, m: m * n,
        "bfc_poincare": lambda n, m: m * (n + 2),
        "bfc_lorentz": lambda n, m: m * (n + 2),
    }
    assert set(mlr_flops) == set(MLR_KINDS)
    assert set(fc_flops) == set(FC_KINDS)

    for n, c in ((7, 3), (37, 6), (512, 1000)):
        for kind, poly in mlr_flops.items():
            assert flop_count(kind, n, c) == poly(n, c)
        for kind, poly in mlr_params.items():
            assert param_count(kind, n, c) == poly(n, c)
    for n, m in ((7, 3), (37, 9), (512, 16)):
        for kind, poly in fc_flops.items():
            assert flop_count(kind, n, m) == poly(n, m)
        for kind, poly in fc_params.items():
            assert param_count(kind, n, m) == poly(n, m)
    with pytest.raises(UsageError):
        flop_count("lorentz_tangent_fc", 8, 4)

    head_sizes = {
        "euclidean_mlr": 513,
        "lorentz_hyperplane_mlr": 513,
        "poincare_reparam_mlr": 514,
        "bmlr_poincare": 514,
        "bmlr_lorentz": 514,
        "poincare_hyperplane_mlr": 1024,
        "poincare_pseudo_busemann_mlr": 1024,
    }
    for c in (10, 100, 200, 1000):
        for kind, per_class in head_sizes.items():
            assert param_count(kind, 512, c) == per_class * c


# -- gate 9: feasibility discriminant worked cases ----------------------------


def test_feasibility_discriminant_worked_cases():
    expected_infeasible = 2.0 * math.exp(-2.0) - 1.0
    for model in ("poincare", "lorentz"):
        res = bfc_horosphere_feasibility(np.zeros(2), -1.0, model)
        assert abs(res.discriminant - 1.0) < 1e-9
        assert res.feasible

        res2 = bfc_horosphere_feasibility(np.ones(2), -1.0, model)
        assert abs(res2.discriminant - expected_infeasible) < 1e-9
        assert not res2.feasible


# -- gate 10: matmul head beats the per-class loop ----------------------------


def test_matmul_head_beats_per_class_loop():
    batch, classes, n = 128, 1000, 512
    rows = run_bench(n=n, classes_list=(classes,), batch=batch, repeats=11, seed=0)
    by = {(r.kind, r.path): r for r in rows}
    fast = by[("bmlr_lorentz", "matmul")]
    slow = by[("poincare_hyperplane_mlr", "loop")]
    assert fast.median_s is not None
    assert slow.median_s is not None
    assert fast.median_s < slow.median_s
    transient = by[("poincare_hyperplane_mlr", "broadcast")].transient_floats
    assert transient == batch * classes * n


# -- gate 11: end-to-end training ---------------------------------------------


def test_end_to_end_training_reaches_target_accuracy():
    X, y = make_blobs(2, 200, 2, seed=0)
    for kind in ("bmlr_poincare", "bmlr_lorentz"):
        started = time.perf_counter()
        params = make_head(kind, -1.0, 2, 2, seed=0)
        ocfg = OptimConfig(algorithm="adam", lr=1e-2, epochs=200, batch_size=32, seed=0)
        res = train(params, X, y, ocfg, embed_config_for(params, clip_r=1.0))
        elapsed = time.perf_counter() - started
        assert max(h["accuracy"] for h in res.history) >= 0.99
        assert elapsed < 30.0

    for seed in (0, 1, 2):
        X, y = make_tree(5, 300, 2, seed)
        final = {}
        for kind in ("bmlr_lorentz", "euclidean_mlr"):
            params = make_head(kind, -1.0, 2, 5, seed=seed)
            ocfg = OptimConfig(
                algorithm="adam", lr=1e-2, epochs=150, batch_size=32, seed=seed
            )
            res = train(params, X, y, ocfg, embed_config_for(params, clip_r=2.0))
            final[kind] = res.history[-1]["accuracy"]
        assert final["bmlr_lorentz"] >= final["euclidean_mlr"] - 0.02


# -- gate 12: metrics are bitwise deterministic -------------------------------


def test_repeated_runs_produce_identical_metrics(tmp_path):
    data = tmp_path / "blobs.csv"
    assert cli.main([
        "gen", "--kind=blobs", "--classes=3", "--points=120", "--n=2",
        "--seed=7", f"--out={data}",
    ]) == 0
    out_dir = tmp_path / "run"
    args = [
        "train", f"--data={data}", "--head=bmlr_poincare", "--epochs=8",
        "--seed=3", f"--out_dir={out_dir}",
    ]
    assert cli.main(list(args)) == 0
    first = (out_dir / "metrics.jsonl").read_bytes()
    assert cli.main(list(args)) == 0
    second = (out_dir / "metrics.jsonl").read_bytes()
    assert first == second
