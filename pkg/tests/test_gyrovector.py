import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hbnn.errors import UsageError
from hbnn.gyrovector import (
    gyration,
    gyro_add,
    gyro_inverse,
    gyro_scalar,
    lorentz_gyro_add,
    mobius_add,
    mobius_scalar,
)
from hbnn.manifold import (
    LorentzModel,
    distance,
    exp_map,
    log_map,
    make_space,
    origin,
    parallel_transport,
    tangent,
    to_lorentz,
)
from hbnn.sampling import random_point

KS = (-0.25, -1.0)
DIMS = (2, 8)

coords = st.lists(st.floats(-1.5, 1.5), min_size=2, max_size=2)
scalars = st.floats(-3.0, 3.0)


def _from_tangent(space, raw):
    # Bounded hyperbolic distance regardless of model: d(origin, point) = |raw|.
    e = origin(space)
    arr = np.asarray(raw, dtype=np.float64)
    if isinstance(space, LorentzModel):
        arr = np.concatenate(([0.0], arr))
    return exp_map(e, tangent(e, arr))


def _points(model, k, n, rng, count):
    space = make_space(model, k, n)
    return [random_point(space, rng, max_dist=2.0) for _ in range(count)]


def _gap(x, y):
    return float(np.max(np.abs(x.coords - y.coords)))


# -- gyrogroup axioms --------------------------------------------------------


def test_left_identity(rng):
    for model in ("poincare", "lorentz"):
        for k in KS:
            for n in DIMS:
                e = origin(make_space(model, k, n))
                for x in _points(model, k, n, rng, 25):
                    assert _gap(gyro_add(e, x), x) < 1e-8


def test_left_inverse(rng):
    for model in ("poincare", "lorentz"):
        for k in KS:
            for n in DIMS:
                e = origin(make_space(model, k, n))
                for x in _points(model, k, n, rng, 25):
                    assert _gap(gyro_add(gyro_inverse(x), x), e) < 1e-8


def test_left_gyroassociativity(rng):
    for model in ("poincare", "lorentz"):
        for k in KS:
            for x, y, z in zip(*(_points(model, k, 3, rng, 20) for _ in range(3))):
                lhs = gyro_add(x, gyro_add(y, z))
                rhs = gyro_add(gyro_add(x, y), gyration(x, y, z))
                assert _gap(lhs, rhs) < 1e-8


def test_left_loop_property(rng):
    for model in ("poincare", "lorentz"):
        for k in KS:
            for x, y, z in zip(*(_points(model, k, 3, rng, 20) for _ in range(3))):
                lhs = gyration(x, y, z)
                rhs = gyration(gyro_add(x, y), y, z)
                assert _gap(lhs, rhs) < 1e-8


def test_gyrocommutativity(rng):
    for model in ("poincare", "lorentz"):
        for k in KS:
            for x, y in zip(*(_points(model, k, 4, rng, 25) for _ in range(2))):
                lhs = gyro_add(x, y)
                rhs = gyration(x, y, gyro_add(y, x))
                assert _gap(lhs, rhs) < 1e-8


def test_gyration_preserves_distance(rng):
    for model in ("poincare", "lorentz"):
        a, b, x, y = (_points(model, -1.0, 3, rng, 20) for _ in range(4))
        for ai, bi, xi, yi in zip(a, b, x, y):
            d0 = distance(xi, yi)
            d1 = distance(gyration(ai, bi, xi), gyration(ai, bi, yi))
            assert abs(d0 - d1) < 1e-8


# -- scalar multiplication axioms --------------------------------------------


@given(scalars, scalars, coords)
def test_scalar_distributes(s, t, raw):
    for model in ("poincare", "lorentz"):
        space = make_space(model, -1.0, 2)
        x = _from_tangent(space, raw)
        lhs = gyro_scalar(s + t, x)
        rhs = gyro_add(gyro_scalar(s, x), gyro_scalar(t, x))
        assert _gap(lhs, rhs) < 1e-7


@given(scalars, scalars, coords)
def test_scalar_association(s, t, raw):
    for model in ("poincare", "lorentz"):
        space = make_space(model, -1.0, 2)
        x = _from_tangent(space, raw)
        lhs = gyro_scalar(s * t, x)
        rhs = gyro_scalar(s, gyro_scalar(t, x))
        assert _gap(lhs, rhs) < 1e-7


@given(scalars, coords)
def test_scaling_keeps_direction(t, raw):
    space = make_space("poincare", -1.0, 2)
    x = _from_tangent(space, raw)
    nx = float(np.linalg.norm(x.coords))
    if nx < 1e-6 or abs(t) < 1e-6:
        return
    y = gyro_scalar(t, x)
    ny = float(np.linalg.norm(y.coords))
    if ny < 1e-12:
        return
    lhs = y.coords / ny
    rhs = np.sign(t) * x.coords / nx
    assert float(np.max(np.abs(lhs - rhs))) < 1e-7


def test_double_equals_self_addition(rng):
    for model in ("poincare", "lorentz"):
        for x in _points(model, -1.0, 3, rng, 30):
            assert _gap(gyro_scalar(2.0, x), gyro_add(x, x)) < 1e-7


def test_mobius_scalar_two_matches_self_add(rng):
    space = make_space("poincare", -1.0, 4)
    for _ in range(30):
        x = random_point(space, rng)
        assert _gap(mobius_scalar(2.0, x), mobius_add(x, x)) < 1e-7


# -- model compatibility -----------------------------------------------------


def test_isometry_commutes_with_addition(rng):
    for k in KS:
        space = make_space("poincare", k, 3)
        for _ in range(25):
            x = random_point(space, rng)
            y = random_point(space, rng)
            direct = to_lorentz(mobius_add(x, y))
            lifted = lorentz_gyro_add(to_lorentz(x), to_lorentz(y))
            assert _gap(direct, lifted) < 1e-7


def test_hyperboloid_addition_matches_transport_form(rng):
    space = make_space("lorentz", -1.0, 3)
    e = origin(space)
    for _ in range(25):
        x = random_point(space, rng)
        y = random_point(space, rng)
        composed = exp_map(x, parallel_transport(e, x, log_map(e, y)))
        assert _gap(lorentz_gyro_add(x, y), composed) < 1e-7


def test_addition_with_origin_branches():
    space = make_space("lorentz", -1.0, 2)
    e = origin(space)
    x = exp_map(e, tangent(e, [0.0, 0.7, -0.2]))
    assert _gap(lorentz_gyro_add(e, x), x) == 0.0
    assert _gap(lorentz_gyro_add(x, e), x) == 0.0


def test_mixed_models_rejected(rng):
    ball = make_space("poincare", -1.0, 2)
    hyp = make_space("lorentz", -1.0, 2)
    with pytest.raises(UsageError):
        gyro_add(random_point(ball, rng), random_point(hyp, rng))
