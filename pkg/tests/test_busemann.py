import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hbnn.busemann import (
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
from hbnn.errors import UsageError
from hbnn.manifold import distance, make_space, origin, to_lorentz
from hbnn.sampling import random_direction, random_point

KS = (-0.25, -1.0, -4.0)

coords3 = st.lists(st.floats(-2.0, 2.0), min_size=3, max_size=3)


def _project(space, raw):
    from hbnn.manifold import project

    return project(space, np.asarray(raw, dtype=np.float64))


# -- Direction / Horosphere plumbing -----------------------------------------


def test_direction_must_be_unit():
    with pytest.raises(UsageError):
        Direction([1.0, 1.0])
    with pytest.raises(UsageError):
        Direction.unit([0.0, 0.0])
    d = Direction.unit([3.0, 4.0])
    assert np.allclose(d.v, [0.6, 0.8])


def test_horosphere_needs_positive_alpha():
    d = Direction([1.0, 0.0])
    with pytest.raises(UsageError):
        Horosphere(d, 0.0, 1.0)
    h = Horosphere(d, 2.0, 1.0)
    assert h.level == 0.5


def test_dimension_mismatch_rejected():
    space = make_space("poincare", -1.0, 3)
    x = origin(space)
    with pytest.raises(UsageError):
        busemann_poincare(Direction([1.0, 0.0]), x)


# -- closed forms vs the ray definition --------------------------------------


def test_closed_form_matches_ray_oracle(rng):
    for k in KS:
        for model in ("poincare", "lorentz"):
            space = make_space(model, k, 3)
            for _ in range(30):
                v = random_direction(3, rng)
                x = random_point(space, rng, max_dist=2.0)
                closed = busemann(v, x)
                oracle = busemann_ray_oracle(v, x, 20.0)
                assert abs(closed - oracle) < 1e-6


def test_ray_values_decrease_with_t(rng):
    space = make_space("lorentz", -1.0, 3)
    for _ in range(20):
        v = random_direction(3, rng)
        x = random_point(space, rng)
        assert busemann_ray_oracle(v, x, 10.0) >= busemann_ray_oracle(v, x, 20.0) - 1e-12


def test_value_at_origin_is_zero():
    for k in KS:
        for model in ("poincare", "lorentz"):
            space = make_space(model, k, 3)
            assert abs(busemann(Direction([1.0, 0.0, 0.0]), origin(space))) < 1e-14


def test_known_value_on_axis():
    # Ball point r e_1 against direction e_1: B = log((1-r)/(1+r)) at K=-1,
    # which equals -d(0, x) since the point sits on the defining ray.
    space = make_space("poincare", -1.0, 2)
    x = _project(space, [0.5, 0.0])
    got = busemann_poincare(Direction([1.0, 0.0]), x)
    assert math.isclose(got, math.log(0.5 / 1.5), rel_tol=1e-12)
    assert math.isclose(got, -distance(origin(space), x), rel_tol=1e-12)


@given(st.sampled_from(KS), coords3)
def test_models_agree_through_isometry(k, raw):
    space = make_space("poincare", k, 3)
    x = _project(space, raw)
    v = Direction([0.0, 0.6, 0.8])
    assert abs(busemann_poincare(v, x) - busemann_lorentz(v, to_lorentz(x))) < 1e-8


def test_unit_slope_bound(rng):
    # Busemann functions are 1-Lipschitz along the metric.
    for model in ("poincare", "lorentz"):
        space = make_space(model, -1.0, 3)
        for _ in range(30):
            v = random_direction(3, rng)
            x = random_point(space, rng)
            y = random_point(space, rng)
            gap = abs(busemann(v, x) - busemann(v, y))
            assert gap <= distance(x, y) + 1e-9


# -- horospheres -------------------------------------------------------------


def test_sampled_points_sit_on_level(rng):
    for model in ("poincare", "lorentz"):
        h = Horosphere(random_direction(3, rng), 1.7, 0.4)
        pts = horosphere_sample(make_space(model, -1.0, 3), h, count=12, seed=3)
        for p in pts:
            assert abs(busemann(h.direction, p) - h.level) < 1e-10


def test_point_to_horosphere_ignores_parameter_scaling(rng):
    space = make_space("poincare", -1.0, 3)
    d = random_direction(3, rng)
    x = random_point(space, rng)
    a = point_to_horosphere(x, Horosphere(d, 1.3, 0.7))
    b = point_to_horosphere(x, Horosphere(d, 13.0, 7.0))
    assert abs(a - b) < 1e-10


def test_nested_horosphere_gap_equals_level_gap(rng):
    for model in ("poincare", "lorentz"):
        space = make_space(model, -1.0, 3)
        for _ in range(4):
            v = random_direction(3, rng)
            t1, t2 = rng.uniform(-2.0, 2.0, size=2)
            report = horosphere_distance_check(space, Horosphere(v, 1.0, t1), Horosphere(v, 1.0, t2), samples=15, seed=7)
            assert report.passed
            assert abs(report.estimate - report.expected) < 1e-3


# -- feasibility discriminant ------------------------------------------------


def test_feasibility_worked_cases():
    r = bfc_horosphere_feasibility(np.zeros(2), -1.0, "poincare")
    assert abs(r.discriminant - 1.0) < 1e-9
    assert r.feasible

    r = bfc_horosphere_feasibility(np.array([1.0, 1.0]), -1.0, "poincare")
    assert abs(r.discriminant - (2.0 * math.exp(-2.0) - 1.0)) < 1e-9
    assert not r.feasible

    r = bfc_horosphere_feasibility(np.array([0.7]), -1.0, "lorentz")
    assert r.feasible


def test_feasibility_matches_across_models():
    u = np.array([0.2, -0.1, 0.3])
    a = bfc_horosphere_feasibility(u, -1.0, "poincare")
    b = bfc_horosphere_feasibility(u, -1.0, "lorentz")
    assert a.feasible == b.feasible
