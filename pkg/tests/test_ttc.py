import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from blindspot.errors import ParallelFieldError, ShapeMismatchError, TooFewVectorsError
from blindspot.flow import FlowField, SolverParams, solve_horn_schunck
from blindspot.synth import BackgroundSpec, ObjectSpec, SceneSpec, render_sequence
from blindspot.ttc import (
    FocusOfExpansion,
    TTCParams,
    TTCProfile,
    column_ttc,
    estimate_foe,
    foe_from_vectors,
    heading_angle,
    region_mask,
)
from blindspot.tracking import Box


def radial(w=80, h=60, fx=40.0, fy=30.0, k=1.0):
    ys, xs = np.mgrid[0:h, 0:w].astype(float)
    return FlowField(k * (xs - fx), k * (ys - fy))


# ---------------------------------------------------------------- FOE


def test_radial_foe():
    foe = estimate_foe(radial())
    assert abs(foe.x - 40) < 1e-9 and abs(foe.y - 30) < 1e-9
    assert foe.residual < 1e-9


def test_uniform_translation_is_parallel():
    with pytest.raises(ParallelFieldError):
        estimate_foe(FlowField(np.ones((20, 30)), np.full((20, 30), 0.5)))


def test_too_few_vectors():
    u = np.zeros((20, 20))
    u[0, :5] = 1.0
    with pytest.raises(TooFewVectorsError):
        estimate_foe(FlowField(u, np.zeros_like(u)))


def test_noisy_radial_foe():
    rng = np.random.default_rng(11)
    f = radial()
    noisy = FlowField(f.u + rng.normal(0, 0.1, f.u.shape), f.v + rng.normal(0, 0.1, f.v.shape))
    foe = estimate_foe(noisy)
    assert math.hypot(foe.x - 40, foe.y - 30) <= 3


def test_foe_restricted_to_region():
    f = radial()
    m = np.zeros(f.shape, bool)
    m[35:50, 50:70] = True
    foe = estimate_foe(f, region=m)
    assert abs(foe.x - 40) < 1e-9 and abs(foe.y - 30) < 1e-9
    foe_box = estimate_foe(f, region=Box(60, 42, 10, 7))
    assert abs(foe_box.x - 40) < 1e-9


def test_region_mask_forms():
    assert region_mask((3, 4), None).all()
    m = region_mask((10, 10), Box(5, 5, 2, 1))
    assert m.sum() == 5 * 3
    with pytest.raises(ShapeMismatchError):
        region_mask((3, 4), np.ones((4, 3), bool))


@settings(max_examples=40, deadline=None)
@given(
    st.floats(-50, 50), st.floats(-50, 50),
    st.floats(-30, 30), st.floats(-30, 30),
    st.integers(0, 2**16),
)
def test_foe_equivariance(fx, fy, dx, dy, seed):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-60, 60, 30)
    y = rng.uniform(-60, 60, 30)
    k = rng.uniform(0.05, 0.5, 30)
    u, v = k * (x - fx), k * (y - fy)
    assume(np.all(np.hypot(u, v) > 1e-3))
    a = foe_from_vectors(x, y, u, v)
    b = foe_from_vectors(x + dx, y + dy, u, v)
    assert b.x == pytest.approx(a.x + dx, abs=1e-6)
    assert b.y == pytest.approx(a.y + dy, abs=1e-6)


# ---------------------------------------------------------------- column TTC


@pytest.mark.parametrize("k", [1 / 30, 0.1, 0.5])
def test_expansion_exact(k):
    f = radial(k=k)
    prof = column_ttc(f, FocusOfExpansion(40, 30, 0), 16)
    assert prof.n_columns == 5
    assert all(abs(v - 1 / k) < 1e-6 for v in prof.values)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.01, 2.0), st.floats(5, 75), st.floats(5, 55), st.integers(1, 40))
def test_expansion_exact_property(k, fx, fy, cw):
    prof = column_ttc(radial(fx=fx, fy=fy, k=k), FocusOfExpansion(fx, fy, 0), cw)
    assert prof.n_columns == math.ceil(80 / cw)
    assert all(math.isinf(v) or abs(v - 1 / k) < 1e-6 for v in prof.values)


def test_zero_radial_velocity_is_inf():
    ys, xs = np.mgrid[0:60, 0:80].astype(float)
    rot = FlowField(-(ys - 30), xs - 40)  # pure rotation about the FOE
    prof = column_ttc(rot, FocusOfExpansion(40, 30, 0), 16)
    assert all(math.isinf(v) for v in prof.values)
    still = FlowField(np.zeros((60, 80)), np.zeros((60, 80)))
    assert all(math.isinf(v) for v in column_ttc(still, FocusOfExpansion(40, 30, 0)).values)


def test_column_median_not_mean():
    # only the middle column expands; one outlier sample should not move the median
    ys, xs = np.mgrid[0:1, 0:48].astype(float)
    uu = np.where((xs >= 16) & (xs < 32), 0.1 * (xs - 0.0), 0.0)
    uu[0, 20] = 100.0
    prof = column_ttc(FlowField(uu, np.zeros_like(uu)), FocusOfExpansion(0, 0, 0), 16)
    assert math.isinf(prof.values[0]) and math.isinf(prof.values[2])
    assert prof.values[1] == pytest.approx(10.0)


def test_scene_closing_in_30_frames():
    # flat gray road, still camera, one textured object widening by 1/30 of its width per frame
    spec = SceneSpec(
        "closing", 160, 120, 2, 0, 0.0, background=BackgroundSpec(style="flat"),
        objects=(ObjectSpec("plain", x=80, y=60, width=60, height=40, growth_w=2.0, growth_h=4 / 3),),
    )
    seq, truth = render_sequence(spec)
    assert truth[0].min_ttc == pytest.approx(30.0)
    flow = solve_horn_schunck(seq[0], seq[1], SolverParams(max_iters=400))
    x0, y0, x1, y1 = truth[0].objects[0].bbox
    inner = np.zeros(flow.shape, bool)
    inner[y0 + 2 : y1 - 1, x0 + 2 : x1 - 1] = True
    foe = estimate_foe(flow, 0.25, inner)
    assert math.hypot(foe.x - 80, foe.y - 60) < 3
    ttc = column_ttc(flow, foe, 16, inner, 0.25).minimum()
    assert abs(ttc - 30) <= 0.2 * 30


def test_profile_csv_and_seconds():
    p = TTCProfile((30.0, math.inf), 16)
    assert p.to_csv() == "column_index,ttc_frames\n0,30.0\n1,inf\n"
    assert p.in_seconds(1 / 30)[0] == pytest.approx(1.0)
    assert p.minimum() == 30.0


# ---------------------------------------------------------------- heading


def ang(values, max_steer=0.35):
    return heading_angle(TTCProfile(tuple(values), 16), max_steer)


def test_heading_examples():
    assert ang([20.0] * 5).angle == 0.0
    assert ang([50.0, 10, 10, 10, 10]).angle == pytest.approx(-0.35)
    assert ang([math.inf] * 5).angle == 0.0
    # low column right of centre, others infinite: tie among infinities goes to the centre
    assert ang([math.inf, math.inf, math.inf, 5.0, math.inf]).angle == 0.0
    # with finite values elsewhere the heading moves away from the low column
    a = ang([30.0, 25, 20, 5, 12])
    assert a.column == 0 and a.angle < 0


# ten hand-enumerated profiles: (values, chosen column, angle)
HAND = [
    ([40, 10, 10, 10, 10], 0, -0.35),
    ([10, 10, 10, 10, 40], 4, 0.35),
    ([10, 40, 10, 10, 10], 1, -0.175),
    ([10, 10, 10, 40, 10], 3, 0.175),
    ([10, 10, 40, 10, 10], 2, 0.0),
    ([40, 10, 10, 10, 40], 0, -0.35),
    ([10, 40, 10, 40, 10], 1, -0.175),
    ([5, 9, 7], 1, 0.0),
    ([9, 5, 7], 0, -0.35),
    ([7, 5, 9], 2, 0.35),
]


@pytest.mark.parametrize("values,column,angle", HAND)
def test_heading_hand_profiles(values, column, angle):
    h = ang([float(v) for v in values])
    assert h.column == column
    assert h.angle == pytest.approx(angle, abs=1e-12)
    assert np.sign(h.angle) == np.sign(angle)


def test_heading_even_columns_tie():
    # no exact centre column: the left of the two middle columns wins ties
    h = ang([10.0, 10.0, 10.0, 10.0])
    assert h.column == 1
    assert h.angle == pytest.approx(-0.35 / 3)


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.one_of(st.floats(0.1, 1e3), st.just(math.inf)), min_size=1, max_size=12),
    st.floats(0.01, 100),
)
def test_heading_scale_invariant(values, c):
    a = ang(values)
    b = ang([v * c for v in values])
    assert a.column == b.column and a.angle == b.angle
    assert abs(a.angle) <= 0.35


def test_single_column_is_straight():
    assert ang([12.0]).angle == 0.0


def test_ttc_params_validate():
    with pytest.raises(ValueError):
        TTCParams(column_width=0)
    with pytest.raises(ValueError):
        TTCParams(max_steer=0)


def test_avoid_rule():
    vals = (30.0, 25.0, 20.0, 5.0, 12.0)
    h = heading_angle(TTCProfile(vals, 16), 0.35, rule="avoid")
    assert h.column == 3 and h.angle == pytest.approx(-0.175)
    assert heading_angle(TTCProfile((10.0,) * 5, 16), rule="avoid").angle == 0.0
    assert heading_angle(TTCProfile((math.inf,) * 3, 16), rule="avoid").angle == 0.0
    with pytest.raises(ValueError):
        heading_angle(TTCProfile(vals, 16), rule="sideways")
    with pytest.raises(ValueError):
        TTCParams(heading_rule="sideways")
