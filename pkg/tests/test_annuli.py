import math

import numpy as np
import pytest
import shapely
from hypothesis import given, settings
from hypothesis import strategies as st
from shapely.affinity import translate
from shapely.geometry import Polygon

from pseudocircle.annuli import (
    ChainLevel,
    LiftedCurve,
    Pullback,
    horizontal_curve,
    max_rect_diameter,
    membership,
    membership_xy,
    partition,
    partition_level,
    pullback_curve,
    rasterize,
    trace_chain,
    trace_curve,
)
from pseudocircle.errors import SelfIntersectingFibers, UnresolvedCurve
from pseudocircle.maps import TWO_PI, BlockSchedule, CylinderPoint, MapId, WParams, forward_xy

from oracles import pairwise_diameter, w_inv_line_closed_form

PI = math.pi
M = 512.0


def test_membership_examples():
    s = BlockSchedule.of([(1, 1)])
    assert membership(CylinderPoint(0, 0), s, 1)
    assert membership(CylinderPoint(0, 0), s, 0)
    assert not membership(CylinderPoint(0, 3), s, 0)
    assert not membership(CylinderPoint(PI / 2, 1), s, 1)


def test_T_pullback_of_constant_curve():
    c = pullback_curve(horizontal_curve(2.0), MapId.T)
    assert np.allclose(c.y, 0.25)
    assert c.holonomy == pytest.approx(PI)
    assert c.x[-1] - c.x[0] == pytest.approx(PI)


def test_W_pullback_matches_closed_form():
    c = pullback_curve(horizontal_curve(0.0), MapId.W)
    x, y = w_inv_line_closed_form(c.param)
    assert np.max(np.abs(c.x - x)) < 1e-12
    assert np.max(np.abs(c.y - y)) < 1e-12
    assert c.x[0] == 0 and c.y[0] == 0
    assert c.holonomy == pytest.approx(TWO_PI)
    assert np.max(np.abs(c.y)) <= (M - 1) / M
    assert np.max(np.abs(c.y)) == pytest.approx((M - 1) / M, abs=1e-6)


@pytest.mark.parametrize("tol", [1e-2, 1e-3])
def test_refinement_meets_tolerance(tol):
    c = trace_curve(0.0, [MapId.W, MapId.W, MapId.T], WParams(), tol)
    seg = np.hypot(np.diff(c.x), np.diff(c.y))
    assert seg.max() <= tol
    dx, dy = np.diff(c.x), np.diff(c.y)
    ang = np.abs(np.arctan2(dx[:-1] * dy[1:] - dy[:-1] * dx[1:], dx[:-1] * dx[1:] + dy[:-1] * dy[1:]))
    tiny = np.minimum(seg[:-1], seg[1:]) <= tol * 1e-3
    assert np.all((ang <= 0.2) | tiny)


def test_refinement_budget_raises():
    with pytest.raises(UnresolvedCurve):
        trace_curve(0.0, [MapId.W, MapId.W, MapId.W], WParams(), 1e-3, budget=20_000)


def test_pullback_needs_holonomy():
    c = LiftedCurve(np.array([0.0, 1.0]), np.array([0.0, 0.0]), np.zeros(2), 0.0)
    with pytest.raises(ValueError):
        pullback_curve(c, MapId.T)


def test_trace_chain_T_only():
    ch = trace_chain(BlockSchedule.of([(1, 0)]), 1)
    assert np.allclose(ch[1].upper.y, 0.25)
    assert np.allclose(ch[1].lower.y, -0.25)
    with pytest.raises(ValueError):
        trace_chain(BlockSchedule.of([(1, 0)]), 2)


@pytest.mark.parametrize("blocks", [[(1, 1)], [(3, 3)], [(2, 1), (1, 1)], [(1, 1), (1, 1)]])
def test_holonomy_is_an_exact_symmetry(blocks):
    s = BlockSchedule.of(blocks)
    c = trace_chain(s, len(blocks), tol=1e-2)[len(blocks)].core
    p = np.linspace(0, c.period, 17)
    x0, y0 = c.evaluate(p)
    x1, y1 = c.evaluate(p + c.period)
    assert np.allclose(x1 - x0, c.holonomy, atol=1e-9)
    assert np.allclose(y1, y0, atol=1e-12)
    # the stored period is minimal: half of it is not a symmetry
    xh, yh = c.evaluate(p + c.period / 2)
    assert not np.allclose(yh, y0, atol=1e-6)
    # closing up: turns * holonomy is one full circuit
    assert c.turns * c.holonomy == pytest.approx(TWO_PI)


@pytest.mark.parametrize("m,n", [(1, 1), (3, 3), (2, 0), (0, 2)])
def test_single_block_holonomy(m, n):
    c = trace_chain(BlockSchedule.of([(m, n)]), 1, tol=1e-2)[1].core
    assert c.holonomy == pytest.approx(TWO_PI * 2.0 ** -m)


@pytest.mark.parametrize("blocks", [[(0, 1)], [(1, 1)], [(2, 1), (0, 1)]])
def test_nesting(blocks):
    s = BlockSchedule.of(blocks)
    ch = trace_chain(s, len(blocks), tol=1e-2)
    for k in range(1, len(blocks) + 1):
        for c in (ch[k].upper, ch[k].lower):
            assert np.all(membership_xy(c.x, c.y, s, k - 1))
            if k == 1:
                assert np.all(np.abs(c.y) < 2)
            _, fy = forward_xy(c.x, c.y, s, k)
            assert np.allclose(np.abs(fy), 2, atol=1e-6)
        assert np.all(membership_xy(ch[k].core.x, ch[k].core.y, s, k))


def test_curves_pairwise_disjoint_in_y_order():
    ch = trace_chain(BlockSchedule.of([(1, 1)]), 1)
    L = ch[1]
    # same parameter lies on the same pulled-back fiber, ordered lower < core < upper
    p = L.core.param
    for a, b in [(L.lower, L.core), (L.core, L.upper)]:
        ya = a.evaluate(p)[1]
        yb = b.evaluate(p)[1]
        assert np.all(yb > ya)


def test_raster_examples():
    r0 = rasterize(BlockSchedule.of([(1, 0)]), 0)
    assert abs(r0.fraction - 0.5) <= 0.01
    r1 = rasterize(BlockSchedule.of([(1, 0)]), 1)
    assert abs(r1.fraction - 1 / 16) <= 0.01
    rw = rasterize(BlockSchedule.of([(0, 1)]), 1)
    assert 0.5 / (2 * M) <= rw.fraction <= 2.0 / (2 * M)


def test_raster_bits_match_membership():
    s = BlockSchedule.of([(1, 1)])
    r = rasterize(s, 1, res=(37, 23))
    X, Y = r.centers()
    for i in range(0, 23, 5):
        for j in range(0, 37, 6):
            assert r.bits[i, j] == membership(CylinderPoint.of(X[i, j], Y[i, j]), s, 1)


def _dist_to_curve(px, py, c: LiftedCurve):
    xs = np.concatenate([c.x + k * c.holonomy for k in range(-c.turns - 1, 2 * c.turns + 1)])
    ys = np.tile(c.y, 3 * c.turns + 2)
    dx = np.abs(xs[None, :] - px[:, None]) % TWO_PI
    dx = np.minimum(dx, TWO_PI - dx)
    return np.sqrt(dx ** 2 + (ys[None, :] - py[:, None]) ** 2).min(axis=1)


@pytest.mark.parametrize("rows", [64, 101])
def test_raster_trace_consistency(rows):
    s = BlockSchedule.of([(1, 0)])
    r = rasterize(s, 1, res=(40, rows))
    ch = trace_chain(s, 1)
    X, Y = r.centers()
    dy = r.cell_size()[1]
    set_i, set_j = np.nonzero(r.bits)
    px, py = X[set_i, set_j], Y[set_i, set_j]
    d = np.minimum(_dist_to_curve(px, py, ch[1].upper), _dist_to_curve(px, py, ch[1].lower))
    near = d < max(ch.tol, dy)
    assert near.any()
    for i, j in zip(set_i[near], set_j[near]):
        nb = [r.bits[i + a, j] for a in (-1, 1) if 0 <= i + a < rows]
        assert not all(nb)


def test_partition_depth0():
    ch = trace_chain(BlockSchedule.of([(1, 0)]), 0)
    part = partition(ch, 0, 4)
    assert np.allclose(part.cuts, [0, PI / 2, PI, 1.5 * PI], atol=1e-12)
    for i in range(4):
        x, _ = part.polygon(i)
        assert x.max() - x.min() == pytest.approx(PI / 2, abs=1e-12)
    assert part.index_of_param(np.array([0.0, 1.0, PI, 6.5, -0.1])).tolist() == [0, 0, 2, 4, -1]
    with pytest.raises(ValueError):
        partition(ch, 0, 3)


def _poly(part, i):
    x, y = part.polygon(i)
    return shapely.make_valid(Polygon(np.column_stack([x, y])))


@pytest.mark.parametrize("blocks,N", [([(0, 1)], 8), ([(1, 1)], 6)])
def test_rectangle_adjacency_geometric(blocks, N):
    ch = trace_chain(BlockSchedule.of(blocks), 1)
    part = partition(ch, 1, N)
    polys = [_poly(part, i) for i in range(N)]
    for i in range(N):
        for j in range(i + 1, N):
            hit = any(polys[i].intersects(translate(polys[j], k * TWO_PI)) for k in range(-3, 4))
            assert hit == (j == i + 1 or (i == 0 and j == N - 1)), (i, j)


def test_rectangles_cover_annulus_points():
    s = BlockSchedule.of([(0, 1)])
    ch = trace_chain(s, 1)
    part = partition(ch, 1, 8)
    rng = np.random.default_rng(3)
    X = rng.uniform(0, part.deck_period, 400)
    Y = rng.uniform(-2, 2, 400)
    x, y = part.pullback.pull(X, Y)
    idx = part.locate_xy(x, y)
    assert np.array_equal(idx, part.index_of_param(X))
    assert set(np.mod(idx, 8)) == set(range(8))


def test_diameter_A1():
    ch = trace_chain(BlockSchedule.of([(1, 0)]), 0)
    d4 = max_rect_diameter(partition(ch, 0, 4))
    d8 = max_rect_diameter(partition(ch, 0, 8))
    assert 4.0 <= d4 <= math.sqrt((PI / 2) ** 2 + 16) + 1e-12
    assert d8 <= d4


def test_diameter_matches_pairwise_oracle():
    ch = trace_chain(BlockSchedule.of([(1, 1)]), 1, tol=1e-2)
    part = partition(ch, 1, 6)
    best = 0.0
    for i in range(part.N):
        x, y = part.polygon(i)
        step = max(1, len(x) // 1500)
        best = max(best, pairwise_diameter(x[::step], y[::step]))
    assert max_rect_diameter(part) == pytest.approx(best, rel=1e-2)


def test_diameter_thin_band_tends_to_spacing():
    ch = trace_chain(BlockSchedule.of([(3, 0)]), 1)
    part = partition(ch, 1, 64)
    spacing = TWO_PI / 64
    eps = 2 / 8 ** 3
    d = max_rect_diameter(part)
    assert spacing <= d <= math.hypot(spacing, 2 * eps) + 1e-9


def test_self_intersecting_fibers_detected():
    p = np.array([0.0, PI, np.nextafter(PI, 4), TWO_PI])
    core = LiftedCurve(p, np.array([0.0, 0.0, TWO_PI, TWO_PI]), np.zeros(4), TWO_PI, 0.0, Pullback())
    level = ChainLevel(0, core, core, core, Pullback())
    with pytest.raises(SelfIntersectingFibers):
        partition_level(level, 8)


@settings(max_examples=25, deadline=None)
@given(st.floats(0, 40), st.floats(-2, 2))
def test_locate_matches_fiber_parameter(X, Y):
    ch = trace_chain(BlockSchedule.of([(1, 1)]), 1, tol=1e-2)
    part = partition(ch, 1, 6)
    x, y = part.pullback.pull(np.array([X]), np.array([Y]))
    assert part.locate_xy(x, y)[0] == part.index_of_param(np.array([X]))[0]


def test_unrolled_and_closed():
    c = trace_curve(0.0, [MapId.W, MapId.T, MapId.T], WParams(), 1e-2)
    cl = c.closed()
    assert cl.holonomy == pytest.approx(TWO_PI)
    assert cl.period == pytest.approx(4 * c.period)
    assert len(cl) == 4 * (len(c) - 1) + 1
