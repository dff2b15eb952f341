import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pitchplan.geometry import Containment, GeometryError, point_in_polygon
from pitchplan.obstacles import (
    ActiveRegion, Obstacle, active_set, polygonize, region_contains_or_intersects,
)


def test_square_proxy_vertices():
    p = polygonize(Obstacle((0, 0), 1.0), 4, 0.0)
    assert np.allclose(p.vertices[0], (math.sqrt(2), 0.0))
    assert np.allclose(np.hypot(*p.vertices.T), math.sqrt(2))


def test_many_sides_approach_the_circle():
    for n, tol in ((64, 2e-3), (512, 2e-5), (4096, 3e-7)):
        p = polygonize(Obstacle((0, 0), 1.0), n)
        assert abs(np.hypot(*p.vertices.T).max() - 1.0) < tol


def test_eighteen_gon_contains_sampled_disk():
    obs = Obstacle((1.0, -2.0), 0.5)
    p = polygonize(obs, 18)
    assert np.allclose(np.hypot(*(p.vertices - (1.0, -2.0)).T), 0.5 / math.cos(math.pi / 18))
    rng = np.random.default_rng(0)
    r = 0.5 * np.sqrt(rng.uniform(0, 1, 10_000))
    a = rng.uniform(-math.pi, math.pi, 10_000)
    pts = np.column_stack((1.0 + r * np.cos(a), -2.0 + r * np.sin(a)))
    assert all(point_in_polygon(q, p.polygon) is not Containment.OUTSIDE for q in pts)


def test_bad_side_count():
    with pytest.raises(GeometryError):
        polygonize(Obstacle((0, 0), 1.0), 2)


def test_obstacle_radius_must_be_positive():
    with pytest.raises(GeometryError):
        Obstacle((0, 0), 0.0)


@given(st.integers(3, 40), st.floats(0.05, 5), st.floats(-math.pi, math.pi),
       st.floats(-10, 10), st.floats(-10, 10))
def test_polygon_edges_are_tangent_to_disk(n, r, phase, cx, cy):
    p = polygonize(Obstacle((cx, cy), r), n, phase)
    # distance from the center to every edge line is exactly the radius
    d = p.polygon.offsets - p.polygon.normals @ np.array([cx, cy])
    assert np.allclose(d, r, rtol=1e-9, atol=1e-12)


# --- active set -------------------------------------------------------------

S, G = (0.0, 0.0), (10.0, 0.0)


def polys(*specs, n=8):
    return [polygonize(Obstacle(c, r, i), n) for i, (c, r) in enumerate(specs)]


def test_far_obstacle_is_inactive():
    act, region = active_set(polys(((5, 6), 0.5)), S, G)
    assert act == []
    assert (region.s_lo, region.s_hi, region.w_lo, region.w_hi) == (0.0, 10.0, 0.0, 0.0)


def test_straddling_obstacle_spans_region():
    ps = polys(((5, 0.2), 1.0))
    act, region = active_set(ps, S, G)
    assert act == ps
    v = ps[0].vertices
    assert region.w_lo == pytest.approx(v[:, 1].min())
    assert region.w_hi == pytest.approx(v[:, 1].max())
    assert (region.s_lo, region.s_hi) == (0.0, 10.0)


def test_chain_pulls_in_overlapping_neighbour_only():
    A = ((5, 0), 1.0)
    B = ((3, 1.5), 0.7)  # not on the S-G line but inside A's band
    C = ((5, 5), 0.5)
    ps = polys(A, B, C)
    act, _ = active_set(ps, S, G)
    assert [p.source.id for p in act] == [0, 1]


def test_region_predicate_examples():
    region = ActiveRegion((0.0, 0.0), (1.0, 0.0), 0.0, 10.0, -1.0, 1.0)
    inside = polygonize(Obstacle((5, 0), 0.3), 6)
    outside = polygonize(Obstacle((5, 5), 0.3), 6)
    crossing = polygonize(Obstacle((5, 1.2), 0.5), 6)
    assert region_contains_or_intersects(region, inside)
    assert not region_contains_or_intersects(region, outside)
    assert region_contains_or_intersects(region, crossing)
    # an edge slicing through a region corner with no vertex inside
    corner = polygonize(Obstacle((10.45, 1.45), 0.5), 4, math.pi / 4)
    assert region_contains_or_intersects(region, corner)


def _region_touches(region: ActiveRegion, poly, samples=400) -> bool:
    # dense sampling of the polygon boundary, tested against the rectangle
    v = poly.vertices
    w = np.roll(v, -1, axis=0)
    t = np.linspace(0, 1, samples)[:, None, None]
    pts = (v[None] + t * (w - v)[None]).reshape(-1, 2)
    sw = region.to_frame(pts)
    return bool(np.any((sw[:, 0] >= region.s_lo) & (sw[:, 0] <= region.s_hi)
                       & (sw[:, 1] >= region.w_lo) & (sw[:, 1] <= region.w_hi)))


def _oracle_active(ps, S, G):
    """Least fixed point, computed by naive iteration with an independent region test."""
    S, G = np.asarray(S, float), np.asarray(G, float)
    u = (G - S) / np.linalg.norm(G - S)
    nrm = np.array([-u[1], u[0]])
    L = np.linalg.norm(G - S)
    seg = S + np.linspace(0, 1, 4001)[:, None] * (G - S)
    active = {i for i, p in enumerate(ps)
              if np.any(np.all(seg @ p.polygon.normals.T - p.polygon.offsets < -1e-9, axis=1))}
    while True:
        if active:
            sw = np.vstack([np.column_stack(((ps[i].vertices - S) @ u, (ps[i].vertices - S) @ nrm))
                            for i in sorted(active)])
            region = ActiveRegion(tuple(S), tuple(u), min(0, sw[:, 0].min()), max(L, sw[:, 0].max()),
                                  min(0, sw[:, 1].min()), max(0, sw[:, 1].max()))
        else:
            region = ActiveRegion(tuple(S), tuple(u), 0.0, L, 0.0, 0.0)
        new = {i for i, p in enumerate(ps) if i not in active and _region_touches(region, p)}
        if not new:
            return sorted(active)
        active |= new


def test_active_set_matches_fixed_point_oracle():
    rng = np.random.default_rng(5)
    for _ in range(60):
        n = int(rng.integers(1, 9))
        ps = [polygonize(Obstacle(rng.uniform((1, -3), (13, 3)), rng.uniform(0.2, 0.8), i),
                         int(rng.choice([4, 6, 18])), rng.uniform(0, 1)) for i in range(n)]
        S, G = (0.0, rng.uniform(-1, 1)), (14.0, rng.uniform(-1, 1))
        act, region = active_set(ps, S, G)
        assert [p.source.id for p in act] == _oracle_active(ps, S, G)
        # fixed point: nothing left out touches the final region
        ids = {p.source.id for p in act}
        assert not any(region_contains_or_intersects(region, p) for p in ps if p.source.id not in ids)


def test_coincident_endpoints_rejected():
    with pytest.raises(GeometryError):
        active_set([], (1, 1), (1, 1))
