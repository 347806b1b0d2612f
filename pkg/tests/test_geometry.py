import json
import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest
import shapely
from hypothesis import given
from hypothesis import strategies as st

from roundoff.errors import DegenerateAngle, DuplicateVertex, NonSimple
from roundoff.geometry import (
    RoundingParams,
    construct_rounded_domain,
    exterior_bisectrix,
    homothety,
    junction_curve,
    junction_points,
    polygon_from_json,
    polygon_validate,
    preset,
    rounding_centers,
    select_default_params,
    write_polyline,
    write_svg,
)

SQ_PARAMS = RoundingParams(0.4, 0.05)


def regular(N, radius=1.0, phase=0.0):
    k = np.arange(N)
    return np.stack([radius * np.cos(phase + 2 * np.pi * k / N), radius * np.sin(phase + 2 * np.pi * k / N)], 1)


@pytest.mark.parametrize("name,N", [("square", 4), ("lshape", 6), ("star5", 10)])
def test_presets_have_consistent_angles(name, N):
    P = preset(name)
    assert P.N == N
    assert abs(P.angles.sum() - (N - 2) * math.pi) < 1e-12
    assert P.R == pytest.approx(P.R0 / 2)


def test_lshape_reentrant_corner(lshape):
    assert lshape.alpha_max == pytest.approx(1.5 * math.pi, abs=1e-14)
    assert lshape.R0 == pytest.approx(1.0)


def test_clockwise_input_is_reoriented():
    P = polygon_validate([(0, 0), (0, 1), (1, 1), (1, 0)])
    assert P.area() > 0
    assert np.allclose(P.angles, math.pi / 2)


def test_triangle_uses_smallest_height():
    P = polygon_validate([(0, 0), (4, 0), (0, 1)])
    assert P.R0 == pytest.approx(4 / math.sqrt(17))


@pytest.mark.parametrize(
    "verts,err",
    [
        ([(0, 0), (1, 0), (1, 0), (0, 1)], DuplicateVertex),
        ([(0, 0), (1, 1), (1, 0), (0, 1)], NonSimple),
        ([(0, 0), (2, 0), (2, 2), (1, -1), (0, 2)], NonSimple),
        ([(0, 0), (1, 0), (0.5, 0), (0.5, 1)], DegenerateAngle),
        ([(0, 0), (2, 0), (1, 0), (1, 1)], DegenerateAngle),
    ],
)
def test_invalid_polygons_rejected(verts, err):
    with pytest.raises(err):
        polygon_validate(verts)


def test_too_few_vertices():
    with pytest.raises(ValueError):
        polygon_validate([(0, 0), (1, 0)])


@given(st.integers(3, 9), st.floats(0, 2 * math.pi), st.floats(0.1, 10))
def test_bisectrix_is_unit_and_bisects_the_exterior_angle(N, phase, radius):
    P = polygon_validate(regular(N, radius, phase))
    for j in range(N):
        b = exterior_bisectrix(P, j)
        assert abs(np.linalg.norm(b) - 1) < 1e-12
        p = P.vertices[j]
        u = (P.vertices[(j - 1) % N] - p) / np.linalg.norm(P.vertices[(j - 1) % N] - p)
        v = (P.vertices[(j + 1) % N] - p) / np.linalg.norm(P.vertices[(j + 1) % N] - p)
        assert abs(np.dot(b, u) - np.dot(b, v)) < 1e-12
        assert np.dot(b, u + v) < 0  # points away from the interior


def test_square_rounding_centers(square):
    # exterior bisectrix at the origin corner is -(1, 1)/sqrt2, offset rho/2
    P = rounding_centers(square, SQ_PARAMS)
    c = 0.2 / math.sqrt(2)
    assert np.allclose(P[0], [-c, -c], atol=1e-15)
    assert np.allclose(P[2], [1 + c, 1 + c], atol=1e-15)
    assert np.allclose(rounding_centers(square, SQ_PARAMS.at(4))[0], [-c / 4, -c / 4], atol=1e-15)


def test_square_junction_points_closed_form(square):
    q, qp = junction_points(square, SQ_PARAMS, 1)
    # circle about (1 + c, -c) of radius 0.2 meets the line x = 1.05
    c = 0.2 / math.sqrt(2)
    y = -c + math.sqrt(0.2**2 - (1.05 - 1 - c) ** 2)
    assert np.allclose(qp, [1.05, y], atol=1e-13)
    assert np.allclose(q, [1 - y, -0.05], atol=1e-13)


@given(st.integers(1, 64))
def test_junction_points_on_circle_and_offset(n):
    P = preset("lshape")
    params = select_default_params(P).at(n)
    centers = rounding_centers(P, params)
    for j in range(P.N):
        for pt in junction_points(P, params, j):
            assert abs(np.linalg.norm(pt - centers[j]) - params.rho / (2 * n)) < 1e-13
            assert abs(float(P.distance(pt[None])[0]) - params.rho_prime / n) < 1e-13


def test_arc_is_tangent_to_edges_at_both_ends(lshape):
    params = select_default_params(lshape)
    for j in range(lshape.N):
        arc = junction_curve(lshape, params, j)
        e_in = lshape.vertices[j] - lshape.vertices[j - 1]
        e_out = lshape.vertices[(j + 1) % lshape.N] - lshape.vertices[j]
        th = arc.tangent_angle(np.array([0.0, 1.0]))
        assert abs(math.sin(th[0] - math.atan2(e_in[1], e_in[0]))) < 1e-12
        assert abs(math.sin(th[1] - math.atan2(e_out[1], e_out[0]))) < 1e-12
        assert np.all(np.abs(arc.curvature(np.array([0.0, 1.0]))) < 1e-12)
        q, qp = junction_points(lshape, params, j)
        assert np.allclose(arc.start, q, atol=1e-10)
        assert np.allclose(arc.end, qp, atol=1e-10)


def test_boundary_is_closed(square):
    d = construct_rounded_domain(square, select_default_params(square).at(3))
    pieces = d.pieces
    for a, b in zip(pieces, pieces[1:] + pieces[:1]):
        assert np.allclose(a.point(1.0), b.point(0.0), atol=1e-10)


@given(st.sampled_from([2, 3, 4, 8, 16, 32]))
def test_arcs_are_homothetic_images(n):
    P = preset("star5")
    params = select_default_params(P)
    d1 = construct_rounded_domain(P, params)
    dn = construct_rounded_domain(P, params.at(n))
    t = np.linspace(0, 1, 17)
    for j in range(P.N):
        img = homothety(P.vertices[j], 1.0 / n, d1.arcs[j].point(t))
        assert np.allclose(dn.arcs[j].point(t), img, atol=1e-13)


def test_family_is_nested_and_contains_polygon(lshape):
    params = select_default_params(lshape)
    prev = None
    areas = []
    for n in (1, 2, 4, 8, 16):
        d = construct_rounded_domain(lshape, params.at(n))
        poly = shapely.Polygon(d.boundary_polygon())
        assert poly.is_valid
        assert poly.contains(shapely.Polygon(lshape.vertices).buffer(-1e-9))
        if prev is not None:
            assert prev.buffer(1e-9).contains(poly)
        prev = poly
        areas.append(d.area())
    assert np.all(np.diff(areas) < 0)
    assert areas[-1] > lshape.area()


def test_green_area_matches_dense_polygon(square):
    d = construct_rounded_domain(square, select_default_params(square))
    dense = shapely.Polygon(d.boundary_polygon(per_arc=4096)).area
    assert d.area() == pytest.approx(dense, rel=1e-6)


def test_square_family_is_diagonally_symmetric(square):
    d = construct_rounded_domain(square, select_default_params(square).at(2))
    pts, _, _ = d.sample(64)
    mirrored = pts[:, ::-1]
    ring = shapely.LinearRing(d.boundary_polygon(per_arc=4096))
    dist = shapely.distance(ring, shapely.points(mirrored))
    assert dist.max() < 1e-7


def test_default_params_smaller_for_reentrant_corner(square, lshape):
    # the 3pi/2 corner needs a smaller offset than the right angles
    sq = select_default_params(square)
    ls = select_default_params(lshape)
    assert (sq.rho, sq.rho_prime) == (0.25, 0.0625)
    assert (ls.rho, ls.rho_prime) == (0.25, 0.03125)


def test_rho_out_of_range(square):
    with pytest.raises(ValueError):
        construct_rounded_domain(square, RoundingParams(0.6, 0.1))
    with pytest.raises(ValueError):
        construct_rounded_domain(square, RoundingParams(0.2, 0.1))


def test_polygon_from_json(tmp_path):
    path = tmp_path / "tri.json"
    path.write_text(json.dumps([[0, 0], [1, 0], [0, 1]]))
    assert polygon_from_json(path).N == 3
    assert polygon_from_json("[[0,0],[1,0],[1,1],[0,1]]").area() == pytest.approx(1.0)


def test_svg_and_polyline_outputs(tmp_path, square):
    params = select_default_params(square)
    doms = [construct_rounded_domain(square, params.at(n)) for n in (1, 2, 4)]
    write_svg(doms, tmp_path / "o.svg")
    root = ET.parse(tmp_path / "o.svg").getroot()
    assert root.tag.endswith("svg")
    assert len([e for e in root.iter() if e.tag.endswith("path")]) == 3
    write_polyline(doms[0], tmp_path / "b.txt", per_piece=8)
    rows = (tmp_path / "b.txt").read_text().split()
    assert len(rows) == 3 * 8 * 8
