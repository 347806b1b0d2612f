import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from roundoff.geometry import CurveDomain, construct_rounded_domain, preset, select_default_params
from roundoff.mesh import (
    SizingField,
    discretize_boundary,
    mesh_domain,
    mesh_quality,
    read_mesh,
    write_mesh,
)
from roundoff.weights import Curve, WeightFunction


def family(name, n):
    P = preset(name)
    d = construct_rounded_domain(P, select_default_params(P).at(n))
    return d, WeightFunction.for_domain(d)


def test_sizing_field_validation():
    with pytest.raises(ValueError):
        SizingField(0.0)
    with pytest.raises(ValueError):
        SizingField(0.1, 0.2)
    with pytest.raises(ValueError):
        SizingField(0.1, beta=0.0)


def test_sizing_follows_weight():
    d, w = family("square", 4)
    s = SizingField(0.1, 0.0, 0.5, w)
    near = d.punctures[0] + np.array([0.01, 0.0])
    assert s(near[None])[0] == pytest.approx(0.5 * w(near[None])[0])
    assert s(np.array([[0.5, 0.5]]))[0] == pytest.approx(0.5 / 12)
    assert SizingField(0.1)(np.zeros((3, 2))).tolist() == [0.1] * 3


def test_boundary_spacing_respects_size():
    d, w = family("lshape", 2)
    s = SizingField(0.1, 0.0, 0.5, w)
    poly = discretize_boundary(d, s)
    P = poly.points
    Q = np.roll(P, -1, axis=0)
    h = s(0.5 * (P + Q))
    assert np.all(np.linalg.norm(Q - P, axis=1) <= 1.1 * h)


@settings(max_examples=8)
@given(st.sampled_from(["square", "lshape", "star5"]), st.sampled_from([1, 3, 8]), st.floats(0.05, 0.3))
def test_mesh_quality_and_boundary_fidelity(name, n, h_max):
    d, w = family(name, n)
    m = mesh_domain(d, SizingField(h_max, 0.0, 0.5, w))
    q = mesh_quality(m)
    assert q["min_angle"] >= 20.0 - 1e-9
    assert np.all(m.areas() > 0)
    for k in m.boundary_nodes:
        pid, t = m.boundary_param[int(k)]
        assert np.allclose(d.pieces[pid].point(np.array([t]))[0], m.nodes[k], rtol=0, atol=1e-14)


def test_mesh_area_converges_to_domain_area():
    d, w = family("square", 2)
    errs = []
    for h, beta in ((0.1, 0.5), (0.05, 0.25)):
        m = mesh_domain(d, SizingField(h, 0.0, beta, w))
        errs.append(abs(m.areas().sum() - d.area()))
    assert errs[1] < errs[0]
    assert errs[1] < 1e-3


def test_elements_meet_area_targets():
    d, w = family("lshape", 4)
    s = SizingField(0.1, 0.0, 0.3, w)
    m = mesh_domain(d, s)
    P = m.nodes[m.vertices]
    target = 0.8 * math.sqrt(3) / 4 * s(P.mean(axis=1)) ** 2
    assert np.all(m.areas() <= target * (1 + 1e-9))


def test_p2_boundary_midpoints_on_curve():
    d, w = family("star5", 2)
    m = mesh_domain(d, SizingField(0.1, 0.0, 0.5, w), order=2)
    assert m.order == 2 and m.triangles.shape[1] == 6
    for k in m.boundary_nodes:
        pid, t = m.boundary_param[int(k)]
        assert np.allclose(d.pieces[pid].point(np.array([t]))[0], m.nodes[k], atol=1e-14)
    # interior midpoints are edge midpoints
    T = m.triangles
    inner = ~np.isin(T[:, 3], m.boundary_nodes)
    assert np.allclose(m.nodes[T[inner, 3]], 0.5 * (m.nodes[T[inner, 0]] + m.nodes[T[inner, 1]]))


def test_disk_and_polygon_meshes():
    disk = CurveDomain((Curve.circle([0, 0], 0.5),), R=1.0)
    m = mesh_domain(disk, SizingField(0.05))
    assert m.areas().sum() == pytest.approx(math.pi / 4, rel=1e-2)
    sq = preset("square")
    m = mesh_domain(sq, SizingField(0.1))
    assert m.areas().sum() == pytest.approx(1.0, abs=1e-14)


def test_mesh_roundtrip(tmp_path):
    d, w = family("square", 1)
    m = mesh_domain(d, SizingField(0.2, 0.0, 0.5, w), order=2)
    write_mesh(m, tmp_path / "m.txt")
    header = (tmp_path / "m.txt").read_text().splitlines()[0].split()
    assert header == [str(m.n_nodes), str(m.n_elements), "2"]
    back = read_mesh(tmp_path / "m.txt")
    assert np.array_equal(back.nodes, m.nodes)
    assert np.array_equal(back.triangles, m.triangles)
    assert set(back.boundary_nodes.tolist()) == set(m.boundary_nodes.tolist())


def test_mesh_is_deterministic():
    d, w = family("lshape", 2)
    a = mesh_domain(d, SizingField(0.1, 0.0, 0.5, w))
    b = mesh_domain(d, SizingField(0.1, 0.0, 0.5, w))
    assert np.array_equal(a.nodes, b.nodes) and np.array_equal(a.triangles, b.triangles)
