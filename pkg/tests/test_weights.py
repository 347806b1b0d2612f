import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from roundoff.errors import AtPuncture, NegativeT, NonPositiveT
from roundoff.geometry import construct_rounded_domain, homothety, preset, select_default_params
from roundoff.weights import (
    ConstantWeight,
    Curve,
    EtaProfile,
    WeightFunction,
    admissibility_scan,
    conformal_curvature,
    curvature_profile,
    eta_eval,
    geodesic_length,
    leibniz_bound,
    log_derivative_A,
    weight_eval,
)

R = 1.0
ETA = EtaProfile(R)
W0 = WeightFunction(ETA, [(0.0, 0.0)])


def _S(u):
    if u <= 0:
        return mpmath.mpf(0)
    if u >= 1:
        return mpmath.mpf(1)
    a = mpmath.exp(-1 / u)
    return a / (a + mpmath.exp(-1 / (1 - u)))


def eta_oracle(t, R=1.0):
    mpmath.mp.dps = 30
    t0, w = 7 * R / 48, R / 24
    slope = lambda tau: 1 - _S((tau - t0) / w)  # noqa: E731
    pts = [0, t0] + [p for p in (t0 + w / 2, t0 + w) if p < t] + [t]
    pts = sorted(set(p for p in pts if p <= t))
    return float(mpmath.quad(slope, pts))


@pytest.mark.parametrize("t", [0.05, 0.15, 1 / 6, 0.17, 0.18, 0.3])
def test_eta_matches_independent_quadrature(t):
    assert float(ETA.value(np.array(t))) == pytest.approx(eta_oracle(t), abs=1e-13)


def test_eta_landmarks():
    t = np.linspace(0, 7 / 48, 20)
    assert np.array_equal(ETA.value(t), t)
    assert float(ETA.value(np.array(0.2))) == pytest.approx(1 / 6, abs=1e-14)
    far = np.linspace(3 / 16, 2, 10)
    assert np.allclose(ETA.value(far), 1 / 6, atol=1e-14)
    assert np.all(eta_eval(ETA, far, 1) == 0.0)


@given(st.floats(0.13, 0.2))
def test_eta_derivatives_against_step(t):
    mpmath.mp.dps = 30
    u = (t - ETA.t0) / ETA.w
    assert float(eta_eval(ETA, np.array(t), 1)) == pytest.approx(1 - float(_S(u)), abs=1e-13)
    d2 = -float(mpmath.diff(_S, u)) / ETA.w if 0 < u < 1 else 0.0
    assert float(eta_eval(ETA, np.array(t), 2)) == pytest.approx(d2, abs=1e-9)


@given(st.floats(0.01, 2.0), st.floats(0.01, 0.5))
def test_eta_scales_with_R(t, Rs):
    # eta_R(t) = R eta_1(t / R)
    a = float(EtaProfile(Rs).value(np.array(t)))
    b = Rs * float(ETA.value(np.array(t / Rs)))
    assert a == pytest.approx(b, rel=1e-12, abs=1e-15)


def test_eta_domain_errors():
    with pytest.raises(NegativeT):
        eta_eval(ETA, np.array(-0.1))
    with pytest.raises(NonPositiveT):
        log_derivative_A(ETA, np.array(0.0))


def test_log_derivative_A_plateaus():
    assert np.allclose(log_derivative_A(ETA, np.array([0.01, 0.1, 0.14])), 1.0)
    assert np.allclose(log_derivative_A(ETA, np.array([0.19, 0.5])), 0.0)
    mid = log_derivative_A(ETA, np.linspace(0.146, 0.187, 50))
    assert np.all((mid >= 0) & (mid <= 1))


def test_weight_without_punctures_is_constant():
    w = WeightFunction(EtaProfile(0.6))
    assert np.allclose(w(np.random.default_rng(0).normal(size=(5, 2))), 0.1)


def test_weight_at_puncture_raises():
    with pytest.raises(AtPuncture):
        W0(np.array([[0.0, 0.0]]))


@given(st.floats(-0.25, 0.25), st.floats(-0.25, 0.25))
def test_weight_jet_against_finite_differences(x, y):
    p = np.array([x, y])
    if np.hypot(x, y) < 0.02:
        return
    h = 1e-5
    jet = W0.jet(p[None], 2)
    fx = (W0(p + [h, 0]) - W0(p - [h, 0])) / (2 * h)
    fy = (W0(p + [0, h]) - W0(p - [0, h])) / (2 * h)
    fxx = (W0(p + [h, 0]) - 2 * W0(p[None]) + W0(p - [h, 0])) / h**2
    assert jet[1, 0, 0] == pytest.approx(fx[0], abs=1e-7)
    assert jet[0, 1, 0] == pytest.approx(fy[0], abs=1e-7)
    assert 2 * jet[2, 0, 0] == pytest.approx(fxx[0], abs=2e-3)
    r, g = W0.value_and_grad(p[None])
    assert r[0] == pytest.approx(jet[0, 0, 0], abs=1e-15)
    assert np.allclose(g[0], jet[[1, 0], [0, 1], 0], atol=1e-14)


def test_weight_second_derivative_in_linear_zone():
    x = np.array([0.03, 0.04])
    assert weight_eval(W0, x, (2, 0)) == pytest.approx(0.04**2 / 0.05**3, rel=1e-12)
    assert weight_eval(W0, x, (1, 1)) == pytest.approx(-0.03 * 0.04 / 0.05**3, rel=1e-12)


@given(st.floats(0.005, 1 / 8), st.floats(0, 2 * math.pi))
def test_circle_about_puncture_is_geodesic(a, phase):
    c = Curve.circle([0.0, 0.0], a, phase=phase)
    s = np.linspace(0, c.length, 11)
    assert np.abs(conformal_curvature(c, s, W0)).max() < 1e-6
    assert geodesic_length(c, W0) == pytest.approx(2 * math.pi, rel=1e-8)


@given(st.floats(0.001, 0.05), st.floats(1.5, 2.9))
def test_radial_segment_length_is_log(a, ratio):
    b = a * ratio
    seg = Curve.segment([a, 0.0], [b, 0.0])
    assert geodesic_length(seg, W0) == pytest.approx(math.log(b / a), rel=1e-8)


def test_straight_line_far_from_punctures_is_geodesic():
    seg = Curve.segment([0.3, -0.5], [0.3, 0.5])
    s = np.linspace(0, seg.length, 21)
    assert np.abs(conformal_curvature(seg, s, W0)[np.abs(s - 0.5) > 0.45]).max() < 1e-14
    far = Curve.segment([1.0, -0.5], [1.0, 0.5])
    assert np.abs(conformal_curvature(far, np.linspace(0, 1, 9), W0)).max() == 0.0


@given(st.floats(0.01, 0.1), st.floats(0.1, 0.9))
def test_line_near_puncture_curvature_is_cosine(d, frac):
    # kappa = (x - p) . nu / |x - p| in the linear zone
    seg = Curve.segment([d, -0.05], [d, 0.05])
    s = frac * seg.length
    x = seg.point(frac)
    nu = np.array([1.0, 0.0])  # outward normal of an upward segment
    expect = float(x @ nu / np.linalg.norm(x))
    assert conformal_curvature(seg, s, W0) == pytest.approx(expect, abs=1e-12)


def test_constant_weight_scales_euclidean_curvature():
    c = Curve.circle([3.0, 0.0], 0.5)
    k = conformal_curvature(c, np.linspace(0, c.length, 5), ConstantWeight(0.2))
    assert np.allclose(k, -0.2 / 0.5, atol=1e-13)


@given(
    st.floats(0.02, 0.12),
    st.floats(0, 2 * math.pi),
    st.floats(0.02, 0.12),
    st.floats(0, 2 * math.pi),
    st.floats(0.2, 1.0),
)
def test_homothety_about_puncture_is_isometry(r1, a1, r2, a2, c):
    x = r1 * np.array([math.cos(a1), math.sin(a1)])
    y = r2 * np.array([math.cos(a2), math.sin(a2)])
    if np.linalg.norm(x - y) < 1e-3:
        return
    # skip chords that pass too close to the puncture
    t = np.clip(-x @ (y - x) / ((y - x) @ (y - x)), 0, 1)
    if np.linalg.norm(x + t * (y - x)) < 1e-3:
        return
    L1 = geodesic_length(Curve.segment(x, y), W0)
    L2 = geodesic_length(Curve.segment(homothety([0, 0], c, x), homothety([0, 0], c, y)), W0)
    assert L2 == pytest.approx(L1, rel=1e-6)


def test_admissibility_scan_grid_supremum():
    # |d_x r| = |cos phi| near a puncture, grid angles are offset by half a step
    assert admissibility_scan(W0, 1.0, (1, 0)) == pytest.approx(math.cos(math.pi / 64), rel=1e-12)
    assert admissibility_scan(W0, 0.0, (0, 0)) == pytest.approx(1.0)


def test_leibniz_bound_trivial_shift():
    assert leibniz_bound(W0, 0.0, m=2) == pytest.approx(math.sqrt(6), rel=1e-12)
    assert leibniz_bound(W0, 0.0, m=1) == pytest.approx(math.sqrt(3), rel=1e-12)


@pytest.mark.parametrize("b", [-0.5, -0.25, 0.25, 0.5])
def test_leibniz_bound_exceeds_trivial(b):
    assert leibniz_bound(W0, b) > math.sqrt(6)


def test_curvature_jets_agree_with_finite_differences(lshape):
    d = construct_rounded_domain(lshape, select_default_params(lshape).at(2))
    w = WeightFunction.for_domain(d)
    arcs = list(range(0, len(d.pieces), 2))
    jet = curvature_profile(d, w, k=2, samples_per_piece=16, pieces=arcs)
    fd = curvature_profile(d, w, k=2, samples_per_piece=16, pieces=arcs, method="fd")
    for pid in arcs:
        tj = jet.t[jet.piece_id == pid]
        tf = fd.t[fd.piece_id == pid]
        keep = np.isin(tj, tf)
        a = jet.derivatives[:, jet.piece_id == pid][:, keep]
        b = fd.derivatives[:, fd.piece_id == pid]
        scale = np.abs(a).max(axis=1, keepdims=True) + 1
        assert np.abs(a - b).max() / scale.max() < 1e-5


def test_curvature_profile_csv(tmp_path, square):
    d = construct_rounded_domain(square, select_default_params(square))
    prof = curvature_profile(d, WeightFunction.for_domain(d), k=1, samples_per_piece=4)
    prof.to_csv(tmp_path / "k.csv")
    lines = (tmp_path / "k.csv").read_text().splitlines()
    assert lines[0] == "piece_id,s_hat,kappa,dkappa_ds,r"
    assert len(lines) == 1 + 8 * 4
    assert np.all(np.diff(prof.s_hat) > 0)


def test_curvature_order_limits(square):
    d = construct_rounded_domain(square, select_default_params(square))
    with pytest.raises(ValueError):
        curvature_profile(d, WeightFunction.for_domain(d), k=5)
