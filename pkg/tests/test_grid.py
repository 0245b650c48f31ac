import math
from dataclasses import dataclass

import numpy as np
import pytest
from scipy.integrate import quad

from grflab.grid import (
    GridGeometry,
    codifferential_h,
    curvature,
    curvature_radius,
    d2_arclength,
    diameter_bound,
    exterior_derivative_2form,
    form_inner,
    geometry_csv,
    grad_sq,
    hessian_diag,
    laplacian,
    reduced_distance,
    weighted_ball_volume,
)
from grflab.homogeneous import observed_order
from grflab.oracles import christoffel_ricci

TWO_PI = 2 * math.pi


def warped(N, L=TWO_PI, eps=0.2, k=1):
    g = GridGeometry.flat(N, L=L)
    x = g.x * TWO_PI / L
    return g.with_fields(1 + 0.3 * eps * np.cos(k * x), np.exp(eps * np.sin(k * x + 1)),
                         np.exp(eps * np.cos(k * x)))


def oracle_ricci(geom, afun, bfun, cfun):
    def metric(x):
        return np.diag([afun(x) ** 2, bfun(x) ** 2, cfun(x) ** 2])

    return np.array([christoffel_ricci(metric, x) for x in geom.x]).T


def test_rejects_bad_fields():
    with pytest.raises(ValueError):
        GridGeometry(4, 1.0, 1.0, 1.0, np.ones(4), -np.ones(4), np.ones(4))
    with pytest.raises(ValueError):
        GridGeometry(4, 1.0, 1.0, 1.0, np.ones(3), np.ones(4), np.ones(4))
    g = GridGeometry.flat(8)
    with pytest.raises(ValueError):
        g.a[0] = 2.0
    with pytest.raises(ValueError):
        laplacian(g, np.ones(7))


def test_constant_fields_have_zero_curvature():
    cf = curvature(GridGeometry.flat(32, a=1.3, b=0.7, c=2.0))
    for f in (cf.ric_xx, cf.ric_yy, cf.ric_zz, cf.scalar, cf.rm_norm):
        assert np.max(np.abs(f)) <= 1e-12


def test_scalar_is_trace():
    cf = curvature(warped(64))
    np.testing.assert_allclose(cf.scalar, cf.ric_xx + cf.ric_yy + cf.ric_zz, atol=1e-12)
    K = cf.sectional
    np.testing.assert_allclose(cf.rm_norm**2, 4 * np.sum(K**2, axis=0), rtol=1e-12)


def test_christoffel_oracle_sanity():
    # dx^2 + e^{2x}(dy^2 + dz^2) is hyperbolic with Ric = -2
    ric = christoffel_ricci(lambda x: np.diag([1.0, math.exp(2 * x), math.exp(2 * x)]), 0.4)
    np.testing.assert_allclose(ric, -2.0, atol=1e-9)


def test_curvature_matches_christoffel_oracle():
    # L = 8 pi keeps the O(dx^2) truncation under 1e-8 at N = 256
    eps, L = 1e-3, 8 * math.pi
    k = TWO_PI / L
    errs = []
    for N in (128, 256):
        g = GridGeometry.flat(N, L=L)
        b = np.exp(eps * np.sin(k * g.x))
        g = g.with_fields(np.ones(N), b, b)

        def bfun(x):
            return math.exp(eps * math.sin(k * x))

        ref = oracle_ricci(g, lambda x: 1.0, bfun, bfun)
        errs.append(np.max(np.abs(curvature(g).ricci - ref)))
    assert errs[1] <= 1e-8
    assert 3.5 <= errs[0] / errs[1] <= 4.5


def test_curvature_general_warped_against_oracle():
    eps = 0.2
    g = warped(128, eps=eps)

    def afun(x):
        return 1 + 0.3 * eps * math.cos(x)

    ref = oracle_ricci(g, afun, lambda x: math.exp(eps * math.sin(x + 1)),
                       lambda x: math.exp(eps * math.cos(x)))
    assert np.max(np.abs(curvature(g).ricci - ref)) <= 1e-3


def test_operators_converge_second_order():
    def errors(op, exact):
        out = []
        for N in (32, 64, 128, 256):
            g = GridGeometry.flat(N)
            out.append(np.max(np.abs(op(g, np.sin(g.x)) - exact(g.x))))
        return out

    assert observed_order(errors(laplacian, lambda x: -np.sin(x))) >= 1.8
    assert observed_order(errors(grad_sq, lambda x: np.cos(x) ** 2)) >= 1.8
    assert observed_order(errors(d2_arclength, lambda x: -np.sin(x))) >= 1.8

    ref = warped(2048)
    curv_ref = curvature(ref)
    errs = []
    for N in (64, 128, 256):
        cf = curvature(warped(N))
        stride = 2048 // N
        errs.append(max(np.max(np.abs(cf.scalar - curv_ref.scalar[::stride])),
                        np.max(np.abs(cf.rm_norm - curv_ref.rm_norm[::stride]))))
    assert observed_order(errs) >= 1.8


def test_laplacian_constant_and_eigenfunction():
    g = GridGeometry.flat(128, L=3.0)
    assert np.max(np.abs(laplacian(warped(64), np.full(64, 2.5)))) <= 1e-12
    f = np.sin(TWO_PI * g.x / 3.0)
    np.testing.assert_allclose(laplacian(g, f), -(TWO_PI / 3.0) ** 2 * f, atol=5e-3)


def test_laplacian_self_adjoint():
    g = warped(96)
    rng = np.random.default_rng(3)
    for _ in range(20):
        f, h = rng.standard_normal((2, 96))
        lhs = g.integrate(laplacian(g, f) * h)
        rhs = g.integrate(f * laplacian(g, h))
        assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))


def test_hessian_trace_is_laplacian_to_second_order():
    g = warped(256)
    f = np.sin(g.x) + 0.5 * np.cos(2 * g.x)
    assert np.max(np.abs(hessian_diag(g, f).sum(axis=0) - laplacian(g, f))) <= 2e-3


def test_codifferential_constant_is_zero():
    assert np.all(codifferential_h(warped(32), np.full(32, 0.7)) == 0)


def test_codifferential_flat_closed_form():
    g = GridGeometry.flat(256)
    dH = codifferential_h(g, np.sin(g.x))
    norm_sq = np.sum(dH**2, axis=(1, 2))  # full index sum counts yz and zy
    np.testing.assert_allclose(norm_sq, 2 * np.cos(g.x) ** 2, atol=1e-3)


def three_form_field(h):
    out = np.zeros((len(h), 3, 3, 3))
    for (i, j, k), sgn in (((0, 1, 2), 1), ((1, 2, 0), 1), ((2, 0, 1), 1),
                           ((1, 0, 2), -1), ((0, 2, 1), -1), ((2, 1, 0), -1)):
        out[:, i, j, k] = sgn * h
    return out


def test_codifferential_adjointness():
    g = warped(64)
    rng = np.random.default_rng(11)
    for _ in range(100):
        h = rng.standard_normal(64)
        omega = rng.standard_normal((64, 3, 3))
        omega = omega - omega.transpose(0, 2, 1)
        lhs = form_inner(g, codifferential_h(g, h), omega, 2)
        d_omega = three_form_field(exterior_derivative_2form(g, omega))
        rhs = form_inner(g, three_form_field(h), d_omega, 3)
        assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))


def test_reduced_distance_basics():
    g = GridGeometry.flat(64, L=5.0)
    assert reduced_distance(g, 3, 3) == 0
    assert reduced_distance(g, 0, 32) == pytest.approx(2.5)
    w = warped(64)
    D = w.distance_matrix
    np.testing.assert_array_equal(D, D.T)
    assert np.all(D[:, :, None] <= D[:, None, :] + D.T[None, :, :] + 1e-12)
    assert reduced_distance(w, 5, 40) == D[5, 40]


def test_reduced_distance_against_dense_oracle():
    def afun(x):
        return 1 + 0.3 * math.sin(x) + 0.1 * math.cos(3 * x)

    total = quad(afun, 0, TWO_PI)[0]
    errs = []
    for N in (32, 64, 128):
        g = GridGeometry.flat(N)
        g = g.with_fields(np.array([afun(x) for x in g.x]), np.ones(N), np.ones(N))
        i, j = N // 8, 5 * N // 8
        arc = quad(afun, g.x[i], g.x[j])[0]
        errs.append(abs(reduced_distance(g, i, j) - min(arc, total - arc)))
    assert observed_order(errs) >= 1.8


def test_small_ball_volume_limit():
    g = GridGeometry.flat(128)
    r = g.L / 50
    bv = weighted_ball_volume(g, np.zeros(128), 10, r, M=32)
    assert abs(bv.value / r**3 - 4 * math.pi / 3) <= 0.02 * 4 * math.pi / 3
    assert bv.error_bound > 0


def test_ball_volume_constant_phi_factorizes():
    g = warped(64)
    base = weighted_ball_volume(g, np.zeros(64), 7, 0.4, M=16)
    shifted = weighted_ball_volume(g, np.full(64, 0.8), 7, 0.4, M=16)
    assert shifted.value == pytest.approx(math.exp(-0.8) * base.value, rel=1e-12)


def test_ball_beyond_diameter_is_total_volume():
    g = warped(64)
    phi = 0.1 * np.sin(g.x)
    bv = weighted_ball_volume(g, phi, 0, diameter_bound(g) + 1)
    assert bv.value == pytest.approx(g.integrate(np.exp(-phi)))
    with pytest.raises(ValueError):
        weighted_ball_volume(g, phi, 0, 0.0)


def test_gauge_swap_invariance():
    g = warped(64)
    s = g.swapped_fibers()
    cg, cs = curvature(g), curvature(s)
    np.testing.assert_array_equal(cg.scalar, cs.scalar)
    np.testing.assert_array_equal(cg.rm_norm, cs.rm_norm)
    np.testing.assert_array_equal(cg.ric_yy, cs.ric_zz)
    assert g.volume == s.volume
    np.testing.assert_array_equal(g.distance_matrix, s.distance_matrix)
    phi = 0.2 * np.cos(g.x)
    f = np.sin(2 * g.x)
    np.testing.assert_array_equal(laplacian(g, f), laplacian(s, f))
    vg = weighted_ball_volume(g, phi, 3, 0.5, M=16).value
    vs = weighted_ball_volume(s, phi, 3, 0.5, M=16).value
    assert vg == pytest.approx(vs, rel=1e-12)


def test_translation_invariance():
    g = warped(64)
    r = g.rolled(1)
    cg, cr = curvature(g), curvature(r)
    np.testing.assert_array_equal(np.roll(cg.scalar, 1), cr.scalar)
    np.testing.assert_array_equal(np.roll(cg.rm_norm, 1), cr.rm_norm)
    f = np.cos(g.x) + 0.3 * np.sin(3 * g.x)
    np.testing.assert_array_equal(np.roll(laplacian(g, f), 1), laplacian(r, np.roll(f, 1)))
    np.testing.assert_allclose(np.roll(np.roll(g.distance_matrix, 1, 0), 1, 1),
                               r.distance_matrix, atol=1e-12)


def test_geometry_csv(tmp_path):
    g = warped(16)
    path = tmp_path / "geom.csv"
    geometry_csv(path, g, h=np.zeros(16), phi=np.ones(16), with_curvature=True)
    lines = path.read_text().splitlines()
    assert lines[0].split(",")[:6] == ["x", "a", "b", "c", "h", "phi"]
    assert len(lines) == 17


@dataclass
class StaticHistory:
    times: np.ndarray
    geoms: list

    def geometry(self, k):
        return self.geoms[k]


def test_curvature_radius_flat_is_history_limited():
    g = GridGeometry.flat(32)
    hist = StaticHistory(np.linspace(0, 1, 11), [g] * 11)
    out = curvature_radius(hist, 4, 10)
    assert out.truncated and out.r == pytest.approx(1.0)


def test_curvature_radius_constant_field():
    g = GridGeometry.flat(32)
    hist = StaticHistory(np.linspace(0, 4, 41), [g] * 41)
    K = 9.0
    out = curvature_radius(hist, 0, 40, rm_fields=np.full((41, 32), K))
    assert not out.truncated
    assert out.r == pytest.approx(K**-0.5, rel=1e-5)


def test_curvature_radius_monotone_in_curvature():
    g = warped(32)
    hist = StaticHistory(np.linspace(0, 4, 41), [g] * 41)
    rng = np.random.default_rng(0)
    base = rng.uniform(0.5, 3.0, (41, 32))
    bumped = base.copy()
    bumped[35:, 10] += 5.0
    r0 = curvature_radius(hist, 12, 40, rm_fields=base).r
    r1 = curvature_radius(hist, 12, 40, rm_fields=bumped).r
    assert r1 <= r0
