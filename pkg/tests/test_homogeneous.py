import math

import numpy as np
import pytest
from scipy.integrate import quad, solve_ivp

from grflab.homogeneous import (
    HomState,
    flat_t3_bakry_emery_norm_sq,
    flat_t3_dW_H_rhs,
    flat_t3_entropy_exact,
    flat_t3_exact,
    flat_t3_exact_array,
    flat_t3_generalized_scalar,
    flat_t3_rhs,
    flat_t3_volume,
    integrate_homogeneous,
    observed_order,
)
from grflab.integrators import BlowUp

TWO_PI = 2 * math.pi


def complex_step(fun, t, h=1e-20):
    return np.imag(fun(t + 1j * h)) / h


def d5(fun, x, h=2e-4):
    return (fun(x - 2 * h) - 8 * fun(x - h) + 8 * fun(x + h) - fun(x + 2 * h)) / (12 * h)


def test_rhs_examples():
    assert np.all(flat_t3_rhs(HomState(0, (1, 2, 3), 0.0, 0.4)) == 0)
    np.testing.assert_allclose(flat_t3_rhs([1, 1, 1, 1, 0])[[0, 3, 4]], [1, -1.5, 1])
    with pytest.raises(ValueError):
        flat_t3_rhs([1, -1, 1, 0, 0])


def test_volume_rate_matches_integrated_formula():
    y = np.array([1.3, 0.7, 2.0, 0.9, 0.1])
    dy = flat_t3_rhs(y)
    vol_rate = 0.5 * (dy[0] / y[0] + dy[1] / y[1] + dy[2] / y[2])
    # (1/4)|H|^2 - R with |H|^2 = 6 h^2 and R = 0
    assert vol_rate == pytest.approx(0.25 * 6 * y[3] ** 2)


def test_exact_h0_zero_is_constant():
    s = flat_t3_exact(0.0, 1.7, 0.3, 5.0)
    assert s.metric_diag == (1.7, 1.7, 1.7) and s.h == 0 and s.phi == 0.3


def test_exact_against_numerical_ode():
    s = flat_t3_exact(1.0, 2.0, 0.5, 1.0)
    assert s.h == pytest.approx(0.5, abs=1e-15)
    assert s.metric_diag[0] == pytest.approx(2.0 * 4 ** (1 / 3))
    assert s.phi == pytest.approx(0.5 + math.log(4) / 3)
    sol = solve_ivp(lambda t, y: flat_t3_rhs(y), (0, 1), [2.0, 2.0, 2.0, 1.0, 0.5],
                    method="DOP853", rtol=1e-13, atol=1e-14)
    np.testing.assert_allclose(sol.y[:, -1], s.as_array(), rtol=1e-11)


@pytest.mark.parametrize("h0,t", [(1.0, 0.3), (0.4, 2.0), (-2.0, 0.05), (1.5, 1.0)])
def test_exact_solves_ode(h0, t):
    deriv = complex_step(lambda tt: flat_t3_exact_array(h0, 0.8, 0.1, tt), t)
    rhs = flat_t3_rhs(flat_t3_exact(h0, 0.8, 0.1, t))
    np.testing.assert_allclose(deriv, rhs, atol=1e-12)


def test_rk4_matches_closed_form():
    traj = integrate_homogeneous(flat_t3_rhs, HomState(0, (1, 1, 1), 1.0, 0.0), 1.0, 1e-3)
    final = traj.state(-1)
    assert abs(final.h - 0.5) <= 1e-8
    exact = flat_t3_exact(1.0, 1.0, 0.0, 1.0).as_array()
    assert np.max(np.abs(traj.states[-1] - exact) / np.abs(exact)) <= 1e-8


def test_rk4_order():
    errs = []
    for dt in (0.1, 0.05, 0.025, 0.0125):
        traj = integrate_homogeneous(flat_t3_rhs, HomState(0, (1, 1, 1), 1.0, 0.0), 1.0, dt)
        exact = np.array([flat_t3_exact_array(1.0, 1.0, 0.0, t) for t in traj.times])
        errs.append(np.max(np.abs(traj.states - exact)))
    assert observed_order(errs) >= 3.8


def test_adaptive_scheme():
    traj = integrate_homogeneous(flat_t3_rhs, HomState(0, (1, 1, 1), 1.0, 0.0), 1.0, 1e-2,
                                 scheme="adaptive")
    assert abs(traj.states[-1, 3] - 0.5) <= 1e-8


def test_h0_zero_trajectory_frozen():
    traj = integrate_homogeneous(flat_t3_rhs, HomState(0, (1, 2, 3), 0.0, 0.2), 1.0, 0.1)
    assert np.all(traj.states == traj.states[0])


def test_torsion_non_increasing():
    traj = integrate_homogeneous(flat_t3_rhs, HomState(0, (1, 1, 1), -1.3, 0.0), 2.0, 1e-2)
    assert np.all(np.diff(np.abs(traj.states[:, 3])) <= 0)
    assert np.max(np.abs(traj.states[:, 3])) <= 1.3


@pytest.mark.filterwarnings("ignore:overflow encountered:RuntimeWarning")
def test_blow_up_reports_last_time():
    with pytest.raises(BlowUp) as info:
        integrate_homogeneous(lambda y: np.array([0, 0, 0, 10 * y[3] ** 2, 0]),
                              HomState(0, (1, 1, 1), 1.0, 0.0), 1.0, 1e-3)
    assert 0.09 < info.value.last_time < 0.11


def test_entropy_torsion_free():
    rec = flat_t3_entropy_exact(0.0, 0.0, 1.0, 0.4)
    assert rec.Psi == 0 and rec.P == 0 and rec.N_H == rec.N_phi
    expected = math.log(TWO_PI**3) - 1.5 * math.log(4 * math.pi * 0.4) - 1.5
    assert rec.N_H == pytest.approx(expected)


def test_entropy_psi_closed_form():
    rec = flat_t3_entropy_exact(1.0, 0.0, 1.0, 1.0)
    assert rec.Psi == pytest.approx(2 * math.log(4))


@pytest.mark.parametrize("h0,t,tau", [(1.0, 1.0, 1.0), (1.0, 1.0, 0.05), (0.6, 2.0, 1.3)])
def test_entropy_P_against_quadrature(h0, t, tau):
    def psi(s):
        return quad(lambda r: 6 * h0**2 / (1 + 3 * h0**2 * (t - r)), 0, s, epsabs=1e-14)[0]

    P = quad(lambda s: psi(s) / s if s > 0 else 6 * h0**2 / (1 + 3 * h0**2 * t), 0, tau,
             epsabs=1e-13)[0]
    assert flat_t3_entropy_exact(h0, 0.0, t, tau).P == pytest.approx(P, abs=1e-10)


def test_entropy_rejects_bad_tau():
    with pytest.raises(ValueError):
        flat_t3_entropy_exact(1.0, 0.0, 1.0, 0.0)
    with pytest.raises(ValueError):
        flat_t3_entropy_exact(1.0, 0.0, 1.0, 1.5)


@pytest.mark.parametrize("h0", [0.0, 1.0, 2.0])
def test_entropy_derivative_identities(h0):
    t = 1.0

    def rec(tau):
        return flat_t3_entropy_exact(h0, 0.2, t, tau)

    for tau in np.linspace(0.05, 0.95, 10):
        dtN = d5(lambda x: x * rec(x).N_phi, tau)
        assert dtN == pytest.approx(rec(tau).W_phi, abs=1e-8)
        dtNH = d5(lambda x: x * rec(x).N_H, tau)
        assert dtNH == pytest.approx(rec(tau).W_H, abs=1e-8)
        dW = d5(lambda x: rec(x).W_H, tau)
        assert dW == pytest.approx(flat_t3_dW_H_rhs(h0, t, tau), abs=1e-8)


def test_entropy_monotonicity():
    taus = np.linspace(0.01, 1.0, 200)
    recs = [flat_t3_entropy_exact(1.0, 0.0, 1.0, tau) for tau in taus]
    NH = np.array([r.N_H for r in recs])
    WH = np.array([r.W_H for r in recs])
    assert np.all(np.diff(NH) <= 1e-8)
    assert np.all(WH <= NH + 1e-8)
    assert np.all(np.diff(WH) <= 1e-8)


@pytest.mark.parametrize("lam", [0.5, 2.0])
def test_entropy_rescaling(lam):
    t = 1.0
    for tau in (0.1, 0.5, 1.0):
        orig = flat_t3_entropy_exact(1.0, 0.0, t, tau)
        resc = flat_t3_entropy_exact(lam * 1.0, 0.0, t / lam**2, tau / lam**2, A0=1.0 / lam**2)
        for name in ("N_phi", "W_phi", "Psi", "P", "N_H", "W_H"):
            assert getattr(resc, name) == pytest.approx(getattr(orig, name), abs=1e-10)


def test_exact_rescaling_relation():
    lam = 2.0
    for t in (0.1, 0.7):
        s = flat_t3_exact(1.0, 1.0, 0.0, t, lam=lam)
        o = flat_t3_exact(1.0, 1.0, 0.0, lam**2 * t)
        assert s.h == pytest.approx(lam * o.h)
        assert s.metric_diag[0] == pytest.approx(o.metric_diag[0] / lam**2)


def test_generalized_scalar_evolution():
    for t in (0.0, 0.3, 1.0):
        dR = complex_step(lambda tt: flat_t3_generalized_scalar(flat_t3_exact_array(1.0, 1, 0, tt)[3]), t)
        h = flat_t3_exact(1.0, 1, 0, t).h
        assert dR == pytest.approx(2 * flat_t3_bakry_emery_norm_sq(h), abs=1e-8)


def test_volume_closed_form():
    s = flat_t3_exact(1.0, 1.0, 0.0, 0.5)
    vol = TWO_PI**3 * math.sqrt(np.prod(s.metric_diag))
    assert flat_t3_volume(1.0, 0.5) == pytest.approx(vol)
