import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from grflab.config import TOL_C
from grflab.entropy import (
    EntropyParams,
    _derivative,
    _fd_weights,
    entropy_report,
    eps_regularity_probe,
    log_integral,
    nash_average_residual,
    restrict,
    slab_entropies,
    verify_entropy_bounds,
)
from grflab.flow import FlowHistory, cfl_limit, initial_state, run
from grflab.homogeneous import HomState, flat_t3_entropy_exact, flat_t3_rhs, integrate_homogeneous
from grflab.records import FAIL, NOT_APPLICABLE, PASS
from grflab.transport import solve_conjugate


@pytest.fixture(scope="module")
def homogeneous():
    traj = integrate_homogeneous(flat_t3_rhs, HomState(0.0, (1.0, 1.0, 1.0), 1.0, 0.0), 0.5, 1e-3)
    hist = FlowHistory.from_homogeneous(traj, 8)
    sol = solve_conjugate(hist, [0], data="uniform")
    return hist, sol, slab_entropies(hist, sol)


@pytest.fixture(scope="module")
def perturbed():
    s0 = initial_state("perturbed", 64, h0=1.0, eps=0.1, phi0=0.2)
    dt = 0.9 * cfl_limit(s0.geom)
    n = math.ceil(0.15 / dt)
    return run(s0, 0.15, 0.15 / n)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 2.0), st.floats(0.0, 1.0))
def test_log_integral_matches_quadrature(t2, frac):
    t_star = frac * t2
    ref, _ = quad(lambda s: math.log(t2 / (t2 - s)), 0.0, t_star, limit=200)
    assert log_integral(t_star, t2) == pytest.approx(ref, rel=1e-7, abs=1e-10)


def test_fd_weights_exact_on_polynomials():
    for offsets in (range(-3, 4), range(0, 7), range(-6, 1)):
        w = _fd_weights(list(offsets))
        for p in range(7):
            vals = np.array([float(o) ** p for o in offsets])
            assert np.dot(w, vals) == pytest.approx(1.0 if p == 1 else 0.0, abs=1e-9)


def test_derivative_sixth_order():
    errs = []
    for n in (40, 80):
        x = np.linspace(0, 1, n + 1)
        vals = np.sin(3 * x)[:, None]
        errs.append(max(abs(_derivative(vals, x[1] - x[0], j)[0] - 3 * math.cos(3 * x[j]))
                        for j in range(n + 1)))
    assert errs[0] / errs[1] > 2**5.5


def test_homogeneous_matches_closed_form(homogeneous):
    hist, sol, ent = homogeneous
    taus = [0.1, 0.25, 0.4]
    for rec in entropy_report(hist, sol, taus, ent=ent):
        exact = flat_t3_entropy_exact(1.0, 0.0, 0.5, rec.tau)
        assert np.allclose(rec.row(), exact.row(), atol=1e-9)
        assert abs(rec.residuals["tauN_H"]) < 1e-6
        assert abs(rec.residuals["W_forms"]) < 1e-12


def test_nash_average_on_homogeneous(homogeneous):
    _, _, ent = homogeneous
    window = ent.taus >= 0.05
    assert nash_average_residual(restrict(ent, window)) < 1e-4


def test_tau_outside_slab_rejected(homogeneous):
    hist, sol, ent = homogeneous
    with pytest.raises(ValueError, match="outside"):
        entropy_report(hist, sol, [0.9], ent=ent)


def test_translation_orbit_bases_agree():
    # constant fields: every base point sees the same entropies
    s0 = initial_state("homogeneous", 24, h0=1.0)
    dt = 0.9 * cfl_limit(s0.geom)
    hist = run(s0, 60 * dt, dt)
    rows = [slab_entropies(hist, solve_conjugate(hist, [b])).record(30).row() for b in (0, 7, 19)]
    assert np.allclose(rows[0], rows[1], atol=1e-12)
    assert np.allclose(rows[0], rows[2], atol=1e-12)


def test_probe_degenerate_and_signed():
    assert eps_regularity_probe([(1.0, 2.0), (1.0, 2.0), (1.0, 2.0)]).verdict == NOT_APPLICABLE
    assert eps_regularity_probe([(1.0, 1.0)]).verdict == NOT_APPLICABLE
    up = eps_regularity_probe([(1, 1), (2, 2), (3, 3), (4, 5)])
    down = eps_regularity_probe([(1, 4), (2, 3), (3, 2), (4, 1)])
    assert up.verdict == PASS and up.lhs == pytest.approx(1.0)
    assert down.verdict == FAIL


def test_bound_checks_on_small_run(perturbed):
    K = len(perturbed)
    params = EntropyParams(TOL_C, 0.05, bases=(21, 37), radii=(0.25,), run_id="t")
    reports, consts, extras = verify_entropy_bounds(perturbed, params)
    names = {r.name for r in reports}
    assert {"entropy.N_H_monotone", "entropy.B2_nash_gradient", "transport.B4_w1_monotone",
            "kernel.B8_heat_kernel_bound", "noncollapsing.B10_center"} <= names
    failed = [r.name for r in reports if r.verdict == FAIL]
    assert not failed
    assert consts["B8_C"] > 0 and math.isfinite(consts["B8_C"])
    assert extras["solution"].k0 == K - 1
