import math

import numpy as np
import pytest

from grflab.flow import (
    FlowHistory,
    cfl_limit,
    flow_rhs,
    identity_residuals,
    initial_state,
    monitor_bounds,
    monitor_identities,
    rh_reduction_residual,
    run,
    tolerance,
)
from grflab.homogeneous import flat_t3_exact_array
from grflab.records import NOT_APPLICABLE, PASS


def perturbed_run(N, t_end=0.05, **kw):
    s0 = initial_state("perturbed", N, h0=1.0, eps=0.1, phi0=0.2, **kw)
    dt = 0.9 * cfl_limit(s0.geom)
    n = math.ceil(t_end / dt)
    return run(s0, t_end, t_end / n)


@pytest.fixture(scope="module")
def coarse():
    return perturbed_run(32)


@pytest.fixture(scope="module")
def fine():
    return perturbed_run(64)


def test_tolerance_lookup():
    C = {"identity.volume": 2.0, "identity": 3.0, "default": 5.0}
    scale = 10**-2 + 0.1**2
    assert tolerance(C, 10, 0.1, "identity.volume") == pytest.approx(2.0 * scale)
    assert tolerance(C, 10, 0.1, "identity.h_l2") == pytest.approx(3.0 * scale)
    assert tolerance(C, 10, 0.1, "bound") == pytest.approx(5.0 * scale)
    assert tolerance(4.0, 10, 0.1) == pytest.approx(4.0 * scale)
    with pytest.raises(KeyError):
        tolerance({"identity": 1.0}, 10, 0.1, "bound")


def test_constant_fields_follow_closed_form():
    s0 = initial_state("homogeneous", 16, h0=0.8, phi0=0.1)
    dt = 0.9 * cfl_limit(s0.geom) / 2
    hist = run(s0, 100 * dt, dt)
    exact = flat_t3_exact_array(0.8, 1.0, 0.1, hist.times[-1])
    y = hist.fields[-1]
    assert np.allclose(y[0] ** 2, exact[0], rtol=1e-10)
    assert np.allclose(y[3], exact[3], rtol=1e-10)
    assert np.allclose(y[4], exact[4], rtol=1e-10)
    assert np.ptp(y, axis=1).max() < 1e-13


def test_flat_data_is_static():
    s0 = initial_state("flat", 16, phi0=0.3)
    assert np.abs(flow_rhs(s0)).max() < 1e-12


def test_cfl_violation_rejected():
    s0 = initial_state("flat", 32)
    with pytest.raises(ValueError, match="CFL"):
        run(s0, 0.1, 2 * cfl_limit(s0.geom))


def test_unknown_family():
    with pytest.raises(ValueError, match="family"):
        initial_state("sphere", 16)


def test_rescaled_state_rhs_scales():
    s0 = initial_state("perturbed", 32, h0=1.0, eps=0.2)
    lam = 2.0
    f0, f1 = flow_rhs(s0), flow_rhs(s0.rescaled(lam))
    # metric components scale like 1/lam and time like 1/lam^2
    assert np.allclose(f1[:3], lam * f0[:3], atol=1e-12)
    assert np.allclose(f1[3], lam**3 * f0[3], atol=1e-12)
    assert np.allclose(f1[4], lam**2 * f0[4], atol=1e-12)


def test_identity_residuals_converge(coarse, fine):
    rc, rf = identity_residuals(coarse), identity_residuals(fine)
    for name in ("evolve_H", "volume", "evolve_R"):
        assert np.nanmax(rf[name]) < np.nanmax(rc[name]) / 3, name


def test_monitors_pass_on_resolved_run(fine):
    reports = monitor_identities(fine, {"default": 1000.0}) + monitor_bounds(fine, 10.0)
    assert all(r.verdict == PASS for r in reports), [r for r in reports if r.verdict != PASS]


def test_rh_reduction_exact(fine):
    assert rh_reduction_residual(fine, stride=4) < 1e-12


def test_violated_hypotheses_not_applicable(coarse):
    reports = {r.name: r for r in monitor_bounds(coarse, 10.0, C0=1e-6, K=1e-6)}
    assert reports["bound.h_max_principle"].verdict == NOT_APPLICABLE
    assert reports["bound.torsion_rm"].verdict == NOT_APPLICABLE
    assert reports["bound.h_max_principle"].to_dict()["margin"] is None


def test_history_round_trip(tmp_path, coarse):
    coarse.save(tmp_path)
    times = np.load(tmp_path / "times.npy")
    fields = np.load(tmp_path / "fields.npy")
    again = FlowHistory(times, fields, coarse.N, coarse.L, coarse.Ly, coarse.Lz, coarse.dt)
    assert np.array_equal(again.fields, coarse.fields)
    assert again.index_of(coarse.times[3]) == 3
    with pytest.raises(ValueError):
        again.index_of(coarse.times[3] + 0.3 * coarse.dt)


def test_history_times_must_increase():
    with pytest.raises(ValueError):
        FlowHistory([0.0, 0.0], np.ones((2, 5, 8)), 8, 1.0, 1.0, 1.0, 0.1)
