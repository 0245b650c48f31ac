"""Pointed entropies, their derivative identities, and bound checks.

For a conjugate solution with cell masses ``m`` and density ``v = m / w`` the
potential is ``F = f + phi = -log v - (3/2) log(4 pi tau)``. All integrals
against ``dnu`` are sums against ``m``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.stats import spearmanr

from .flow import bakry_emery, generalized_scalar, tolerance
from .grid import curvature, curvature_radius, d_central, grad_sq, laplacian, weighted_ball_volume
from .records import CheckReport, EntropyRecord
from .transport import (
    default_h_n,
    kantorovich_lower_bounds,
    solve_conjugate,
    variance_and_center,
    w1_distance,
)

N_DIM = 3
OMEGA_3 = 4.0 * math.pi / 3.0


def potential(history, k, m, tau) -> np.ndarray:
    """``F = f + phi`` for masses ``m`` (shape ``(B, N)``) at history index ``k``."""
    v = np.atleast_2d(m) / history.geometry(k).cell_volume
    return -np.log(v) - 0.5 * N_DIM * math.log(4 * math.pi * tau)


def slice_terms(history, k, m, tau) -> dict:
    """Entropy integrands at one time slice, one value per base row of ``m``."""
    m = np.atleast_2d(m)
    g = history.geometry(k)
    st = history.state(k)
    cf = curvature(g)
    F = potential(history, k, m, tau)
    f = F - st.phi
    R_phi = generalized_scalar(st, cf)
    out = {"N_phi": np.sum(f * m, axis=1) - 0.5 * N_DIM}
    grad_f = np.array([grad_sq(g, row) for row in f])
    out["W_phi"] = np.sum((tau * (R_phi + grad_f) + f - N_DIM) * m, axis=1)
    R_F = np.array([cf.scalar - 0.5 * st.h**2 + 2 * laplacian(g, row) - grad_sq(g, row) for row in F])
    out["W_phi_form1"] = np.sum((tau * R_F + f - N_DIM) * m, axis=1)
    shifted = []
    for row in F:
        ric = bakry_emery(g, st.h, row, cf)
        ric[:, [0, 1, 2], [0, 1, 2]] -= 0.5 / tau
        shifted.append(np.sum(ric**2, axis=(1, 2)))
    out["ric_term"] = np.sum(np.array(shifted) * m, axis=1)
    return out


def bakry_emery_field(history, sol, k, b=0) -> np.ndarray:
    """``Ric^{H, f+phi}`` of the solution at history index ``k``; shape ``(N, 3, 3)``."""
    tau = sol.t0 - history.times[k]
    F = potential(history, k, sol.mass(k)[b], tau)[0]
    return bakry_emery(history.geometry(k), history.fields[k, 3], F)


def psi_and_p(sol) -> tuple:
    """``Psi`` and ``P`` at every solver step, shape ``(J, B)``."""
    taus = sol.taus
    Psi = CubicSpline(taus, sol.psi, axis=0).antiderivative()(taus)
    q = np.empty_like(Psi)
    q[1:] = Psi[1:] / taus[1:, None]
    q[0] = sol.psi[0]  # Psi(tau) / tau -> |H|^2(x, t)
    P = CubicSpline(taus, q, axis=0).antiderivative()(taus)
    return Psi, P


@dataclass
class SlabEntropies:
    """Entropy series along a pointed solve for every base, on ``taus``."""

    taus: np.ndarray
    N_phi: np.ndarray
    W_phi: np.ndarray
    W_phi_form1: np.ndarray
    Psi: np.ndarray
    P: np.ndarray
    ric_term: np.ndarray
    steps: np.ndarray
    masses: dict = field(default_factory=dict, repr=False)

    @property
    def N_H(self):
        return self.N_phi - self.P / 3.0

    @property
    def W_H(self):
        return self.W_phi - (self.Psi + self.P) / 3.0

    @property
    def dW_H_assembled(self):
        tau = self.taus[:, None]
        return -2 * tau * self.ric_term - self.Psi / (3 * tau)

    def record(self, j, b=0) -> EntropyRecord:
        return EntropyRecord(float(self.taus[j]), float(self.N_phi[j, b]), float(self.W_phi[j, b]),
                             float(self.Psi[j, b]), float(self.P[j, b]))


def slab_entropies(history, sol, j_min=1) -> SlabEntropies:
    """Entropies at every kept step with ``j >= j_min`` (``tau > 0``)."""
    Psi, P = psi_and_p(sol)
    js = [j for j, k in enumerate(sol.steps) if j >= j_min and int(k) in sol.masses]
    rows = {"N_phi": [], "W_phi": [], "W_phi_form1": [], "ric_term": []}
    for j in js:
        k = int(sol.steps[j])
        terms = slice_terms(history, k, sol.mass(k), sol.taus[j])
        for name in rows:
            rows[name].append(terms[name])
    js = np.array(js, dtype=int)
    return SlabEntropies(sol.taus[js], *(np.array(rows[n]) for n in ("N_phi", "W_phi", "W_phi_form1")),
                         Psi[js], P[js], np.array(rows["ric_term"]), sol.steps[js], sol.masses)


STENCIL = 7


def _fd_weights(offsets):
    """First-derivative weights on integer ``offsets`` (unit spacing)."""
    offsets = np.asarray(offsets, dtype=float)
    V = np.vander(offsets, increasing=True).T
    rhs = np.zeros(len(offsets))
    rhs[1] = 1.0
    return np.linalg.solve(V, rhs)


def _derivative(values, h, j):
    """Sixth-order derivative at row ``j`` on a 7-point window (shifted at the ends)."""
    n = len(values)
    if n < STENCIL:
        return np.full_like(values[j], np.nan)
    lo = min(max(j - STENCIL // 2, 0), n - STENCIL)
    w = _fd_weights(np.arange(lo, lo + STENCIL) - j)
    return np.tensordot(w, values[lo:lo + STENCIL], axes=1) / h


def derivative_residuals(ent: SlabEntropies, j, b=0) -> dict:
    h = float(ent.taus[1] - ent.taus[0])
    tau = ent.taus[:, None]
    return {
        "tauN_phi": float(_derivative(tau * ent.N_phi, h, j)[b] - ent.W_phi[j, b]),
        "tauN_H": float(_derivative(tau * ent.N_H, h, j)[b] - ent.W_H[j, b]),
        "dW_H": float(_derivative(ent.W_H, h, j)[b] - ent.dW_H_assembled[j, b]),
        "W_forms": float(ent.W_phi[j, b] - ent.W_phi_form1[j, b]),
    }


def entropy_report(history, sol, tau_grid, b=0, ent=None) -> list:
    """Records at the stored steps nearest to ``tau_grid``.

    A requested ``tau`` must lie within half a step of a stored one inside
    the slab; otherwise a ``ValueError`` is raised.
    """
    ent = ent or slab_entropies(history, sol)
    h = float(sol.taus[1] - sol.taus[0])
    out = []
    for tau in tau_grid:
        j = int(np.argmin(np.abs(ent.taus - tau)))
        if abs(ent.taus[j] - tau) > 0.5 * h + 1e-12:
            raise ValueError(f"tau={tau:g} lies outside the slab "
                             f"[{ent.taus[0]:g}, {ent.taus[-1]:g}]")
        rec = ent.record(j, b)
        rec.residuals = derivative_residuals(ent, j, b)
        out.append(rec)
    return out


def nash_average_residual(ent: SlabEntropies, b=0) -> float:
    """Max of ``|tau N^H - tau_0 N^H(tau_0) - int_{tau_0}^tau W^H|`` over the slab."""
    tau = ent.taus
    integral = CubicSpline(tau, ent.W_H[:, b]).antiderivative()(tau)
    lhs = tau * ent.N_H[:, b] - tau[0] * ent.N_H[0, b]
    return float(np.max(np.abs(lhs - integral)))


# -- bound checks ---------------------------------------------------------------

@dataclass
class EntropyParams:
    """``C`` is a tolerance constant or a mapping by check name; ``abs_tol`` overrides it."""

    C: object
    tau_min: float
    bases: tuple = (0,)
    H_n: float = field(default_factory=default_h_n)
    radii: tuple = ()
    kernel_stride: int = 8
    run_id: str = ""
    abs_tol: float | None = None
    seed: int = 0
    M: int = 32


def _pointed(history, b, k0, keep=None):
    return solve_conjugate(history, [b], k0=k0, keep=keep)


def _n_star(history, sol, k):
    """``N^{phi*}_{t_k}`` for every base of a full-kernel solve."""
    j = sol.step_of(k)
    return slice_terms(history, k, sol.mass(k), sol.taus[j])["N_phi"]


def check_monotonicity(history, ent, tol, ctx) -> list:
    """(B1) identities and the monotonicity consequences; ``tol(name)`` gives slack."""
    NH, WH = ent.N_H[:, 0], ent.W_H[:, 0]
    h = float(ent.taus[1] - ent.taus[0])
    dW = np.gradient(WH, h)
    res = [derivative_residuals(ent, j) for j in range(len(ent.taus))]
    worst = {key: float(np.nanmax([abs(r[key]) for r in res])) for key in res[0]}
    out = [
        CheckReport("entropy.B1_tauN_derivative", worst["tauN_H"], 0.0, -worst["tauN_H"],
                    tol("entropy.B1_tauN_derivative"), context=dict(ctx, tauN_phi=worst["tauN_phi"])),
        CheckReport("entropy.B1_dW_identity", worst["dW_H"], 0.0, -worst["dW_H"],
                    tol("entropy.B1_dW_identity"), context=dict(ctx)),
        CheckReport("entropy.W_forms", worst["W_forms"], 0.0, -worst["W_forms"],
                    tol("entropy.W_forms"), context=dict(ctx)),
        CheckReport("entropy.N_H_monotone", float(np.max(np.diff(NH))), 0.0,
                    -float(np.max(np.diff(NH))), tol("entropy.N_H_monotone"), context=dict(ctx)),
        CheckReport("entropy.W_le_N", float(np.max(WH - NH)), 0.0, -float(np.max(WH - NH)),
                    tol("entropy.W_le_N"), context=dict(ctx)),
        CheckReport("entropy.dW_nonpositive", float(np.max(dW)), 0.0, -float(np.max(dW)),
                    tol("entropy.dW_nonpositive"), context=dict(ctx)),
    ]
    return out


def check_nash_gradient(history, k0, tau_min, tol, ctx) -> list:
    """(B2) and (B3) from full-kernel solves at base times ``k0 - 1, k0, k0 + 1``."""
    dt = history.dt
    taus_all = history.times[k0] - history.times
    s_idx = [k for k in range(0, k0) if taus_all[k] >= tau_min]
    s_idx = sorted(set(s_idx[:: max(1, len(s_idx) // 6)] + [0]))
    sols = {k: solve_conjugate(history, "all", k0=k, keep=s_idx) for k in (k0 - 1, k0, k0 + 1)}
    g = history.geometry(k0)
    grad_margin, box_hi, box_lo = math.inf, math.inf, math.inf
    for s in s_idx:
        tau = taus_all[s]
        Rmin = float(np.min(generalized_scalar(history.state(s))))
        Ns = {k: _n_star(history, sol, s) for k, sol in sols.items()}
        psi_k0 = psi_and_p(sols[k0])[0][sols[k0].step_of(s)]
        rhs = np.sqrt(np.maximum(N_DIM / (2 * tau) - Rmin + psi_k0 / (3 * tau), 0.0))
        grad = np.abs(d_central(g, Ns[k0]))
        grad_margin = min(grad_margin, float(np.min(rhs - grad)))
        box = (Ns[k0 + 1] - Ns[k0 - 1]) / (2 * dt) - laplacian(g, Ns[k0])
        box_hi = min(box_hi, float(np.min(-box)))
        box_lo = min(box_lo, float(np.min(box + N_DIM / (2 * tau))))
    c = dict(ctx, base_time=float(history.times[k0]), n_s=len(s_idx))
    return [
        CheckReport("entropy.B2_nash_gradient", 0.0, 0.0, grad_margin, tol("entropy.B2_nash_gradient"),
                    context=dict(c)),
        CheckReport("entropy.B3_box_nash", 0.0, 0.0, min(box_hi, box_lo), tol("entropy.B3_box_nash"),
                    context=dict(c, upper_margin=box_hi, lower_margin=box_lo)),
    ]


def check_w1(history, b1, k1, b2, k2, tol, ctx, seed=0) -> tuple:
    """(B4) plus self-distance, point-mass and duality checks."""
    s1 = _pointed(history, b1, k1)
    s2 = _pointed(history, b2, k2)
    k_top = min(k1 % len(history), k2 % len(history))
    ks = list(range(0, k_top + 1))
    w1 = np.array([w1_distance(history.geometry(k), s1.mass(k)[0], s2.mass(k)[0]) for k in ks])
    drop = float(np.min(np.diff(w1))) if len(w1) > 1 else 0.0
    g = history.geometry(k_top)
    m1, m2 = s1.mass(k_top)[0], s2.mass(k_top)[0]
    duality = float(np.max(kantorovich_lower_bounds(g, m1, m2, 100, seed)) - w1[-1])
    self_d = w1_distance(g, m1, m1)
    out = [
        CheckReport("transport.B4_w1_monotone", float(w1[0]), float(w1[-1]), drop,
                    1e-6 + tol("transport.B4_w1_monotone"),
                    context=dict(ctx, pair=[b1, b2])),
        CheckReport("transport.kantorovich_duality", duality, 0.0, -duality, 1e-10, context=dict(ctx)),
        CheckReport("transport.w1_self", self_d, 0.0, -self_d, 0.0, context=dict(ctx)),
    ]
    return out, s1, s2, w1


def check_nash_oscillation(history, s1, s2, w1_series, tol, ctx) -> CheckReport:
    """(B5) with ``s`` the initial time and several ``t*``."""
    k1, k2 = s1.k0, s2.k0
    t = history.times
    H2 = 6 * history.fields[:, 3] ** 2
    Rmin = float(np.min(generalized_scalar(history.state(0))))
    N1 = _slice_n(history, s1, 0)
    N2 = _slice_n(history, s2, 0)
    worst = math.inf
    k_top = min(k1, k2)
    for k_star in range(max(1, k_top // 4), k_top + 1, max(1, k_top // 8)):
        A = float(np.max(H2[: k_star + 1]))
        coef = math.sqrt(max(N_DIM / (2 * (t[k_star] - t[0])) - Rmin + A / 3, 0.0))
        for (Na, Nb, kb) in ((N1, N2, k2), (N2, N1, k1)):
            rhs = coef * w1_series[k_star] + 0.5 * N_DIM * math.log((t[kb] - t[0]) / (t[k_star] - t[0]))
            worst = min(worst, rhs - (Na - Nb))
    return CheckReport("entropy.B5_nash_oscillation", 0.0, 0.0, worst, tol("entropy.B5_nash_oscillation"),
                       context=dict(ctx, R_min=Rmin))


def _slice_n(history, sol, k):
    j = sol.step_of(k)
    return float(slice_terms(history, k, sol.mass(k), sol.taus[j])["N_phi"][0])


def log_integral(t_star, t2):
    """``int_0^{t*} log(t2 / (t2 - s)) ds`` in closed form."""
    tail = (t2 - t_star) * math.log(t2 - t_star) if t2 > t_star else 0.0
    return t_star * math.log(t2) - t2 * math.log(t2) + t_star + tail


def check_p_bounds(history, full_sol, s1, s2, w1_series, ctx) -> tuple:
    """(B6) fitted gradient constant and (B7) oscillation bound of ``P*_0``."""
    t = history.times
    H2 = 6 * history.fields[:, 3] ** 2
    A = float(np.max(H2[: full_sol.k0 + 1]))
    tau = full_sol.taus[-1]
    P_star = psi_and_p(full_sol)[1][-1]
    grad = np.abs(d_central(history.geometry(full_sol.k0), P_star))
    C6 = float(np.max(grad) / (A * math.sqrt(tau))) if A > 0 else 0.0
    b6 = CheckReport("entropy.B6_p_gradient", C6, C6, 0.0 if math.isfinite(C6) else math.nan,
                     context=dict(ctx, A=A, max_grad=float(np.max(grad))))

    # order so that t1 <= t2
    (sa, sb) = (s1, s2) if s1.k0 <= s2.k0 else (s2, s1)
    t1, t2 = t[sa.k0], t[sb.k0]
    P1 = float(psi_and_p(sa)[1][-1, 0])
    P2 = float(psi_and_p(sb)[1][-1, 0])
    grad_H2 = max(float(np.max(np.abs(d_central(history.geometry(k), H2[k])))) for k in range(sb.k0 + 1))
    C_H = max(A, grad_H2, float(np.max(H2[: sb.k0 + 1])))
    k_star = max(0, sa.k0 - max(1, sa.k0 // 10))
    t_star = t[k_star]
    delta = float(w1_series[k_star])
    bracket = t1 - (1 - delta) * log_integral(t_star, t2)
    eps = t2 - t_star
    T = max(t2, 1 / t2) * (1 + 1e-9)
    form2 = eps * T - eps * math.log(eps) + 2 * delta * T if eps > 0 else math.nan
    C7 = max(0.0, P1 - P2) / form2 if form2 and math.isfinite(form2) else math.nan
    b7 = CheckReport("entropy.B7_p_oscillation", P1 - P2, C_H * bracket, C_H * bracket - (P1 - P2),
                     context=dict(ctx, C_measured=C_H, delta=delta, t_star=float(t_star),
                                  fitted_C=C7, eps=eps))
    return [b6, b7], {"B6_C": C6, "B7_C": C7}


def check_kernel_bounds(history, full_sol, tau_min, ctx) -> tuple:
    """(B8) sup of ``K tau^{n/2} exp(N*)`` and (B9) fitted gradient constants."""
    g = history.geometry(full_sol.k0)
    sup8, sup9 = 0.0, 0.0
    ks = [k for k in full_sol.kept if k < full_sol.k0 and full_sol.taus[full_sol.step_of(k)] >= tau_min]
    per_k = []
    for k in ks:
        tau = full_sol.taus[full_sol.step_of(k)]
        m = full_sol.mass(k)
        v = m / history.geometry(k).cell_volume
        N_star = slice_terms(history, k, m, tau)["N_phi"]
        ratio = v * tau ** (N_DIM / 2) * np.exp(N_star)[:, None]
        per_k.append((k, tau, v, ratio))
        sup8 = max(sup8, float(np.max(ratio)))
    C0 = math.e * sup8
    for k, tau, v, ratio in per_k:
        grad_x = np.abs(d_central(g, np.log(v)))  # derivative along the base axis
        sup9 = max(sup9, float(np.max(math.sqrt(tau) * grad_x / np.sqrt(np.log(C0 / ratio)))))
    c = dict(ctx, kernel="fiber-reduced", tau_min=tau_min, n_slices=len(ks))
    return [
        CheckReport("kernel.B8_heat_kernel_bound", sup8, sup8, 0.0 if np.isfinite(sup8) and sup8 > 0
                    else math.nan, context=dict(c)),
        CheckReport("kernel.B9_gradient_bound", sup9, sup9, 0.0 if np.isfinite(sup9) else math.nan,
                    context=dict(c, C0=C0)),
    ], {"B8_C": sup8, "B9_C": sup9, "B9_C0": C0}


def check_noncollapsing(history, ent, b, radii, H_n, ctx, M=32) -> tuple:
    """(B10) implied constants of both noncollapsing statements and the small-r limit."""
    out, consts = [], {}
    phi_min = float(np.min(history.fields[:, 4]))
    k0 = len(history) - 1
    g0 = history.geometry(k0)
    if phi_min < 0:
        out.append(CheckReport.not_applicable("noncollapsing.B10_entropy", "phi is negative",
                                              phi_min=phi_min, **ctx))
    else:
        cs = []
        for r in radii:
            j = int(np.argmin(np.abs(ent.taus - r * r)))
            ball = weighted_ball_volume(g0, history.fields[k0, 4], b, r, M)
            cs.append(ball.value / (math.exp(ent.N_H[j, 0]) * r**N_DIM))
        c_min = float(min(cs)) if cs else math.nan
        out.append(CheckReport("noncollapsing.B10_entropy", c_min, 0.0, c_min, context=dict(
            ctx, radii=list(radii), c=cs)))
        consts["B10_c"] = cs
    cs2 = []
    for r in radii:
        j = int(np.argmin(np.abs(ent.taus - r * r)))
        k = int(ent.steps[j])
        if k in ent.masses:
            sol_mass = ent.masses[k][0]
            z, var, _ = variance_and_center(history.geometry(k), sol_mass, ent.taus[j], H_n)
            ball = weighted_ball_volume(history.geometry(k), history.fields[k, 4], z,
                                        math.sqrt(2 * H_n) * r, M)
            cs2.append(ball.value / (math.exp(ent.N_phi[j, 0]) * r**N_DIM))
    if cs2:
        out.append(CheckReport("noncollapsing.B10_center", float(min(cs2)), 0.0, float(min(cs2)),
                               context=dict(ctx, c=cs2, H_n=H_n)))
        consts["B10_center_c"] = cs2
    g_init = history.geometry(0)
    r = g_init.L / 50
    ball = weighted_ball_volume(g_init, history.fields[0, 4], b, r, M)
    limit = OMEGA_3 * math.exp(-history.fields[0, 4][b])
    rel = ball.value / r**N_DIM / limit - 1
    out.append(CheckReport("noncollapsing.B10_small_r", ball.value / r**N_DIM, limit, -abs(rel), 0.02,
                           context=dict(ctx, r=r, relative_error=rel)))
    return out, consts


def eps_regularity_probe(pairs, ctx=None) -> CheckReport:
    """(B11) rank association of ``N^H(r^2)`` with ``r_Rm / r`` across runs."""
    pairs = np.asarray(pairs, dtype=float)
    ctx = dict(ctx or {})
    if len(pairs) < 3 or np.ptp(pairs[:, 0]) == 0 or np.ptp(pairs[:, 1]) == 0:
        return CheckReport.not_applicable("regularity.B11_probe", "degenerate scatter", n=len(pairs), **ctx)
    rho = float(spearmanr(pairs[:, 0], pairs[:, 1]).statistic)
    return CheckReport("regularity.B11_probe", rho, 0.0, rho, context=dict(ctx, n=len(pairs),
                                                                           pairs=pairs.tolist()))


def regularity_pair(history, ent, b, r) -> tuple:
    j = int(np.argmin(np.abs(ent.taus - r * r)))
    rr = curvature_radius(history, b, len(history) - 1)
    return float(ent.N_H[j, 0]), rr.r / r


def verify_entropy_bounds(history, params: EntropyParams) -> tuple:
    """Run (B1)-(B10) on one history; returns ``(reports, constants, extras)``."""
    K = len(history)

    def tol(name):
        if params.abs_tol is not None:
            return params.abs_tol
        return tolerance(params.C, history.N, history.dt, name)

    ctx = {"run": params.run_id, "N": history.N, "dt": history.dt}
    reports, consts = [], {}
    b1 = params.bases[0]
    b2 = params.bases[1] if len(params.bases) > 1 else (b1 + history.N // 4) % history.N
    sol = _pointed(history, b1, K - 1)
    if sol.mass_drift > 1e-10:
        warnings.warn(f"mass drift {sol.mass_drift:.3g}", RuntimeWarning)
    reports.append(CheckReport("conjugate.mass", sol.mass_drift, 0.0, -sol.mass_drift, 1e-10,
                               context=dict(ctx)))
    ent = slab_entropies(history, sol)
    window = ent.taus >= params.tau_min
    ent_w = restrict(ent, window)
    reports += check_monotonicity(history, ent_w, tol, ctx)

    k_mid = K // 2
    for k0 in (K - 2, k_mid):
        reports += check_nash_gradient(history, k0, params.tau_min, tol, dict(ctx, family=k0))
    rep_w1, s1, s2, w1 = check_w1(history, b1, K - 1, b2, K - 2, tol, ctx, params.seed)
    reports += rep_w1
    reports.append(check_nash_oscillation(history, s1, s2, w1, tol, ctx))

    full = solve_conjugate(history, "all", k0=K - 1,
                           keep=[k for k in range(0, K - 1, params.kernel_stride)])
    rep, c = check_p_bounds(history, full, s1, s2, w1, ctx)
    reports += rep
    consts.update(c)
    rep, c = check_kernel_bounds(history, full, params.tau_min, ctx)
    reports += rep
    consts.update(c)
    if params.radii:
        rep, c = check_noncollapsing(history, ent_w, b1, params.radii, params.H_n, ctx, params.M)
        reports += rep
        consts.update(c)
    return reports, consts, {"entropies": ent, "solution": sol}


def restrict(ent: SlabEntropies, mask) -> SlabEntropies:
    return SlabEntropies(ent.taus[mask], ent.N_phi[mask], ent.W_phi[mask], ent.W_phi_form1[mask],
                         ent.Psi[mask], ent.P[mask], ent.ric_term[mask], ent.steps[mask], ent.masses)
