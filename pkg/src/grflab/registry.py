"""Fixed registry of check names and the mathematical statement each one tests.

Every CheckReport written to an artifact must use a name listed here.
"""

from __future__ import annotations

STATEMENTS = {
    # pointwise algebra
    "pointwise.weitzenbock": "<Ric(H), H> = 3<Ric, H^2> + 3 R_H",
    "pointwise.rh_4d_first": "n = 4: R_H = R|H|^2/3 - 2<Ric, H^2>",
    "pointwise.rh_4d_second": "n = 4: R_H = -R|H|^2/3 + (2/3) Ric(X, X)|H|^2, X unit along *H",
    "pointwise.eigenstructure_4d": "n = 4: H^2 has eigenvalues (|H|^2/3)(1, 1, 1, 0) with kernel *H",
    "pointwise.trace_law": "tr H^2 = |H|^2",
    # homogeneous oracle
    "oracle.homogeneous_state": "flat torus model: h = h0 (1 + 3 h0^2 t)^(-1/2), A and phi in closed form",
    "oracle.homogeneous_order": "rk4 converges at fourth order on the flat torus model",
    "oracle.entropy_closed_form": "flat torus model: N^phi, Psi, P, N^H, W^H equal their closed forms",
    "oracle.entropy_derivatives": "d/dtau(tau N^phi) = W^phi and d/dtau(tau N^H) = W^H",
    "oracle.golden_entropy": "computed entropy table agrees with the shipped closed-form table",
    # flow identities
    "identity.evolve_H": "n = 3, |H|^2 = 6 h^2: box |H|^2 = -12|nabla h|^2 - 18 h^4 + 12 R h^2",
    "identity.volume": "d/dt Vol = int (|H|^2/4 - R) dg",
    "identity.h_l2": "d/dt int |H|^2 = int (-2|d*H|^2 - (3/2)|H^2|^2 + |H|^4/4 + 6<Ric, H^2> - R|H|^2)",
    "identity.evolve_R": "box R^{H,phi} = 2|Ric^{H,phi}|^2",
    "identity.rh_reduction": "n = 3: R_H = -2 h^2 R",
    "refinement.identity_order": "identity residuals shrink at second order under N -> 2N",
    # maximum principle bounds
    "bound.h_max_principle": "n = 3, |R| <= C0: |h| <= max(sqrt(2 C0 / 3), sup |h(0)|)",
    "bound.torsion_rm": "n = 3, |Rm| <= K: |H|^2 <= max(C_3 K, sup |H(0)|^2)",
    "bound.rphi_min_monotone": "min_x R^{H,phi} is non-decreasing in t",
    "bound.volume_gronwall": "Vol(t) <= e^{-3 R0 t} (Vol(0) + 2 int_0^t e^{3 R0 s} int R ds)",
    "bound.super_ricci": "dg/dt >= -2 Ric (H^2 is positive semidefinite)",
    # conjugate heat flow and entropies
    "conjugate.mass": "int v dg_s = 1 for every s",
    "entropy.B1_tauN_derivative": "d/dtau(tau N^H) = W^H",
    "entropy.B1_dW_identity": "dW^H/dtau = -2 tau int |Ric^{H,f+phi} - g/(2 tau)|^2 dnu - Psi/(3 tau)",
    "entropy.W_forms": "int (tau R^{H,f+phi} + f - n) dnu = int (tau (R^phi + |nabla f|^2) + f - n) dnu",
    "entropy.N_H_monotone": "N^H is non-increasing in tau",
    "entropy.W_le_N": "W^H <= N^H",
    "entropy.dW_nonpositive": "dW^H/dtau <= 0",
    "entropy.nash_average": "N^H(tau) = (1/tau) int_0^tau W^H",
    "entropy.B2_nash_gradient": "|nabla N*_s| <= (n/(2(t-s)) - R^phi_min + Psi/(3(t-s)))^(1/2)",
    "entropy.B3_box_nash": "-n/(2(t-s)) <= box N*_s <= 0",
    "entropy.B5_nash_oscillation": "N*_s(x1,t1) - N*_s(x2,t2) <= sqrt(n/(2(t*-s)) - R_min + A/3) W1 + (n/2) log((t2-s)/(t*-s))",
    "entropy.B6_p_gradient": "|nabla P*_s| <= C A sqrt(t-s); smallest working C",
    "entropy.B7_p_oscillation": "P*_0(x1,t1) - P*_0(x2,t2) <= C_H (t1 - (1-delta) int_0^t* log(t2/(t2-s)) ds); fitted C of the eps T form",
    "rescaling.entropy": "entropies are invariant under parabolic rescaling",
    # transport
    "transport.w1_self": "W1(mu, mu) = 0",
    "transport.w1_delta_pair": "W1 of two point masses equals their distance",
    "transport.kantorovich_duality": "int f d(mu1 - mu2) <= W1 for 1-Lipschitz f",
    "transport.B4_w1_monotone": "t -> W1(nu_{x1,t1}(t), nu_{x2,t2}(t)) is non-decreasing",
    "transport.w1_static_equality": "static flat torus: W1 between isometric kernels is constant in t",
    # kernel bounds
    "kernel.B8_heat_kernel_bound": "K (t-s)^{n/2} exp(N*_s) <= C; fiber-reduced kernel",
    "kernel.B9_gradient_bound": "|nabla_x K| / K <= C (t-s)^{-1/2} sqrt(log(C0 exp(-N*_s) / ((t-s)^{n/2} K)))",
    "refinement.constants": "fitted constants are stable under N -> 2N",
    # volume
    "noncollapsing.B10_entropy": "phi >= 0: |B(x0, t0, r)|_phi >= c exp(N^H(r^2)) r^n",
    "noncollapsing.B10_center": "|B(z, t0 - r^2, sqrt(2 H_n) r)|_phi >= c exp(N^phi(r^2)) r^n at an H_n-center z",
    "noncollapsing.B10_small_r": "r^{-n} |B(x0, 0, r)|_phi -> omega_n e^{-phi(x0, 0)}",
    "noncollapsing.flat_small_r": "flat torus, constant phi: r^{-3}|B|_phi = (4 pi / 3) e^{-phi} at small r",
    "regularity.B11_probe": "larger N^H(r^2) goes with larger r_Rm / r",
}


def paper_statement(name: str) -> str:
    try:
        return STATEMENTS[name]
    except KeyError:
        raise KeyError(f"check {name!r} is not in the registry") from None
