"""Independent reference computations used to cross-check the grid solvers."""

from __future__ import annotations

import math

import numpy as np


def _d1(fun, x, h):
    return (fun(x - 2 * h) - 8 * fun(x - h) + 8 * fun(x + h) - fun(x + 2 * h)) / (12 * h)


def christoffel_ricci(metric, x, h=1e-3):
    """Frame Ricci diagonal from a general coordinate metric ``metric(x) -> (3, 3)``.

    The metric may depend on the first coordinate only. Christoffel symbols
    are built from fourth-order differences of ``metric`` and differentiated
    once more to assemble ``Ric_jk = d_i G^i_jk - d_j G^i_ik + G G - G G``.
    """

    def gamma(xx):
        g = np.asarray(metric(xx), dtype=float)
        dg = np.zeros((3, 3, 3))  # dg[k, i, j] = d_k g_ij
        dg[0] = _d1(lambda s: np.asarray(metric(s), dtype=float), xx, h)
        ginv = np.linalg.inv(g)
        low = 0.5 * (np.einsum("jkl->ljk", dg) + np.einsum("kjl->ljk", dg) - dg)
        # low[l, j, k] = (d_j g_lk + d_k g_lj - d_l g_jk) / 2
        return np.einsum("il,ljk->ijk", ginv, low)

    G = gamma(x)
    dG = np.zeros((3, 3, 3, 3))  # dG[m, i, j, k] = d_m G^i_jk
    dG[0] = _d1(gamma, x, h)
    ric = (np.einsum("iijk->jk", dG) - np.einsum("jiik->jk", dG)
           + np.einsum("iip,pjk->jk", G, G) - np.einsum("ijp,pik->jk", G, G))
    g = np.asarray(metric(x), dtype=float)
    return np.diag(ric) / np.diag(g)


def theta_heat_kernel(s, tau, circumference, terms=None):
    """Heat kernel of the unit-speed circle at arclength offsets ``s``."""
    s = np.asarray(s, dtype=float)
    if terms is None:
        terms = 4 + int(math.ceil(math.sqrt(40 * tau) / circumference))
    k = np.arange(-terms, terms + 1)
    d = s[..., None] + circumference * k
    return np.sum(np.exp(-d**2 / (4 * tau)), axis=-1) / math.sqrt(4 * math.pi * tau)


def flat_fiber_delta_entropy(tau, circumference, fiber_area, n_points=4096):
    """``N`` of the fiber-uniform circle heat kernel on a flat 3-torus.

    The density is ``theta(s) / fiber_area`` and ``f = -log v - (3/2) log(4 pi tau)``.
    """
    s = (np.arange(n_points) + 0.5) * circumference / n_points - circumference / 2
    k = theta_heat_kernel(s, tau, circumference)
    ds = circumference / n_points
    v = k / fiber_area
    f = -np.log(v) - 1.5 * math.log(4 * math.pi * tau)
    return float(np.sum(f * k) * ds) - 1.5
