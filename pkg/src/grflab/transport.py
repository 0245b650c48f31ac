"""Backward conjugate heat solves and transport on the reduced circle.

Solutions are carried as cell masses ``m_i = v_i w_i`` with ``w`` the cell
volume, so that the conservative step below preserves ``sum m`` exactly.
In masses the conjugate equation ``-v_s = lap v - (R - |H|^2/4) v`` is
``m_tau = D K D (m / w)`` because ``w`` itself evolves by
``w_t = (|H|^2/4 - R) w``. Time stepping is Crank-Nicolson in ``tau``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix, diags, identity
from scipy.sparse.linalg import splu

from .grid import GridGeometry, laplacian_weights

MAX_HALVINGS = 6


@dataclass(frozen=True)
class ReducedMeasure:
    """Cell masses on the grid at history index ``k``; sums to one."""

    mass: np.ndarray
    k: int

    def __post_init__(self):
        m = np.asarray(self.mass, dtype=float)
        if np.any(m < 0):
            raise ValueError("measure has negative mass")
        if abs(m.sum() - 1.0) > 1e-8:
            raise ValueError(f"measure has total mass {m.sum():.12g}, expected 1")
        object.__setattr__(self, "mass", m)

    def density(self, geom: GridGeometry) -> np.ndarray:
        return self.mass / geom.cell_volume


def _flux_matrix(geom: GridGeometry):
    """Sparse ``A`` with ``(A u)_i = F_{i+1/2}(u_{i+1} - u_i) - F_{i-1/2}(u_i - u_{i-1})``."""
    F = laplacian_weights(geom) * geom.Ly * geom.Lz / geom.dx
    N = geom.N
    i = np.arange(N)
    ip = (i + 1) % N
    rows = np.concatenate([i, i, ip, ip])
    cols = np.concatenate([ip, i, i, ip])
    vals = np.concatenate([F, -F, F, -F])
    # duplicates (N <= 2) are summed by the conversion
    return coo_matrix((vals, (rows, cols)), shape=(N, N)).tocsc()


def _interp_geometry(history, k_lo, theta):
    """Geometry a fraction ``theta`` of the way from ``k_lo`` to ``k_lo + 1``."""
    if theta in (0, 1):
        return history.geometry(k_lo + int(theta))
    y = (1 - theta) * history.fields[k_lo] + theta * history.fields[k_lo + 1]
    return history.geometry(k_lo).with_fields(y[0], y[1], y[2])


@dataclass
class ConjugateSolution:
    """Backward solve from base time index ``k0`` down to ``k_min``.

    ``steps`` are history indices in decreasing order and ``taus`` the matching
    ``t0 - t``. ``psi[j, b]`` is ``int |H|^2 dnu`` at step ``j`` for base ``b``;
    ``masses`` holds the slab at the indices listed in ``kept``.
    """

    k0: int
    t0: float
    bases: tuple
    steps: np.ndarray
    taus: np.ndarray
    psi: np.ndarray
    masses: dict
    mass_drift: float
    data: str = "delta"
    retries: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def kept(self):
        return sorted(self.masses)

    def mass(self, k) -> np.ndarray:
        try:
            return self.masses[k]
        except KeyError:
            raise ValueError(f"history index {k} is not stored in this slab") from None

    def step_of(self, k) -> int:
        return int(self.k0 - k)

    def measure(self, k, b=0) -> ReducedMeasure:
        return ReducedMeasure(self.mass(k)[b], k)


def _step(m, geom_old, geom_new, dtau):
    w_old, w_new = geom_old.cell_volume, geom_new.cell_volume
    rhs = m + 0.5 * dtau * (_flux_matrix(geom_old) @ (m.T / w_old[:, None])).T
    lhs = identity(geom_new.N, format="csc") - 0.5 * dtau * _flux_matrix(geom_new) @ diags(1 / w_new)
    return splu(lhs.tocsc()).solve(np.ascontiguousarray(rhs.T)).T


def _advance(history, m, k_hi, dtau, depth=0):
    """Step from history index ``k_hi`` to ``k_hi - 1`` with halving on positivity loss."""
    pieces = 2**depth
    out = m
    for p in range(pieces):
        th_start = 1 - p / pieces
        th_end = 1 - (p + 1) / pieces
        out = _step(out, _interp_geometry(history, k_hi - 1, th_start),
                    _interp_geometry(history, k_hi - 1, th_end), dtau / pieces)
        if np.any(out <= 0) or not np.all(np.isfinite(out)):
            if depth >= MAX_HALVINGS:
                raise RuntimeError(f"positivity lost at history index {k_hi} after "
                                   f"{MAX_HALVINGS} step halvings")
            return _advance(history, m, k_hi, dtau, depth + 1)
    return out, depth


def initial_masses(geom: GridGeometry, bases, data="delta") -> np.ndarray:
    N = geom.N
    if data == "delta":
        m = np.zeros((len(bases), N))
        m[np.arange(len(bases)), np.asarray(bases) % N] = 1.0
        return m
    if data == "uniform":
        w = geom.cell_volume
        return np.repeat((w / w.sum())[None, :], max(1, len(bases)), axis=0)
    raise ValueError(f"unknown conjugate data {data!r}")


def solve_conjugate(history, bases, k0=-1, k_min=0, data="delta", keep=None) -> ConjugateSolution:
    """Solve ``box* v = 0`` backward from ``(x_b, t_{k0})`` for every base ``x_b``.

    ``bases`` is a sequence of grid indices (``"all"`` for the full kernel).
    ``keep`` lists history indices whose slabs are retained (default: all).
    """
    K = len(history)
    k0 = k0 % K
    if not 0 <= k_min < k0:
        raise ValueError(f"need 0 <= k_min < k0, got k_min={k_min}, k0={k0}")
    if isinstance(bases, str):
        if bases != "all":
            raise ValueError("bases must be a sequence of indices or 'all'")
        bases = range(history.N)
    bases = tuple(int(b) % history.N for b in bases)
    keep = set(range(k_min, k0 + 1)) if keep is None else {k % K for k in keep}
    g0 = history.geometry(k0)
    m = initial_masses(g0, bases, data)
    H2 = 6 * history.fields[:, 3] ** 2
    steps = np.arange(k0, k_min - 1, -1)
    psi = np.empty((len(steps), len(bases)))
    psi[0] = m @ H2[k0]
    masses = {k0: m.copy()} if k0 in keep else {}
    drift = float(np.max(np.abs(m.sum(axis=1) - 1)))
    retries = 0
    for j, k in enumerate(steps[1:], start=1):
        dtau = history.times[k + 1] - history.times[k]
        m, depth = _advance(history, m, k + 1, dtau)
        retries += depth
        drift = max(drift, float(np.max(np.abs(m.sum(axis=1) - 1))))
        psi[j] = m @ H2[k]
        if k in keep:
            masses[k] = m.copy()
    if retries:
        warnings.warn(f"conjugate solve needed {retries} step halvings", RuntimeWarning)
    taus = history.times[k0] - history.times[steps]
    return ConjugateSolution(k0, float(history.times[k0]), bases, steps, taus, psi, masses,
                             drift, data, retries)


# -- circle transport -----------------------------------------------------------

def _segments(geom: GridGeometry):
    s = geom.arclength
    return s[:-1], np.diff(s)


def w1_distance(geom: GridGeometry, mu1, mu2) -> float:
    """Exact W1 between point masses at cell centers on the reduced circle.

    With ``G`` the running sum of ``mu1 - mu2`` over the arcs of lengths
    ``l_i``, ``W1 = min_k sum l_i |G_i - k|``; the minimizer is the weighted
    median of ``G``.
    """
    m1 = np.asarray(getattr(mu1, "mass", mu1), dtype=float)
    m2 = np.asarray(getattr(mu2, "mass", mu2), dtype=float)
    for m in (m1, m2):
        if abs(m.sum() - 1) > 1e-8:
            raise ValueError(f"measure is not normalized (mass {m.sum():.12g})")
    _, ell = _segments(geom)
    G = np.cumsum(m1 - m2)
    order = np.argsort(G, kind="stable")
    cw = np.cumsum(ell[order])
    k = G[order][np.searchsorted(cw, 0.5 * cw[-1])]
    return float(np.sum(ell * np.abs(G - k)))


def kantorovich_lower_bounds(geom: GridGeometry, mu1, mu2, n: int = 100, seed: int = 0):
    """``int f d(mu1 - mu2)`` for ``n`` random 1-Lipschitz ``f`` on the circle."""
    m1 = np.asarray(getattr(mu1, "mass", mu1), dtype=float)
    m2 = np.asarray(getattr(mu2, "mass", mu2), dtype=float)
    _, ell = _segments(geom)
    rng = np.random.default_rng(seed)
    out = np.empty(n)
    for i in range(n):
        u = rng.uniform(-1, 1, geom.N)
        u -= np.dot(u, ell) / ell.sum()
        u /= max(1.0, float(np.max(np.abs(u))))
        f = np.concatenate([[0.0], np.cumsum(u * ell)[:-1]])
        out[i] = float(np.dot(f, m1 - m2))
    return out


def variance_and_center(geom: GridGeometry, mass, tau: float, H_n: float):
    """``(z, var(delta_z, nu), is_center)`` minimizing over grid points ``z``."""
    m = np.asarray(getattr(mass, "mass", mass), dtype=float)
    var = geom.distance_matrix**2 @ m
    z = int(np.argmin(var))
    return z, float(var[z]), bool(var[z] <= H_n * tau)


def default_h_n(n: int = 3) -> float:
    return (n - 1) * math.pi**2 / 2 + 4
