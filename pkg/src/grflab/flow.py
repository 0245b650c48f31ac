"""Method-of-lines generalized Ricci flow on the cohomogeneity-one torus.

The evolved fields are ``(a, b, c, h, phi)`` with ``H = h dVol``:

    a' = a (h^2/2 - Ric_xx)   (same for b, c),
    h' = lap h + R h - 3/2 h^3,
    phi' = lap phi + h^2.

The metric equation is ``g' = -2 Ric + H^2 / 2`` with ``H^2 = 2 h^2 g``.
"""

from __future__ import annotations

import math
from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np

from .grid import (
    GridGeometry,
    codifferential_h,
    curvature,
    d_central,
    grad_sq,
    hessian_diag,
    laplacian,
)
from .integrators import integrate
from .records import CheckReport, NOT_APPLICABLE, write_csv
from .tensor_point import AlgebraicCurvature, ThreeForm, r_h

FIELDS = ("a", "b", "c", "h", "phi")
DEFAULT_CFL = 0.2
# torsion/curvature constant in 3D with full-sum norms: |R| <= sqrt(3)|Rm|
C3_TORSION = 4.0 * math.sqrt(3.0)


@dataclass(frozen=True, eq=False)
class FlowState:
    t: float
    geom: GridGeometry
    h: np.ndarray
    phi: np.ndarray

    def __post_init__(self):
        for name in ("h", "phi"):
            arr = np.array(getattr(self, name), dtype=float)
            if arr.shape != (self.geom.N,):
                raise ValueError(f"field {name} has shape {arr.shape}, expected ({self.geom.N},)")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def as_array(self) -> np.ndarray:
        g = self.geom
        return np.stack([g.a, g.b, g.c, self.h, self.phi])

    @classmethod
    def from_array(cls, t, y, like: GridGeometry) -> "FlowState":
        return cls(float(t), like.with_fields(y[0], y[1], y[2]), y[3], y[4])

    def norm_h_sq(self) -> np.ndarray:
        """``|H|^2`` in the full-sum convention."""
        return 6.0 * self.h**2

    def rescaled(self, lam: float) -> "FlowState":
        """Parabolic rescaling ``(lam^-2 g, lam^-2 H)`` at time ``t / lam^2``."""
        g = self.geom
        return FlowState(self.t / lam**2, g.with_fields(g.a / lam, g.b / lam, g.c / lam),
                         lam * self.h, self.phi)


def _metric_rhs(geom, h):
    cf = curvature(geom)
    half = 0.5 * h**2
    return (geom.a * (half - cf.ric_xx), geom.b * (half - cf.ric_yy),
            geom.c * (half - cf.ric_zz), cf)


def flow_rhs(state: FlowState) -> np.ndarray:
    """Time derivative of ``(a, b, c, h, phi)`` as a ``(5, N)`` array."""
    g, h, phi = state.geom, state.h, state.phi
    da, db, dc, cf = _metric_rhs(g, h)
    dh = laplacian(g, h) + cf.scalar * h - 1.5 * h**3
    dphi = laplacian(g, phi) + h**2
    return np.stack([da, db, dc, dh, dphi])


def cfl_limit(geom: GridGeometry, cfl: float = DEFAULT_CFL) -> float:
    """Largest stable explicit step; the diffusion coefficient is one."""
    return cfl * float(np.min(geom.a * geom.dx)) ** 2


def _valid(y):
    return "" if np.all(y[:3] > 0) else "non-positive metric"


@dataclass
class FlowHistory:
    """Every stored state of a run, as a ``(K, 5, N)`` array."""

    times: np.ndarray
    fields: np.ndarray
    N: int
    L: float
    Ly: float
    Lz: float
    dt: float
    scheme: str = "rk4"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.fields = np.asarray(self.fields, dtype=float)
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("history times must be strictly increasing")
        self._geoms = {}

    def __len__(self):
        return len(self.times)

    def geometry(self, k) -> GridGeometry:
        k = k % len(self.times)
        if k not in self._geoms:
            a, b, c = self.fields[k, :3]
            self._geoms[k] = GridGeometry(self.N, self.L, self.Ly, self.Lz, a, b, c)
        return self._geoms[k]

    def state(self, k) -> FlowState:
        k = k % len(self.times)
        return FlowState(self.times[k], self.geometry(k), self.fields[k, 3], self.fields[k, 4])

    def index_of(self, t) -> int:
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > 1e-9 * max(1.0, abs(t)):
            raise ValueError(f"time {t} is not a stored time")
        return k

    @property
    def cfl_numbers(self) -> np.ndarray:
        amin = np.min(self.fields[:, 0], axis=1)
        return self.dt / (amin * self.L / self.N) ** 2

    @classmethod
    def from_homogeneous(cls, traj, N=8, L=2 * math.pi, Ly=2 * math.pi, Lz=2 * math.pi):
        """Embed a homogeneous trajectory ``(A, B, C, h, phi)`` as constant fields."""
        y = np.asarray(traj.states)
        cols = [np.sqrt(y[:, 0]), np.sqrt(y[:, 1]), np.sqrt(y[:, 2]), y[:, 3], y[:, 4]]
        fields = np.stack([np.repeat(col[:, None], N, axis=1) for col in cols], axis=1)
        dt = float(traj.times[1] - traj.times[0])
        return cls(traj.times, fields, N, L, Ly, Lz, dt, "homogeneous")

    def save(self, directory) -> None:
        """Raw arrays as ``.npy`` (bitwise reproducible)."""
        from pathlib import Path

        d = Path(directory)
        np.save(d / "times.npy", self.times)
        np.save(d / "fields.npy", self.fields)

    def summary_rows(self, residuals=None):
        for k, t in enumerate(self.times):
            row = [float(t)]
            for j in range(5):
                f = self.fields[k, j]
                row += [float(f.min()), float(f.max()), float(f.mean())]
            if residuals is not None:
                row += [float(residuals[name][k]) for name in sorted(residuals)]
            yield row

    def to_csv(self, path, residuals=None) -> None:
        header = ["t"] + [f"{n}_{s}" for n in FIELDS for s in ("min", "max", "mean")]
        if residuals is not None:
            header += [f"res_{name}" for name in sorted(residuals)]
        write_csv(path, header, self.summary_rows(residuals))

    def snapshots_csv(self, path, times) -> None:
        rows = []
        for t in times:
            k = self.index_of(t)
            g = self.geometry(k)
            cf = curvature(g)
            for i in range(self.N):
                rows.append([float(self.times[k]), float(g.x[i]),
                             *map(float, self.fields[k, :, i]), float(cf.scalar[i]),
                             float(cf.rm_norm[i])])
        write_csv(path, ["t", "x", *FIELDS, "R", "rm_norm"], rows)


def run(state0: FlowState, t_end: float, dt: float, scheme: str = "rk4",
        cfl: float = DEFAULT_CFL, **kw) -> FlowHistory:
    """Integrate from ``state0`` to ``t_end`` storing every ``dt``.

    Explicit ``rk4`` steps must respect the parabolic CFL limit; the adaptive
    scheme controls its own step and only samples at multiples of ``dt``.
    """
    g0 = state0.geom
    if scheme == "rk4" and dt > cfl_limit(g0, cfl) * (1 + 1e-12):
        raise ValueError(f"dt={dt:g} violates the CFL limit {cfl_limit(g0, cfl):g}")
    if scheme == "adaptive":
        kw.setdefault("max_step", 2.5 * cfl_limit(g0, 1.0))

    def f(y):
        return flow_rhs(FlowState.from_array(0.0, y, g0))

    times, states = integrate(f, state0.as_array(), state0.t, t_end, dt, scheme,
                              valid=_valid, **kw)
    return FlowHistory(times, states, g0.N, g0.L, g0.Ly, g0.Lz, dt, scheme)


def step(state: FlowState, dt: float, scheme: str = "rk4", cfl: float = DEFAULT_CFL) -> FlowState:
    hist = run(state, state.t + dt, dt, scheme, cfl)
    return hist.state(-1)


# -- initial data ----------------------------------------------------------

def initial_state(family: str, N: int, L=2 * math.pi, Ly=2 * math.pi, Lz=2 * math.pi,
                  a0=1.0, b0=1.0, c0=1.0, h0=0.0, phi0=0.0, eps=0.0, k=1,
                  eps_h=None, eps_phi=None) -> FlowState:
    """Named initial-data families.

    ``flat`` and ``homogeneous`` are constant; ``perturbed`` modulates every
    field with wave number ``k`` (in units of ``2 pi / L``) and amplitude
    ``eps``.
    """
    g = GridGeometry.flat(N, L, Ly, Lz)
    one = np.ones(N)
    if family == "flat":
        return FlowState(0.0, g.with_fields(a0 * one, b0 * one, c0 * one), 0 * one, phi0 * one)
    if family == "homogeneous":
        return FlowState(0.0, g.with_fields(a0 * one, b0 * one, c0 * one), h0 * one, phi0 * one)
    if family == "perturbed":
        eh = eps if eps_h is None else eps_h
        ep = eps if eps_phi is None else eps_phi
        x = 2 * math.pi * k * g.x / L
        geom = g.with_fields(a0 * (1 + 0.5 * eps * np.sin(x)), b0 * np.exp(eps * np.sin(x + 1)),
                             c0 * np.exp(eps * np.cos(x)))
        return FlowState(0.0, geom, h0 * (1 + eh * np.cos(x)), phi0 + ep * np.sin(x))
    raise ValueError(f"unknown initial-data family {family!r}")


# -- derived fields ----------------------------------------------------------

def generalized_scalar(state: FlowState, cf=None) -> np.ndarray:
    """``R^{H,phi} = R - |H|^2/12 + 2 lap phi - |grad phi|^2``."""
    g = state.geom
    cf = cf or curvature(g)
    return cf.scalar - 0.5 * state.h**2 + 2 * laplacian(g, state.phi) - grad_sq(g, state.phi)


def bakry_emery(geom: GridGeometry, h, F, cf=None) -> np.ndarray:
    """Frame components ``(N, 3, 3)`` of ``Ric - H^2/4 + hess F - (d*H + i_{grad F} H)/2``."""
    cf = cf or curvature(geom)
    out = np.zeros((geom.N, 3, 3))
    hess = hessian_diag(geom, F)
    ric = cf.ricci
    for i in range(3):
        out[:, i, i] = ric[i] - 0.5 * h**2 + hess[i]
    dstar = codifferential_h(geom, h)[:, 1, 2]
    contraction = d_central(geom, F) * h  # (i_{grad F} H)_yz
    out[:, 1, 2] = -0.5 * (dstar + contraction)
    out[:, 2, 1] = -out[:, 1, 2]
    return out


def bakry_emery_norm_sq(geom, h, F, cf=None) -> np.ndarray:
    return np.sum(bakry_emery(geom, h, F, cf) ** 2, axis=(1, 2))


# -- monitors ----------------------------------------------------------------

def tolerance(C, N: int, dt: float, name: str = "") -> float:
    """``C (N^-2 + dt^2)``; ``C`` may be a mapping keyed by check name.

    A mapping is searched for the full name, then its family prefix, then
    ``"default"``.
    """
    if isinstance(C, Mapping):
        for key in (name, name.split(".")[0], "default"):
            if key in C:
                C = C[key]
                break
        else:
            raise KeyError(f"no tolerance constant for {name!r}")
    return float(C) * (N**-2.0 + dt**2)


def _time_derivative(values, dt):
    """Central differences at interior stored times; NaN at the ends."""
    out = np.full_like(values, np.nan, dtype=float)
    out[1:-1] = (values[2:] - values[:-2]) / (2 * dt)
    return out


def identity_residuals(history: FlowHistory) -> dict:
    """Per-time residuals of the four evolution identities.

    ``evolve_H``: box(6h^2) = -12|grad h|^2 - 18h^4 + 12 R h^2 (max over x);
    ``volume``: d/dt Vol = int(|H|^2/4 - R);
    ``h_l2``: d/dt int|H|^2 = int(-2|d*H|^2 - 3/2|H^2|^2 + |H|^4/4 + 6<Ric,H^2> - R|H|^2);
    ``evolve_R``: box R^{H,phi} = 2|Ric^{H,phi}|^2 (max over x).
    """
    K = len(history)
    if K < 3:
        raise ValueError("need at least three stored states")
    dt = history.dt
    h = history.fields[:, 3]
    H2 = 6 * h**2
    vols = np.array([history.geometry(k).volume for k in range(K)])
    hl2 = np.array([history.geometry(k).integrate(H2[k]) for k in range(K)])
    Rphi = np.empty_like(h)
    cfs = []
    for k in range(K):
        cf = curvature(history.geometry(k))
        cfs.append(cf)
        Rphi[k] = generalized_scalar(history.state(k), cf)
    dH2 = _time_derivative(H2, dt)
    dR = _time_derivative(Rphi, dt)
    dvol = _time_derivative(vols, dt)
    dhl2 = _time_derivative(hl2, dt)
    out = {name: np.full(K, np.nan) for name in ("evolve_H", "volume", "h_l2", "evolve_R")}
    for k in range(1, K - 1):
        g, cf, hk = history.geometry(k), cfs[k], h[k]
        rhs_a = -12 * grad_sq(g, hk) - 18 * hk**4 + 12 * cf.scalar * hk**2
        out["evolve_H"][k] = np.max(np.abs(dH2[k] - laplacian(g, H2[k]) - rhs_a))
        out["volume"][k] = abs(dvol[k] - g.integrate(0.25 * H2[k] - cf.scalar))
        # |d*H|^2 enters through <dd*H, H>, which is 3 |d*H|^2 in full-sum norms
        dstar_sq = np.sum(codifferential_h(g, hk) ** 2, axis=(1, 2))
        h2_sq = 12 * hk**4  # |H^2|^2 with H^2 = 2 h^2 g
        ric_h2 = 2 * hk**2 * cf.scalar
        dens = -2 * 3 * dstar_sq - 1.5 * h2_sq + 0.25 * H2[k] ** 2 + 6 * ric_h2 - cf.scalar * H2[k]
        out["h_l2"][k] = abs(dhl2[k] - g.integrate(dens))
        st = history.state(k)
        rhs_d = 2 * bakry_emery_norm_sq(g, hk, st.phi, cf)
        out["evolve_R"][k] = np.max(np.abs(dR[k] - laplacian(g, Rphi[k]) - rhs_d))
    return out


def rh_reduction_residual(history: FlowHistory, stride: int = 1) -> float:
    """Max of ``|R_H + 2 h^2 R|`` with ``R_H`` contracted from the full tensor."""
    worst = 0.0
    for k in range(0, len(history), stride):
        cf = curvature(history.geometry(k))
        h = history.fields[k, 3]
        for i in range(0, history.N, max(1, history.N // 16)):
            Kxy, Kxz, Kyz = cf.sectional[:, i]
            R = np.zeros((3, 3, 3, 3))
            for (p, q), kk in (((0, 1), Kxy), ((0, 2), Kxz), ((1, 2), Kyz)):
                R[p, q, q, p] = R[q, p, p, q] = kk
                R[p, q, p, q] = R[q, p, q, p] = -kk
            val = r_h(AlgebraicCurvature(R), ThreeForm.volume(3, h[i]))
            worst = max(worst, abs(val + 2 * h[i] ** 2 * cf.scalar[i]))
    return worst


def monitor_identities(history: FlowHistory, C, residuals=None) -> list:
    res = residuals if residuals is not None else identity_residuals(history)
    ctx = {"N": history.N, "dt": history.dt, "t_end": float(history.times[-1])}
    reports = []
    for name in ("evolve_H", "volume", "h_l2", "evolve_R"):
        worst = float(np.nanmax(res[name]))
        tol = tolerance(C, history.N, history.dt, f"identity.{name}")
        reports.append(CheckReport(f"identity.{name}", worst, 0.0, -worst, tol, context=dict(ctx)))
    rh = rh_reduction_residual(history, stride=max(1, len(history) // 8))
    reports.append(CheckReport("identity.rh_reduction", rh, 0.0, -rh, 1e-12, context=dict(ctx)))
    return reports


def monitor_bounds(history: FlowHistory, C, C0=None, K=None) -> list:
    """Maximum-principle, torsion, weighted-scalar and volume bounds.

    ``C0`` bounds ``|R|`` and ``K`` bounds ``|Rm|`` over the run; when given
    and exceeded by the measured values the dependent check is reported as
    not applicable. When omitted the measured values are used.
    """
    n_t = len(history)
    tol = tolerance(C, history.N, history.dt, "bound")
    h = history.fields[:, 3]
    cfs = [curvature(history.geometry(k)) for k in range(n_t)]
    R_max = max(float(np.max(np.abs(cf.scalar))) for cf in cfs)
    rm_max = max(float(np.max(cf.rm_norm)) for cf in cfs)
    ctx = {"N": history.N, "dt": history.dt, "R_abs_max": R_max, "rm_max": rm_max}
    out = []

    if C0 is not None and R_max > C0:
        out.append(CheckReport.not_applicable("bound.h_max_principle", "|R| exceeds C0",
                                              C0=C0, **ctx))
    else:
        c0 = R_max if C0 is None else C0
        bound = max(math.sqrt(2 * c0 / 3), float(np.max(np.abs(h[0]))))
        worst = float(np.max(np.abs(h)))
        out.append(CheckReport("bound.h_max_principle", worst, bound, bound - worst, 1e-8,
                               context=dict(ctx, C0=c0)))

    if K is not None and rm_max > K:
        out.append(CheckReport.not_applicable("bound.torsion_rm", "|Rm| exceeds K", K=K, **ctx))
    else:
        kk = rm_max if K is None else K
        bound = max(C3_TORSION * kk, float(np.max(6 * h[0] ** 2)))
        worst = float(np.max(6 * h**2))
        out.append(CheckReport("bound.torsion_rm", worst, bound, bound - worst, 1e-8,
                               context=dict(ctx, K=kk, C_n=C3_TORSION)))

    Rphi_min = np.array([float(np.min(generalized_scalar(history.state(k), cfs[k])))
                         for k in range(n_t)])
    drop = float(np.min(np.diff(Rphi_min))) if n_t > 1 else 0.0
    out.append(CheckReport("bound.rphi_min_monotone", float(Rphi_min[-1]), float(Rphi_min[0]),
                           drop, 1e-6 + tol, context=dict(ctx, worst_step_change=drop)))

    R0 = float(Rphi_min[0])
    vols = np.array([history.geometry(k).volume for k in range(n_t)])
    intR = np.array([history.geometry(k).integrate(cfs[k].scalar) for k in range(n_t)])
    t = history.times - history.times[0]
    integrand = 2 * np.exp(3 * R0 * t) * intR
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (integrand[1:] + integrand[:-1]) * np.diff(t))])
    bound = np.exp(-3 * R0 * t) * (vols[0] + cum)
    slack = (bound - vols) / vols[0]
    case = "positive" if R0 > 0 else ("zero" if R0 == 0 else "negative")
    k_worst = 1 + int(np.argmin(slack[1:])) if n_t > 1 else 0
    out.append(CheckReport("bound.volume_gronwall", float(vols[k_worst] / vols[0]),
                           float(bound[k_worst] / vols[0]), float(slack[k_worst]), tol,
                           context=dict(ctx, R_phi_0=R0, case=case)))

    # g' + 2 Ric = H^2 / 2 must be positive semidefinite
    gap = math.inf
    for k in range(0, n_t, max(1, n_t // 16)):
        rates = flow_rhs(history.state(k))[:3] / history.fields[k, :3]
        gap = min(gap, float(np.min(2 * rates + 2 * cfs[k].ricci)))
    out.append(CheckReport("bound.super_ricci", gap, 0.0, gap, 1e-12,
                           context=dict(ctx)))
    return out


def verdicts(reports) -> dict:
    counts = {"pass": 0, "fail": 0, NOT_APPLICABLE: 0}
    for r in reports:
        counts[r.verdict] += 1
    return counts
