"""Cohomogeneity-one geometry ``a(x)^2 dx^2 + b(x)^2 dy^2 + c(x)^2 dz^2`` on T^3.

Fields are point values at ``x_i = i L / N``; every operator is a periodic
second-order finite difference. Frame index 0 is along ``x``, 1 along ``y``
and 2 along ``z``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from itertools import product

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra

from .records import write_csv


def _frozen(arr) -> np.ndarray:
    out = np.array(arr, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class GridGeometry:
    N: int
    L: float
    Ly: float
    Lz: float
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        for name in ("a", "b", "c"):
            arr = _frozen(getattr(self, name))
            if arr.shape != (self.N,):
                raise ValueError(f"field {name} has shape {arr.shape}, expected ({self.N},)")
            if not np.all(arr > 0):
                raise ValueError(f"field {name} must be positive")
            object.__setattr__(self, name, arr)

    @classmethod
    def flat(cls, N, L=2 * math.pi, Ly=2 * math.pi, Lz=2 * math.pi, a=1.0, b=1.0, c=1.0):
        one = np.ones(N)
        return cls(N, L, Ly, Lz, a * one, b * one, c * one)

    @property
    def dx(self) -> float:
        return self.L / self.N

    @property
    def x(self) -> np.ndarray:
        return self.dx * np.arange(self.N)

    @cached_property
    def cell_volume(self) -> np.ndarray:
        """Riemannian volume of each grid cell (fibers integrated out)."""
        return self.a * (self.b * self.c) * self.dx * (self.Ly * self.Lz)

    @property
    def volume(self) -> float:
        return float(np.sum(self.cell_volume))

    def integrate(self, f) -> float:
        return float(np.sum(np.asarray(f) * self.cell_volume))

    def with_fields(self, a, b, c) -> "GridGeometry":
        return GridGeometry(self.N, self.L, self.Ly, self.Lz, a, b, c)

    def swapped_fibers(self) -> "GridGeometry":
        return GridGeometry(self.N, self.L, self.Lz, self.Ly, self.a, self.c, self.b)

    def rolled(self, shift: int) -> "GridGeometry":
        return self.with_fields(*(np.roll(f, shift) for f in (self.a, self.b, self.c)))

    @cached_property
    def arclength(self) -> np.ndarray:
        """Cumulative trapezoidal arclength ``s_i``; entry ``N`` is the circumference."""
        seg = 0.5 * (self.a + np.roll(self.a, -1)) * self.dx
        return np.concatenate([[0.0], np.cumsum(seg)])

    @property
    def circumference(self) -> float:
        return float(self.arclength[-1])

    @cached_property
    def distance_matrix(self) -> np.ndarray:
        s = self.arclength[:-1]
        d = np.abs(s[:, None] - s[None, :])
        return np.minimum(d, self.circumference - d)


# -- difference operators ---------------------------------------------------

def _fwd(f):
    return np.roll(f, -1) - f


def d_central(geom: GridGeometry, f) -> np.ndarray:
    """Arclength derivative ``f_s = f_x / a`` by central differences."""
    return (np.roll(f, -1) - np.roll(f, 1)) / (2.0 * geom.dx * geom.a)


def d2_arclength(geom: GridGeometry, f) -> np.ndarray:
    """Compact ``f_ss = (1/a) (f_x / a)_x``."""
    a_face = 0.5 * (geom.a + np.roll(geom.a, -1))
    flux = _fwd(f) / a_face
    return (flux - np.roll(flux, 1)) / (geom.a * geom.dx**2)


def _check_len(geom, f):
    f = np.asarray(f, dtype=float)
    if f.shape != (geom.N,):
        raise ValueError(f"field has shape {f.shape}, expected ({geom.N},)")
    return f


def laplacian(geom: GridGeometry, f) -> np.ndarray:
    """Laplace-Beltrami ``(1/(abc)) D(bc D f / a)`` in conservative form."""
    f = _check_len(geom, f)
    k = geom.b * geom.c / geom.a
    k_face = 0.5 * (k + np.roll(k, -1))
    flux = k_face * _fwd(f)
    return (flux - np.roll(flux, 1)) / (geom.a * (geom.b * geom.c) * geom.dx**2)


def laplacian_weights(geom: GridGeometry) -> np.ndarray:
    """Face conductances ``(bc/a)_{i+1/2}`` of the conservative Laplacian."""
    k = geom.b * geom.c / geom.a
    return 0.5 * (k + np.roll(k, -1))


def grad_sq(geom: GridGeometry, f) -> np.ndarray:
    return d_central(geom, f) ** 2


def hessian_diag(geom: GridGeometry, f) -> np.ndarray:
    """Frame diagonal of ``nabla^2 f`` for a function of ``x``; shape (3, N)."""
    fs = d_central(geom, f)
    return np.stack([
        d2_arclength(geom, f),
        d_central(geom, np.log(geom.b)) * fs,
        d_central(geom, np.log(geom.c)) * fs,
    ])


@dataclass(frozen=True, eq=False)
class CurvatureFields:
    ric_xx: np.ndarray
    ric_yy: np.ndarray
    ric_zz: np.ndarray
    scalar: np.ndarray
    rm_norm: np.ndarray
    sectional: np.ndarray  # rows K_xy, K_xz, K_yz

    @property
    def ricci(self) -> np.ndarray:
        return np.stack([self.ric_xx, self.ric_yy, self.ric_zz])


def curvature(geom: GridGeometry) -> CurvatureFields:
    """Orthonormal-frame curvature of the diagonal metric.

    Sectional curvatures are ``K_xy = -b_ss/b``, ``K_xz = -c_ss/c`` and
    ``K_yz = -b_s c_s / (bc)``. ``|Rm|`` is the full index-sum norm,
    ``|Rm|^2 = 4 (K_xy^2 + K_xz^2 + K_yz^2)``.
    """
    lb, lc = np.log(geom.b), np.log(geom.c)
    bs, cs = d_central(geom, lb), d_central(geom, lc)
    Kxy = -(d2_arclength(geom, lb) + bs**2)
    Kxz = -(d2_arclength(geom, lc) + cs**2)
    Kyz = -bs * cs
    rxx, ryy, rzz = Kxy + Kxz, Kxy + Kyz, Kxz + Kyz
    return CurvatureFields(
        rxx, ryy, rzz, 2.0 * (Kxy + Kxz + Kyz),
        2.0 * np.sqrt(Kxy**2 + Kxz**2 + Kyz**2),
        np.stack([Kxy, Kxz, Kyz]),
    )


def codifferential_h(geom: GridGeometry, h) -> np.ndarray:
    """Frame components ``(N, 3, 3)`` of ``d*H`` for ``H = h dVol``.

    ``d* = -*d*`` on three-forms, so ``d*H = -h_s e^y ^ e^z``.
    """
    h = _check_len(geom, h)
    out = np.zeros((geom.N, 3, 3))
    out[:, 1, 2] = -d_central(geom, h)
    out[:, 2, 1] = -out[:, 1, 2]
    return out


def exterior_derivative_2form(geom: GridGeometry, omega) -> np.ndarray:
    """``e^xyz`` component of ``d omega`` for an x-dependent frame 2-form."""
    omega = np.asarray(omega, dtype=float)
    p = omega[:, 1, 2]
    bc = geom.b * geom.c
    return (np.roll(p * bc, -1) - np.roll(p * bc, 1)) / (2 * geom.dx) / (geom.a * bc)


def form_inner(geom: GridGeometry, alpha, beta, degree: int) -> float:
    """L^2 pairing of frame-component forms with the ``1/k!`` normalization."""
    dens = np.sum(np.asarray(alpha).reshape(geom.N, -1) * np.asarray(beta).reshape(geom.N, -1),
                  axis=1) / math.factorial(degree)
    return geom.integrate(dens)


# -- distances and balls ------------------------------------------------------

def reduced_distance(geom: GridGeometry, i: int, j: int) -> float:
    s = geom.arclength
    d = abs(s[j % geom.N] - s[i % geom.N])
    return float(min(d, geom.circumference - d))


def diameter_bound(geom: GridGeometry) -> float:
    return 0.5 * (geom.circumference + geom.Ly * np.max(geom.b) + geom.Lz * np.max(geom.c))


@dataclass(frozen=True)
class BallVolume:
    value: float
    error_bound: float
    nodes: int
    shape: tuple


def _stencil(radius: int):
    offs = []
    for v in product(range(-radius, radius + 1), repeat=3):
        if v == (0, 0, 0) or math.gcd(math.gcd(abs(v[0]), abs(v[1])), abs(v[2])) != 1:
            continue
        if v > (0, 0, 0):  # one of each +/- pair; edges are undirected
            offs.append(v)
    return offs


def _periodic_spline(geom: GridGeometry, f):
    x = np.append(geom.x, geom.L)
    return CubicSpline(x, np.append(f, f[0]), bc_type="periodic")


def weighted_ball_volume(geom: GridGeometry, phi, center: int, r: float, M: int = 32,
                         stencil: int = 4, margin: float = 0.1) -> BallVolume:
    """``int_{B(center, r)} e^{-phi} dg`` from graph distances on T^3.

    The product graph spans the whole torus in directions where the ball can
    wrap and otherwise a window of half-width ``(1 + margin) r`` resolved by
    ``M`` intervals; ``phi`` and the metric are interpolated onto it.
    Distances come from Dijkstra over all primitive lattice offsets of
    sup-norm at most ``stencil``. The error bound is the weighted volume of
    the nodes whose cells straddle the sphere ``d = r``.
    """
    phi = _check_len(geom, phi)
    if r <= 0:
        raise ValueError("radius must be positive")
    weight = np.exp(-phi)
    if r > diameter_bound(geom):
        return BallVolume(geom.integrate(weight), 0.0, geom.N, (geom.N, 1, 1))

    half = (1.0 + margin) * r
    s = geom.arclength
    s0 = s[center % geom.N]
    # x window in coordinate units, from the arclength on each side
    full_x = 2 * half >= geom.circumference
    if full_x:
        xs = geom.x
        dxw = geom.dx
    else:
        x_ext = np.concatenate([geom.x - geom.L, geom.x, geom.x + geom.L, [2 * geom.L]])
        s_ext = np.concatenate([s[:-1] - s[-1], s[:-1], s[:-1] + s[-1], [2 * s[-1]]])
        lo = np.interp(s0 - half, s_ext, x_ext)
        hi = np.interp(s0 + half, s_ext, x_ext)
        xc = geom.x[center % geom.N]
        span = max(xc - lo, hi - xc)
        nx = M // 2
        dxw = span / nx
        xs = xc + dxw * np.arange(-nx, nx + 1)
    sp = {name: _periodic_spline(geom, f) for name, f in
          (("a", geom.a), ("b", geom.b), ("c", geom.c), ("phi", phi))}
    xw = np.mod(xs, geom.L)
    aw, bw, cw, pw = (sp[k](xw) for k in ("a", "b", "c", "phi"))

    def fiber_axis(period, coef):
        if 2 * half / np.min(coef) >= period:
            n = M
            return period / n * np.arange(n), period / n, True
        n = M // 2
        d = half / np.min(coef) / n
        return d * np.arange(-n, n + 1), d, False

    ys, dyw, full_y = fiber_axis(geom.Ly, bw)
    zs, dzw, full_z = fiber_axis(geom.Lz, cw)
    shape = (len(xs), len(ys), len(zs))
    periodic = (full_x, full_y, full_z)
    nodes = np.arange(np.prod(shape)).reshape(shape)

    rows, cols, lens = [], [], []
    I = np.arange(shape[0])
    for off in _stencil(stencil):
        src = nodes
        dst = nodes
        ok = np.ones(shape, dtype=bool)
        for ax, o in enumerate(off):
            if o == 0:
                continue
            dst = np.roll(dst, -o, axis=ax)
            if not periodic[ax]:
                idx = np.arange(shape[ax])
                bad = (idx + o < 0) | (idx + o >= shape[ax])
                sl = [None, None, None]
                sl[ax] = slice(None)
                ok &= ~np.broadcast_to(bad[tuple(sl)], shape)
        j = np.roll(I, -off[0]) if periodic[0] else np.clip(I + off[0], 0, shape[0] - 1)
        am = 0.5 * (aw + aw[j])
        bm = 0.5 * (bw + bw[j])
        cm = 0.5 * (cw + cw[j])
        ell = np.sqrt((am * off[0] * dxw) ** 2 + (bm * off[1] * dyw) ** 2 + (cm * off[2] * dzw) ** 2)
        ell = np.broadcast_to(ell[:, None, None], shape)
        rows.append(src[ok])
        cols.append(dst[ok])
        lens.append(ell[ok])
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    lens = np.concatenate(lens)
    n_nodes = int(np.prod(shape))
    graph = coo_matrix((lens, (rows, cols)), shape=(n_nodes, n_nodes)).tocsr()

    cx = int(np.argmin(np.abs(np.mod(xs - geom.x[center % geom.N] + geom.L / 2, geom.L) - geom.L / 2)))
    src_node = nodes[cx, int(np.argmin(np.abs(ys))), int(np.argmin(np.abs(zs)))]
    cell_diam = math.sqrt((np.max(aw) * dxw) ** 2 + (np.max(bw) * dyw) ** 2 + (np.max(cw) * dzw) ** 2)
    dist = dijkstra(graph, directed=False, indices=src_node, limit=r + 2 * cell_diam)
    dist = dist.reshape(shape)

    w = (np.exp(-pw) * aw * (bw * cw) * dxw)[:, None, None] * (dyw * dzw)
    w = np.broadcast_to(w, shape)
    inside = dist < r
    shell = np.abs(dist - r) <= 0.5 * cell_diam
    return BallVolume(float(np.sum(w[inside])), float(np.sum(w[shell])), n_nodes, shape)


# -- backward parabolic curvature radius ---------------------------------------

@dataclass(frozen=True)
class CurvatureRadius:
    r: float
    truncated: bool


def curvature_radius(history, x: int, k: int, rm_fields=None, rtol: float = 1e-6) -> CurvatureRadius:
    """``sup{r : |Rm| <= r^-2 on B(x, t_k, r) x [t_k - r^2, t_k]}``.

    ``history`` needs ``times`` and ``geometry(k)``; ``rm_fields`` may hold a
    precomputed ``(K, N)`` array of ``|Rm|``. When the condition still holds
    at the oldest stored time the largest verifiable radius is returned with
    ``truncated=True``.
    """
    times = np.asarray(history.times)
    k = k % len(times)
    t = times[k]
    if rm_fields is None:
        rm_fields = np.array([curvature(history.geometry(j)).rm_norm for j in range(k + 1)])
    dist = history.geometry(k).distance_matrix[x % history.geometry(k).N]

    def ok(r):
        js = np.nonzero((times[: k + 1] >= t - r * r - 1e-12))[0]
        mask = dist <= r
        worst = float(np.max(rm_fields[js][:, mask]))
        return worst <= r ** -2

    r_max = math.sqrt(t - times[0])
    if r_max == 0:
        return CurvatureRadius(0.0, True)
    if ok(r_max):
        return CurvatureRadius(r_max, True)
    lo, hi = 0.0, r_max
    while hi - lo > rtol * r_max:
        mid = 0.5 * (lo + hi)
        if mid > 0 and ok(mid):
            lo = mid
        else:
            hi = mid
    return CurvatureRadius(lo, False)


def geometry_csv(path, geom: GridGeometry, h=None, phi=None, with_curvature=False) -> None:
    cols = {"x": geom.x, "a": geom.a, "b": geom.b, "c": geom.c}
    if h is not None:
        cols["h"] = np.asarray(h)
    if phi is not None:
        cols["phi"] = np.asarray(phi)
    if with_curvature:
        cf = curvature(geom)
        cols.update(ric_xx=cf.ric_xx, ric_yy=cf.ric_yy, ric_zz=cf.ric_zz, R=cf.scalar,
                    rm_norm=cf.rm_norm)
    names = list(cols)
    write_csv(path, names, (list(map(float, row)) for row in zip(*(cols[n] for n in names))))
