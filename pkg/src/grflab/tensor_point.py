"""Pointwise multilinear algebra in orthonormal frames, dimensions 3 and 4.

Conventions used throughout the package:

* every tensor norm is the full index sum, ``|H|^2 = sum_{ijk} H_ijk^2``, so
  ``H = lam e1^e2^e3`` has ``|H|^2 = 6 lam^2``;
* ``Ric_ir = -sum_s R_sisr`` and sectional curvature ``K_ij = R_ijji``, so the
  round sphere ``R_ijkl = k (d_il d_jk - d_ik d_jl)`` has ``Ric = (n-1) k g``.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations

import numpy as np

DIMS = (3, 4)


def _check_dim(dim: int) -> None:
    if dim not in DIMS:
        raise ValueError(f"dimension must be 3 or 4, got {dim}")


def _perm_sign(p) -> int:
    p = list(p)
    sign = 1
    for i in range(len(p)):
        while p[i] != i:
            j = p[i]
            p[i], p[j] = p[j], p[i]
            sign = -sign
    return sign


def levi_civita(dim: int) -> np.ndarray:
    eps = np.zeros((dim,) * dim)
    for p in permutations(range(dim)):
        eps[p] = _perm_sign(p)
    return eps


@dataclass(frozen=True, eq=False)
class ThreeForm:
    """Fully antisymmetric rank-3 array ``H_ijk``."""

    components: np.ndarray

    def __post_init__(self):
        comp = np.asarray(self.components, dtype=float)
        if comp.ndim != 3 or len(set(comp.shape)) != 1:
            raise ValueError(f"three-form needs a cubic rank-3 array, got shape {comp.shape}")
        _check_dim(comp.shape[0])
        comp = comp.copy()
        comp.setflags(write=False)
        object.__setattr__(self, "components", comp)

    @property
    def dim(self) -> int:
        return self.components.shape[0]

    def norm_sq(self) -> float:
        return float(np.sum(self.components ** 2))

    def antisymmetry_residual(self) -> float:
        H = self.components
        worst = 0.0
        for p in permutations(range(3)):
            worst = max(worst, float(np.max(np.abs(np.transpose(H, p) - _perm_sign(p) * H))))
        return worst

    @classmethod
    def from_array(cls, arr) -> "ThreeForm":
        """Antisymmetrize an arbitrary cubic rank-3 array."""
        arr = np.asarray(arr, dtype=float)
        n = arr.shape[0]
        out = np.zeros_like(arr)
        # canonical entries first, then copies with sign so the result is
        # antisymmetric bit for bit
        for i in range(n):
            for j in range(i + 1, n):
                for k in range(j + 1, n):
                    idx = (i, j, k)
                    val = sum(_perm_sign(p) * arr[tuple(idx[q] for q in p)]
                              for p in permutations(range(3))) / 6.0
                    for p in permutations(range(3)):
                        out[tuple(idx[q] for q in p)] = _perm_sign(p) * val
        return cls(out)

    @classmethod
    def volume(cls, dim: int, lam: float = 1.0, axes=(0, 1, 2)) -> "ThreeForm":
        """``lam e^i ^ e^j ^ e^k`` for the frame indices in ``axes``."""
        _check_dim(dim)
        arr = np.zeros((dim,) * 3)
        for p in permutations(range(3)):
            arr[tuple(axes[q] for q in p)] = lam * _perm_sign(p)
        return cls(arr)

    @classmethod
    def zero(cls, dim: int) -> "ThreeForm":
        _check_dim(dim)
        return cls(np.zeros((dim,) * 3))

    @classmethod
    def random(cls, seed, dim: int, scale: float = 1.0) -> "ThreeForm":
        _check_dim(dim)
        rng = np.random.default_rng(seed)
        return cls.from_array(scale * rng.standard_normal((dim,) * 3))


@dataclass(frozen=True, eq=False)
class AlgebraicCurvature:
    """Rank-4 array with the symmetries of a Riemann tensor."""

    components: np.ndarray

    def __post_init__(self):
        comp = np.asarray(self.components, dtype=float)
        if comp.ndim != 4 or len(set(comp.shape)) != 1:
            raise ValueError(f"curvature needs a hypercubic rank-4 array, got shape {comp.shape}")
        _check_dim(comp.shape[0])
        comp = comp.copy()
        comp.setflags(write=False)
        object.__setattr__(self, "components", comp)

    @property
    def dim(self) -> int:
        return self.components.shape[0]

    def ricci(self) -> np.ndarray:
        return -np.einsum("sisr->ir", self.components)

    def scalar(self) -> float:
        return float(np.trace(self.ricci()))

    def norm(self) -> float:
        return float(np.sqrt(np.sum(self.components ** 2)))

    def sectional(self) -> np.ndarray:
        return np.einsum("ijji->ij", self.components)

    def symmetry_residuals(self) -> dict:
        R = self.components
        return {
            "antisym_12": float(np.max(np.abs(R + R.transpose(1, 0, 2, 3)))),
            "antisym_34": float(np.max(np.abs(R + R.transpose(0, 1, 3, 2)))),
            "pair": float(np.max(np.abs(R - R.transpose(2, 3, 0, 1)))),
            "bianchi": float(np.max(np.abs(
                R + R.transpose(0, 2, 3, 1) + R.transpose(0, 3, 1, 2)))),
        }

    @classmethod
    def constant(cls, dim: int, kappa: float) -> "AlgebraicCurvature":
        _check_dim(dim)
        d = np.eye(dim)
        R = kappa * (np.einsum("il,jk->ijkl", d, d) - np.einsum("ik,jl->ijkl", d, d))
        return cls(R)


def project_curvature(arr: np.ndarray) -> np.ndarray:
    """Orthogonal projection of a rank-4 array onto algebraic curvature tensors."""
    R = np.asarray(arr, dtype=float)
    R = 0.5 * (R - R.transpose(1, 0, 2, 3))
    R = 0.5 * (R - R.transpose(0, 1, 3, 2))
    R = 0.5 * (R + R.transpose(2, 3, 0, 1))
    # with the pair symmetries in place the Bianchi sum is three times the
    # total antisymmetrization, which removing it kills
    alt = np.zeros_like(R)
    for p in permutations(range(4)):
        alt += _perm_sign(p) * np.transpose(R, p)
    return R - alt / 24.0


def random_algebraic_curvature(seed, dim: int, scale: float = 1.0) -> AlgebraicCurvature:
    _check_dim(dim)
    rng = np.random.default_rng(seed)
    Rm = AlgebraicCurvature(project_curvature(scale * rng.standard_normal((dim,) * 4)))
    res = Rm.symmetry_residuals()
    assert max(res.values()) <= 1e-14 * max(1.0, scale), res
    return Rm


def _same_dim(Rm: AlgebraicCurvature, H: ThreeForm) -> None:
    if Rm.dim != H.dim:
        raise ValueError(f"dimension mismatch: curvature {Rm.dim}, three-form {H.dim}")


def h_squared(H: ThreeForm) -> np.ndarray:
    """``(H^2)_ij = sum_kl H_ikl H_jkl``."""
    _check_dim(H.dim)
    return np.einsum("ikl,jkl->ij", H.components, H.components)


def r_h(Rm: AlgebraicCurvature, H: ThreeForm) -> float:
    """``R_H = R_ijkl H_ijr H_klr`` in an orthonormal frame."""
    _same_dim(Rm, H)
    return float(np.einsum("ijkl,ijr,klr->", Rm.components, H.components, H.components))


def weitzenbock_ric(Rm: AlgebraicCurvature, H: ThreeForm) -> ThreeForm:
    """Weitzenböck curvature term ``Ric(H)`` acting on a three-form."""
    _same_dim(Rm, H)
    R, Hc = Rm.components, H.components
    Ric = Rm.ricci()
    out = (
        np.einsum("ir,rjk->ijk", Ric, Hc)
        + np.einsum("jr,irk->ijk", Ric, Hc)
        + np.einsum("kr,ijr->ijk", Ric, Hc)
        + np.einsum("ijsr,srk->ijk", R, Hc)
        + np.einsum("iksr,sjr->ijk", R, Hc)
        + np.einsum("jksr,isr->ijk", R, Hc)
    )
    scale = max(1.0, float(np.max(np.abs(out))))
    assert ThreeForm(out).antisymmetry_residual() <= 1e-12 * scale, "Ric(H) lost antisymmetry"
    return ThreeForm.from_array(out)


def weitzenbock_residual(Rm: AlgebraicCurvature, H: ThreeForm) -> float:
    """``<Ric(H), H> - 3<Ric, H^2> - 3 R_H``."""
    lhs = float(np.sum(weitzenbock_ric(Rm, H).components * H.components))
    rhs = 3.0 * float(np.sum(Rm.ricci() * h_squared(H))) + 3.0 * r_h(Rm, H)
    return lhs - rhs


def star_dual_4d(H: ThreeForm) -> np.ndarray:
    """Vector ``X_H`` metrically dual to the Hodge star of ``H``.

    Oriented so that ``lam e1^e2^e3`` maps to ``lam e4``.
    """
    if H.dim != 4:
        raise ValueError("star dual of a three-form is only defined here in dimension 4")
    return np.einsum("ijkm,ijk->m", levi_civita(4), H.components) / 6.0


def r_h_identity_residuals_4d(Rm: AlgebraicCurvature, H: ThreeForm) -> tuple[float, float]:
    """Residuals of the two closed forms of ``R_H`` in dimension 4.

    The second form evaluates ``Ric`` on the unit vector along ``X_H``.
    """
    if Rm.dim != 4 or H.dim != 4:
        raise ValueError("four-dimensional identity needs dim 4 inputs")
    RH = r_h(Rm, H)
    Ric = Rm.ricci()
    R = float(np.trace(Ric))
    HH = H.norm_sq()
    first = R * HH / 3.0 - 2.0 * float(np.sum(Ric * h_squared(H)))
    X = star_dual_4d(H)
    xx = float(X @ X)
    ric_x = float(X @ Ric @ X) / xx if xx > 0 else 0.0
    second = -R * HH / 3.0 + 2.0 / 3.0 * ric_x * HH
    return RH - first, RH - second


def observed_rh_constant(pairs) -> float:
    """Smallest ``C`` with ``|R_H| <= C |Rm| |H|^2`` over the given pairs."""
    best = 0.0
    for Rm, H in pairs:
        denom = Rm.norm() * H.norm_sq()
        if denom > 0:
            best = max(best, abs(r_h(Rm, H)) / denom)
    return best
