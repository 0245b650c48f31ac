"""Spatially homogeneous flat-torus reduction with closed-form trajectories.

On a flat 3-torus with constant torsion ``H = h dVol`` the flow reduces to

    A' = h^2 A   (same for B, C),    h' = -3/2 h^3,    phi' = h^2,

whose solution is ``h = h0 (1 + 3 h0^2 t)^(-1/2)`` and
``A = A0 (1 + 3 h0^2 t)^(1/3)``, ``phi = phi0 + log(1 + 3 h0^2 t) / 3``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import spence

from .integrators import integrate
from .records import EntropyRecord, write_csv

N_DIM = 3
TWO_PI = 2.0 * math.pi
FIELDS = ("A", "B", "C", "h", "phi")


@dataclass(frozen=True)
class HomState:
    t: float
    metric_diag: tuple
    h: float
    phi: float

    def __post_init__(self):
        diag = tuple(float(v) for v in self.metric_diag)
        if len(diag) != 3:
            raise ValueError("metric_diag needs three entries")
        object.__setattr__(self, "metric_diag", diag)

    def as_array(self) -> np.ndarray:
        return np.array([*self.metric_diag, self.h, self.phi])

    @classmethod
    def from_array(cls, t, y) -> "HomState":
        return cls(float(t), tuple(y[:3]), float(y[3]), float(y[4]))


def _positive(y) -> str:
    return "" if np.all(y[:3] > 0) else "non-positive metric"


def flat_t3_rhs(y) -> np.ndarray:
    """Derivative of ``(A, B, C, h, phi)``; accepts an array or a HomState."""
    if isinstance(y, HomState):
        y = y.as_array()
    y = np.asarray(y, dtype=float)
    if not np.all(y[:3] > 0):
        raise ValueError("metric coefficients must be positive")
    h2 = y[3] ** 2
    return np.array([h2 * y[0], h2 * y[1], h2 * y[2], -1.5 * h2 * y[3], h2])


def flat_t3_exact_array(h0, A0, phi0, t) -> np.ndarray:
    """Closed form as ``(A, B, C, h, phi)``; ``t`` may be complex."""
    g = 1.0 + 3.0 * h0**2 * t
    A = A0 * g ** (1.0 / 3.0)
    return np.array([A, A, A, h0 / np.sqrt(g), phi0 + np.log(g) / 3.0])


def flat_t3_exact(h0, A0, phi0, t, lam: float = 1.0) -> HomState:
    """Closed-form state; ``lam`` applies parabolic rescaling to the data."""
    return HomState.from_array(t, flat_t3_exact_array(lam * h0, A0 / lam**2, phi0, t))


@dataclass
class HomTrajectory:
    times: np.ndarray
    states: np.ndarray

    def state(self, k) -> HomState:
        return HomState.from_array(self.times[k], self.states[k])

    def rows(self):
        for t, y in zip(self.times, self.states):
            yield [float(t), *map(float, y)]

    def to_csv(self, path) -> None:
        write_csv(path, ("t",) + FIELDS, self.rows())


def integrate_homogeneous(rhs, state0: HomState, t_end, dt, scheme="rk4", **kw) -> HomTrajectory:
    times, states = integrate(rhs, state0.as_array(), state0.t, t_end, dt, scheme,
                              valid=_positive, **kw)
    return HomTrajectory(times, states)


def observed_order(errors, ratio=2.0) -> float:
    """Least-squares convergence order from errors at dt, dt/ratio, ..."""
    e = np.log(np.asarray(errors, dtype=float))
    k = np.arange(len(e))
    slope = np.polyfit(k, e, 1)[0]
    return float(-slope / math.log(ratio))


def dilog(z):
    """Real dilogarithm ``Li2(z) = -int_0^z log(1-u)/u du`` for ``z <= 1``."""
    return spence(1.0 - np.asarray(z, dtype=float))


def flat_t3_volume(h0, s, A0=1.0, lengths=(TWO_PI,) * 3):
    return float(np.prod(lengths)) * A0 ** 1.5 * math.sqrt(1.0 + 3.0 * h0**2 * s)


def flat_t3_entropy_exact(h0, phi0, t, tau, A0=1.0, lengths=(TWO_PI,) * 3) -> EntropyRecord:
    """Closed-form entropies for the fiber-uniform conjugate kernel ``1/Vol``.

    The kernel has ``f(s) = log Vol(s) - phi(s) - (3/2) log(4 pi tau)`` with
    ``s = t - tau``, and ``R^{f+phi} = -h(s)^2 / 2``.
    """
    if not 0 < tau <= t:
        raise ValueError(f"need 0 < tau <= t, got tau={tau}, t={t}")
    s = t - tau
    k = 3.0 * h0**2
    st = flat_t3_exact(h0, A0, phi0, s)
    f = math.log(flat_t3_volume(h0, s, A0, lengths)) - st.phi - 0.5 * N_DIM * math.log(4 * math.pi * tau)
    N_phi = f - 0.5 * N_DIM
    W_phi = -tau * st.h**2 / 2.0 + f - N_DIM
    Psi = 2.0 * math.log((1.0 + k * t) / (1.0 + k * s))
    P = 2.0 * float(dilog(k * tau / (1.0 + k * t)))
    return EntropyRecord(tau, N_phi, W_phi, Psi, P)


def flat_t3_dW_H_rhs(h0, t, tau) -> float:
    """Assembled right side of the generalized Perelman derivative.

    ``Ric^{f+phi} = -(h^2/2) g`` here, so the squared norm term is
    ``3 (h^2/2 + 1/(2 tau))^2``.
    """
    s = t - tau
    h2 = h0**2 / (1.0 + 3.0 * h0**2 * s)
    Psi = 2.0 * math.log((1.0 + 3 * h0**2 * t) / (1.0 + 3 * h0**2 * s))
    return -2.0 * tau * 3.0 * (h2 / 2.0 + 0.5 / tau) ** 2 - Psi / (3.0 * tau)


def flat_t3_generalized_scalar(h) -> float:
    """``R^{H,phi}`` on the flat model."""
    return -0.5 * h**2


def flat_t3_bakry_emery_norm_sq(h) -> float:
    """``|Ric^{H,phi}|^2`` with ``Ric^{H,phi} = -(h^2/2) g``."""
    return 3.0 * (0.5 * h**2) ** 2


def entropy_rows(records):
    for r in records:
        yield r.row()
