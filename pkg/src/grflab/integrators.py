"""Time steppers shared by the homogeneous and grid flows."""

from __future__ import annotations

import numpy as np
from scipy.integrate import solve_ivp

SCHEMES = ("rk4", "adaptive")


class BlowUp(RuntimeError):
    """Raised when a trajectory leaves the admissible set."""

    def __init__(self, message, last_time, times=None, states=None):
        super().__init__(f"{message} (last valid time {last_time:.6g})")
        self.last_time = last_time
        self.times = times
        self.states = states


def rk4_step(f, y, dt):
    k1 = f(y)
    k2 = f(y + 0.5 * dt * k1)
    k3 = f(y + 0.5 * dt * k2)
    k4 = f(y + dt * k3)
    return y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate(f, y0, t0, t_end, dt, scheme="rk4", valid=None, rtol=1e-10, atol=1e-12,
              max_step=None):
    """Integrate ``y' = f(y)`` and return the states at multiples of ``dt``.

    ``valid(y)`` returns an error string for an inadmissible state (or ``""``);
    the first such state aborts with :class:`BlowUp`.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    n = int(round((t_end - t0) / dt))
    if n < 1 or abs(t0 + n * dt - t_end) > 1e-9 * max(1.0, abs(t_end)):
        raise ValueError("t_end - t0 must be a positive multiple of dt")
    times = t0 + dt * np.arange(n + 1)
    y0 = np.asarray(y0, dtype=float)
    states = np.empty((n + 1,) + y0.shape)
    states[0] = y0

    def check(k, y):
        bad = "non-finite value" if not np.all(np.isfinite(y)) else (valid(y) if valid else "")
        if bad:
            raise BlowUp(bad, times[k - 1], times[:k], states[:k])

    if scheme == "rk4":
        y = y0
        for k in range(1, n + 1):
            y = rk4_step(f, y, dt)
            check(k, y)
            states[k] = y
        return times, states

    shape = y0.shape
    sol = solve_ivp(lambda t, y: f(y.reshape(shape)).ravel(), (t0, times[-1]), y0.ravel(),
                    method="RK45", t_eval=times, rtol=rtol, atol=atol,
                    max_step=max_step if max_step else np.inf)
    got = sol.y.T.reshape((-1,) + shape)
    for k in range(1, len(got)):
        check(k, got[k])
        states[k] = got[k]
    if not sol.success or len(got) < n + 1:
        raise BlowUp(sol.message, times[len(got) - 1], times[:len(got)], states[:len(got)])
    return times, states
