"""Thin wrapper around scipy's embedded Runge-Kutta integrators.

All trajectory integration in the package goes through :func:`integrate`, which
adds two things scipy does not provide directly: a typed failure carrying the
time reached, and segment-wise renormalization of the state.
"""

from __future__ import annotations

from typing import Callable, Optional

import numpy as np
from scipy.integrate import solve_ivp

DEFAULT_RTOL = 1e-10
DEFAULT_ATOL = 1e-12
DEFAULT_METHOD = "DOP853"


class IntegrationError(RuntimeError):
    """Raised when the adaptive integrator cannot reach the requested time."""

    def __init__(self, message: str, t_reached: float):
        super().__init__(f"{message} (time reached: {t_reached:.6g})")
        self.t_reached = t_reached


def _segment_grid(t_out: np.ndarray, renorm_interval: Optional[float]) -> np.ndarray:
    t_end = t_out[-1]
    pts = [0.0, *t_out.tolist()]
    if renorm_interval is not None and renorm_interval > 0 and t_end != 0:
        sign = np.sign(t_end)
        n = int(np.floor(abs(t_end) / renorm_interval))
        pts.extend((sign * renorm_interval * np.arange(1, n + 1)).tolist())
    grid = np.unique(np.asarray(pts, dtype=float))
    if t_end < 0:
        grid = grid[::-1]
    return grid


def integrate(
    rhs: Callable[[float, np.ndarray], np.ndarray],
    y0: np.ndarray,
    t_out,
    *,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    method: str = DEFAULT_METHOD,
    renormalize: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    renorm_interval: Optional[float] = None,
) -> np.ndarray:
    """Integrate ``y' = rhs(t, y)`` from ``t = 0`` and sample at ``t_out``.

    ``t_out`` must be monotone away from zero (all >= 0 or all <= 0).
    Returns an array of shape ``(len(t_out), y0.size)``. When ``renormalize`` is
    given it is applied to the state at every segment boundary, i.e. at every
    output time and every ``renorm_interval`` units of time in between.
    """
    t_out = np.atleast_1d(np.asarray(t_out, dtype=float))
    y = np.asarray(y0, dtype=float).ravel().copy()
    out = np.empty((t_out.size, y.size))
    if t_out.size == 0:
        return out
    if not (np.all(t_out >= 0) or np.all(t_out <= 0)):
        raise ValueError("output times must not change sign")
    d = np.diff(t_out)
    if np.any(d * np.sign(t_out[-1] or 1.0) < 0):
        raise ValueError("output times must be monotone")
    if not np.all(np.isfinite(t_out)):
        raise ValueError("output times must be finite")

    grid = _segment_grid(t_out, renorm_interval)
    values = {0.0: y.copy()}
    t_prev = grid[0]
    for t_next in grid[1:]:
        if t_next != t_prev:
            sol = solve_ivp(rhs, (t_prev, t_next), y, method=method, rtol=rtol, atol=atol)
            if sol.status != 0:
                t_reached = float(sol.t[-1]) if sol.t.size else t_prev
                raise IntegrationError(sol.message, t_reached)
            y = sol.y[:, -1].copy()
        if renormalize is not None:
            y = renormalize(y)
        values[float(t_next)] = y.copy()
        t_prev = t_next
    for i, t in enumerate(t_out):
        out[i] = values[float(t)]
    return out
