"""Integration of the bicharacteristic-amplitude system with log renormalization.

The joint state is (x, xi, b) with x' = u(x), xi' = -du(x)^T xi, b' = a0(x, xi) b.
Directions are integrated projectively and magnitudes as log accumulators:

    xib' = g - (xib . g) xib,   g = -du^T xib,      logRxi' = xib . g
    bb'  = a bb - rho bb,       rho = Re<bb, a bb>,  logRb'  = rho

which is the linear system written in polar form, so no magnitude can overflow.
Directions are additionally renormalized to unit length at every segment
boundary of the integration. An ensemble of M phase points, each carrying r
fiber vectors, is integrated in one vectorized call.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from ._ode import DEFAULT_ATOL, DEFAULT_RTOL, integrate
from .flows import FlowField, wrap
from .symbols import SymbolSpec

__all__ = [
    "ConstraintError",
    "Trajectory",
    "integrate_bas",
    "bxm_log_growth",
    "inverse_cocycle",
    "dual_cocycle",
    "adjoint_inverse_cocycle",
    "frame_trajectory",
    "conserved_determinant",
    "determinant_drift",
    "constraint_residual",
    "hamiltonian",
    "hamiltonian_drift",
    "write_trajectory_csv",
]

INPUT_CONSTRAINT_TOL = 1e-10
DEFAULT_RENORM_INTERVAL = 1.0


class ConstraintError(ValueError):
    """Initial amplitude does not lie in the fiber F(xi0)."""


@dataclass
class Trajectory:
    """Samples of the cocycle state at the output times.

    Array shapes: ``t`` (K,), ``x``/``xib`` (K, M, n), ``logRxi`` (K, M),
    ``b`` (K, M, r, d) unit fiber vectors, ``logRb`` (K, M, r), ``trace_integral``
    (K, M) complex integral of tr a0 along the orbit. ``x`` is wrapped to the
    torus; ``x_unwrapped`` keeps the continuous lift.
    """

    t: np.ndarray
    x_unwrapped: np.ndarray
    xib: np.ndarray
    logRxi: np.ndarray
    b: np.ndarray
    logRb: np.ndarray
    trace_integral: np.ndarray
    symbol: SymbolSpec
    amplitude: str = "direct"

    @property
    def x(self) -> np.ndarray:
        return wrap(self.x_unwrapped)

    @property
    def n_members(self) -> int:
        return self.xib.shape[1]

    @property
    def n_vectors(self) -> int:
        return self.b.shape[2]

    def amplitude_vectors(self) -> np.ndarray:
        """Unnormalized b(t) (may overflow for long horizons)."""
        return self.b * np.exp(self.logRb)[..., None]

    def xi(self) -> np.ndarray:
        """Unnormalized xi(t)."""
        return self.xib * np.exp(self.logRxi)[..., None]

    def restart_state(self, k: int = -1):
        """(x, xi, b) at sample ``k`` suitable as a new initial condition."""
        return self.x_unwrapped[k], self.xi()[k], self.amplitude_vectors()[k]


def _as_batch(x0, xi0, b0, n, d):
    x0 = np.asarray(x0, dtype=float)
    xi0 = np.asarray(xi0, dtype=float)
    x0 = np.atleast_2d(x0)
    xi0 = np.atleast_2d(xi0)
    M = max(x0.shape[0], xi0.shape[0])
    x0 = np.broadcast_to(x0, (M, n)).copy()
    xi0 = np.broadcast_to(xi0, (M, n)).copy()
    b0 = np.asarray(b0, dtype=complex)
    if b0.ndim == 1:
        b0 = b0[None, None, :]
    elif b0.ndim == 2:
        # (M, d): one vector per member; for a single member (r, d) means r vectors
        b0 = b0[:, None, :] if b0.shape[0] == M and M > 1 else b0[None]
    b0 = np.broadcast_to(b0, (M,) + b0.shape[1:])
    b0 = np.array(b0, dtype=complex)
    if b0.shape[0] != M or b0.shape[-1] != d:
        raise ValueError(f"amplitude shape {b0.shape} incompatible with {M} members and d={d}")
    return x0, xi0, b0


def integrate_bas(
    flow: FlowField,
    symbol: SymbolSpec,
    x0,
    xi0,
    b0,
    t_out,
    *,
    amplitude: str = "direct",
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    renorm_interval: float = DEFAULT_RENORM_INTERVAL,
    check_constraint: bool = True,
) -> Trajectory:
    """Integrate the BAS from (x0, xi0, b0) and sample at ``t_out``.

    ``t_out`` is a scalar horizon (sampled at 0 and T) or a monotone grid of
    signed times. Batches: x0, xi0 of shape (M, n); b0 of shape (d,), (M, d) or
    (M, r, d) for r fiber vectors per phase point. ``amplitude="adjoint_inverse"``
    integrates b' = -a0^* b instead, whose fundamental solution is B_t^{-*}.
    """
    if symbol.flow.dim != flow.dim:
        raise ValueError("symbol and flow dimensions differ")
    if amplitude not in ("direct", "adjoint_inverse"):
        raise ValueError(f"unknown amplitude mode {amplitude!r}")
    n, d = flow.dim, symbol.d
    x0, xi0, b0 = _as_batch(x0, xi0, b0, n, d)
    M, r = b0.shape[0], b0.shape[1]

    xi_norm = np.linalg.norm(xi0, axis=1)
    if np.any(xi_norm == 0) or not np.all(np.isfinite(xi_norm)):
        raise ValueError("initial frequency must be finite and nonzero")
    xib0 = xi0 / xi_norm[:, None]
    b_norm = np.linalg.norm(b0, axis=2)
    if np.any(b_norm == 0):
        raise ValueError("initial amplitude must be nonzero")
    if check_constraint and amplitude == "direct" and not symbol.bundle.trivial:
        p = symbol.bundle.projector(xib0)
        off = b0 - np.einsum("mij,mrj->mri", p, b0)
        worst = (np.linalg.norm(off, axis=2) / b_norm).max()
        if worst > INPUT_CONSTRAINT_TOL:
            raise ConstraintError(f"initial amplitude violates the fiber constraint by {worst:.3e}")

    t_out = np.asarray(t_out, dtype=float)
    if t_out.ndim == 0:
        t_out = np.array([0.0, float(t_out)])

    # layout: x | xib | logRxi | tr_re | tr_im | b_re (r*d) | b_im (r*d) | logRb (r)
    i_x, i_xi, i_lx = 0, n, 2 * n
    i_tr = 2 * n + 1
    i_br = 2 * n + 3
    i_bi = i_br + r * d
    i_lb = i_bi + r * d
    width = i_lb + r

    y0 = np.zeros((M, width))
    y0[:, i_x:i_xi] = x0
    y0[:, i_xi:i_lx] = xib0
    y0[:, i_lx] = np.log(xi_norm)
    bb0 = b0 / b_norm[..., None]
    y0[:, i_br:i_bi] = bb0.real.reshape(M, r * d)
    y0[:, i_bi:i_lb] = bb0.imag.reshape(M, r * d)
    y0[:, i_lb:] = np.log(b_norm)
    adjoint = amplitude == "adjoint_inverse"
    evaluate = symbol.evaluate
    vel_jac = flow.velocity_and_jacobian

    def rhs(_, yflat):
        y = yflat.reshape(M, width)
        x = y[:, i_x:i_xi]
        xib = y[:, i_xi:i_lx]
        u, du = vel_jac(x)
        nrm2 = np.einsum("mi,mi->m", xib, xib)
        g = -np.einsum("mji,mj->mi", du, xib)
        q = np.einsum("mi,mi->m", xib, g) / nrm2
        a = evaluate(x, xib / np.sqrt(nrm2)[:, None], du)
        if adjoint:
            a = -np.conj(np.swapaxes(a, -1, -2))
        tr = np.trace(a, axis1=-2, axis2=-1)
        b = (y[:, i_br:i_bi] + 1j * y[:, i_bi:i_lb]).reshape(M, r, d)
        ab = np.einsum("mij,mrj->mri", a, b)
        bn2 = np.einsum("mri,mri->mr", b.conj(), b).real
        rho = np.einsum("mri,mri->mr", b.conj(), ab).real / bn2
        db = ab - rho[..., None] * b
        out = np.empty_like(y)
        out[:, i_x:i_xi] = u
        out[:, i_xi:i_lx] = g - q[:, None] * xib
        out[:, i_lx] = q
        out[:, i_tr] = tr.real
        out[:, i_tr + 1] = tr.imag
        out[:, i_br:i_bi] = db.real.reshape(M, r * d)
        out[:, i_bi:i_lb] = db.imag.reshape(M, r * d)
        out[:, i_lb:] = rho
        return out.ravel()

    def renormalize(yflat):
        y = yflat.reshape(M, width).copy()
        xn = np.linalg.norm(y[:, i_xi:i_lx], axis=1)
        y[:, i_xi:i_lx] /= xn[:, None]
        y[:, i_lx] += np.log(xn)
        b = (y[:, i_br:i_bi] + 1j * y[:, i_bi:i_lb]).reshape(M, r, d)
        bn = np.linalg.norm(b, axis=2)
        b /= bn[..., None]
        y[:, i_br:i_bi] = b.real.reshape(M, r * d)
        y[:, i_bi:i_lb] = b.imag.reshape(M, r * d)
        y[:, i_lb:] += np.log(bn)
        return y.ravel()

    Y = integrate(
        rhs, y0, t_out, rtol=rtol, atol=atol,
        renormalize=renormalize, renorm_interval=renorm_interval,
    ).reshape(len(t_out), M, width)
    # the sample at t = 0 is the raw initial state; normalize it the same way
    Y = np.stack([renormalize(row.ravel()).reshape(M, width) for row in Y])
    return Trajectory(
        t=t_out,
        x_unwrapped=Y[:, :, i_x:i_xi],
        xib=Y[:, :, i_xi:i_lx],
        logRxi=Y[:, :, i_lx],
        b=(Y[:, :, i_br:i_bi] + 1j * Y[:, :, i_bi:i_lb]).reshape(len(t_out), M, r, d),
        logRb=Y[:, :, i_lb:],
        trace_integral=Y[:, :, i_tr] + 1j * Y[:, :, i_tr + 1],
        symbol=symbol,
        amplitude=amplitude,
    )


def bxm_log_growth(traj: Trajectory, m: float) -> np.ndarray:
    """log |(BX^m)_t b0| per sample: logRb(t) + m (logRxi(t) - logRxi(0)).

    Shape (K, M, r). With unit b0 this is the log growth of the amplitude.
    """
    return traj.logRb + m * (traj.logRxi - traj.logRxi[:1])[..., None]


def _reversed_grid(T):
    T = np.asarray(T, dtype=float)
    if T.ndim == 0:
        return np.array([0.0, -abs(float(T))])
    return -np.abs(T)


def inverse_cocycle(flow, symbol, x0, xi0, b0, T, **kw) -> Trajectory:
    """B_{-t}(x0, xi0) b0 for t in the grid: the cocycle over the reversed flow."""
    return integrate_bas(flow, symbol, x0, xi0, b0, _reversed_grid(T), **kw)


def adjoint_inverse_cocycle(flow, symbol, x0, xi0, c0, T, **kw) -> Trajectory:
    """B_t^{-*}(x0, xi0) c0: pairs with B_t so that <B_t b, B_t^{-*} c> = <b, c>."""
    kw.setdefault("check_constraint", False)
    return integrate_bas(flow, symbol, x0, xi0, c0, T, amplitude="adjoint_inverse", **kw)


def dual_cocycle(flow, symbol, x0, xi0, c0, T, **kw) -> Trajectory:
    """B_{-t}^{-*}(x0, xi0) c0: adjoint-inverse amplitude over the reversed flow."""
    kw.setdefault("check_constraint", False)
    return integrate_bas(
        flow, symbol, x0, xi0, c0, _reversed_grid(T), amplitude="adjoint_inverse", **kw
    )


def frame_trajectory(flow, symbol, x0, xi0, t_out, **kw) -> Trajectory:
    """Integrate an orthonormal frame of F(xi0) as r fiber vectors per phase point."""
    xi0 = np.asarray(xi0, dtype=float)
    frame = symbol.bundle.frame(np.atleast_2d(xi0))  # (M, d, r)
    b0 = np.swapaxes(frame, -1, -2)
    return integrate_bas(flow, symbol, x0, xi0, b0, t_out, **kw)


def _merge(trajs: Sequence[Trajectory]) -> Trajectory:
    first = trajs[0]
    for tr in trajs[1:]:
        if not (
            np.allclose(tr.x_unwrapped[0], first.x_unwrapped[0])
            and np.allclose(tr.xib[0], first.xib[0])
            and np.array_equal(tr.t, first.t)
        ):
            raise ValueError("trajectories do not share the initial phase point")
    return Trajectory(
        t=first.t,
        x_unwrapped=first.x_unwrapped,
        xib=first.xib,
        logRxi=first.logRxi,
        b=np.concatenate([tr.b for tr in trajs], axis=2),
        logRb=np.concatenate([tr.logRb for tr in trajs], axis=2),
        trace_integral=first.trace_integral,
        symbol=first.symbol,
    )


def conserved_determinant(trajs, symbol: SymbolSpec | None = None) -> np.ndarray:
    """<b_1, ..., b_{n-1}, xi> |xi|^{-2} exp(-int tr a0) per sample, shape (K, M).

    ``trajs`` is a single trajectory carrying n-1 fiber vectors or a sequence of
    single-vector trajectories from the same phase point.
    """
    traj = _merge(list(trajs)) if isinstance(trajs, (list, tuple)) else trajs
    sym = symbol or traj.symbol
    n = traj.xib.shape[-1]
    if sym.d != n:
        raise ValueError("the determinant law needs amplitudes in C^n")
    if traj.n_vectors != n - 1:
        raise ValueError(f"need {n - 1} amplitude solutions, got {traj.n_vectors}")
    cols = np.concatenate([traj.b, traj.xib[:, :, None, :].astype(complex)], axis=2)
    det = np.linalg.det(np.swapaxes(cols, -1, -2))
    log_scale = traj.logRb.sum(axis=2) - traj.logRxi - traj.trace_integral
    return det * np.exp(log_scale)


def determinant_drift(values: np.ndarray) -> float:
    """max_t |Q(t) - Q(0)| / |Q(0)|, maximized over members."""
    q0 = values[0]
    return float(np.max(np.abs(values - q0) / np.abs(q0)))


def constraint_residual(traj: Trajectory) -> np.ndarray:
    """|(id - p(xib)) bb| per sample, shape (K, M, r)."""
    p = traj.symbol.bundle.projector(traj.xib)
    pb = np.einsum("kmij,kmrj->kmri", p, traj.b)
    return np.linalg.norm(traj.b - pb, axis=-1)


def hamiltonian(traj: Trajectory) -> np.ndarray:
    """u(x(t)) . xi(t) per sample, shape (K, M)."""
    u = traj.symbol.flow.velocity(traj.x_unwrapped)
    return np.einsum("kmi,kmi->km", u, traj.xib) * np.exp(traj.logRxi)


def hamiltonian_drift(traj: Trajectory) -> np.ndarray:
    """|H(t) - H(0)| relative to |u(x0)| |xi0| (or |H(0)| if larger), per member."""
    h = hamiltonian(traj)
    u0 = np.linalg.norm(traj.symbol.flow.velocity(traj.x_unwrapped[0]), axis=-1)
    scale = np.maximum(np.abs(h[0]), u0 * np.exp(traj.logRxi[0]))
    scale = np.where(scale > 0, scale, 1.0)
    return np.max(np.abs(h - h[0]), axis=0) / scale


def write_trajectory_csv(traj: Trajectory, path, member: int = 0, vector: int = 0) -> Path:
    """Dump one member of a trajectory as CSV.

    Columns: t, x*, xi*, logRxi, re_b*, im_b*, logRb, residual, hamiltonian,
    consdet (blank unless the trajectory carries n-1 vectors in C^n).
    """
    path = Path(path)
    n = traj.xib.shape[-1]
    d = traj.b.shape[-1]
    res = constraint_residual(traj)[:, member, vector]
    ham = hamiltonian(traj)[:, member]
    try:
        cons = conserved_determinant(traj)[:, member]
    except ValueError:
        cons = None
    header = (
        ["t"]
        + [f"x{i}" for i in range(n)]
        + [f"xi{i}" for i in range(n)]
        + ["logRxi"]
        + [f"re_b{i}" for i in range(d)]
        + [f"im_b{i}" for i in range(d)]
        + ["logRb", "residual", "hamiltonian", "consdet"]
    )
    x = traj.x
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for k, t in enumerate(traj.t):
            b = traj.b[k, member, vector]
            row = (
                [repr(float(t))]
                + [repr(float(v)) for v in x[k, member]]
                + [repr(float(v)) for v in traj.xib[k, member]]
                + [repr(float(traj.logRxi[k, member]))]
                + [repr(float(v)) for v in b.real]
                + [repr(float(v)) for v in b.imag]
                + [
                    repr(float(traj.logRb[k, member, vector])),
                    repr(float(res[k])),
                    repr(float(ham[k])),
                    "" if cons is None else repr(float(np.real(cons[k]))),
                ]
            )
            w.writerow(row)
    return path
