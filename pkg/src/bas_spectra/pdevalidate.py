"""Fourier-Galerkin evolution of linear advective PDEs on the 2-torus.

Used to check the shortwave asymptotic formula and cocycle growth predictions
against actual solutions. Fields are truncated to the square |k|_inf <= N.

Coefficient products with the flow are computed either exactly, by shifting
the coefficient array by each flow mode (the flow is a trigonometric
polynomial), or pseudo-spectrally on a zero-padded grid. Both give the
Galerkin projection of the product; the exact path is the default because it
only touches the support of the field.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import scipy.fft as sfft
from scipy.linalg import eigvals
from scipy.special import comb

from ._ode import DEFAULT_ATOL, DEFAULT_RTOL
from .cocycle import bxm_log_growth, integrate_bas
from .flows import FlowField, advance_flow
from .symbols import SymbolSpec, catalog_symbol, constraint_transform

__all__ = [
    "SpectralField",
    "WavePacket",
    "PdeBackend",
    "EvolutionBlowup",
    "apply_generator",
    "evolve",
    "hm_norm",
    "shortwave_error",
    "norm_growth",
    "packet_log_growth",
    "truncated_generator_spectrum",
    "fit_decay_order",
    "write_field_csv",
    "write_error_csv",
    "BACKEND_KINDS",
]

BACKEND_KINDS = ("advection", "euler2d_velocity", "euler2d_vorticity")
MAX_DENSE_N = 16


class EvolutionBlowup(RuntimeError):
    """Norm grew past 10x the admissible exponential bound during time stepping."""


def _wavenumbers(N: int):
    k = np.arange(-N, N + 1)
    return np.meshgrid(k, k, indexing="ij")


# ------------------------------------------------------------ fields


@dataclass
class SpectralField:
    """Truncated Fourier coefficients f(x) = sum_k c[:, k1+N, k2+N] e^{i k.x}.

    ``constrained`` marks divergence-free vector fields (d = 2); ``mean_zero``
    marks scalars with the k = 0 mode removed.
    """

    N: int
    coeffs: np.ndarray
    constrained: bool = False
    mean_zero: bool = False

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=complex)
        S = 2 * self.N + 1
        if self.coeffs.ndim != 3 or self.coeffs.shape[1:] != (S, S):
            raise ValueError(f"coefficients must have shape (d, {S}, {S})")
        if self.constrained and self.d != 2:
            raise ValueError("constrained fields are 2D vector fields")

    @property
    def d(self) -> int:
        return self.coeffs.shape[0]

    @classmethod
    def zeros(cls, N, d=1, constrained=False, mean_zero=False):
        S = 2 * N + 1
        return cls(N, np.zeros((d, S, S), complex), constrained, mean_zero)

    def like(self, coeffs) -> "SpectralField":
        return SpectralField(self.N, coeffs, self.constrained, self.mean_zero)

    def wavenumbers(self):
        return _wavenumbers(self.N)

    def project(self) -> "SpectralField":
        c = self.coeffs.copy()
        if self.constrained:
            c = _leray(c, *self.wavenumbers())
        if self.mean_zero:
            c[:, self.N, self.N] = 0.0
        return self.like(c)

    def bundle_residual(self) -> float:
        """Out-of-bundle norm relative to the field norm."""
        total = np.linalg.norm(self.coeffs)
        if total == 0:
            return 0.0
        return float(np.linalg.norm(self.coeffs - self.project().coeffs) / total)

    def hermitian_defect(self) -> float:
        """max |c(-k) - conj c(k)| relative to max |c|; zero for real fields."""
        c = self.coeffs
        scale = np.abs(c).max()
        if scale == 0:
            return 0.0
        return float(np.abs(c[:, ::-1, ::-1] - c.conj()).max() / scale)

    def l2_norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def to_grid(self, M: Optional[int] = None) -> np.ndarray:
        """Values on the uniform M x M grid x_j = 2 pi j / M, shape (d, M, M)."""
        M = M or 2 * self.N + 1
        if M < 2 * self.N + 1:
            raise ValueError("grid too coarse for the truncation")
        buf = np.zeros((self.d, M, M), complex)
        idx = np.arange(-self.N, self.N + 1) % M
        buf[:, idx[:, None], idx[None, :]] = self.coeffs
        return sfft.ifft2(buf, axes=(1, 2)) * (M * M)

    @classmethod
    def from_grid(cls, values, N, constrained=False, mean_zero=False) -> "SpectralField":
        values = np.asarray(values)
        if values.ndim == 2:
            values = values[None]
        M = values.shape[-1]
        if M < 2 * N + 1:
            raise ValueError("grid too coarse for the truncation")
        hat = sfft.fft2(values, axes=(1, 2)) / (M * M)
        idx = np.arange(-N, N + 1) % M
        return cls(N, hat[:, idx[:, None], idx[None, :]], constrained, mean_zero)


def hm_norm(f: SpectralField, m: float) -> float:
    """||f||^2 = |f(0)|^2 + sum_{k != 0} |k|^{2m} |f(k)|^2."""
    k1, k2 = f.wavenumbers()
    ksq = (k1 * k1 + k2 * k2).astype(float)
    w = np.where(ksq == 0, 1.0, ksq**m if m else 1.0)
    return float(np.sqrt(np.sum(w * np.sum(np.abs(f.coeffs) ** 2, axis=0))))


# ------------------------------------------------------------ packets


def _bump_modes(p: int):
    """Fourier coefficients of ((1 + cos s) / 2)^p on modes -p..p."""
    j = np.arange(-p, p + 1)
    return comb(2 * p, p + j, exact=False) / 4.0**p


@dataclass(frozen=True)
class WavePacket:
    """Pi[b0 h0(x) e^{i K xi0 . x}] with a band-limited envelope h0.

    ``envelope`` lists (q1, q2, coefficient) rows of h0. :meth:`bump` builds
    the product envelope prod_i ((1 + cos(x_i - c_i)) / 2)^{p_i}.
    """

    xi0: tuple
    K: int
    b0: tuple
    envelope: tuple
    center: tuple = (0.0, 0.0)

    def __post_init__(self):
        xi = np.asarray(self.xi0)
        if xi.shape != (2,) or not np.all(xi == np.round(xi)) or not np.any(xi):
            raise ValueError("carrier xi0 must be a nonzero integer 2-vector")
        if int(self.K) != self.K or self.K < 1:
            raise ValueError("K must be a positive integer")

    @classmethod
    def bump(cls, xi0, K, b0=(1.0,), center=(0.0, 0.0), p=(2, 2), tol=1e-17):
        a, b = _bump_modes(p[0]), _bump_modes(p[1])
        rows = []
        for i, ca in enumerate(a):
            for j, cb in enumerate(b):
                q = (i - p[0], j - p[1])
                c = ca * cb * np.exp(-1j * (q[0] * center[0] + q[1] * center[1]))
                if abs(c) > tol:
                    rows.append((q[0], q[1], complex(c)))
        return cls(tuple(int(v) for v in xi0), int(K), tuple(complex(v) for v in b0), tuple(rows), tuple(center))

    @property
    def carrier(self) -> np.ndarray:
        return self.K * np.asarray(self.xi0, dtype=int)

    @property
    def delta(self) -> float:
        return 1.0 / self.K

    @property
    def envelope_bandwidth(self) -> int:
        return max(max(abs(r[0]), abs(r[1])) for r in self.envelope)

    def envelope_values(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1], complex)
        for q1, q2, c in self.envelope:
            out += c * np.exp(1j * (q1 * x[..., 0] + q2 * x[..., 1]))
        return out

    def field(self, N: int, constrained: bool = False, mean_zero: bool = False) -> SpectralField:
        b0 = np.asarray(self.b0, dtype=complex)
        kc = self.carrier
        if np.abs(kc).max() + self.envelope_bandwidth > N:
            raise ValueError("truncation too small for the packet carrier and envelope")
        if constrained:
            xi = np.asarray(self.xi0, float)
            if abs(np.dot(xi, b0)) > 1e-12 * np.linalg.norm(b0) * np.linalg.norm(xi):
                raise ValueError("packet amplitude b0 must be orthogonal to xi0")
        f = SpectralField.zeros(N, b0.size, constrained, mean_zero)
        for q1, q2, c in self.envelope:
            f.coeffs[:, kc[0] + q1 + N, kc[1] + q2 + N] += c * b0
        return f.project()


# ------------------------------------------------------------ backend


@dataclass(frozen=True, eq=False)
class PdeBackend:
    """Linear advective PDE over a 2D flow, truncated at |k|_inf <= N.

    advection: -u.grad f for scalars (components=1) or Pi(-u.grad f) for
    divergence-free vectors (components=2). euler2d_velocity: linearized Euler
    in velocity form. euler2d_vorticity: linearized Euler in vorticity form on
    mean-zero scalars.
    """

    kind: str
    flow: FlowField
    N: int
    components: int = 1
    product: str = "exact"

    def __post_init__(self):
        if self.kind not in BACKEND_KINDS:
            raise ValueError(f"unknown backend {self.kind!r}; expected one of {BACKEND_KINDS}")
        if self.flow.dim != 2:
            raise ValueError("PDE backends are two-dimensional")
        if self.product not in ("exact", "pseudospectral"):
            raise ValueError("product must be 'exact' or 'pseudospectral'")
        if self.kind == "advection" and self.components not in (1, 2):
            raise ValueError("advection components must be 1 or 2")
        if self.N < 1:
            raise ValueError("N must be positive")

    @property
    def d(self) -> int:
        if self.kind == "euler2d_velocity":
            return 2
        if self.kind == "euler2d_vorticity":
            return 1
        return self.components

    @property
    def constrained(self) -> bool:
        return self.d == 2

    @property
    def mean_zero(self) -> bool:
        return self.kind == "euler2d_vorticity"

    def zeros(self) -> SpectralField:
        return SpectralField.zeros(self.N, self.d, self.constrained, self.mean_zero)

    def packet_field(self, packet: WavePacket) -> SpectralField:
        return packet.field(self.N, self.constrained, self.mean_zero)

    def symbol(self) -> SymbolSpec:
        """Principal symbol whose cocycle predicts shortwave solutions of this PDE."""
        if self.kind == "euler2d_velocity":
            sym = catalog_symbol("euler_velocity", self.flow)
        else:
            sym = catalog_symbol("transport", self.flow, {"components": self.d})
        return constraint_transform(sym)

    # flow data split into the mean velocity and the oscillating modes
    def _modes(self):
        k = self.flow.wavevectors.astype(int)
        a = self.flow.amplitudes
        mean = k.any(axis=1) == 0
        return k[~mean], a[~mean], np.real(a[mean].sum(axis=0)) if mean.any() else np.zeros(2)

    @property
    def mean_velocity(self) -> np.ndarray:
        return self._modes()[2]

    def _terms(self, coeff_of_mode):
        """Real trig polynomial sum_j Re(c_j e^{i k_j x}) as shift terms (q, c)."""
        k, a, _ = self._modes()
        out = []
        for kj, aj in zip(k, a):
            c = coeff_of_mode(kj, aj)
            out.append((kj, 0.5 * c))
            out.append((-kj, 0.5 * np.conj(c)))
        return out

    def growth_rate_bound(self) -> float:
        """Crude L^2 exponential bound for the generator used by the blow-up guard."""
        k, a, _ = self._modes()
        if k.size == 0:
            return 0.0
        kn = np.linalg.norm(k, axis=1)
        an = np.linalg.norm(a, axis=1)
        if self.kind == "advection":
            return 0.0
        if self.kind == "euler2d_velocity":
            return float(3.0 * np.sum(kn * an))
        return float(np.sum(kn * kn * an))

    def oscillation_speed(self) -> float:
        k, a, _ = self._modes()
        return float(np.sum(np.linalg.norm(a, axis=1))) if k.size else 0.0


def _shift_add(out, F, q):
    """out[..., k] += F[..., k - q] on the common index window."""
    S1, S2 = F.shape[-2:]
    q1, q2 = int(q[0]), int(q[1])
    if abs(q1) >= S1 or abs(q2) >= S2:
        return
    dst = (Ellipsis, slice(max(q1, 0), S1 + min(q1, 0)), slice(max(q2, 0), S2 + min(q2, 0)))
    src = (Ellipsis, slice(max(-q1, 0), S1 - max(q1, 0)), slice(max(-q2, 0), S2 - max(q2, 0)))
    out[dst] += F[src]


def _support_box(c, pad, S):
    rows = np.flatnonzero(np.any(c != 0, axis=(0, 2)))
    if rows.size == 0:
        return None
    cols = np.flatnonzero(np.any(c[:, rows[0] : rows[-1] + 1] != 0, axis=(0, 1)))
    lo1, hi1 = max(rows[0] - pad, 0), min(rows[-1] + pad + 1, S)
    lo2, hi2 = max(cols[0] - pad, 0), min(cols[-1] + pad + 1, S)
    return slice(lo1, hi1), slice(lo2, hi2)


@lru_cache(maxsize=16)
def _stencil(backend: PdeBackend):
    """Per flow mode q: a source-side weight w_q(k) and, for Euler, a matrix C_q.

    The generator block is out(k) = sum_q w_q(k - q) f(k - q) plus, for the
    velocity form, (I - 2 Pi) sum_q C_q f(k - q).
    """
    k1, k2 = _wavenumbers(backend.N)
    ksq = (k1 * k1 + k2 * k2).astype(float)
    inv = np.where(ksq == 0, 0.0, -1.0 / np.where(ksq == 0, 1.0, ksq))
    k, a, _ = backend._modes()
    terms = []
    for kj, aj in zip(k, a):
        C = 1j * np.outer(aj, kj)
        w_om = 1j * (kj[0] * aj[1] - kj[1] * aj[0])
        g = 1j * kj * w_om  # grad omega coefficient
        for q, cu, Cq, gq in ((kj, 0.5 * aj, 0.5 * C, 0.5 * g), (-kj, 0.5 * np.conj(aj), 0.5 * np.conj(C), 0.5 * np.conj(g))):
            w = -1j * (cu[0] * k1 + cu[1] * k2)
            if backend.kind == "euler2d_vorticity":
                # -(grad_perp Delta^{-1} f) . grad omega
                w = w - (gq[0] * (-1j * k2) + gq[1] * (1j * k1)) * inv
            terms.append((q, w, Cq if backend.kind == "euler2d_velocity" else None))
    return terms


def _exact_rhs(backend: PdeBackend, c, box):
    """Generator (without the mean flow) on the coefficient block c[:, box]."""
    out = np.zeros_like(c)
    duf = np.zeros_like(c) if backend.kind == "euler2d_velocity" else None
    for q, w, C in _stencil(backend):
        _shift_add(out, w[box] * c, q)
        if C is not None:
            _shift_add(duf, np.tensordot(C, c, axes=1), q)
    if duf is not None:
        k1, k2 = _wavenumbers(backend.N)
        out += duf - 2.0 * _leray(duf, k1[box], k2[box])
    return out


def _pseudospectral_rhs(backend: PdeBackend, c, N):
    """Same generator with products on a zero-padded physical grid."""
    f = SpectralField(N, c)
    B = max(backend.flow.max_mode, 1)
    M = sfft.next_fast_len(max(int(math.ceil(1.5 * (2 * N + 1))), 2 * N + B + 1))
    x = 2.0 * np.pi * np.arange(M) / M
    X = np.stack(np.meshgrid(x, x, indexing="ij"), axis=-1)
    u, du = backend.flow.velocity_and_jacobian(X)
    k1, k2 = f.wavenumbers()
    gx = f.like(1j * k1 * c).to_grid(M)
    gy = f.like(1j * k2 * c).to_grid(M)
    prod = -(u[..., 0] * gx + u[..., 1] * gy)
    if backend.kind == "euler2d_velocity":
        fg = f.to_grid(M)
        duf = np.einsum("xyab,bxy->axy", du, fg)
        duf_hat = SpectralField.from_grid(duf, N).coeffs
        tail = duf_hat - 2.0 * _leray(duf_hat, k1, k2)
        return SpectralField.from_grid(prod, N).coeffs + tail
    if backend.kind == "euler2d_vorticity":
        ksq = (k1 * k1 + k2 * k2).astype(float)
        psi = np.where(ksq == 0, 0.0, -c[0] / np.where(ksq == 0, 1.0, ksq))
        v1 = f.like((-1j * k2 * psi)[None]).to_grid(M)[0]
        v2 = f.like((1j * k1 * psi)[None]).to_grid(M)[0]
        xs = X.reshape(-1, 2)
        # grad omega from the flow's Fourier modes
        k, a, _ = backend._modes()
        gw = np.zeros((M * M, 2))
        for kj, aj in zip(k, a):
            w = 1j * (kj[0] * aj[1] - kj[1] * aj[0])
            e = np.exp(1j * xs @ kj)
            gw += np.real(np.outer(e, 1j * kj * w))
        gw = gw.reshape(M, M, 2)
        prod = prod - (v1 * gw[..., 0] + v2 * gw[..., 1])[None]
    return SpectralField.from_grid(prod, N).coeffs


def _check(backend: PdeBackend, f: SpectralField):
    if f.N != backend.N or f.d != backend.d:
        raise ValueError(
            f"field (N={f.N}, d={f.d}) does not match backend (N={backend.N}, d={backend.d})"
        )


def _leray(c, k1, k2):
    """Apply I - k k^T / |k|^2 to a (2, ...) block; the mean mode is left alone."""
    ksq = (k1 * k1 + k2 * k2).astype(float)
    s = (k1 * c[0] + k2 * c[1]) / np.where(ksq == 0, 1.0, ksq)
    return np.stack([c[0] - k1 * s, c[1] - k2 * s])


def _generator_coeffs(backend: PdeBackend, c, include_mean=True):
    N = backend.N
    S = 2 * N + 1
    k1, k2 = _wavenumbers(N)
    out = np.zeros_like(c)
    if backend.product == "pseudospectral":
        box = (slice(0, S), slice(0, S))
        out = _pseudospectral_rhs(backend, c, N)
        if not include_mean:
            ubar = backend.mean_velocity
            out = out + 1j * (k1 * ubar[0] + k2 * ubar[1]) * c
    else:
        box = _support_box(c, backend.flow.max_mode, S)
        if box is None:
            return out
        kb1, kb2 = k1[box], k2[box]
        cb = c[(slice(None),) + box]
        ob = _exact_rhs(backend, cb, box)
        if include_mean:
            ubar = backend.mean_velocity
            ob = ob - 1j * (kb1 * ubar[0] + kb2 * ubar[1]) * cb
        out[(slice(None),) + box] = ob
    if backend.constrained:
        sub = (slice(None),) + box
        out[sub] = _leray(out[sub], k1[box], k2[box])
    if backend.mean_zero:
        out[:, N, N] = 0.0
    return out


def apply_generator(backend: PdeBackend, f: SpectralField) -> SpectralField:
    """L f, truncated to the backend's modes."""
    _check(backend, f)
    return f.like(_generator_coeffs(backend, f.coeffs))


# ------------------------------------------------------------ time stepping


def _default_steps(backend: PdeBackend, t: float, cfl: float) -> int:
    omega = backend.oscillation_speed() * math.sqrt(2.0) * backend.N + backend.growth_rate_bound()
    if omega == 0:
        return 1
    return max(1, int(math.ceil(abs(t) * omega / cfl)))


def evolve(
    backend: PdeBackend,
    f0: SpectralField,
    t: float,
    steps: Optional[int] = None,
    *,
    cfl: float = 0.5,
    growth_rate: Optional[float] = None,
) -> SpectralField:
    """G_t f0 by integrating-factor RK4.

    The mean-velocity part -i k.u_bar is a diagonal multiplier and is
    integrated exactly, so constant flows are transported without time-stepping
    error. The remaining generator is stepped with classical RK4 using
    ``steps`` equal steps (default from a CFL bound on the oscillating flow
    modes). Raises :class:`EvolutionBlowup` when ||f|| exceeds 10 exp(rate |t|)
    ||f0||, with ``rate`` defaulting to a crude bound of the generator.
    """
    _check(backend, f0)
    if not math.isfinite(t):
        raise ValueError("t must be finite")
    c = f0.coeffs.copy()
    if t == 0 or not np.any(c):
        return f0.like(c)
    n = steps or _default_steps(backend, t, cfl)
    h = t / n
    k1, k2 = _wavenumbers(backend.N)
    ubar = backend.mean_velocity
    diag = -1j * (k1 * ubar[0] + k2 * ubar[1])
    half = np.exp(0.5 * h * diag)
    full = half * half
    has_osc = backend._modes()[0].size > 0
    rate = backend.growth_rate_bound() if growth_rate is None else growth_rate
    norm0 = np.linalg.norm(c)

    def L(v):
        return _generator_coeffs(backend, v, include_mean=False)

    if not np.any(ubar):
        half = full = 1.0
    for i in range(n):
        if has_osc:
            a1 = L(c)
            a2 = L(half * (c + 0.5 * h * a1))
            a3 = L(half * c + 0.5 * h * a2)
            a4 = L(full * c + h * half * a3)
            c = full * c + (h / 6.0) * (full * a1 + 2.0 * half * (a2 + a3) + a4)
        else:
            c = full * c
        nrm = np.linalg.norm(c)
        limit = 10.0 * math.exp(rate * abs(h) * (i + 1)) * norm0
        if not np.isfinite(nrm) or nrm > limit:
            raise EvolutionBlowup(
                f"norm {nrm:.3e} exceeds 10x the bound {limit / 10:.3e} at t={h * (i + 1):.4g}"
            )
    return f0.like(c)


# ------------------------------------------------------------ validation


def _prediction(backend, packet, t, symbol, rtol, atol, M):
    flow = backend.flow
    x = 2.0 * np.pi * np.arange(M) / M
    X = np.stack(np.meshgrid(x, x, indexing="ij"), axis=-1).reshape(-1, 2)
    Y = advance_flow(flow, X, -t, rtol=rtol, atol=atol) if t else X
    xi0 = np.asarray(packet.xi0, float)
    b0 = np.asarray(packet.b0, complex)
    h = packet.envelope_values(Y)
    phase = np.exp(1j * packet.K * (Y @ xi0))
    if t:
        traj = integrate_bas(
            flow, symbol, Y, np.broadcast_to(xi0, Y.shape), np.broadcast_to(b0, (Y.shape[0], b0.size)),
            [0.0, t], rtol=rtol, atol=atol,
        )
        amp = traj.amplitude_vectors()[-1, :, 0, :]  # (M*M, d)
    else:
        amp = np.broadcast_to(b0, (Y.shape[0], b0.size))
    vals = (amp * (h * phase)[:, None]).T.reshape(b0.size, M, M)
    return SpectralField.from_grid(vals, backend.N, backend.constrained, backend.mean_zero).project()


def shortwave_error(
    backend: PdeBackend,
    packet: WavePacket,
    t: float,
    symbol: Optional[SymbolSpec] = None,
    *,
    steps: Optional[int] = None,
    cfl: float = 0.5,
    rtol: float = 1e-8,
    atol: float = 1e-10,
) -> float:
    """Relative l2 distance between G_t(packet) and the cocycle prediction.

    The prediction is B_t(y, xi0) b0 h0(y) e^{i K xi0 . y} with y = phi_{-t}(x),
    sampled on a grid, transformed and projected.
    """
    if np.abs(packet.carrier).max() > backend.N / 2:
        raise ValueError("truncation too small: need K |xi0|_inf <= N / 2")
    symbol = symbol or backend.symbol()
    f0 = backend.packet_field(packet)
    ft = evolve(backend, f0, t, steps, cfl=cfl)
    M = sfft.next_fast_len(2 * backend.N + 1)
    pred = _prediction(backend, packet, t, symbol, rtol, atol, M)
    denom = np.linalg.norm(pred.coeffs)
    return float(np.linalg.norm(ft.coeffs - pred.coeffs) / denom)


def packet_log_growth(backend: PdeBackend, packet: WavePacket, m: float, t: float) -> float:
    """log |(BX^m)_t b0| along the packet's own (center, xi0, b0)."""
    if t == 0:
        return 0.0
    traj = integrate_bas(
        backend.flow, backend.symbol(), np.asarray(packet.center, float),
        np.asarray(packet.xi0, float), np.asarray(packet.b0, complex), [0.0, t],
    )
    lg = bxm_log_growth(traj, m)[-1, 0, 0]
    return float(lg - math.log(np.linalg.norm(packet.b0)))


def norm_growth(
    backend: PdeBackend,
    m: float,
    packets: Sequence[WavePacket],
    t: float,
    steps: Optional[int] = None,
    cfl: float = 0.5,
) -> float:
    """max over packets of ||G_t f||_{H^m} / ||f||_{H^m}."""
    best = 0.0
    for p in packets:
        f0 = backend.packet_field(p)
        ft = evolve(backend, f0, t, steps, cfl=cfl)
        best = max(best, hm_norm(ft, m) / hm_norm(f0, m))
    return best


def truncated_generator_spectrum(backend: PdeBackend, m: float = 0.0, n_max: int = MAX_DENSE_N) -> np.ndarray:
    """Eigenvalues of the generator restricted to the truncated (constrained) space.

    Diagnostic only: truncations do not converge to the essential spectrum.
    Eigenvalues are similarity invariant, so the H^m weighting ``m`` does not
    change them; the matrix is assembled in H^m-orthonormal coordinates anyway.
    """
    N = backend.N
    if N > n_max:
        raise ValueError(f"N={N} too large for a dense generator (limit {n_max})")
    k1, k2 = _wavenumbers(N)
    S = 2 * N + 1
    basis = []
    for i in range(S):
        for j in range(S):
            kk = (k1[i, j], k2[i, j])
            if backend.mean_zero and kk == (0, 0):
                continue
            ksq = kk[0] ** 2 + kk[1] ** 2
            w = 1.0 if ksq == 0 else float(ksq) ** (-m / 2.0)
            if backend.d == 1:
                vecs = [np.array([1.0])]
            elif ksq == 0:
                vecs = [np.array([1.0, 0.0]), np.array([0.0, 1.0])]
            else:
                vecs = [np.array([-kk[1], kk[0]]) / math.sqrt(ksq)]
            for v in vecs:
                basis.append((i, j, v * w))
    n = len(basis)
    E = np.zeros((n, backend.d * S * S), complex)
    for col, (i, j, v) in enumerate(basis):
        e = np.zeros((backend.d, S, S), complex)
        e[:, i, j] = v
        E[col] = e.ravel()
    # coordinates: c = sum_col z_col E[col]; E rows are orthogonal
    norms = np.sum(np.abs(E) ** 2, axis=1)
    A = np.zeros((n, n), complex)
    for col in range(n):
        Lc = _generator_coeffs(backend, E[col].reshape(backend.d, S, S)).ravel()
        A[:, col] = (E.conj() @ Lc) / norms
    return eigvals(A)


def fit_decay_order(deltas, errors) -> float:
    """Least-squares slope of log(error) against log(delta)."""
    return float(np.polyfit(np.log(deltas), np.log(errors), 1)[0])


def write_field_csv(f: SpectralField, path) -> Path:
    """Coefficient snapshot with columns k1, k2, component, re, im."""
    path = Path(path)
    k1, k2 = f.wavenumbers()
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k1", "k2", "component", "re", "im"])
        for a in range(f.d):
            for i, j in zip(*np.nonzero(f.coeffs[a])):
                v = f.coeffs[a, i, j]
                w.writerow([int(k1[i, j]), int(k2[i, j]), a, repr(float(v.real)), repr(float(v.imag))])
    return path


def write_error_csv(rows, path) -> Path:
    """Error curve with columns delta, t, error from (delta, t, error) rows."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["delta", "t", "error"])
        for delta, t, err in rows:
            w.writerow([repr(float(delta)), repr(float(t)), repr(float(err))])
    return path
