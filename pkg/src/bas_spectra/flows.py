"""Steady incompressible flows on the torus and their Lagrangian maps.

Every flow is stored as a finite real Fourier series of the velocity,

    u(x) = Re sum_j  uhat_j exp(i k_j . x),    k_j . uhat_j = 0,

so divergence-freeness holds mode by mode and the Jacobian is analytic. Catalog
entries and user-supplied stream functions / vector potentials are converted to
this form on construction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ._ode import DEFAULT_ATOL, DEFAULT_RTOL, IntegrationError, integrate

__all__ = [
    "FlowField",
    "JacobiState",
    "IntegrationError",
    "catalog_flow",
    "flow_from_stream_function",
    "flow_from_vector_potential",
    "flow_from_velocity_modes",
    "flow_from_json",
    "advance_flow",
    "jacobi_cocycle",
    "wrap",
    "CATALOG_FLOWS",
]

TWO_PI = 2.0 * np.pi
DIV_TOL = 1e-12


def wrap(x):
    """Reduce torus coordinates to [0, 2*pi)."""
    return np.mod(x, TWO_PI)


@dataclass(frozen=True, eq=False)
class FlowField:
    """Velocity field on the n-torus given by Fourier modes.

    ``wavevectors`` has shape (J, n) (integers) and ``amplitudes`` shape (J, n)
    (complex). ``stagnation_points`` lists points known analytically to have
    u = 0; they are injected into every exponent ensemble.
    """

    name: str
    dim: int
    wavevectors: np.ndarray
    amplitudes: np.ndarray
    params: tuple = ()
    stagnation_points: tuple = field(default=())

    def __post_init__(self):
        k = np.asarray(self.wavevectors, dtype=float).reshape(-1, self.dim)
        a = np.asarray(self.amplitudes, dtype=complex).reshape(-1, self.dim)
        if self.dim not in (2, 3):
            raise ValueError(f"flow dimension must be 2 or 3, got {self.dim}")
        if k.shape != a.shape:
            raise ValueError("wavevectors and amplitudes must have matching shapes")
        if np.any(np.abs(k - np.round(k)) > 0):
            raise ValueError("wavevectors must be integer lattice vectors")
        div = np.abs(np.einsum("ji,ji->j", k, a))
        if div.size and div.max() > DIV_TOL * max(1.0, np.abs(a).max()):
            raise ValueError(
                f"velocity is not divergence-free: max |k.uhat| = {div.max():.3e}"
            )
        object.__setattr__(self, "wavevectors", k)
        object.__setattr__(self, "amplitudes", a)
        object.__setattr__(self, "_ik", 1j * k)

    @property
    def max_mode(self) -> int:
        """Largest |k_i| over all modes (bandwidth used for dealiasing)."""
        if self.wavevectors.size == 0:
            return 0
        return int(np.abs(self.wavevectors).max())

    def _phases(self, x):
        x = np.asarray(x, dtype=float)
        return np.exp(1j * (x @ self.wavevectors.T))

    def velocity(self, x) -> np.ndarray:
        """u(x) for points of shape (..., n)."""
        e = self._phases(x)
        return (e @ self.amplitudes).real

    def jacobian(self, x) -> np.ndarray:
        """Matrix du_i/dx_l for points of shape (..., n); result (..., n, n)."""
        e = self._phases(x)
        return np.einsum("...j,ji,jl->...il", e, self.amplitudes, self._ik).real

    def velocity_and_jacobian(self, x):
        e = self._phases(x)
        u = (e @ self.amplitudes).real
        du = np.einsum("...j,ji,jl->...il", e, self.amplitudes, self._ik).real
        return u, du

    def vorticity_2d(self, x) -> np.ndarray:
        """Scalar vorticity d u2/dx - d u1/dy (2D only)."""
        if self.dim != 2:
            raise ValueError("scalar vorticity is defined for 2D flows only")
        du = self.jacobian(x)
        return du[..., 1, 0] - du[..., 0, 1]

    def vorticity_3d(self, x) -> np.ndarray:
        """curl u (3D only)."""
        if self.dim != 3:
            raise ValueError("vorticity vector is defined for 3D flows only")
        du = self.jacobian(x)
        return np.stack(
            [
                du[..., 2, 1] - du[..., 1, 2],
                du[..., 0, 2] - du[..., 2, 0],
                du[..., 1, 0] - du[..., 0, 1],
            ],
            axis=-1,
        )

    def speed_bound(self) -> float:
        """Upper bound on max |u| (sum of mode amplitudes)."""
        return float(np.linalg.norm(self.amplitudes, axis=1).sum())


@dataclass
class JacobiState:
    """Position phi_t(x0) (wrapped) and the Jacobian matrix d phi_t(x0)."""

    x: np.ndarray
    J: np.ndarray
    t: float = 0.0


# ----------------------------------------------------------------- catalog


def _stream_modes_to_velocity(k, c):
    k = np.asarray(k, dtype=float).reshape(-1, 2)
    c = np.asarray(c, dtype=complex).ravel()
    # u = (-d psi/dy, d psi/dx)
    amp = np.stack([-1j * k[:, 1] * c, 1j * k[:, 0] * c], axis=1)
    return k, amp


def _potential_modes_to_velocity(k, chat):
    k = np.asarray(k, dtype=float).reshape(-1, 3)
    chat = np.asarray(chat, dtype=complex).reshape(-1, 3)
    return k, np.cross(1j * k, chat)


def _cellular(a):
    # psi = a sin x sin y = Re(a/2 e^{i(x-y)} - a/2 e^{i(x+y)})
    k, amp = _stream_modes_to_velocity([[1, -1], [1, 1]], [a / 2, -a / 2])
    stag = tuple(
        (float(px), float(py))
        for px, py in [(0, 0), (np.pi, 0), (0, np.pi), (np.pi, np.pi)]
    ) + tuple(
        (float(px), float(py))
        for px in (np.pi / 2, 3 * np.pi / 2)
        for py in (np.pi / 2, 3 * np.pi / 2)
    )
    return k, amp, stag if a != 0 else ()


def _shear(a):
    # u = (a sin y, 0) from psi = a cos y
    k, amp = _stream_modes_to_velocity([[0, 1]], [a])
    stag = ((0.0, 0.0), (0.0, float(np.pi))) if a != 0 else ()
    return k, amp, stag


def _abc(A, B, C):
    k = np.array([[0, 0, 1], [1, 0, 0], [0, 1, 0]], dtype=float)
    amp = np.array(
        [[-1j * A, A, 0], [0, -1j * B, B], [C, 0, -1j * C]], dtype=complex
    )
    return k, amp, ()


CATALOG_FLOWS = ("constant", "shear", "cellular", "abc")


def catalog_flow(name: str, params: Sequence[float]) -> FlowField:
    """Build one of the catalog flows.

    constant: params = c (2 or 3 components); shear: (a,) giving u = (a sin y, 0);
    cellular: (a,) giving u = a(-sin x cos y, cos x sin y); abc: (A, B, C).
    """
    params = tuple(float(p) for p in np.atleast_1d(params))
    if name == "constant":
        if len(params) not in (2, 3):
            raise ValueError("constant flow takes 2 or 3 parameters (the velocity)")
        n = len(params)
        return FlowField(
            "constant",
            n,
            np.zeros((1, n)),
            np.array([params], dtype=complex),
            params,
            stagnation_points=() if any(params) else ((0.0,) * n,),
        )
    if name in ("shear", "cellular"):
        if len(params) != 1:
            raise ValueError(f"{name} flow takes 1 parameter (amplitude), got {len(params)}")
        k, amp, stag = (_shear if name == "shear" else _cellular)(params[0])
        return FlowField(name, 2, k, amp, params, stagnation_points=stag)
    if name == "abc":
        if len(params) != 3:
            raise ValueError(f"abc flow takes 3 parameters (A, B, C), got {len(params)}")
        k, amp, stag = _abc(*params)
        return FlowField("abc", 3, k, amp, params, stagnation_points=stag)
    raise ValueError(f"unknown flow name {name!r}; expected one of {CATALOG_FLOWS}")


def flow_from_stream_function(modes, name: str = "stream_function") -> FlowField:
    """2D flow from stream-function modes ``[[k1, k2, re, im], ...]``.

    psi(x) = Re sum (re + i im) exp(i k.x) and u = (-d psi/dy, d psi/dx).
    """
    modes = np.asarray(modes, dtype=float).reshape(-1, 4)
    k, amp = _stream_modes_to_velocity(modes[:, :2], modes[:, 2] + 1j * modes[:, 3])
    return FlowField(name, 2, k, amp, tuple(map(tuple, modes)))


def flow_from_vector_potential(modes, name: str = "vector_potential") -> FlowField:
    """3D flow u = curl A from modes ``[[k1, k2, k3, component, re, im], ...]``."""
    modes = np.asarray(modes, dtype=float).reshape(-1, 6)
    chat = np.zeros((modes.shape[0], 3), dtype=complex)
    comp = modes[:, 3].astype(int)
    if np.any((comp < 0) | (comp > 2)):
        raise ValueError("vector potential component index must be 0, 1 or 2")
    chat[np.arange(len(comp)), comp] = modes[:, 4] + 1j * modes[:, 5]
    k, amp = _potential_modes_to_velocity(modes[:, :3], chat)
    return FlowField(name, 3, k, amp, tuple(map(tuple, modes)))


def flow_from_velocity_modes(wavevectors, amplitudes, name: str = "custom") -> FlowField:
    """Flow given directly by velocity modes; rejected unless divergence-free."""
    k = np.asarray(wavevectors, dtype=float)
    return FlowField(name, k.shape[-1], k, np.asarray(amplitudes, dtype=complex))


def flow_from_json(doc) -> FlowField:
    """Flow from ``{"name", "params"}`` or ``{"stream_function_modes": ...}``.

    ``doc`` may be a dict, a JSON string, or a path.
    """
    if isinstance(doc, (str, Path)) and Path(str(doc)).exists():
        doc = json.loads(Path(doc).read_text())
    elif isinstance(doc, str):
        doc = json.loads(doc)
    if "stream_function_modes" in doc:
        return flow_from_stream_function(doc["stream_function_modes"], doc.get("name", "stream_function"))
    if "vector_potential_modes" in doc:
        return flow_from_vector_potential(doc["vector_potential_modes"], doc.get("name", "vector_potential"))
    if "name" not in doc:
        raise ValueError("flow document needs 'name' or 'stream_function_modes'")
    return catalog_flow(doc["name"], doc.get("params", []))


# ------------------------------------------------------------ integration


def advance_flow(flow: FlowField, x0, t: float, *, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL):
    """phi_t(x0), wrapped to [0, 2 pi)^n. ``x0`` may be (n,) or (M, n)."""
    x0 = np.asarray(x0, dtype=float)
    shape = x0.shape

    def rhs(_, y):
        return flow.velocity(y.reshape(shape)).ravel()

    y = integrate(rhs, x0, [t], rtol=rtol, atol=atol)[-1]
    return wrap(y.reshape(shape))


def jacobi_cocycle(flow: FlowField, x0, t: float, *, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL) -> JacobiState:
    """Integrate x' = u(x), J' = du(x) J with J(0) = id jointly."""
    x0 = np.asarray(x0, dtype=float)
    n = flow.dim
    batch = x0.shape[:-1]
    J0 = np.broadcast_to(np.eye(n), batch + (n, n))
    y0 = np.concatenate([x0.reshape(-1, n), J0.reshape(-1, n * n)], axis=1)
    m = y0.shape[0]

    def rhs(_, y):
        y = y.reshape(m, n + n * n)
        u, du = flow.velocity_and_jacobian(y[:, :n])
        J = y[:, n:].reshape(m, n, n)
        return np.concatenate([u, (du @ J).reshape(m, n * n)], axis=1).ravel()

    y = integrate(rhs, y0, [t], rtol=rtol, atol=atol)[-1].reshape(m, n + n * n)
    x = wrap(y[:, :n]).reshape(batch + (n,))
    J = y[:, n:].reshape(batch + (n, n))
    return JacobiState(x=x, J=J, t=float(t))
