"""Principal symbols of linearized ideal-fluid equations and frequency bundles.

A symbol is evaluated on unit frequencies only; every catalog entry is
0-homogeneous in the frequency. Evaluators are vectorized over leading axes:
``x`` and ``xi`` of shape (..., n) give matrices of shape (..., d, d).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .flows import FlowField

__all__ = [
    "FrequencyBundle",
    "SymbolSpec",
    "EQUATIONS",
    "full_bundle",
    "divergence_free_bundle",
    "boussinesq_bundle",
    "catalog_symbol",
    "euler_velocity_principal",
    "constraint_transform",
    "sobolev_shift",
    "symbol_from_json",
]

EQUATIONS = (
    "transport",
    "euler_velocity",
    "euler_velocity_coriolis",
    "euler_vorticity",
    "euler_vorticity_coriolis",
    "boussinesq",
    "camassa_holm",
    "superconductivity",
    "sqg",
    "kinematic_dynamo",
)


def _unit(xi):
    xi = np.asarray(xi, dtype=float)
    return xi / np.linalg.norm(xi, axis=-1, keepdims=True)


def _outer(v):
    return v[..., :, None] * v[..., None, :]


def _eye(batch, d):
    return np.broadcast_to(np.eye(d), batch + (d, d))


def _cross_matrix(w):
    """Matrix W with W b = w x b, vectorized over leading axes of w."""
    w = np.asarray(w, dtype=float)
    z = np.zeros(w.shape[:-1])
    return np.stack(
        [
            np.stack([z, -w[..., 2], w[..., 1]], axis=-1),
            np.stack([w[..., 2], z, -w[..., 0]], axis=-1),
            np.stack([-w[..., 1], w[..., 0], z], axis=-1),
        ],
        axis=-2,
    )


# --------------------------------------------------------------- bundles


@dataclass(frozen=True, eq=False)
class FrequencyBundle:
    """Orthogonal projector field p(xi) onto the fibers F(xi) of C^d.

    ``gradient`` returns d p_kl / d xi_j with shape (..., d, d, n); it is only
    needed by the general constraint transform. ``frame`` returns an orthonormal
    basis of F(xi) as columns, shape (..., d, r).
    """

    kind: str
    d: int
    projector: Callable[[np.ndarray], np.ndarray]
    frame: Callable[[np.ndarray], np.ndarray]
    gradient: Optional[Callable[[np.ndarray], np.ndarray]] = None
    rank: int = 0

    @property
    def trivial(self) -> bool:
        return self.kind == "full"


def full_bundle(d: int) -> FrequencyBundle:
    def proj(xi):
        return _eye(np.shape(xi)[:-1], d).astype(complex)

    def grad(xi):
        return np.zeros(np.shape(xi)[:-1] + (d, d, np.shape(xi)[-1]))

    return FrequencyBundle("full", d, proj, proj, grad, rank=d)


def _perp_frame(xib):
    """Orthonormal basis of the complement of the unit vector xib (real)."""
    n = xib.shape[-1]
    if n == 2:
        return np.stack([-xib[..., 1], xib[..., 0]], axis=-1)[..., None]
    # pick the coordinate axis least aligned with xi, Gram-Schmidt, then cross
    idx = np.argmin(np.abs(xib), axis=-1)
    e = np.eye(3)[idx]
    v1 = e - np.sum(e * xib, axis=-1, keepdims=True) * xib
    v1 /= np.linalg.norm(v1, axis=-1, keepdims=True)
    v2 = np.cross(xib, v1)
    return np.stack([v1, v2], axis=-1)


def _div_free_gradient(xi):
    xi = np.asarray(xi, dtype=float)
    n = xi.shape[-1]
    r2 = np.sum(xi * xi, axis=-1)[..., None, None, None]
    eye = np.eye(n)
    # d/d xi_j of (delta_kl - xi_k xi_l / |xi|^2)
    t1 = np.einsum("kj,...l->...klj", eye, xi)
    t2 = np.einsum("lj,...k->...klj", eye, xi)
    t3 = np.einsum("...k,...l,...j->...klj", xi, xi, xi)
    return -(t1 + t2) / r2 + 2.0 * t3 / r2**2


def divergence_free_bundle(n: int) -> FrequencyBundle:
    """F(xi) = {b : b . xi = 0}, p = id - xi (x) xi / |xi|^2 on C^n."""

    def proj(xi):
        xib = _unit(xi)
        return (_eye(xib.shape[:-1], n) - _outer(xib)).astype(complex)

    def frame(xi):
        return _perp_frame(_unit(xi)).astype(complex)

    return FrequencyBundle("divergence_free", n, proj, frame, _div_free_gradient, rank=n - 1)


def boussinesq_bundle(n: int) -> FrequencyBundle:
    """Divergence-free velocity block plus an unconstrained density component."""
    d = n + 1

    def proj(xi):
        xib = _unit(xi)
        p = np.zeros(xib.shape[:-1] + (d, d), dtype=complex)
        p[..., :n, :n] = np.eye(n) - _outer(xib)
        p[..., n, n] = 1.0
        return p

    def frame(xi):
        xib = _unit(xi)
        f = np.zeros(xib.shape[:-1] + (d, n), dtype=complex)
        f[..., :n, : n - 1] = _perp_frame(xib)
        f[..., n, n - 1] = 1.0
        return f

    def grad(xi):
        xi = np.asarray(xi, dtype=float)
        g = np.zeros(xi.shape[:-1] + (d, d, n))
        g[..., :n, :n, :] = _div_free_gradient(xi)
        return g

    return FrequencyBundle("custom", d, proj, frame, grad, rank=n)


# ---------------------------------------------------------------- symbols


@dataclass(frozen=True, eq=False)
class SymbolSpec:
    """Principal symbol a0(x, xi) together with its frequency bundle.

    ``evaluate(x, xib, du)`` receives unit frequencies and the flow Jacobian at
    ``x`` (so callers that already have it avoid recomputation).
    """

    name: str
    flow: FlowField
    d: int
    evaluate: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
    bundle: FrequencyBundle
    equilibrium: dict = field(default_factory=dict)
    transformed: bool = False

    @property
    def n(self) -> int:
        return self.flow.dim

    def principal(self, x, xi) -> np.ndarray:
        """a0(x, xi) for arbitrary nonzero xi."""
        x = np.asarray(x, dtype=float)
        xib = _unit(xi)
        x, xib = np.broadcast_arrays(x, xib)
        return self.evaluate(x, xib, self.flow.jacobian(x))


def _scalar_field_gradient(modes, n):
    """Gradient evaluator of Re sum c exp(i k.x) from rows [k..., re, im]."""
    modes = np.asarray(modes, dtype=float).reshape(-1, n + 2)
    k = modes[:, :n]
    c = modes[:, n] + 1j * modes[:, n + 1]

    def grad(x):
        e = np.exp(1j * (np.asarray(x) @ k.T))
        return ((e * c) @ (1j * k)).real

    return grad


def _vector_data(data, key, n, required=True):
    if key not in data:
        if required:
            raise ValueError(f"missing equilibrium data {key!r}")
        return None
    v = np.asarray(data[key], dtype=float)
    if v.shape != (n,):
        raise ValueError(f"equilibrium data {key!r} must have {n} components, got shape {v.shape}")
    return v


def _gradient_data(data, name, n):
    """Gradient field from either '<name>_modes' or a constant 'grad_<name>'."""
    if f"{name}_modes" in data:
        return _scalar_field_gradient(data[f"{name}_modes"], n)
    g = _vector_data(data, f"grad_{name}", n, required=False)
    if g is None:
        raise ValueError(f"missing equilibrium data: give '{name}_modes' or 'grad_{name}'")
    return lambda x: np.broadcast_to(g, np.shape(x)[:-1] + (n,))


def _sqg_theta_gradient(flow: FlowField):
    # u = (-d psi/dy, d psi/dx) with theta = |k| psi per mode; i k psi_hat = (u2_hat, -u1_hat)
    k = flow.wavevectors
    kn = np.linalg.norm(k, axis=1)
    g_hat = np.stack([flow.amplitudes[:, 1], -flow.amplitudes[:, 0]], axis=1) * kn[:, None]

    def grad(x):
        e = np.exp(1j * (np.asarray(x) @ k.T))
        return (e @ g_hat).real

    return grad


def euler_velocity_principal(flow: FlowField, x, xi) -> np.ndarray:
    """(2 xi (x) xi - id) du(x) for unit xi."""
    xib = _unit(xi)
    du = flow.jacobian(np.asarray(x, dtype=float))
    n = flow.dim
    return ((2.0 * _outer(xib) - _eye(xib.shape[:-1], n)) @ du).astype(complex)


def catalog_symbol(equation: str, flow: FlowField, equilibrium: Optional[dict] = None) -> SymbolSpec:
    """Principal symbol of one of the catalog equations over ``flow``.

    Equilibrium data keys: ``omega_rot`` (Coriolis vector), ``B`` (magnetic
    field), ``grad_phi``/``phi_modes`` and ``grad_rho0``/``rho0_modes``
    (Boussinesq), ``theta_modes`` (SQG; default derived from the flow), and
    ``components`` for vector-valued transport with a divergence-free bundle.
    """
    data = dict(equilibrium or {})
    n = flow.dim

    def P2(xib):
        return 2.0 * _outer(xib) - _eye(xib.shape[:-1], n)

    def Q(xib):
        return _outer(xib) - _eye(xib.shape[:-1], n)

    if equation == "transport":
        d = int(data.get("components", 1))
        if d == 1:
            bundle = full_bundle(1)
        elif d == n:
            bundle = divergence_free_bundle(n)
        else:
            raise ValueError(f"transport components must be 1 or {n}")

        def ev(x, xib, du):
            return np.zeros(xib.shape[:-1] + (d, d), dtype=complex)

        return SymbolSpec("transport", flow, d, ev, bundle, data)

    if equation == "euler_velocity":

        def ev(x, xib, du):
            return (P2(xib) @ du).astype(complex)

        return SymbolSpec(equation, flow, n, ev, divergence_free_bundle(n), data)

    if equation == "euler_velocity_coriolis":
        if n != 3:
            raise ValueError("euler_velocity_coriolis requires a 3D flow")
        Om = _vector_data(data, "omega_rot", 3)
        Wx = _cross_matrix(Om)

        def ev(x, xib, du):
            return (P2(xib) @ du + 2.0 * Q(xib) @ Wx).astype(complex)

        return SymbolSpec(equation, flow, n, ev, divergence_free_bundle(n), data)

    if equation in ("euler_vorticity", "euler_vorticity_coriolis"):
        if n != 3:
            raise ValueError(f"{equation} requires a 3D flow")
        Om = _vector_data(data, "omega_rot", 3, required=equation.endswith("coriolis"))
        shift = 2.0 * Om if Om is not None and equation.endswith("coriolis") else np.zeros(3)

        def ev(x, xib, du):
            w = flow.vorticity_3d(x) + shift
            c = np.sum(w * xib, axis=-1)[..., None, None]
            return (du - c * _cross_matrix(xib)).astype(complex)

        return SymbolSpec(equation, flow, n, ev, full_bundle(n), data)

    if equation == "boussinesq":
        gphi = _gradient_data(data, "phi", n)
        grho = _gradient_data(data, "rho0", n)

        def ev(x, xib, du):
            a = np.zeros(xib.shape[:-1] + (n + 1, n + 1), dtype=complex)
            a[..., :n, :n] = P2(xib) @ du
            p = _eye(xib.shape[:-1], n) - _outer(xib)
            a[..., :n, n] = np.einsum("...ij,...j->...i", p, gphi(x))
            a[..., n, :n] = -grho(x)
            return a

        return SymbolSpec(equation, flow, n + 1, ev, boussinesq_bundle(n), data)

    if equation == "camassa_holm":

        def ev(x, xib, du):
            return (Q(xib) @ np.swapaxes(du, -1, -2) + _outer(xib) @ du).astype(complex)

        return SymbolSpec(equation, flow, n, ev, divergence_free_bundle(n), data)

    if equation == "superconductivity":
        if n != 3:
            raise ValueError("superconductivity requires a 3D flow")
        Bx = _cross_matrix(_vector_data(data, "B", 3))

        def ev(x, xib, du):
            return (P2(xib) @ du - Q(xib) @ Bx).astype(complex)

        return SymbolSpec(equation, flow, n, ev, divergence_free_bundle(n), data)

    if equation == "sqg":
        if n != 2:
            raise ValueError("sqg requires a 2D flow")
        gtheta = (
            _scalar_field_gradient(data["theta_modes"], 2)
            if "theta_modes" in data
            else _sqg_theta_gradient(flow)
        )

        def ev(x, xib, du):
            perp = np.stack([-xib[..., 1], xib[..., 0]], axis=-1)
            val = 1j * np.asarray(np.sum(perp * gtheta(x), axis=-1))
            return val[..., None, None]

        return SymbolSpec(equation, flow, 1, ev, full_bundle(1), data)

    if equation == "kinematic_dynamo":

        def ev(x, xib, du):
            return du.astype(complex)

        return SymbolSpec(equation, flow, n, ev, full_bundle(n), data)

    raise ValueError(f"unknown equation {equation!r}; expected one of {EQUATIONS}")


def constraint_transform(symbol: SymbolSpec) -> SymbolSpec:
    """Replace a0 by a symbol whose amplitude flow keeps b in F(xi).

    Divergence-free bundles use a0 + xi(x)xi (du - a0); other bundles use the
    general (p a0 + p_t) p with p_t = -(du^T xi) . grad p evaluated analytically.
    The trailing p changes nothing on F(xi) and makes the transform idempotent.
    """
    bundle = symbol.bundle
    base = symbol.evaluate
    n = symbol.n

    if bundle.kind == "full":
        return replace(symbol, transformed=True)

    if bundle.kind == "divergence_free":
        if symbol.d != n:
            raise ValueError("divergence-free bundle requires d == n")

        def ev(x, xib, du):
            a0 = base(x, xib, du)
            return a0 + _outer(xib) @ (du - a0)

    else:
        if bundle.gradient is None:
            raise ValueError("custom bundle needs a projector gradient for the constraint transform")

        def ev(x, xib, du):
            a0 = base(x, xib, du)
            p = bundle.projector(xib)
            xi_dot = -np.einsum("...ji,...j->...i", du, xib)
            pt = np.einsum("...klj,...j->...kl", bundle.gradient(xib), xi_dot)
            return (p @ a0 + pt) @ p

    return replace(symbol, evaluate=ev, transformed=True)


def sobolev_shift(symbol: SymbolSpec, m: float) -> SymbolSpec:
    """Symbol a0 - m (du^T xi, xi) id, whose amplitude is |b| |xi(t)/xi(0)|^m."""
    if m == 0:
        return symbol
    base = symbol.evaluate
    d = symbol.d

    def ev(x, xib, du):
        q = np.einsum("...i,...ij,...j->...", xib, du, xib)
        return base(x, xib, du) - m * q[..., None, None] * np.eye(d)

    return replace(symbol, name=f"{symbol.name}[m={m:g}]", evaluate=ev)


def symbol_from_json(doc: dict, flow: FlowField) -> SymbolSpec:
    """Symbol from ``{"equation": ..., "equilibrium": {...}, "transform": bool}``."""
    sym = catalog_symbol(doc["equation"], flow, doc.get("equilibrium"))
    if doc.get("transform", False):
        sym = constraint_transform(sym)
    return sym
