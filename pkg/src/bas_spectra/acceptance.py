"""Acceptance criteria as functions returning structured pass/fail records.

Used by ``bas-spectra check`` and by the acceptance test module. Each
criterion reports the measured quantities next to the tolerance it was judged
against.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .cocycle import (
    conserved_determinant,
    constraint_residual,
    determinant_drift,
    frame_trajectory,
    hamiltonian_drift,
    integrate_bas,
)
from .flows import catalog_flow, jacobi_cocycle
from .pdevalidate import (
    PdeBackend,
    WavePacket,
    norm_growth,
    packet_log_growth,
    shortwave_error,
    truncated_generator_spectrum,
)
from .spectrum import (
    SamplerSpec,
    check_sandwich,
    check_tensor_inclusion,
    connectivity_threshold,
    estimate_from_ensemble,
    gap_window,
    run_ensemble,
    ThresholdUndefined,
)
from .symbols import catalog_symbol, constraint_transform, divergence_free_bundle

__all__ = [
    "AcceptanceParams",
    "CriterionResult",
    "CRITERIA",
    "run_criteria",
    "catalog_flows",
    "determinant_law_drift",
]


@dataclass(frozen=True)
class AcceptanceParams:
    """Sizes used by the acceptance run; tolerances are fixed by the criteria."""

    n_samples: int = 64
    horizon: float = 50.0
    conservation_points: int = 3
    conservation_horizon: float = 10.0
    seed: int = 0
    shortwave_K: tuple = (16, 32, 64)
    growth_K: int = 24
    growth_N: int = 240
    growth_envelope: tuple = (8, 300)
    growth_cfl: float = 1.5
    spectrum_N: int = 12
    threads: int = 1

    def sampler(self, **kw) -> SamplerSpec:
        base = dict(n_samples=self.n_samples, horizon=self.horizon, seed=self.seed)
        base.update(kw)
        return SamplerSpec(**base)


@dataclass
class CriterionResult:
    id: int
    title: str
    passed: bool
    details: dict = field(default_factory=dict)

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] criterion {self.id}: {self.title}"

    def to_dict(self) -> dict:
        return asdict(self)


def catalog_flows() -> dict:
    """One instance of every catalog flow, with the constant flow in 2D and 3D."""
    return {
        "constant2d": catalog_flow("constant", [1.0, 0.5]),
        "constant3d": catalog_flow("constant", [0.3, 0.2, 1.0]),
        "shear": catalog_flow("shear", [1.0]),
        "cellular": catalog_flow("cellular", [1.0]),
        "abc": catalog_flow("abc", [1.0, 1.0, 1.0]),
    }


EQUILIBRIUM = {"omega_rot": [0.0, 0.0, 1.0], "B": [0.5, 0.0, 0.3]}
THREE_D_ONLY = (
    "euler_velocity_coriolis",
    "euler_vorticity",
    "euler_vorticity_coriolis",
    "superconductivity",
)
DETERMINANT_SYMBOLS = (
    "transport",
    "euler_velocity",
    "euler_velocity_coriolis",
    "euler_vorticity",
    "euler_vorticity_coriolis",
    "camassa_holm",
    "superconductivity",
    "kinematic_dynamo",
)


def _phase_points(n, count, seed):
    rng = np.random.default_rng(seed)
    x = rng.uniform(0, 2 * np.pi, size=(count, n))
    xi = rng.normal(size=(count, n))
    return x, xi / np.linalg.norm(xi, axis=1, keepdims=True)


def determinant_law_drift(flow, symbol, params, seed):
    """Relative drift of the conserved determinant from seeded phase points over [0, horizon]."""
    n = flow.dim
    x, xi = _phase_points(n, params.conservation_points, seed)
    b0 = np.swapaxes(divergence_free_bundle(n).frame(xi), -1, -2)  # n-1 vectors orthogonal to xi
    grid = np.linspace(0.0, params.conservation_horizon, 21)
    traj = integrate_bas(flow, symbol, x, xi, b0, grid, check_constraint=False)
    return determinant_drift(conserved_determinant(traj))


def criterion_conservation(params: AcceptanceParams) -> CriterionResult:
    tol = 1e-6
    rows = {}
    ok = True
    for fname, flow in catalog_flows().items():
        for eq in DETERMINANT_SYMBOLS:
            if eq in THREE_D_ONLY and flow.dim != 3:
                continue
            data = dict(EQUILIBRIUM)
            if eq == "transport":
                data = {"components": flow.dim}
            sym = constraint_transform(catalog_symbol(eq, flow, data))
            drift = determinant_law_drift(flow, sym, params, params.seed)
            rows[f"{eq}/{fname}"] = drift
            ok &= drift <= tol
    flow = catalog_flows()["cellular"]
    base = catalog_symbol("euler_velocity", flow)
    ev = base.evaluate
    broken = replace(base, name="euler_velocity+1e-3", evaluate=lambda x, xib, du: ev(x, xib, du) + 1e-3 * np.eye(2))
    control = determinant_law_drift(flow, broken, params, params.seed)
    ok &= control > 1e-3
    return CriterionResult(
        1,
        "conserved determinant drift <= 1e-6; perturbed control > 1e-3",
        bool(ok),
        dict(
            tolerance=tol,
            drifts=rows,
            max_drift=max(rows.values()),
            negative_control=control,
            not_applicable=["boussinesq (amplitudes in C^{n+1})", "sqg (scalar amplitude)"],
        ),
    )


def criterion_structure(params: AcceptanceParams) -> CriterionResult:
    flows = catalog_flows()
    ham, detj, resid, comp = {}, {}, {}, {}
    for fname, flow in flows.items():
        n = flow.dim
        x, xi = _phase_points(n, 8, params.seed + 1)
        sym = catalog_symbol("euler_velocity", flow)
        for sign in (1.0, -1.0):
            grid = sign * np.linspace(0.0, 20.0, 41)
            traj = frame_trajectory(flow, sym, x, xi, grid)
            key = f"{fname}/{'fwd' if sign > 0 else 'bwd'}"
            ham[key] = float(hamiltonian_drift(traj).max())
            resid[key] = float(constraint_residual(traj).max())
            J = np.stack([jacobi_cocycle(flow, x, t).J for t in (sign * 5.0, sign * 10.0, sign * 20.0)])
            detj[key] = float(np.abs(np.linalg.det(J) - 1.0).max())
        # cocycle property: [0, s + t] against [0, s] followed by a restart
        s, t = 3.0, 4.0
        full = frame_trajectory(flow, sym, x, xi, [0.0, s, s + t])
        xs, xis, bs = full.restart_state(1)
        rest = integrate_bas(flow, sym, xs, xis, bs, [0.0, t])
        comp[fname] = float(
            max(
                np.abs(rest.logRb[-1] - full.logRb[-1]).max(),
                np.abs(rest.b[-1] - full.b[-1]).max(),
                np.abs(rest.logRxi[-1] - full.logRxi[-1]).max(),
            )
        )
    tr = constraint_transform(catalog_symbol("transport", flows["cellular"], {"components": 2}))
    x, xi = _phase_points(2, 8, params.seed + 2)
    resid["transport_transformed/cellular"] = float(
        constraint_residual(frame_trajectory(flows["cellular"], tr, x, xi, np.linspace(0, 10, 11))).max()
    )
    worst = dict(
        hamiltonian=max(ham.values()),
        jacobian_det=max(detj.values()),
        constraint=max(resid.values()),
        composition=max(comp.values()),
    )
    ok = (
        worst["hamiltonian"] <= 1e-6
        and worst["jacobian_det"] <= 1e-6
        and worst["constraint"] <= 1e-8
        and worst["composition"] <= 1e-6
    )
    return CriterionResult(
        2,
        "Hamiltonian, volume, constraint and cocycle-composition invariants",
        bool(ok),
        dict(
            tolerances=dict(hamiltonian=1e-6, jacobian_det=1e-6, constraint=1e-8, composition=1e-6),
            worst=worst,
            hamiltonian=ham,
            jacobian_det=detj,
            constraint=resid,
            composition=comp,
        ),
    )


def criterion_exponents(params: AcceptanceParams) -> CriterionResult:
    tol = 0.05
    flows = catalog_flows()
    sampler = params.sampler()
    out = {"transport_mu_max": {}, "lambda_symmetry": {}}
    ok = True
    for fname, flow in flows.items():
        est = estimate_from_ensemble(
            run_ensemble(flow, catalog_symbol("transport", flow), sampler, params.threads), 0.0, warn=False
        )
        out["transport_mu_max"][fname] = est.mu_max
        ok &= abs(est.mu_max) <= tol
        if flow.dim == 2:
            out["lambda_symmetry"][fname] = [est.lambda_min, est.lambda_max]
            ok &= abs(est.lambda_min + est.lambda_max) <= tol
        if fname == "cellular":
            out["cellular_lambda_max"] = est.lambda_max
            ok &= 0.85 <= est.lambda_max <= 1.1
    cell = flows["cellular"]
    dyn = estimate_from_ensemble(
        run_ensemble(cell, catalog_symbol("kinematic_dynamo", cell), sampler, params.threads), 0.0, warn=False
    )
    out["dynamo_cellular"] = dict(mu_max=dyn.mu_max, lambda_max=dyn.lambda_max)
    ok &= abs(dyn.mu_max - dyn.lambda_max) <= tol
    out["tolerance"] = tol
    out["horizon"] = params.horizon
    return CriterionResult(3, "exponent fidelity against closed-form oracles", bool(ok), out)


def criterion_closed_forms(params: AcceptanceParams) -> CriterionResult:
    base_tol = 0.05
    flows = catalog_flows()
    sampler = params.sampler()
    rows = {}
    ok = True
    for fname in ("cellular", "shear"):
        flow = flows[fname]
        for eq in ("euler_velocity", "transport"):
            ens = run_ensemble(flow, catalog_symbol(eq, flow), sampler, params.threads)
            e0 = estimate_from_ensemble(ens, 0.0, warn=False)
            try:
                m_star = connectivity_threshold(e0.mu_min, e0.mu_max, e0.lambda_min, e0.lambda_max)
            except ThresholdUndefined:
                m_star = None
            for m in (-2.0, -1.0, 0.0, 1.0, 2.0):
                em = estimate_from_ensemble(ens, m, warn=False)
                tol = base_tol + em.gap + e0.gap
                sand = check_sandwich(em, e0, tol)
                incl = check_tensor_inclusion(em, e0, tol)
                row = dict(sandwich=sand["ok"], inclusion=incl["ok"], tol=tol)
                good = sand["ok"] and incl["ok"]
                if m_star is not None and abs(m) >= m_star:
                    w = gap_window(e0.mu_min, e0.mu_max, e0.lambda_min, e0.lambda_max, m)
                    empty = w is None or (w[1] - w[0]) <= tol
                    row["window"] = None if w is None else list(w)
                    row["window_empty"] = bool(empty)
                    good &= empty
                row["ok"] = bool(good)
                rows[f"{eq}/{fname}/m={m:g}"] = row
                ok &= good
            rows[f"{eq}/{fname}/m_star"] = m_star
    return CriterionResult(
        4, "sandwich bounds, gap-window emptiness and tensor inclusion", bool(ok), dict(rows=rows)
    )


def criterion_restricted(params: AcceptanceParams) -> CriterionResult:
    tol = 0.05
    flow = catalog_flows()["cellular"]
    sym = catalog_symbol("transport", flow)
    full = estimate_from_ensemble(run_ensemble(flow, sym, params.sampler(), params.threads), 2.0, warn=False)
    rest = estimate_from_ensemble(
        run_ensemble(flow, sym, params.sampler(restricted=True), params.threads), 2.0, warn=False
    )
    d_max = abs(full.mu_max - rest.mu_max)
    d_min = abs(full.mu_min - rest.mu_min)
    return CriterionResult(
        5,
        "restricted and unrestricted end-points agree (transport, cellular, m=2)",
        bool(d_max <= tol and d_min <= tol),
        dict(
            unrestricted=[full.mu_min, full.mu_max],
            restricted=[rest.mu_min, rest.mu_max],
            restriction_drift=rest.restriction_drift,
            tolerance=tol,
        ),
    )


def criterion_shortwave(params: AcceptanceParams) -> CriterionResult:
    shear = catalog_flows()["shear"]
    table = {}
    ok = True
    for kind in ("advection", "euler2d_velocity"):
        errs = []
        for K in params.shortwave_K:
            be = PdeBackend(kind, shear, 3 * K, components=2)
            errs.append(shortwave_error(be, WavePacket.bump((1, 0), K, (0.0, 1.0)), 1.0))
        ratios = [errs[i] / errs[i + 1] for i in range(len(errs) - 1)]
        table[kind] = dict(K=list(params.shortwave_K), errors=errs, ratios=ratios)
        ok &= all(1.6 <= r <= 2.4 for r in ratios)
    const = catalog_flow("constant", [1.0, 0.5])
    const_err = {}
    for kind, comp, b0 in (("advection", 1, (1.0,)), ("advection", 2, (0.0, 1.0)), ("euler2d_velocity", 2, (0.0, 1.0))):
        be = PdeBackend(kind, const, 48, components=comp)
        const_err[f"{kind}/{comp}"] = shortwave_error(be, WavePacket.bump((1, 0), 16, b0), 1.0)
    ok &= max(const_err.values()) <= 1e-8
    return CriterionResult(
        6,
        "shortwave error halves with delta on the shear flow; exact on a constant flow",
        bool(ok),
        dict(shear=table, constant=const_err, ratio_window=[1.6, 2.4], constant_tolerance=1e-8, t=1.0),
    )


def criterion_growth(params: AcceptanceParams) -> CriterionResult:
    flow = catalog_flows()["cellular"]
    be = PdeBackend("advection", flow, params.growth_N)
    packet = WavePacket.bump((1, 0), params.growth_K, (1.0,), center=(0.0, 0.0), p=params.growth_envelope)
    t, m = 2.0, 1.0
    growth = norm_growth(be, m, [packet], t, cfl=params.growth_cfl)
    log_pred = packet_log_growth(be, packet, m, t)
    bound = 0.85 * math.exp(log_pred)
    return CriterionResult(
        7,
        "H^1 norm growth of a packet >= 0.85 exp(mu_packet t) (transport, cellular)",
        bool(growth >= bound),
        dict(growth=growth, predicted=math.exp(log_pred), bound=bound, t=t, m=m, K=params.growth_K, N=params.growth_N),
    )


def criterion_generator_spectrum(params: AcceptanceParams) -> CriterionResult:
    be = PdeBackend("euler2d_vorticity", catalog_flows()["shear"], params.spectrum_N)
    ev = truncated_generator_spectrum(be, m=0.0)
    re = ev.real
    return CriterionResult(
        8,
        "truncated vorticity generator on the shear flow has Re(eigenvalues) in [-0.05, 0.05]",
        bool(np.all(np.abs(re) <= 0.05)),
        dict(re_min=float(re.min()), re_max=float(re.max()), n_eigenvalues=int(ev.size), N=params.spectrum_N),
    )


CRITERIA: dict[int, Callable[[AcceptanceParams], CriterionResult]] = {
    1: criterion_conservation,
    2: criterion_structure,
    3: criterion_exponents,
    4: criterion_closed_forms,
    5: criterion_restricted,
    6: criterion_shortwave,
    7: criterion_growth,
    8: criterion_generator_spectrum,
}


def run_criteria(params: Optional[AcceptanceParams] = None, ids=None) -> list:
    params = params or AcceptanceParams()
    ids = sorted(ids or CRITERIA)
    return [CRITERIA[i](params) for i in ids]
