"""End-points of the dynamical spectrum of the b xi^m cocycle and derived quantities.

Exponents are estimated as ensemble maxima of finite-time growth rates. For
each phase point an orthonormal frame of the fiber is integrated, and the fiber
norm ||B_T|F|| is the top singular value of the propagated frame. The backward
(inverse-cocycle) ensemble gives the lower end-points. Everything is evaluated
at horizons T and 2T; the 2T value is reported and the difference is the
convergence gap.
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from ._ode import DEFAULT_ATOL, DEFAULT_RTOL
from .cocycle import bxm_log_growth, frame_trajectory, integrate_bas
from .flows import FlowField
from .symbols import SymbolSpec

__all__ = [
    "SamplerSpec",
    "EnsembleRun",
    "SpectrumEstimate",
    "SpectralStructure",
    "ConvergenceWarning",
    "ThresholdUndefined",
    "sample_phase_points",
    "run_ensemble",
    "estimate_from_ensemble",
    "estimate_exponents",
    "restricted_exponents",
    "ess_spectral_radius",
    "sobolev_bounds",
    "gap_window",
    "connectivity_threshold",
    "spectral_structure",
    "check_sandwich",
    "check_tensor_inclusion",
    "instability_certificate",
    "bounded_orbit_certificate",
    "DEFAULT_K_GRID",
]

DEFAULT_K_GRID = (-4.0, -2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0, 4.0)


class ConvergenceWarning(UserWarning):
    """Exponent estimates at T and 2T differ by more than the sampler threshold."""


class ThresholdUndefined(ValueError):
    """The connectivity threshold needs lambda_max > lambda_min."""


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get("BAS_SPECTRA_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class SamplerSpec:
    """Phase-space ensemble configuration.

    ``n_samples`` phase points are split into a regular part (fraction
    ``grid_fraction``: a lattice of positions times ``n_directions`` frequency
    directions) and a seeded uniform random part. Known stagnation points are
    added on top, each with the real eigen-directions of -du^T and the grid
    directions. ``chunk_size`` fixes how the ensemble is split for integration,
    so results do not depend on the thread count.
    """

    n_samples: int = 64
    horizon: float = 50.0
    grid_fraction: float = 0.5
    n_directions: int = 4
    include_stagnation: bool = True
    restricted: bool = False
    seed: int = 0
    chunk_size: int = 256
    gap_threshold: float = 0.1
    rtol: float = DEFAULT_RTOL
    atol: float = DEFAULT_ATOL

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if not 0.0 <= self.grid_fraction <= 1.0:
            raise ValueError("grid_fraction must lie in [0, 1]")
        if self.n_directions < 1 or self.chunk_size < 1:
            raise ValueError("n_directions and chunk_size must be positive")

    @property
    def horizons(self) -> tuple:
        return (self.horizon, 2.0 * self.horizon)


# ------------------------------------------------------------- sampling


def _directions(n: int, count: int) -> np.ndarray:
    if n == 2:
        ang = 2.0 * np.pi * np.arange(count) / count
        return np.stack([np.cos(ang), np.sin(ang)], axis=1)
    # Fibonacci sphere
    i = np.arange(count) + 0.5
    z = 1.0 - 2.0 * i / count
    r = np.sqrt(1.0 - z * z)
    phi = np.pi * (1.0 + 5**0.5) * i
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)


def _restrict(flow: FlowField, x: np.ndarray, xi: np.ndarray, tol=1e-12):
    """Project directions onto u(x)^perp; drop degenerate ones. Keeps all at u = 0."""
    u = flow.velocity(x)
    un = np.linalg.norm(u, axis=1)
    moving = un > tol
    uh = np.where(moving[:, None], u / np.where(moving, un, 1.0)[:, None], 0.0)
    proj = xi - np.sum(xi * uh, axis=1, keepdims=True) * uh
    pn = np.linalg.norm(proj, axis=1)
    keep = pn > 1e-6
    return x[keep], proj[keep] / pn[keep, None]


def sample_phase_points(flow: FlowField, sampler: SamplerSpec):
    """Deterministically ordered ensemble (x, unit xi): stagnation, grid, random."""
    n = flow.dim
    dirs = _directions(n, sampler.n_directions)
    xs, xis = [], []

    if sampler.include_stagnation and flow.stagnation_points:
        for p in flow.stagnation_points:
            p = np.asarray(p, dtype=float)
            w, v = np.linalg.eig(-flow.jacobian(p).T)
            cand = [v[:, j].real for j in range(n) if abs(w[j].imag) < 1e-12]
            cand = [c / np.linalg.norm(c) for c in cand if np.linalg.norm(c) > 0]
            cand = cand + [-c for c in cand] + list(dirs)
            for c in cand:
                xs.append(p)
                xis.append(c)

    n_grid = int(round(sampler.n_samples * sampler.grid_fraction))
    n_rand = sampler.n_samples - n_grid
    if n_grid > 0:
        per_axis = max(1, int(np.floor((n_grid / len(dirs)) ** (1.0 / n))))
        ax = 2.0 * np.pi * (np.arange(per_axis) + 0.5) / per_axis
        pts = np.stack(np.meshgrid(*([ax] * n), indexing="ij"), axis=-1).reshape(-1, n)
        for p in pts:
            for c in dirs:
                xs.append(p)
                xis.append(c)
    if n_rand > 0:
        rng = np.random.default_rng(sampler.seed)
        xr = rng.uniform(0.0, 2.0 * np.pi, size=(n_rand, n))
        dr = rng.normal(size=(n_rand, n))
        dr /= np.linalg.norm(dr, axis=1, keepdims=True)
        xs.extend(xr)
        xis.extend(dr)

    X = np.asarray(xs, dtype=float).reshape(-1, n)
    XI = np.asarray(xis, dtype=float).reshape(-1, n)
    if sampler.restricted:
        X, XI = _restrict(flow, X, XI)
    return X, XI


# ------------------------------------------------------------- ensemble


@dataclass
class EnsembleRun:
    """Per-sample log growths at the two horizons, forward and backward.

    ``fiber_*`` hold log ||B_{+-h}|F|| and ``xi_*`` hold log |xi(+-h)| (unit xi0),
    each of shape (2, M) for horizons (T, 2T).
    """

    X: np.ndarray
    XI: np.ndarray
    horizons: tuple
    fiber_fwd: np.ndarray
    fiber_bwd: np.ndarray
    xi_fwd: np.ndarray
    xi_bwd: np.ndarray
    restriction_drift: float = 0.0
    sampler: Optional[SamplerSpec] = None


def _fiber_log_norm(traj, k):
    """log of the top singular value of the propagated frame at sample k."""
    lr = traj.logRb[k]  # (M, r)
    top = lr.max(axis=1)
    cols = traj.b[k] * np.exp(lr - top[:, None])[..., None]  # (M, r, d)
    s = np.linalg.svd(cols, compute_uv=False)[:, 0]
    return top + np.log(s)


def _run_chunk(flow, symbol, X, XI, sampler, sign):
    T, T2 = sampler.horizons
    traj = frame_trajectory(
        flow, symbol, X, XI, sign * np.array([0.0, T, T2]),
        rtol=sampler.rtol, atol=sampler.atol,
    )
    fib = np.stack([_fiber_log_norm(traj, 1), _fiber_log_norm(traj, 2)])
    xi = traj.logRxi[1:] - traj.logRxi[:1]
    u = flow.velocity(traj.x_unwrapped[1:])
    ham = np.abs(np.einsum("kmi,kmi->km", u, traj.xib[1:]))
    return fib, xi, ham


def run_ensemble(flow: FlowField, symbol: SymbolSpec, sampler: SamplerSpec, threads: int | None = None) -> EnsembleRun:
    """Integrate the sampler's ensemble forward and backward to T and 2T."""
    X, XI = sample_phase_points(flow, sampler)
    M = X.shape[0]
    if M == 0:
        raise ValueError("sampler produced no admissible phase points")
    chunks = [(i, min(i + sampler.chunk_size, M)) for i in range(0, M, sampler.chunk_size)]
    jobs = [(a, b, s) for s in (1.0, -1.0) for a, b in chunks]

    def work(job):
        a, b, s = job
        return _run_chunk(flow, symbol, X[a:b], XI[a:b], sampler, s)

    threads = threads or default_threads()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, jobs))
    else:
        results = [work(j) for j in jobs]
    nf = len(chunks)
    fwd, bwd = results[:nf], results[nf:]
    cat = lambda rs, i: np.concatenate([r[i] for r in rs], axis=1)
    drift = 0.0
    if sampler.restricted:
        drift = float(max(cat(fwd, 2).max(), cat(bwd, 2).max()))
    return EnsembleRun(
        X=X, XI=XI, horizons=sampler.horizons,
        fiber_fwd=cat(fwd, 0), fiber_bwd=cat(bwd, 0),
        xi_fwd=cat(fwd, 1), xi_bwd=cat(bwd, 1),
        restriction_drift=drift, sampler=sampler,
    )


# ------------------------------------------------------------- estimates


@dataclass
class SpectrumEstimate:
    """Estimated end-points at horizon 2T with their T-horizon gaps."""

    m: float
    mu_max: float
    mu_min: float
    lambda_max: float
    lambda_min: float
    gaps: dict
    horizon: float
    n_samples: int
    argmax: dict
    argmin: dict
    converged: bool = True
    restricted: bool = False
    restriction_drift: float = 0.0

    @property
    def gap(self) -> float:
        return max(self.gaps.values())

    def to_dict(self) -> dict:
        out = asdict(self)
        out["gap"] = self.gap
        return out


def _rates(ens: EnsembleRun, m: float, k: int):
    h = ens.horizons[k]
    fwd = (ens.fiber_fwd[k] + m * ens.xi_fwd[k]) / h
    bwd = (ens.fiber_bwd[k] + m * ens.xi_bwd[k]) / h
    return fwd, bwd, ens.xi_fwd[k] / h, ens.xi_bwd[k] / h


def estimate_from_ensemble(ens: EnsembleRun, m: float, warn: bool = True) -> SpectrumEstimate:
    vals = []
    for k in (0, 1):
        fwd, bwd, lf, lb = _rates(ens, m, k)
        vals.append(
            dict(mu_max=fwd.max(), mu_min=-bwd.max(), lambda_max=lf.max(), lambda_min=-lb.max())
        )
    fwd, bwd, _, _ = _rates(ens, m, 1)
    i_max = int(np.argmax(fwd))  # first maximum in sample order
    i_min = int(np.argmax(bwd))
    gaps = {key: float(abs(vals[0][key] - vals[1][key])) for key in vals[1]}
    sampler = ens.sampler
    threshold = sampler.gap_threshold if sampler else math.inf
    converged = max(gaps.values()) <= threshold
    if not converged and warn:
        warnings.warn(
            f"exponent estimates not converged for m={m:g}: gap {max(gaps.values()):.3g} "
            f"> threshold {threshold:.3g}",
            ConvergenceWarning,
            stacklevel=2,
        )
    return SpectrumEstimate(
        m=float(m),
        mu_max=float(vals[1]["mu_max"]),
        mu_min=float(vals[1]["mu_min"]),
        lambda_max=float(vals[1]["lambda_max"]),
        lambda_min=float(vals[1]["lambda_min"]),
        gaps=gaps,
        horizon=float(ens.horizons[1]),
        n_samples=int(ens.X.shape[0]),
        argmax=dict(x=ens.X[i_max].tolist(), xi=ens.XI[i_max].tolist()),
        argmin=dict(x=ens.X[i_min].tolist(), xi=ens.XI[i_min].tolist()),
        converged=bool(converged),
        restricted=bool(sampler.restricted) if sampler else False,
        restriction_drift=float(ens.restriction_drift),
    )


def estimate_exponents(flow, symbol, m: float, sampler: SamplerSpec, threads=None) -> SpectrumEstimate:
    """mu^m_max, mu^m_min, lambda_max, lambda_min from one forward/backward ensemble."""
    return estimate_from_ensemble(run_ensemble(flow, symbol, sampler, threads), m)


def restricted_exponents(flow, symbol, m: float, sampler: SamplerSpec, threads=None) -> SpectrumEstimate:
    """Same estimator on the invariant set u(x) . xi = 0."""
    if not sampler.restricted:
        raise ValueError("restricted_exponents needs a sampler with restricted=True")
    return estimate_exponents(flow, symbol, m, sampler, threads)


# ------------------------------------------------------------- closed forms


def ess_spectral_radius(est, t: float) -> float:
    """exp(mu^m_max t)."""
    if t < 0:
        raise ValueError("t must be non-negative")
    mu = est.mu_max if hasattr(est, "mu_max") else float(est)
    return math.exp(mu * t)


def sobolev_bounds(mu_min, mu_max, lambda_min, lambda_max, m):
    """(A_m, B_m, C_m, D_m) bounding mu^m_min and mu^m_max."""
    if mu_min > mu_max or lambda_min > lambda_max:
        raise ValueError("end-points must be ordered")
    lo, hi = (lambda_min, lambda_max) if m >= 0 else (lambda_max, lambda_min)
    A = mu_min + m * lo
    B = mu_max + m * lo
    C = mu_min + m * hi
    D = mu_max + m * hi
    assert A <= min(B, C) + 1e-12 and max(B, C) <= D + 1e-12
    return A, B, C, D


def gap_window(mu_min, mu_max, lambda_min, lambda_max, m):
    """Interval that must contain any gap of Sigma_m, or None when it is empty."""
    if m >= 0:
        lo, hi = mu_min + m * lambda_max, mu_max + m * lambda_min
    else:
        lo, hi = mu_min + m * lambda_min, mu_max + m * lambda_max
    return None if lo > hi else (lo, hi)


def connectivity_threshold(mu_min, mu_max, lambda_min, lambda_max) -> float:
    """m* = (mu_max - mu_min) / (lambda_max - lambda_min)."""
    if not lambda_max > lambda_min:
        raise ThresholdUndefined(
            "lambda_max == lambda_min: no exponential stretching, connectivity not guaranteed"
        )
    return (mu_max - mu_min) / (lambda_max - lambda_min)


def check_sandwich(est_m: SpectrumEstimate, est_0: SpectrumEstimate, tol: float) -> dict:
    """Monotone bounds A <= mu_min <= min(B, C), max(B, C) <= mu_max <= D."""
    A, B, C, D = sobolev_bounds(
        est_0.mu_min, est_0.mu_max, est_0.lambda_min, est_0.lambda_max, est_m.m
    )
    ok = (
        A - tol <= est_m.mu_min <= min(B, C) + tol
        and max(B, C) - tol <= est_m.mu_max <= D + tol
    )
    return dict(ok=bool(ok), bounds=[A, B, C, D], mu_min=est_m.mu_min, mu_max=est_m.mu_max, tol=tol)


def check_tensor_inclusion(est_m: SpectrumEstimate, est_0: SpectrumEstimate, tol: float) -> dict:
    """mu^m end-points inside mu^0 + m [lambda_min, lambda_max]."""
    m = est_m.m
    lo = est_0.mu_min + min(m * est_0.lambda_min, m * est_0.lambda_max)
    hi = est_0.mu_max + max(m * est_0.lambda_min, m * est_0.lambda_max)
    ok = est_m.mu_max <= hi + tol and est_m.mu_min >= lo - tol
    return dict(ok=bool(ok), interval=[lo, hi], mu_min=est_m.mu_min, mu_max=est_m.mu_max, tol=tol)


@dataclass
class SpectralStructure:
    """Predicted essential-spectrum picture for one m.

    Fields that rely on the stretching hypothesis (lambda_max > 0 and |m| > m*)
    are None when it fails; the interval hull is always given.
    """

    m: float
    t: float
    interval: tuple
    bounds: tuple
    gap_window: Optional[tuple]
    m_star: Optional[float]
    s: float
    S: float
    hypothesis: bool
    margins: Optional[tuple]
    annulus_radii: Optional[tuple]
    hull_radii: tuple
    band: tuple
    tensor_inclusion: dict
    sandwich: dict
    estimates: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def spectral_structure(
    flow,
    symbol,
    m: float,
    sampler: SamplerSpec,
    k_grid: Sequence[float] = DEFAULT_K_GRID,
    t: float = 1.0,
    stretch_tol: float = 0.1,
    tol: float = 0.05,
    ensemble: Optional[EnsembleRun] = None,
    threads=None,
) -> SpectralStructure:
    """Closed-form structure of Sigma_m from one ensemble of exponent estimates.

    s and S are approximated over the finite ``k_grid`` (an outer/inner
    approximation of the sup/inf over all real k).
    """
    ens = ensemble or run_ensemble(flow, symbol, sampler, threads)
    est_m = estimate_from_ensemble(ens, m, warn=False)
    est_0 = estimate_from_ensemble(ens, 0.0, warn=False)
    ks = sorted(set(float(k) for k in k_grid) | {0.0})
    est_k = {k: estimate_from_ensemble(ens, k, warn=False) for k in ks}
    s_hat = max(e.mu_min for e in est_k.values())
    S_hat = min(e.mu_max for e in est_k.values())
    mu0 = (est_0.mu_min, est_0.mu_max)
    lam = (est_0.lambda_min, est_0.lambda_max)
    bounds = sobolev_bounds(mu0[0], mu0[1], lam[0], lam[1], m)
    window = gap_window(mu0[0], mu0[1], lam[0], lam[1], m)
    notes = []
    try:
        m_star = connectivity_threshold(mu0[0], mu0[1], lam[0], lam[1])
    except ThresholdUndefined as exc:
        m_star = None
        notes.append(str(exc))
    stretching = lam[1] > stretch_tol
    hypothesis = bool(stretching and m_star is not None and abs(m) > m_star)
    if not stretching:
        notes.append("no exponential stretching detected: lambda_max <= %.3g" % stretch_tol)
    elif not hypothesis:
        notes.append("|m| does not exceed the connectivity threshold")
    interval = (est_m.mu_min, est_m.mu_max)
    hull = (math.exp(t * interval[0]), math.exp(t * interval[1]))
    margins = radii = None
    if hypothesis:
        margins = ((interval[0], s_hat), (S_hat, interval[1]))
        radii = tuple(math.exp(t * v) for v in (interval[0], s_hat, S_hat, interval[1]))
    tol_total = tol + est_m.gap + est_0.gap
    return SpectralStructure(
        m=float(m),
        t=float(t),
        interval=interval,
        bounds=tuple(bounds),
        gap_window=window,
        m_star=m_star,
        s=float(s_hat),
        S=float(S_hat),
        hypothesis=hypothesis,
        margins=margins,
        annulus_radii=radii,
        hull_radii=hull,
        band=interval,
        tensor_inclusion=check_tensor_inclusion(est_m, est_0, tol_total),
        sandwich=check_sandwich(est_m, est_0, tol_total),
        estimates={"m": est_m.to_dict(), "zero": est_0.to_dict(),
                   "k_grid": {repr(k): [e.mu_min, e.mu_max] for k, e in est_k.items()}},
        notes=notes,
    )


# ------------------------------------------------------------- certificates

ECM_SYMBOLS = ("euler_velocity", "euler_velocity_coriolis", "camassa_holm")


def instability_certificate(
    flow, symbol, m: float, sampler: SamplerSpec, threshold: float = 2.0,
    ensemble: Optional[EnsembleRun] = None, threads=None,
) -> dict:
    """Witness of unbounded growth of |b(t)| |xi(t)|^m, if the ensemble finds one.

    Certified when the best log-growth is at least ``threshold`` at T and grows
    further from T to 2T. For symbols with the determinant conservation law
    (Euler velocity, Camassa-Holm) a second witness is attached: the sample
    whose xi decays fastest, which forces its amplitude to grow.
    """
    ens = ensemble or run_ensemble(flow, symbol, sampler, threads)
    g_T = ens.fiber_fwd[0] + m * ens.xi_fwd[0]
    g_2T = ens.fiber_fwd[1] + m * ens.xi_fwd[1]
    i = int(np.argmax(g_2T))
    certified = bool(g_T[i] >= threshold and g_2T[i] > g_T[i] > 0)
    report = dict(
        certified=certified,
        threshold=threshold,
        m=float(m),
        horizons=list(ens.horizons),
        witness=dict(
            x=ens.X[i].tolist(), xi=ens.XI[i].tolist(),
            log_growth_T=float(g_T[i]), log_growth_2T=float(g_2T[i]),
        ),
    )
    base = symbol.name.split("[")[0]
    lam_max = float(ens.xi_fwd[1].max() / ens.horizons[1])
    if base in ECM_SYMBOLS and m == 0 and lam_max > 0:
        j = int(np.argmin(ens.xi_fwd[1]))
        n = flow.dim
        xi_growth = float(ens.xi_fwd[1, j])
        implied = -xi_growth / (n - 1)
        report["conservation_witness"] = dict(
            x=ens.X[j].tolist(), xi=ens.XI[j].tolist(),
            xi_log_growth_2T=xi_growth,
            b_log_growth_2T=float(ens.fiber_fwd[1, j]),
            implied_lower_bound=implied,
        )
        if implied >= threshold and ens.fiber_fwd[1, j] >= threshold:
            report["certified"] = True
    return report


def bounded_orbit_certificate(
    flow, symbol, m: float, mu: float, x0, xi0, T: float,
    bound: float = 10.0, n_times: int = 201, n_directions: int = 64,
    rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL,
) -> dict:
    """Finite-horizon bounded-orbit test at one phase point.

    Looks for a fiber vector v minimizing sup_{|t| <= T} |exp(-mu t) (BX^m)_t v|.
    A small sup is evidence, not proof, that the point is a Mane point for the
    rescaling mu.
    """
    if not T > 0:
        raise ValueError("T must be positive")
    grid = np.linspace(0.0, T, n_times)
    xi0 = np.asarray(xi0, dtype=float)
    frame = symbol.bundle.frame(xi0[None])[0]  # (d, r)
    b0 = frame.T
    logs = []
    for sign in (1.0, -1.0):
        traj = integrate_bas(flow, symbol, x0, xi0, b0, sign * grid, rtol=rtol, atol=atol)
        lr = bxm_log_growth(traj, m)[:, 0, :] - mu * traj.t[:, None]  # (K, r)
        logs.append((traj.b[:, 0], lr))
    r = frame.shape[1]
    rng = np.random.default_rng(0)
    cand = [np.eye(r, dtype=complex)[j] for j in range(r)]
    if r > 1:
        z = rng.normal(size=(n_directions, r)) + 1j * rng.normal(size=(n_directions, r))
        cand.extend(z / np.linalg.norm(z, axis=1, keepdims=True))
    best = None
    for v in cand:
        worst = -np.inf
        for b, lr in logs:
            top = lr.max(axis=1)
            vec = np.einsum("j,kjd->kd", v, b * np.exp(lr - top[:, None])[..., None])
            worst = max(worst, float(np.max(top + np.log(np.linalg.norm(vec, axis=1) + 1e-300))))
        if best is None or worst < best[0]:
            best = (worst, v)
    log_sup, v = best
    direction = frame @ v
    return dict(
        certified=bool(log_sup <= math.log(bound)),
        conclusive=False,
        note="finite-horizon certificate only",
        log_sup=log_sup,
        sup=math.exp(min(log_sup, 700.0)),
        bound=bound,
        mu=float(mu),
        m=float(m),
        horizon=float(T),
        direction_re=direction.real.tolist(),
        direction_im=direction.imag.tolist(),
    )
