"""Command-line front end: config in, deterministic JSON report (+ CSV, SVG) out.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 acceptance-check failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import re
import sys
import warnings
from dataclasses import replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .acceptance import (
    DETERMINANT_SYMBOLS,
    EQUILIBRIUM,
    THREE_D_ONLY,
    AcceptanceParams,
    determinant_law_drift,
    run_criteria,
)
from .cocycle import frame_trajectory, write_trajectory_csv
from .config import ConfigError, RunConfig, load, resolve
from ._ode import IntegrationError
from .flows import flow_from_json
from .pdevalidate import EvolutionBlowup, PdeBackend, WavePacket, fit_decay_order, shortwave_error, write_error_csv
from .spectrum import (
    ConvergenceWarning,
    bounded_orbit_certificate,
    ess_spectral_radius,
    estimate_from_ensemble,
    instability_certificate,
    run_ensemble,
    spectral_structure,
)
from .svg import annulus_svg, band_svg
from .symbols import catalog_symbol, constraint_transform, symbol_from_json

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_CHECK = 0, 2, 3, 4
COMMANDS = ("exponents", "structure", "conservation", "shortwave", "certify", "check")


class NumericalFailure(RuntimeError):
    pass


# ------------------------------------------------------------ report helpers


def _camel(key: str) -> str:
    parts = key.split("_")
    return parts[0] + "".join(p[:1].upper() + p[1:] for p in parts[1:])


def _clean(obj, camel=True):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings, camelCase keys."""
    if isinstance(obj, dict):
        return {(_camel(k) if camel and isinstance(k, str) and re.fullmatch(r"[a-z0-9_]+", k) else str(k)): _clean(v, camel) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v, camel) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist(), camel)
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


def _mkey(m: float) -> str:
    return f"m={float(m):g}"


def _threads(args) -> int:
    if args.threads:
        return args.threads
    try:
        return max(1, int(os.environ.get("BAS_SPECTRA_THREADS", "1")))
    except ValueError:
        return 1


def _flow_symbol(cfg: dict):
    flow = flow_from_json(cfg["flow"])
    return flow, symbol_from_json(cfg["symbol"], flow)


def _check_finite(values, what):
    arr = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise NumericalFailure(f"non-finite result in {what}")


# ------------------------------------------------------------ commands


def cmd_exponents(cfg: dict, out: Path, threads: int) -> dict:
    flow, symbol = _flow_symbol(cfg)
    run = RunConfig(cfg)
    ens = run_ensemble(flow, symbol, run.sampler, threads)
    result = {}
    for m in cfg["m"]:
        est = estimate_from_ensemble(ens, m)
        _check_finite([est.mu_max, est.mu_min, est.lambda_max, est.lambda_min], "exponent estimates")
        entry = est.to_dict()
        entry["ess_spectral_radius"] = ess_spectral_radius(est, cfg["t"])
        entry["t"] = cfg["t"]
        result[_mkey(m)] = entry
    first = result[_mkey(cfg["m"][0])]
    summary = {k: first[k] for k in ("mu_max", "mu_min", "lambda_max", "lambda_min")}
    files = []
    if cfg["trajectory_csv"]:
        for m in cfg["m"]:
            w = result[_mkey(m)]["argmax"]
            traj = frame_trajectory(flow, symbol, np.asarray(w["x"]), np.asarray(w["xi"]), np.linspace(0.0, run.sampler.horizon, 101))
            name = f"trajectory_argmax_{_mkey(m).replace('=', '')}.csv"
            write_trajectory_csv(traj, out / name)
            files.append(name)
    return {"estimates": result, "files": files, **summary}


def cmd_structure(cfg: dict, out: Path, threads: int) -> dict:
    flow, symbol = _flow_symbol(cfg)
    run = RunConfig(cfg)
    ens = run_ensemble(flow, symbol, run.sampler, threads)
    t = cfg["t"]
    result, files = {}, []
    for m in cfg["m"]:
        st = spectral_structure(
            flow, symbol, m, run.sampler, k_grid=cfg["k_grid"], t=t,
            stretch_tol=cfg["structure"]["stretch_tol"], tol=cfg["structure"]["tol"], ensemble=ens,
        )
        entry = st.to_dict()
        tag = _mkey(m).replace("=", "")
        title = f"{symbol.name} on {flow.name}, {_mkey(m)}, t={t:g}"
        if st.hypothesis:
            ann = annulus_svg(st.annulus_radii, title)
            band = band_svg(st.band, title, margins=st.margins)
            entry["figure_values"] = {"annulus": list(st.annulus_radii), "band": [st.band[0], st.s, st.S, st.band[1]]}
        else:
            mark = "stretching hypothesis not satisfied: interval hull only"
            ann = annulus_svg(st.hull_radii, title, watermark=mark)
            band = band_svg(st.band, title, watermark=mark)
            entry["figure_values"] = {"annulus": list(st.hull_radii), "band": list(st.band)}
        (out / f"annulus_{tag}.svg").write_text(ann)
        (out / f"band_{tag}.svg").write_text(band)
        files += [f"annulus_{tag}.svg", f"band_{tag}.svg"]
        result[_mkey(m)] = entry
    return {"structures": result, "files": files}


def cmd_conservation(cfg: dict, out: Path, threads: int) -> dict:
    flow = flow_from_json(cfg["flow"])
    c = cfg["conservation"]
    params = AcceptanceParams(conservation_points=c["n_points"], conservation_horizon=c["horizon"], seed=c["seed"])
    drifts = {}
    for eq in DETERMINANT_SYMBOLS:
        if eq in THREE_D_ONLY and flow.dim != 3:
            continue
        data = {"components": flow.dim} if eq == "transport" else dict(EQUILIBRIUM)
        if eq == cfg["symbol"]["equation"]:
            data.update(cfg["symbol"].get("equilibrium", {}))
        sym = constraint_transform(catalog_symbol(eq, flow, data))
        drifts[eq] = determinant_law_drift(flow, sym, params, c["seed"])
    _check_finite(list(drifts.values()), "conserved determinant")
    report = {
        "drifts": drifts,
        "max_drift": max(drifts.values()),
        "tolerance": c["tolerance"],
        "passed": max(drifts.values()) <= c["tolerance"],
        "not_applicable": ["boussinesq", "sqg"],
    }
    if c["negative_control"]:
        base = catalog_symbol("euler_velocity", flow)
        ev = base.evaluate
        eye = np.eye(flow.dim)
        broken = replace(base, evaluate=lambda x, xib, du: ev(x, xib, du) + 1e-3 * eye)
        ctrl = determinant_law_drift(flow, broken, params, c["seed"])
        report["negative_control"] = {"drift": ctrl, "detected": ctrl > c["tolerance"]}
    return report


def cmd_shortwave(cfg: dict, out: Path, threads: int) -> dict:
    flow = flow_from_json(cfg["flow"])
    p = cfg["pde"]
    rows, table = [], {}
    for t in p["t"]:
        errs = []
        for K in p["K"]:
            N = p["N"] or int(math.ceil(p["N_factor"] * K))
            backend = PdeBackend(p["backend"], flow, N, components=p["components"])
            if len(p["b0"]) != backend.d:
                raise ConfigError(f"config error at pde.b0: expected {backend.d} components for this backend")
            b0 = tuple(p["b0"])
            packet = WavePacket.bump(tuple(p["xi0"]), K, b0, center=tuple(p["center"]), p=tuple(p["envelope"]))
            err = shortwave_error(backend, packet, t, cfl=p["cfl"])
            _check_finite([err], "shortwave error")
            errs.append(err)
            rows.append((1.0 / K, t, err))
        entry = {"K": p["K"], "errors": errs}
        if len(p["K"]) > 1 and min(errs) > 1e-12:
            slope = fit_decay_order([1.0 / K for K in p["K"]], errs)
            entry["decay_order"] = slope
            entry["decay_order_ok"] = 0.8 <= slope <= 1.2
        table[f"t={t:g}"] = entry
    write_error_csv(rows, out / "shortwave_errors.csv")
    return {"table": table, "files": ["shortwave_errors.csv"], "backend": p["backend"]}


def cmd_certify(cfg: dict, out: Path, threads: int) -> dict:
    flow, symbol = _flow_symbol(cfg)
    run = RunConfig(cfg)
    ens = run_ensemble(flow, symbol, run.sampler, threads)
    inst = {
        _mkey(m): instability_certificate(flow, symbol, m, run.sampler, cfg["certify"]["threshold"], ensemble=ens)
        for m in cfg["m"]
    }
    orbits = []
    for pt in cfg["certify"]["points"]:
        orbits.append(
            bounded_orbit_certificate(
                flow, symbol, pt.get("m", cfg["m"][0]), pt["mu"], np.asarray(pt["x"]), np.asarray(pt["xi"]),
                pt.get("horizon", run.sampler.horizon), bound=pt.get("bound", 10.0),
            )
        )
    return {"instability": inst, "bounded_orbit": orbits}


def cmd_check(cfg: dict, out: Path, threads: int) -> dict:
    params = replace(RunConfig(cfg).acceptance, threads=threads)
    results = run_criteria(params, cfg["acceptance"]["criteria"])
    for r in results:
        print(r.line(), flush=True)
    return {
        "criteria": {str(r.id): r.to_dict() for r in results},
        "passed": all(r.passed for r in results),
    }


HANDLERS = {
    "exponents": cmd_exponents,
    "structure": cmd_structure,
    "conservation": cmd_conservation,
    "shortwave": cmd_shortwave,
    "certify": cmd_certify,
    "check": cmd_check,
}


def write_report(report: dict, out: Path) -> Path:
    path = out / "report.json"
    path.write_text(json.dumps(report, sort_keys=True, indent=2, allow_nan=False) + "\n")
    return path


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bas-spectra", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", type=Path, help="JSON run configuration (defaults used if omitted)")
        sp.add_argument("--out", type=Path, default=Path("bas_out"), help="output directory")
        sp.add_argument("--threads", type=int, default=None, help="worker threads (env BAS_SPECTRA_THREADS)")
        sp.add_argument("--check", action="store_true", help="also run the acceptance suite; exit 4 on failure")
    return parser


def main(argv: Optional[list] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load(args.config) if args.config else resolve({})
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_CONFIG
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    threads = _threads(args)
    run = RunConfig(cfg)
    report = {
        "command": args.command,
        "config": cfg,
        "provenance": {"config_hash": run.hash, "version": __version__},
    }
    code = EXIT_OK
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", ConvergenceWarning)
            report[args.command] = HANDLERS[args.command](cfg, out, threads)
            if args.check and args.command != "check":
                report["check"] = cmd_check(cfg, out, threads)
        notes = sorted({str(w.message) for w in caught if issubclass(w.category, ConvergenceWarning)})
        for msg in notes:
            print(f"warning: {msg}", file=sys.stderr)
        report["warnings"] = notes
    except (ValueError, KeyError) as exc:
        msg = str(exc) if isinstance(exc, ConfigError) else f"config error: {exc}"
        print(msg, file=sys.stderr)
        return EXIT_CONFIG
    except (IntegrationError, EvolutionBlowup, NumericalFailure, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    if "check" in report and not report["check"]["passed"]:
        code = EXIT_CHECK
    # the echoed config keeps its own key spelling
    cleaned = _clean({k: v for k, v in report.items() if k != "config"})
    cleaned["config"] = _clean(cfg, camel=False)
    path = write_report(cleaned, out)
    print(f"report written to {path}")
    return code


if __name__ == "__main__":
    sys.exit(main())
