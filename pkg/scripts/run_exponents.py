"""Exponent table for every catalog flow and a few symbols, printed as JSON."""

import argparse
import json

from bas_spectra.flows import catalog_flow
from bas_spectra.spectrum import SamplerSpec, estimate_from_ensemble, run_ensemble
from bas_spectra.symbols import catalog_symbol

FLOWS = {
    "constant2d": ("constant", [1.0, 0.5]),
    "shear": ("shear", [1.0]),
    "cellular": ("cellular", [1.0]),
    "abc": ("abc", [1.0, 1.0, 1.0]),
}
SYMBOLS = ("transport", "euler_velocity", "kinematic_dynamo")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--samples", type=int, default=64)
    ap.add_argument("--horizon", type=float, default=50.0)
    ap.add_argument("--m", type=float, nargs="+", default=[0.0, 1.0])
    ap.add_argument("--threads", type=int, default=None)
    args = ap.parse_args()
    sampler = SamplerSpec(n_samples=args.samples, horizon=args.horizon)
    table = {}
    for key, (name, params) in FLOWS.items():
        flow = catalog_flow(name, params)
        for eq in SYMBOLS:
            ens = run_ensemble(flow, catalog_symbol(eq, flow), sampler, args.threads)
            for m in args.m:
                est = estimate_from_ensemble(ens, m, warn=False)
                table[f"{key}/{eq}/m={m:g}"] = {
                    "mu": [est.mu_min, est.mu_max],
                    "lambda": [est.lambda_min, est.lambda_max],
                    "gap": est.gap,
                    "converged": est.converged,
                }
    print(json.dumps(table, indent=2))


if __name__ == "__main__":
    main()
