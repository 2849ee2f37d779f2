"""Shortwave error against delta = 1/K for each PDE backend on the shear flow."""

import argparse

from bas_spectra.flows import catalog_flow
from bas_spectra.pdevalidate import PdeBackend, WavePacket, fit_decay_order, shortwave_error, write_error_csv

BACKENDS = {"advection": (2, (0.0, 1.0)), "euler2d_velocity": (1, (0.0, 1.0))}


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--K", type=int, nargs="+", default=[8, 16, 32, 64])
    ap.add_argument("--t", type=float, default=1.0)
    ap.add_argument("--N-factor", type=float, default=3.0)
    ap.add_argument("--csv", default=None, help="write delta,t,error rows here")
    args = ap.parse_args()
    flow = catalog_flow("shear", [1.0])
    rows = []
    for kind, (comp, b0) in BACKENDS.items():
        errs = []
        for K in args.K:
            be = PdeBackend(kind, flow, int(args.N_factor * K), components=comp)
            err = shortwave_error(be, WavePacket.bump((1, 0), K, b0), args.t)
            errs.append(err)
            rows.append((1.0 / K, args.t, err))
            print(f"{kind:18s} K={K:4d} N={be.N:4d} error={err:.4e}")
        ratios = [a / b for a, b in zip(errs, errs[1:])]
        order = fit_decay_order([1.0 / K for K in args.K], errs)
        print(f"{kind:18s} ratios={', '.join(f'{r:.3f}' for r in ratios)} order={order:.3f}")
    if args.csv:
        write_error_csv(rows, args.csv)


if __name__ == "__main__":
    main()
