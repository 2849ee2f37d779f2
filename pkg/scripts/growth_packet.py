"""H^m growth of a shortwave packet near the cellular stagnation point vs its cocycle prediction."""

import argparse
import math

import numpy as np

from bas_spectra.flows import catalog_flow
from bas_spectra.pdevalidate import PdeBackend, WavePacket, evolve, hm_norm, packet_log_growth


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--K", type=int, default=24)
    ap.add_argument("--N", type=int, default=240)
    ap.add_argument("--m", type=float, default=1.0)
    ap.add_argument("--times", type=float, nargs="+", default=[0.5, 1.0, 1.5, 2.0])
    ap.add_argument("--envelope", type=int, nargs=2, default=[8, 300])
    ap.add_argument("--cfl", type=float, default=1.5)
    args = ap.parse_args()
    be = PdeBackend("advection", catalog_flow("cellular", [1.0]), args.N)
    packet = WavePacket.bump((1, 0), args.K, center=(0.0, 0.0), p=tuple(args.envelope))
    f0 = be.packet_field(packet)
    n0 = hm_norm(f0, args.m)
    print("t,growth,predicted,ratio")
    prev, f = 0.0, f0
    for t in sorted(args.times):
        f = evolve(be, f, t - prev, cfl=args.cfl)
        prev = t
        growth = hm_norm(f, args.m) / n0
        pred = math.exp(packet_log_growth(be, packet, args.m, t))
        print(f"{t:g},{growth:.6f},{pred:.6f},{growth / pred:.4f}")
    assert np.isfinite(growth)


if __name__ == "__main__":
    main()
