"""Annulus and band SVGs for transport on the cellular flow over a range of m."""

import argparse
from pathlib import Path

from bas_spectra.flows import catalog_flow
from bas_spectra.spectrum import SamplerSpec, run_ensemble, spectral_structure
from bas_spectra.svg import annulus_svg, band_svg
from bas_spectra.symbols import catalog_symbol


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("figures"))
    ap.add_argument("--m", type=float, nargs="+", default=[-2.0, -1.0, 1.0, 2.0])
    ap.add_argument("--equation", default="transport")
    ap.add_argument("--t", type=float, default=1.0)
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    flow = catalog_flow("cellular", [1.0])
    symbol = catalog_symbol(args.equation, flow)
    sampler = SamplerSpec()
    ens = run_ensemble(flow, symbol, sampler)
    for m in args.m:
        st = spectral_structure(flow, symbol, m, sampler, t=args.t, ensemble=ens)
        title = f"{args.equation} on cellular, m={m:g}, t={args.t:g}"
        if st.hypothesis:
            ann, band = annulus_svg(st.annulus_radii, title), band_svg(st.band, title, margins=st.margins)
        else:
            mark = "stretching hypothesis not satisfied: interval hull only"
            ann, band = annulus_svg(st.hull_radii, title, mark), band_svg(st.band, title, watermark=mark)
        (args.out / f"annulus_m{m:g}.svg").write_text(ann)
        (args.out / f"band_m{m:g}.svg").write_text(band)
        print(f"m={m:g} interval={st.interval} hypothesis={st.hypothesis}")


if __name__ == "__main__":
    main()
