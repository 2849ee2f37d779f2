"""Write the run-configuration JSON schema to configs/config.schema.json."""

import argparse
import json
from pathlib import Path

from bas_spectra.config import SCHEMA

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=ROOT / "configs" / "config.schema.json")
    args = ap.parse_args()
    args.out.write_text(json.dumps(SCHEMA, indent=2, sort_keys=True) + "\n")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
