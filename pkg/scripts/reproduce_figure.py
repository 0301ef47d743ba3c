"""Write the data behind one figure: python3 scripts/reproduce_figure.py fig12 --scale 0.1 --out out"""

import argparse
from pathlib import Path

from snetfdr import experiments as E

if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("figure", choices=E.FIGURES)
    ap.add_argument("--scale", type=float, default=1.0)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--out", default="out")
    a = ap.parse_args()
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = E.reproduce(a.figure, a.scale, out, a.seed)
    E.write_rows(out / f"{a.figure}.csv", rows)
    for r in rows:
        print({k: round(v, 4) if isinstance(v, float) else v for k, v in r.items()})
