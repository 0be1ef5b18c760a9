"""Fit M2/M3/M4 to a sweep of the full model and compare them interval by interval.

    python scripts/curve_ranking.py [--E-oc 42] [--fit-window 10 20] [--out results/ranking]
"""

import argparse
import json
from pathlib import Path

import numpy as np

from polcurve import harness, models, signals


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--E-oc", dest="E_oc", type=float, default=42.0)
    ap.add_argument("--fit-window", type=float, nargs=2, default=(10.0, 20.0))
    ap.add_argument("--out", default=None)
    args = ap.parse_args()
    table, fits = harness.rank_curves(E_oc=args.E_oc, fit_window=tuple(args.fit_window))
    print(table.to_text())
    print("best on full range:", table.best(-1))
    for m, f in fits.items():
        print(f"  {m}: " + ", ".join(f"{k}={v:.5g}" for k, v in f.items()))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        i = np.linspace(1.0, 30.0, 291)
        cols = [i, models.eval_m1(models.REFERENCE_THETA, i)] + [harness.estimated_curve(m, f, i) for m, f in fits.items()]
        signals.write_columns(out / "curves.csv", ["i", "v_m1", "v_m2", "v_m3", "v_m4"], cols)
        d = table.to_dict()
        d["fits"] = fits
        (out / "ranking.json").write_text(json.dumps(d, indent=2) + "\n")


if __name__ == "__main__":
    main()
