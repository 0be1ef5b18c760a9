"""Monte Carlo over measurement-noise seeds for the reduced models.

    python scripts/noise_monte_carlo.py [--seeds 20] [--std 0.05] [--jobs 4] [--out results/mc]
"""

import argparse
import json
import time
from pathlib import Path

from polcurve import harness, presets

RUNS = (("m2-sim", []), ("m3-sim", []), ("m4-sim", ["duration=40.0"]))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--std", type=float, default=0.05)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out", default=None)
    args = ap.parse_args()
    summary = {}
    for name, extra in RUNS:
        start = time.perf_counter()
        cfg = presets.config(name, [f"noise_std={args.std}", *extra])
        mc = harness.monte_carlo(cfg, range(args.seeds), jobs=args.jobs)
        summary[name] = mc.to_dict()
        worst = ", ".join(f"{k} {v:.2%}" for k, v in mc.max_relative_error.items())
        print(f"{name:8s} worst relative error: {worst}  ({time.perf_counter() - start:.1f} s)")
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / "monte_carlo.json").write_text(json.dumps(summary, indent=2) + "\n")


if __name__ == "__main__":
    main()
