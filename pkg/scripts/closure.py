"""Noiseless closure runs for the reduced models.

    python scripts/closure.py [--out results/closure]

Prints final relative errors, convergence times and the exponential-envelope
fit of the log parameter error for each preset.
"""

import argparse
from pathlib import Path

import numpy as np

from polcurve import diagnostics, harness, presets

RUNS = ("m2-sim", "m3-sim", "m4-sim", "m4-sim-gradient")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=None)
    args = ap.parse_args()
    for name in RUNS:
        cfg = presets.config(name)
        out = Path(args.out) / name if args.out else None
        rep = harness.run(cfg, out)
        truth = harness.eta_truth(cfg.model.id, harness.model_params(cfg.model.id, cfg.model.params))
        err = np.abs(rep.trajectory.eta - truth) / np.abs(truth)
        env = diagnostics.exponential_envelope(rep.trajectory.t, err)
        worst = max(rep.relative_error.values())
        print(f"{name:16s} max rel err {worst:.2e}  t_conv {rep.convergence_time:.3f} s  "
              f"envelope rate {env.rate:8.1f}/s  R^2 {env.r_squared:.6f}")


if __name__ == "__main__":
    main()
