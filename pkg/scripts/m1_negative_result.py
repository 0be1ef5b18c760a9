"""Full-model regressor on the two sinusoidal test currents: Wronskian and IE checks.

    python scripts/m1_negative_result.py [--out results/m1] [--duration 60]

The Wronskian determinant of the five-component regressor is numerically zero
once the filter transient has passed, and the Gram matrix is rank deficient,
so the LSD estimate does not converge.
"""

import argparse
from pathlib import Path

from polcurve import diagnostics, harness, presets, regressors

LAM = 80.0


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=None)
    ap.add_argument("--duration", type=float, default=60.0)
    args = ap.parse_args()
    for name in ("m1-lindep-test1", "m1-lindep-test2"):
        cfg = presets.config(name, [f"duration={args.duration}", "diagnostics.wronskian=false"])
        out = Path(args.out) / name if args.out else None
        rep = harness.run(cfg, out)
        u, y, ud, _ = harness.synthesize_signals(cfg)
        stream = regressors.build_stream(harness.make_pipeline(cfg), u, y, ud)
        ws = diagnostics.wronskian_determinant(stream, transient_end=5 / LAM)
        _, dn = ws.after(5 / LAM)
        if out:
            ws.to_csv(out / "wronskian.csv")
        w = stream.window(5 / LAM)
        ie = diagnostics.excitation_ie(w, w.t[-1] - w.t[0])
        print(f"{name}: normalized det after 5/lam max {dn.max():.2e} "
              f"(transient peak {ws.transient_peak:.2e}); Gram ratio {ie.ratio:.2e} {ie.verdict}; "
              f"convergence time {rep.convergence_time}")
        print("  final estimate:", {k: round(v, 4) for k, v in rep.final.items()})


if __name__ == "__main__":
    main()
