"""Command-line front end.

    python -m polcurve simulate  --preset m2-sim --out runs/m2
    python -m polcurve estimate  --config m2.toml --set estimator.gamma0=12 --seed 3
    python -m polcurve replay    --input bench.csv --preset m2-exp
    python -m polcurve diagnose  wronskian --input regressor.csv --out diag
    python -m polcurve fit       --model m4 --input sweep.csv
    python -m polcurve compare   [--input sweep.csv --E-oc 42]
    python -m polcurve presets   list | show NAME

Exit status: 0 success, 1 domain/configuration error, 2 numerical divergence.
Errors are reported on stderr as a single JSON object.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import diagnostics, harness, maps, models, presets, signals
from .errors import ConfigError, DivergenceError, DomainError, ExcitationError
from .regressors import RegressorStream


def _config(args, extra_overrides=(), replay_path=None):
    overrides = list(args.set or []) + list(extra_overrides)
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    if args.config and args.preset:
        raise ConfigError("give either --config or --preset, not both")
    if args.config:
        data = harness.read_config_file(args.config)
    elif args.preset:
        data = presets.get(args.preset)
    else:
        raise ConfigError("a run needs --config or --preset")
    if replay_path is not None:
        data.pop("signal", None)
        data.setdefault("replay", {})["path"] = str(replay_path)
    for item in overrides:
        harness.apply_override(data, item)
    if args.out:
        data["out"] = args.out
    return harness.config_from_dict(data)


def _print_report(rep):
    print(json.dumps(harness._jsonable({
        "name": rep.name, "model": rep.model, "final": rep.final,
        "relative_error": rep.relative_error, "convergence_time": rep.convergence_time,
        "verdicts": {k: v.get("verdict", v.get("passed")) for k, v in rep.diagnostics.items()
                     if isinstance(v, dict)},
        "files": rep.files,
    }), indent=2))


def cmd_simulate(args):
    cfg = _config(args, ["estimator.kind=\"none\""])
    _print_report(harness.run(cfg))


def cmd_estimate(args):
    cfg = _config(args)
    if args.monte_carlo:
        start = cfg.seed
        mc = harness.monte_carlo(cfg, range(start, start + args.monte_carlo), jobs=args.jobs)
        text = json.dumps(mc.to_dict(), indent=2)
        if cfg.out:
            Path(cfg.out).mkdir(parents=True, exist_ok=True)
            (Path(cfg.out) / "monte_carlo.json").write_text(text + "\n")
        print(text)
        return
    _print_report(harness.run(cfg))


def cmd_replay(args):
    extra = [f"replay.prefilter=true", f"replay.cutoff={args.prefilter}"] if args.prefilter is not None else []
    cfg = _config(args, extra, replay_path=args.input)
    _print_report(harness.run(cfg))


def _read_stream(path):
    cols = signals.read_columns(path)
    if "t" not in cols:
        raise ConfigError(f"{path}: need a 't' column")
    phi_keys = [k for k in cols if k.startswith("phi_")] or [k for k in cols if k not in ("t", "Y")]
    phi = np.column_stack([cols[k] for k in phi_keys])
    Y = cols.get("Y", np.zeros(cols["t"].size))
    return RegressorStream(cols["t"], Y, phi)


def cmd_diagnose(args):
    out = Path(args.out) if args.out else None
    if out:
        out.mkdir(parents=True, exist_ok=True)
    if args.what == "monotonizability":
        pmap = {"G": maps.G_MAP, "GA": maps.GA_MAP}[args.map]
        rng = np.random.default_rng(args.seed or 0)
        nz = (1,) if args.map == "G" else (1, 3)
        pts = maps.sample_box(pmap.q, args.lo, args.hi, args.samples, rng, nonzero=nz)
        rep = maps.check_monotonizability(pmap, pts, domain=[args.lo, args.hi])
        print(str(rep))
        if out:
            (out / "monotonizability.json").write_text(rep.to_json() + "\n")
        return
    if not args.input:
        raise ConfigError(f"diagnose {args.what} needs --input")
    stream = _read_stream(args.input)
    if args.what == "wronskian":
        ws = diagnostics.wronskian_determinant(stream, stride=args.stride, transient_end=args.transient)
        target = (out or Path(".")) / "wronskian.csv"
        ws.to_csv(target)
        print(json.dumps({"wronskian": str(target), "transient_peak": ws.transient_peak}))
        return
    t_c = args.t_c if args.t_c is not None else stream.t[-1] - stream.t[0]
    rep = diagnostics.excitation_ie(stream, t_c).to_dict()
    if args.window:
        pe = diagnostics.excitation_pe(stream, args.window)
        rep["pe"] = pe.to_dict()
        if out:
            pe.to_csv(out / "pe.csv")
    text = json.dumps(harness._jsonable(rep), indent=2)
    if out:
        (out / "excitation.json").write_text(text + "\n")
    print(text)


def _read_sweep(path):
    cols = signals.read_columns(path, ["i", "v"])
    return cols["i"], cols["v"]


def cmd_fit(args):
    i, v = _read_sweep(args.input)
    window = tuple(args.window) if args.window else None
    fit = harness.fit_curve(args.model, i, v, args.E_oc, window)
    print(json.dumps(fit, indent=2))


def cmd_compare(args):
    window = tuple(args.fit_window)
    if args.input:
        i, v = _read_sweep(args.input)
        fits = {m: harness.fit_curve(m, i, v, args.E_oc if m != "m4" else None, window)
                for m in ("m2", "m3", "m4")}
        table = harness.compare_curves((i, v), {m: harness.estimated_curve(m, f, i) for m, f in fits.items()})
    else:
        table, fits = harness.rank_curves(E_oc=args.E_oc, fit_window=window)
    print(table.to_text())
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        d = table.to_dict()
        d["fits"] = fits
        (out / "compare.json").write_text(json.dumps(harness._jsonable(d), indent=2) + "\n")


def cmd_presets(args):
    if args.action == "list":
        for name in presets.names():
            print(name)
        return
    if not args.name:
        raise ConfigError("presets show needs a NAME")
    presets.get(args.name)
    print(json.dumps(presets.PRESETS[args.name], indent=2))


class _Parser(argparse.ArgumentParser):
    # usage errors are configuration errors (exit 1), not argparse's 2
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="polcurve", description="Online polarization-curve estimation")
    sub = ap.add_subparsers(dest="verb", required=True)

    def run_opts(p):
        p.add_argument("--config", help="TOML run configuration")
        p.add_argument("--preset", help="named preset instead of --config")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="dotted override, repeatable")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output directory")
        p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("simulate", help="synthesize signals and regressors, no estimation")
    run_opts(p)
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("estimate", help="full run with the configured estimator")
    run_opts(p)
    p.add_argument("--monte-carlo", type=int, default=0, metavar="N", help="repeat over N seeds")
    p.set_defaults(fn=cmd_estimate)

    p = sub.add_parser("replay", help="run on a measured t,i_fc,v_fc CSV")
    run_opts(p)
    p.add_argument("--input", required=True)
    p.add_argument("--prefilter", type=float, metavar="HZ", help="enable the low-pass pre-filter")
    p.set_defaults(fn=cmd_replay)

    p = sub.add_parser("diagnose", help="excitation, Wronskian or monotonizability checks")
    p.add_argument("what", choices=("wronskian", "excitation", "monotonizability"))
    p.add_argument("--input", help="regressor CSV (t[,Y],phi_1..)")
    p.add_argument("--out")
    p.add_argument("--stride", type=int, default=1)
    p.add_argument("--transient", type=float, default=None, help="end of the transient window [s]")
    p.add_argument("--t-c", type=float, default=None)
    p.add_argument("--window", type=float, default=None, help="PE window length [s]")
    p.add_argument("--map", choices=("G", "GA"), default="G")
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--lo", type=float, default=-10.0)
    p.add_argument("--hi", type=float, default=10.0)
    p.add_argument("--seed", type=int)
    p.set_defaults(fn=cmd_diagnose)

    p = sub.add_parser("fit", help="batch least-squares fit of a static model to an i,v sweep")
    p.add_argument("--model", required=True, choices=("m2", "m3", "m4"))
    p.add_argument("--input", required=True)
    p.add_argument("--E-oc", dest="E_oc", type=float)
    p.add_argument("--window", type=float, nargs=2, metavar=("LO", "HI"))
    p.set_defaults(fn=cmd_fit)

    p = sub.add_parser("compare", help="per-interval curve errors of fitted M2/M3/M4")
    p.add_argument("--input", help="i,v sweep (default: full model with the reference parameters)")
    p.add_argument("--E-oc", dest="E_oc", type=float, default=42.0)
    p.add_argument("--fit-window", type=float, nargs=2, default=(10.0, 20.0), metavar=("LO", "HI"))
    p.add_argument("--out")
    p.set_defaults(fn=cmd_compare)

    p = sub.add_parser("presets", help="list or show named presets")
    p.add_argument("action", choices=("list", "show"))
    p.add_argument("name", nargs="?")
    p.set_defaults(fn=cmd_presets)
    return ap


def _fail(exc, code):
    err = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    snap = getattr(exc, "snapshot", None)
    if snap:
        err["snapshot"] = harness._jsonable(snap[-5:])
    sys.stderr.write(json.dumps(err) + "\n")
    return code


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        args.fn(args)
    except DivergenceError as exc:
        return _fail(exc, 2)
    except (DomainError, ConfigError, ExcitationError, OSError) as exc:
        return _fail(exc, 1)
    return 0


if __name__ == "__main__":
    sys.exit(main())
