"""Run orchestration: signal (or replayed CSV) -> voltage -> regressor stream ->
estimator -> diagnostics -> report and data files.

Configurations are plain dataclasses; :func:`load_config` reads them from TOML
and rejects unknown keys.
"""

from __future__ import annotations

import copy
import dataclasses
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import tomli

from . import diagnostics, estimators, maps, models, regressors, signals
from .errors import ConfigError, DivergenceError, DomainError, ExcitationError

SCHEMA_VERSION = "1.0"
CONVERGENCE_BALL = 0.01

PARAM_KEYS = {
    "m1": ("theta1", "theta2", "theta3", "theta4", "theta5"),
    "appendix_a": ("theta1", "theta2", "theta3", "theta4", "theta5"),
    "m2": ("E_oc", "a", "b"),
    "m3": ("E_oc", "a", "b"),
    "m4": ("theta1", "theta2", "theta6"),
}


# --------------------------------------------------------------------------- #
# configuration
# --------------------------------------------------------------------------- #


@dataclass
class SignalConfig:
    """``kind`` is one of pulse, sine, fourier, constant, test1, test2."""

    kind: str = "pulse"
    low: float = 10.0
    high: float = 20.0
    frequency: float = 2.0
    rise_time: float = 0.0
    start_high: bool = True
    offset: float = 25.0
    amplitude: float = 5.0
    phase: float = 0.0
    terms: list = field(default_factory=list)
    value: float = 15.0


@dataclass
class ModelConfig:
    id: str = "m2"
    params: dict | None = None
    E_oc: float | None = None


@dataclass
class PipelineConfig:
    lam: float = regressors.DEFAULT_LAMBDA
    tau: float | None = None
    derivative: str = "dirty"
    init: str = "consistent"
    u_offset: float | None = None


@dataclass
class EstimatorConfig:
    """``kind``: lsd, gradient or none.  ``whitening`` > 0 replaces ``Gamma`` of
    the gradient estimator by ``whitening * (window Gram)^{-1}``."""

    kind: str = "lsd"
    gamma0: float = 24.0
    f0: float = 1e-5
    Gamma: float | list = 1.0
    whitening: float | None = None
    whitening_window: float = 1.0
    method: str = "auto"
    eta0: list | None = None
    W0: list | None = None


@dataclass
class DiagnosticsConfig:
    excitation: bool = True
    t_c: float | None = None
    pe_window: float | None = None
    wronskian: bool = False
    wronskian_stride: int = 1
    monotonizability: bool = True


@dataclass
class ReplayConfig:
    path: str = ""
    prefilter: bool = False
    cutoff: float = 5.0


@dataclass
class RunConfig:
    name: str = "run"
    model: ModelConfig = field(default_factory=ModelConfig)
    signal: SignalConfig | None = field(default_factory=SignalConfig)
    replay: ReplayConfig | None = None
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    diagnostics: DiagnosticsConfig = field(default_factory=DiagnosticsConfig)
    noise_std: float = 0.0
    dt: float = 1e-3
    duration: float = 10.0
    seed: int = 0
    out: str | None = None

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


_SECTIONS = {
    "model": ModelConfig,
    "signal": SignalConfig,
    "replay": ReplayConfig,
    "pipeline": PipelineConfig,
    "estimator": EstimatorConfig,
    "diagnostics": DiagnosticsConfig,
}


def _build(cls, data: dict, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"[{where}] must be a table")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"unknown key(s) in [{where}]: {', '.join(unknown)}")
    return cls(**data)


def config_from_dict(data: dict) -> RunConfig:
    """Strict conversion of a nested mapping into a :class:`RunConfig`."""
    data = copy.deepcopy(data)
    top = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = sorted(set(data) - top)
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {', '.join(unknown)}")
    kw = {}
    for k, v in data.items():
        if k in _SECTIONS:
            kw[k] = None if v is None else _build(_SECTIONS[k], v, k)
        else:
            kw[k] = v
    if "replay" in kw and kw["replay"] is not None and "signal" not in kw:
        kw["signal"] = None
    cfg = RunConfig(**kw)
    validate(cfg)
    return cfg


def read_config_file(path) -> dict:
    with open(path, "rb") as fh:
        try:
            return tomli.load(fh)
        except tomli.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None


def load_config(path, overrides=()) -> RunConfig:
    data = read_config_file(path)
    for item in overrides:
        apply_override(data, item)
    return config_from_dict(data)


def parse_value(text: str):
    """TOML scalar/array syntax, falling back to a bare string."""
    try:
        return tomli.loads(f"v = {text}")["v"]
    except tomli.TOMLDecodeError:
        return text


def apply_override(data: dict, item: str) -> dict:
    """Apply ``section.key=value`` to a nested mapping in place."""
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not key=value")
    key, text = item.split("=", 1)
    parts = key.strip().split(".")
    node = data
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ConfigError(f"override {item!r}: {p} is not a table")
    node[parts[-1]] = parse_value(text.strip())
    return data


def validate(cfg: RunConfig) -> None:
    if (cfg.signal is None) == (cfg.replay is None):
        raise ConfigError("exactly one of [signal] (synthesis) and [replay] must be given")
    if cfg.model.id not in PARAM_KEYS:
        raise ConfigError(f"unknown model {cfg.model.id!r}")
    if not (cfg.dt > 0 and cfg.duration > 0):
        raise ConfigError("dt and duration must be positive")
    if cfg.noise_std < 0:
        raise ConfigError("noise_std must be non-negative")
    if cfg.estimator.kind not in ("lsd", "gradient", "none"):
        raise ConfigError(f"unknown estimator {cfg.estimator.kind!r}")
    p = cfg.model.params
    if p is not None:
        need = set(PARAM_KEYS[cfg.model.id])
        extra = sorted(set(p) - need)
        if extra:
            raise ConfigError(f"unknown parameter(s) for {cfg.model.id}: {', '.join(extra)}")
        missing = sorted(need - set(p))
        if missing:
            raise ConfigError(f"missing parameter(s) for {cfg.model.id}: {', '.join(missing)}")
    if cfg.signal is not None:
        if p is None:
            raise ConfigError("synthesis needs [model] params")
        spec = build_signal(cfg.signal, cfg.duration)
        f_max = spec.max_frequency()
        if f_max > 0 and not cfg.dt < 1.0 / (20.0 * f_max):
            raise ConfigError(f"dt = {cfg.dt:g} too coarse for f_max = {f_max:g} Hz (need dt < 1/(20 f_max))")
    if cfg.estimator.kind == "gradient" and cfg.model.id in ("m1", "appendix_a"):
        raise ConfigError("the gradient estimator needs a linear regression (m2, m3, m4)")


# --------------------------------------------------------------------------- #
# building blocks
# --------------------------------------------------------------------------- #


def build_signal(sc: SignalConfig, duration: float):
    k = sc.kind
    if k == "pulse":
        return signals.PulseTrain(sc.low, sc.high, sc.frequency, duration, sc.rise_time, sc.start_high)
    if k == "sine":
        return signals.Sine(sc.offset, sc.amplitude, sc.frequency, duration, sc.phase)
    if k == "fourier":
        return signals.FourierSum(sc.offset, tuple(tuple(t) for t in sc.terms), duration)
    if k == "constant":
        return signals.Constant(sc.value, duration)
    if k == "test1":
        return signals.current_test1(duration)
    if k == "test2":
        return signals.current_test2(duration)
    raise ConfigError(f"unknown signal kind {k!r}")


def model_params(model_id: str, p: dict):
    if model_id in ("m1", "appendix_a"):
        return models.ThetaFull(*(float(p[k]) for k in PARAM_KEYS["m1"]))
    if model_id in ("m2", "m3"):
        return models.ReducedParamsAB(float(p["E_oc"]), float(p["a"]), float(p["b"]), model_id)
    return models.ThetaM4(float(p["theta1"]), float(p["theta2"]), float(p["theta6"]))


def _E_oc(cfg: RunConfig) -> float:
    if cfg.model.E_oc is not None:
        return float(cfg.model.E_oc)
    if cfg.model.params and "E_oc" in cfg.model.params:
        return float(cfg.model.params["E_oc"])
    raise ConfigError(f"{cfg.model.id} needs E_oc")


def _omega(cfg: RunConfig):
    if cfg.signal is not None and cfg.signal.kind == "sine":
        return 2 * math.pi * cfg.signal.frequency
    return None


def make_pipeline(cfg: RunConfig):
    mid, pc = cfg.model.id, cfg.pipeline
    if mid == "m1":
        return regressors.M1Pipeline(cfg.dt, pc.lam, pc.derivative, pc.tau, pc.init)
    if mid == "m2":
        return regressors.M2Regressor(cfg.dt, _E_oc(cfg))
    if mid == "m3":
        return regressors.M3Pipeline(cfg.dt, _E_oc(cfg), pc.lam)
    if mid == "m4":
        return regressors.M4Regressor(cfg.dt)
    off = pc.u_offset
    if off is None:
        off = cfg.signal.offset if cfg.signal is not None and cfg.signal.kind == "sine" else 0.0
    return regressors.AppendixAPipeline(cfg.dt, pc.lam, off)


def param_map(model_id: str) -> maps.ParamMap:
    return {
        "m1": maps.G_MAP,
        "appendix_a": maps.GA_MAP,
        "m2": maps.identity_map(2),
        "m3": maps.identity_map(1),
        "m4": maps.identity_map(3),
    }[model_id]


def eta_truth(model_id: str, params, omega=None):
    """Generator parameters in the estimator's coordinates."""
    if model_id == "m1":
        return maps.d_inverse(params.theta14)
    if model_id == "appendix_a":
        if omega is None:
            return None
        return maps.appendix_a_d_inverse(params.theta14, params.theta3 * omega**2)
    return regressors.true_image(model_id, params)


def physical(model_id: str, eta, u_last=None, y_last=None, E_oc=None) -> dict:
    """Model parameters recovered from estimator coordinates (NaN where undefined)."""
    eta = np.asarray(eta, dtype=float)
    nan = float("nan")
    if model_id == "m2":
        return {"E_oc": E_oc, "a": float(math.exp(eta[0])), "b": float(eta[1])}
    if model_id == "m3":
        a = nan
        if u_last is not None and y_last is not None and E_oc is not None and E_oc > y_last:
            a = float(estimators.estimate_a_m3(E_oc, u_last, y_last, eta[0]))
        return {"E_oc": E_oc, "a": a, "b": float(eta[0])}
    if model_id == "m4":
        return {"theta6": float(eta[0]), "theta1": float(eta[1]), "theta2": float(eta[2])}
    if model_id == "m1":
        out = dict(theta1=nan, theta2=nan, theta3=nan, theta4=nan, theta5=nan)
        if eta[1] != 0:
            th = maps.d_map(eta)
            out.update(zip(("theta1", "theta2", "theta3", "theta4"), map(float, th)))
            if u_last is not None and y_last is not None and u_last > 0:
                out["theta5"] = float(estimators.estimate_theta5(th, u_last, y_last))
        return out
    out = dict(theta1=nan, theta2=nan, theta3=nan, theta4=nan, theta6=nan)
    if eta[1] != 0 and eta[3] != 0:
        th, th6 = maps.appendix_a_d_map(eta)
        out.update(zip(("theta1", "theta2", "theta3", "theta4"), map(float, th)))
        out["theta6"] = float(th6)
    return out


def make_estimator(cfg: RunConfig, stream):
    ec, mid = cfg.estimator, cfg.model.id
    pmap = param_map(mid)
    eta0 = ec.eta0
    if eta0 is None and mid == "appendix_a":
        eta0 = [1.0] * pmap.q    # G_A is singular at eta_2 = 0
    if ec.kind == "lsd":
        return estimators.LsdEstimator(pmap, ec.gamma0, ec.f0, ec.Gamma, cfg.dt, ec.W0, eta0, ec.method)
    Gamma = ec.Gamma
    if ec.whitening:
        Gamma = estimators.whitening_gain(stream, ec.whitening, ec.whitening_window)
    return estimators.GradientEstimator(Gamma, cfg.dt, eta0, q=pmap.q, method=ec.method)


def convergence_time(t, eta, truth, ball=CONVERGENCE_BALL):
    """First time after which ``|eta - truth| / |truth|`` stays inside ``ball``."""
    err = np.linalg.norm(np.asarray(eta) - truth, axis=1) / np.linalg.norm(truth)
    outside = np.flatnonzero(~(err < ball))
    if outside.size == 0:
        return float(t[0])
    k = outside[-1] + 1
    return float(t[k]) if k < len(t) else None


# --------------------------------------------------------------------------- #
# replay
# --------------------------------------------------------------------------- #


def read_measurements(path):
    cols = signals.read_columns(path, ["t", "i_fc", "v_fc"])
    t = cols["t"]
    if t.size < 2:
        raise ConfigError(f"{path}: need at least two samples")
    if np.any(np.diff(t) <= 0):
        raise ConfigError("non-monotone time")
    return t, cols["i_fc"], cols["v_fc"]


def resample(t, x, dt):
    """Linear interpolation onto ``t[0] + k*dt`` up to the last sample."""
    n = int(math.floor((t[-1] - t[0]) / dt * (1 + 1e-12))) + 1
    grid = t[0] + dt * np.arange(n)
    return grid, np.interp(grid, t, x)


def prefilter(x, dt, cutoff):
    """Second-order (two cascaded first-order) low-pass started at rest.

    A cutoff at or above the Nyquist frequency bypasses the filter."""
    if cutoff >= 0.5 / dt:
        return np.asarray(x, dtype=float).copy()
    lam = 2 * math.pi * cutoff
    f = signals.Cascade(signals.LowPass(lam, dt, "rest"), signals.LowPass(lam, dt, "rest"))
    return f.apply(x)


def load_replay(cfg: RunConfig):
    rc = cfg.replay
    t, i, v = read_measurements(rc.path)
    grid, u = resample(t, i, cfg.dt)
    _, y = resample(t, v, cfg.dt)
    if rc.prefilter:
        u, y = prefilter(u, cfg.dt, rc.cutoff), prefilter(y, cfg.dt, rc.cutoff)
    return signals.Trace(cfg.dt, u, grid[0]), signals.Trace(cfg.dt, y, grid[0])


# --------------------------------------------------------------------------- #
# run
# --------------------------------------------------------------------------- #


@dataclass
class RunReport:
    name: str
    model: str
    estimator: str
    final: dict
    final_eta: list
    truth: dict | None
    relative_error: dict | None
    convergence_time: float | None
    residual: dict
    diagnostics: dict
    files: dict = field(default_factory=dict)
    trajectory: object = None

    def to_dict(self) -> dict:
        d = {k: v for k, v in dataclasses.asdict(self).items() if k != "trajectory"}
        d["schema_version"] = SCHEMA_VERSION
        return d

    def to_json(self) -> str:
        return json.dumps(_jsonable(self.to_dict()), indent=2, sort_keys=True)


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def _context(cfg, exc):
    msg = f"model={cfg.model.id} run={cfg.name}: {exc}"
    if isinstance(exc, DivergenceError):
        return DivergenceError(msg, exc.snapshot)
    return type(exc)(msg)


def run(cfg: RunConfig, out=None) -> RunReport:
    """Execute one run; ``out`` (or ``cfg.out``) enables file output."""
    validate(cfg)
    out = out if out is not None else cfg.out
    try:
        return _run(cfg, out)
    except (DomainError, ConfigError, ExcitationError, DivergenceError) as exc:
        raise _context(cfg, exc) from exc


def synthesize_signals(cfg: RunConfig):
    """``(u, y, u_dot, params)`` for synthesis or replay."""
    if cfg.replay is not None:
        u, y = load_replay(cfg)
        params = model_params(cfg.model.id, cfg.model.params) if cfg.model.params else None
        return u, y, None, params
    spec = build_signal(cfg.signal, cfg.duration)
    u = signals.generate_signal(spec, cfg.dt)
    params = model_params(cfg.model.id, cfg.model.params)
    synth_model = "m1" if cfg.model.id == "appendix_a" else cfg.model.id
    rng = np.random.default_rng(cfg.seed)
    y = models.synthesize(synth_model, params, u, cfg.noise_std, rng=rng)
    u_dot = signals.generate_derivative(spec, cfg.dt)
    return u, y, u_dot, params


def _run(cfg: RunConfig, out):
    mid = cfg.model.id
    u, y, u_dot, params = synthesize_signals(cfg)
    if mid == "m1" and cfg.pipeline.derivative == "exact" and u_dot is None:
        raise ConfigError("exact derivative mode is unavailable for replayed data")
    stream = regressors.build_stream(make_pipeline(cfg), u, y, u_dot if mid == "m1" else None)
    pmap = param_map(mid)
    E_oc = _E_oc(cfg) if mid in ("m2", "m3") else None

    traj = None
    if cfg.estimator.kind != "none":
        est = make_estimator(cfg, stream)
        traj = estimators.run(est, stream)
        eta_final = traj.final
    else:
        eta_final = np.full(pmap.q, np.nan)

    final = physical(mid, eta_final, u.samples[-1], y.samples[-1], E_oc) if traj is not None else {}
    truth_eta = eta_truth(mid, params, _omega(cfg)) if params is not None else None
    truth = rel = conv = None
    if params is not None:
        truth = {k: float(v) for k, v in (cfg.model.params or {}).items()}
        if mid == "appendix_a" and _omega(cfg) is not None:
            truth["theta6"] = params.theta3 * _omega(cfg) ** 2
        rel = {k: abs(final[k] - truth[k]) / abs(truth[k]) for k in final
               if k in truth and truth[k] != 0 and k != "E_oc"} if traj is not None else None
        if traj is not None and truth_eta is not None:
            conv = convergence_time(traj.t, traj.eta, truth_eta)

    transient = 5.0 / cfg.pipeline.lam if mid in ("m1", "m3", "appendix_a") else 0.0
    tail = stream.window(stream.t[0] + transient)
    residual = {}
    if np.all(np.isfinite(eta_final)):
        r = tail.residual(pmap(eta_final))
        scale = float(np.sqrt(np.mean(tail.Y**2))) or 1.0
        residual = {"rms": float(np.sqrt(np.mean(r**2))), "max": float(np.max(np.abs(r))),
                    "relative_rms": float(np.sqrt(np.mean(r**2))) / scale}

    diag, series = run_diagnostics(cfg, stream, pmap)
    report = RunReport(cfg.name, mid, cfg.estimator.kind, final, list(map(float, eta_final)), truth,
                       rel, conv, residual, diag, {}, traj)
    if out:
        report.files = write_outputs(Path(out), cfg, u, y, stream, traj, series, final, params, report)
    return report


def run_diagnostics(cfg: RunConfig, stream, pmap):
    dc, diag, series = cfg.diagnostics, {}, {}
    if dc.excitation:
        t_c = dc.t_c if dc.t_c is not None else stream.t[-1] - stream.t[0]
        diag["excitation"] = diagnostics.excitation_ie(stream, t_c).to_dict()
        if dc.pe_window is not None:
            pe = diagnostics.excitation_pe(stream, dc.pe_window)
            diag["pe"] = pe.to_dict()
            series["pe"] = pe
    if dc.wronskian and stream.p <= 5:
        ws = diagnostics.wronskian_determinant(stream, stride=dc.wronskian_stride,
                                               transient_end=5.0 / cfg.pipeline.lam)
        _, dn_after = ws.after(5.0 / cfg.pipeline.lam)
        diag["wronskian"] = {
            "transient_peak": ws.transient_peak,
            "max_after_transient": float(dn_after.max()) if dn_after.size else None,
            "ratio": float(dn_after.max() / ws.transient_peak) if dn_after.size and ws.transient_peak > 0 else None,
        }
        series["wronskian"] = ws
    if dc.monotonizability and pmap.p > pmap.q:
        rng = np.random.default_rng(cfg.seed)
        nz = (1,) if pmap is maps.G_MAP else (1, 3)
        pts = maps.sample_box(pmap.q, -10, 10, 1000, rng, nonzero=nz)
        diag["monotonizability"] = json.loads(maps.check_monotonizability(pmap, pts).to_json())
    return diag, series


# --------------------------------------------------------------------------- #
# outputs
# --------------------------------------------------------------------------- #


def _curve_model(mid):
    return "m1" if mid == "appendix_a" else mid


def estimated_curve(model_id, final: dict, currents):
    mid = _curve_model(model_id)
    try:
        if mid == "m1":
            p = models.ThetaFull(*(final[k] for k in PARAM_KEYS["m1"]))
        else:
            p = model_params(mid, final)
        return np.asarray(models.evaluate(mid, p, currents), dtype=float)
    except (KeyError, TypeError, ValueError):
        return np.full(np.shape(currents), np.nan)


def write_outputs(out: Path, cfg, u, y, stream, traj, series, final, params, report):
    out.mkdir(parents=True, exist_ok=True)
    files = {}

    def put(key, name, fn):
        fn(out / name)
        files[key] = name

    put("signals", "signals.csv",
        lambda p: signals.write_columns(p, ["t", "i_fc", "v_fc"], [u.times, u.samples, y.samples]))
    put("regressor", "regressor.csv", stream.to_csv)
    if traj is not None:
        q = traj.eta.shape[1]
        put("estimates", "estimates.csv", lambda p: signals.write_columns(
            p, ["t"] + [f"eta_{k + 1}" for k in range(q)], [traj.t] + [traj.eta[:, k] for k in range(q)]))
        if traj.Delta is not None:
            pdim = traj.W.shape[1]
            put("lsd", "lsd.csv", lambda p: signals.write_columns(
                p, ["t", "Delta"] + [f"W_{k + 1}" for k in range(pdim)],
                [traj.t, traj.Delta] + [traj.W[:, k] for k in range(pdim)]))
    lo = float(np.min(u.samples)) if cfg.signal is None else 1.0
    hi = max(float(np.max(u.samples)), 30.0)
    grid = np.linspace(max(lo, 1e-3), hi, 300)
    v_est = estimated_curve(cfg.model.id, final, grid)
    cols, hdr = [grid, v_est], ["i", "v_estimated"]
    if params is not None:
        cols.append(np.asarray(models.evaluate(_curve_model(cfg.model.id), params, grid), dtype=float))
        hdr.append("v_true")
    put("curve", "curve.csv", lambda p: signals.write_columns(p, hdr, cols))
    if "wronskian" in series:
        put("wronskian", "wronskian.csv", series["wronskian"].to_csv)
    if "pe" in series:
        put("pe", "pe.csv", series["pe"].to_csv)
    put("gnuplot", "plots.gp", lambda p: p.write_text(gnuplot_script(files, report)))
    files["report"] = "report.json"
    report.files = files
    (out / "report.json").write_text(report.to_json() + "\n")
    return files


def gnuplot_script(files: dict, report) -> str:
    lines = ["set datafile separator ','", "set key autotitle columnhead", "set grid", ""]
    if "estimates" in files:
        q = len(report.final_eta)
        plots = ", ".join(f"'{files['estimates']}' using 1:{k + 2} with lines" for k in range(q))
        lines += ["set terminal pngcairo size 900,600", "set output 'estimates.png'",
                  "set xlabel 't [s]'", f"plot {plots}", ""]
    if "curve" in files:
        extra = ", '' using 1:3 with lines" if report.truth else ""
        lines += ["set output 'curve.png'", "set xlabel 'i [A]'", "set ylabel 'v [V]'",
                  f"plot '{files['curve']}' using 1:2 with lines{extra}", "set ylabel ''", ""]
    if "wronskian" in files:
        lines += ["set output 'wronskian.png'", "set logscale y", "set xlabel 't [s]'",
                  f"plot '{files['wronskian']}' using 1:(abs($3)) with lines", "unset logscale y", ""]
    if "pe" in files:
        lines += ["set output 'excitation.png'", "set xlabel 'window start [s]'",
                  f"plot '{files['pe']}' using 1:2 with lines", ""]
    return "\n".join(lines)


# --------------------------------------------------------------------------- #
# batches
# --------------------------------------------------------------------------- #


def _run_quiet(cfg: RunConfig) -> dict:
    r = run(cfg, out=None)
    return {"seed": cfg.seed, "final": r.final, "relative_error": r.relative_error,
            "convergence_time": r.convergence_time}


def run_many(configs, jobs=1) -> list[dict]:
    """Run independent configurations, optionally in a process pool; order is preserved."""
    configs = list(configs)
    if jobs and jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_run_quiet, configs))
    return [_run_quiet(c) for c in configs]


@dataclass
class MonteCarloResult:
    results: list
    max_relative_error: dict

    @property
    def worst(self) -> float:
        return max(self.max_relative_error.values())

    def to_dict(self):
        return _jsonable({"max_relative_error": self.max_relative_error, "runs": self.results})


def monte_carlo(cfg: RunConfig, seeds, jobs=1) -> MonteCarloResult:
    cfgs = []
    for s in seeds:
        c = copy.deepcopy(cfg)
        c.seed = int(s)
        c.out = None
        cfgs.append(c)
    res = run_many(cfgs, jobs)
    keys = res[0]["relative_error"].keys() if res and res[0]["relative_error"] else []
    worst = {k: max(r["relative_error"][k] for r in res) for k in keys}
    return MonteCarloResult(res, worst)


def replay(csv_path, cfg: RunConfig, out=None) -> RunReport:
    c = copy.deepcopy(cfg)
    keep = c.replay if c.replay is not None else ReplayConfig()
    c.replay = ReplayConfig(str(csv_path), keep.prefilter, keep.cutoff)
    c.signal = None
    return run(c, out)


# --------------------------------------------------------------------------- #
# static fits and curve comparison
# --------------------------------------------------------------------------- #


DEFAULT_INTERVALS = ((1.0, 10.0), (10.0, 20.0), (20.0, 30.0))


def fit_curve(model_id: str, i, v, E_oc=None, window=None) -> dict:
    """Batch least-squares fit of a static model to samples of a curve.

    M2 and M3 are fitted in their log-linear forms, which need ``E_oc``.
    ``window`` restricts the fit to currents inside ``[lo, hi]``.
    """
    i = np.asarray(i, dtype=float)
    v = np.asarray(v, dtype=float)
    if window is not None:
        m = (i >= window[0]) & (i <= window[1])
        i, v = i[m], v[m]
    if i.size < 3:
        raise ExcitationError("too few points to fit")
    if model_id in ("m2", "m3"):
        if E_oc is None:
            raise ConfigError(f"{model_id} fit needs E_oc")
        gap = E_oc - v
        if np.any(gap <= 0):
            raise DomainError("E_oc dominance violated")
        reg = i if model_id == "m2" else np.log(models._positive(i, "power domain"))
        samples = regressors.RegressorStream(np.arange(i.size, dtype=float), np.log(gap),
                                             np.c_[np.ones_like(i), reg])
        w = estimators.batch_ls(samples).w
        return {"E_oc": float(E_oc), "a": float(math.exp(w[0])), "b": float(w[1])}
    if model_id == "m4":
        phi = np.c_[np.ones_like(i), np.log(models._positive(i)), i]
        w = estimators.batch_ls(regressors.RegressorStream(np.arange(i.size, dtype=float), v, phi)).w
        return {"theta6": float(w[0]), "theta1": float(w[1]), "theta2": float(w[2])}
    raise ConfigError(f"no static fit for model {model_id!r}")


@dataclass
class CurveTable:
    intervals: list
    max_abs: dict          # model -> list per interval (last entry: full range)
    max_rel: dict

    def best(self, k=-1) -> str:
        return min(self.max_abs, key=lambda m: self.max_abs[m][k])

    def to_text(self) -> str:
        labels = [f"[{lo:g},{hi:g}]" for lo, hi in self.intervals] + ["full"]
        w = max(12, *(len(s) + 2 for s in labels))
        head = "model".ljust(8) + "".join(s.rjust(w) for s in labels)
        rows = [head]
        for m, errs in self.max_abs.items():
            rows.append(m.ljust(8) + "".join(f"{e:{w}.4f}" for e in errs))
        return "\n".join(rows)

    def to_dict(self):
        return _jsonable({"intervals": [list(x) for x in self.intervals],
                          "max_abs_error": self.max_abs, "max_rel_error": self.max_rel})


def compare_curves(true_curve, estimated: dict, intervals=DEFAULT_INTERVALS) -> CurveTable:
    """Per-interval maximum absolute (and relative) error of each curve against the truth.

    ``true_curve`` is ``(i, v)``; ``estimated`` maps a name to either a voltage
    array on the same grid or an ``(i, v)`` pair.
    """
    i, v = (np.asarray(x, dtype=float) for x in true_curve)
    if i.shape != v.shape:
        raise ConfigError("true curve: current and voltage differ in length")
    full = (float(i.min()), float(i.max()))
    iv = [tuple(map(float, x)) for x in intervals]
    ab, rel = {}, {}
    for name, curve in estimated.items():
        if isinstance(curve, tuple):
            ci, cv = (np.asarray(x, dtype=float) for x in curve)
            if ci.shape != i.shape or not np.allclose(ci, i):
                raise ConfigError(f"{name}: current grid mismatch")
        else:
            cv = np.asarray(curve, dtype=float)
        if cv.shape != v.shape:
            raise ConfigError(f"{name}: current grid mismatch")
        e = np.abs(cv - v)
        ab[name], rel[name] = [], []
        for lo, hi in iv + [full]:
            m = (i >= lo - 1e-12) & (i <= hi + 1e-12)
            if not m.any():
                raise ConfigError(f"interval [{lo:g},{hi:g}] contains no grid points")
            ab[name].append(float(e[m].max()))
            rel[name].append(float((e[m] / np.abs(v[m])).max()))
    return CurveTable(iv, ab, rel)


def rank_curves(truth=models.REFERENCE_THETA, E_oc=42.0, span=(1.0, 30.0), fit_window=(10.0, 20.0),
                n=291, intervals=DEFAULT_INTERVALS):
    """Fit M2/M3/M4 to a sweep of the full model and tabulate their errors.

    The fits use the part of the sweep inside ``fit_window`` (the band a
    10-20 A load pulse explores); the errors are evaluated over ``span``.
    """
    i = np.linspace(span[0], span[1], n)
    v = models.eval_m1(truth, i)
    fits = {
        "m2": fit_curve("m2", i, v, E_oc, fit_window),
        "m3": fit_curve("m3", i, v, E_oc, fit_window),
        "m4": fit_curve("m4", i, v, None, fit_window),
    }
    curves = {m: estimated_curve(m, f, i) for m, f in fits.items()}
    return compare_curves((i, v), curves, intervals), fits
