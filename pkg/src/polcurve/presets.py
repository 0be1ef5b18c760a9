"""Named run configurations with the estimator gains used for the reference
simulations and bench tests.

The ``*-sim`` presets synthesize a 10 A <-> 20 A, 2 Hz pulse on a 42 V stack
described by the reduced model being estimated.  The ``*-exp`` presets use the
bench gains and a 3.3 s pulse period on the curves fitted to the bench data
(the bench traces themselves are not available, so these are self-closure
runs; replay a measured CSV with ``--set replay.path=...`` instead).

The ideal 10/20 A square wave takes only two current values, which leaves the
three-column M4 regressor rank deficient; the M4 presets give the edges a
100 ms slew.
"""

from __future__ import annotations

import copy

from . import models

PULSE_SIM = {"kind": "pulse", "low": 10.0, "high": 20.0, "frequency": 2.0}
PULSE_EXP = {"kind": "pulse", "low": 10.0, "high": 20.0, "frequency": 1 / 3.3}
M4_RISE = 0.1


def _ab(p):
    return {"E_oc": p.E_oc, "a": p.a, "b": p.b}


def _m4(p):
    return {"theta1": p.theta1, "theta2": p.theta2, "theta6": p.theta6}


_TH = models.REFERENCE_THETA
_M1 = {f"theta{k}": v for k, v in zip(range(1, 6), _TH.as_array().tolist())}

PRESETS = {
    "m2-sim": {
        "description": "M2 self-closure, LSD, gamma0=24, f0=1e-5, Gamma=diag(3e4,3e4)",
        "config": {
            "name": "m2-sim", "dt": 1e-3, "duration": 10.0,
            "model": {"id": "m2", "params": _ab(models.SIM_EST_M2)},
            "signal": dict(PULSE_SIM),
            "estimator": {"kind": "lsd", "gamma0": 24.0, "f0": 1e-5, "Gamma": [3e4, 3e4]},
        },
    },
    "m3-sim": {
        "description": "M3 self-closure, lambda=80, LSD, gamma0=24, f0=1e-5, Gamma=600",
        "config": {
            "name": "m3-sim", "dt": 1e-3, "duration": 10.0,
            "model": {"id": "m3", "params": _ab(models.SIM_EST_M3)},
            "signal": dict(PULSE_SIM),
            "pipeline": {"lam": 80.0},
            "estimator": {"kind": "lsd", "gamma0": 24.0, "f0": 1e-5, "Gamma": 600.0},
        },
    },
    "m4-sim": {
        "description": "M4 self-closure, LSD, gamma0=24, f0=1e-6, Gamma=30 I, 100 ms pulse edges",
        "config": {
            "name": "m4-sim", "dt": 1e-3, "duration": 10.0,
            "model": {"id": "m4", "params": _m4(models.SIM_EST_M4)},
            "signal": dict(PULSE_SIM, rise_time=M4_RISE),
            "estimator": {"kind": "lsd", "gamma0": 24.0, "f0": 1e-6, "Gamma": 30.0},
        },
    },
    "m4-sim-gradient": {
        "description": "M4 self-closure, gradient with whitened gain 5 (R^-1 over 1 s), 100 ms edges",
        "config": {
            "name": "m4-sim-gradient", "dt": 1e-3, "duration": 20.0,
            "model": {"id": "m4", "params": _m4(models.SIM_EST_M4)},
            "signal": dict(PULSE_SIM, rise_time=M4_RISE),
            "estimator": {"kind": "gradient", "whitening": 5.0, "whitening_window": 1.0},
        },
    },
    "m2-exp": {
        "description": "M2 on the bench-fitted curve, LSD, f0=0.1, gamma0=5, Gamma=diag(30,30)",
        "config": {
            "name": "m2-exp", "dt": 5e-3, "duration": 40.0,
            "model": {"id": "m2", "params": _ab(models.EXP_FIT_M2)},
            "signal": dict(PULSE_EXP),
            "estimator": {"kind": "lsd", "gamma0": 5.0, "f0": 0.1, "Gamma": [30.0, 30.0]},
        },
    },
    "m3-exp": {
        "description": "M3 on the bench-fitted curve, LSD, f0=0.1, gamma0=2.5, Gamma=6",
        "config": {
            "name": "m3-exp", "dt": 5e-3, "duration": 40.0,
            "model": {"id": "m3", "params": _ab(models.EXP_FIT_M3)},
            "signal": dict(PULSE_EXP),
            "pipeline": {"lam": 80.0},
            "estimator": {"kind": "lsd", "gamma0": 2.5, "f0": 0.1, "Gamma": 6.0},
        },
    },
    "m4-exp": {
        "description": "M4 on the bench-fitted curve, LSD, f0=6e-3, gamma0=1.115, Gamma=0.5 I, 100 ms edges",
        "config": {
            "name": "m4-exp", "dt": 5e-3, "duration": 300.0,
            "model": {"id": "m4", "params": _m4(models.EXP_FIT_M4)},
            "signal": dict(PULSE_EXP, rise_time=M4_RISE),
            "estimator": {"kind": "lsd", "gamma0": 1.115, "f0": 6e-3, "Gamma": 0.5},
        },
    },
    "m1-lindep-test1": {
        "description": "Full model, 25+5 sin current: Wronskian and IE diagnostics, LSD attempt",
        "config": {
            "name": "m1-lindep-test1", "dt": 1e-3, "duration": 60.0,
            "model": {"id": "m1", "params": dict(_M1)},
            "signal": {"kind": "test1"},
            "pipeline": {"lam": 80.0, "derivative": "exact", "init": "zero"},
            "estimator": {"kind": "lsd", "gamma0": 24.0, "f0": 1e-5, "Gamma": 1.0},
            "diagnostics": {"wronskian": True},
        },
    },
    "m1-lindep-test2": {
        "description": "Full model, three-harmonic current: Wronskian and IE diagnostics, LSD attempt",
        "config": {
            "name": "m1-lindep-test2", "dt": 1e-3, "duration": 60.0,
            "model": {"id": "m1", "params": dict(_M1)},
            "signal": {"kind": "test2"},
            "pipeline": {"lam": 80.0, "derivative": "exact", "init": "zero"},
            "estimator": {"kind": "lsd", "gamma0": 24.0, "f0": 1e-5, "Gamma": 1.0},
            "diagnostics": {"wronskian": True},
        },
    },
}


def names() -> list[str]:
    return list(PRESETS)


def get(name: str) -> dict:
    """Deep copy of the preset's config mapping."""
    from .errors import ConfigError

    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; known: {', '.join(PRESETS)}")
    return copy.deepcopy(PRESETS[name]["config"])


def config(name: str, overrides=()):
    from .harness import apply_override, config_from_dict

    data = get(name)
    for item in overrides:
        apply_override(data, item)
    return config_from_dict(data)
