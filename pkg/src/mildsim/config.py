"""JSON run configuration: schema validation and object building.

Configs are plain JSON with nested sections.  Validation is strict:
unknown keys anywhere are errors, as are type mismatches, and every
problem found is reported at once with its dotted path.  Experiments
declare which sections they need; builders turn validated sections
into grids, models and initial states.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .coefficients import CoefficientModel, ModeFunction
from .grids import Grid, GridFunction

__all__ = [
    "ConfigError",
    "EXPERIMENTS",
    "load_config",
    "parse_config",
    "apply_override",
    "build_grid",
    "build_modes",
    "build_initial",
    "build_model",
]

EXPERIMENTS = (
    "simulate",
    "hjm",
    "coeff-check",
    "operator-tests",
    "lambda-study",
    "ito-check",
)


class ConfigError(Exception):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


_GRID_KEYS = {"x_max": float, "n_nodes": int, "alpha": float}
_MODE_KEYS = {"kind": str, "c": float, "cap": float, "decay": float, "table": list, "tail": float}
_INITIAL_KEYS = {"flat": float, "exp-decay": dict, "table": list, "tail": float}
_EXPDECAY_KEYS = {"base": float, "amp": float, "decay": float}
_MODEL_KEYS = {
    "modes": list,
    "drift": str,
    "drift_c": float,
    "alpha_correction": float,
    "alpha_in_drift": bool,
    "initial": dict,
}
_RUN_KEYS = {
    "dt": float,
    "t_final": float,
    "n_paths": int,
    "seed": int,
    "scheme": str,
    "snapshot_stride": int,
    "chunk_size": int,
    "stream_base": int,
    "blow_threshold": float,
    "lam": float,
    "c_const": float,
}
_CHECK_KEYS = {"n_samples": int, "seed": int, "tol": float, "expect_admissible": bool}
_LAMBDA_KEYS = {"lams": list, "n_seeds": int}
_ITO_KEYS = {"n": float, "dt_values": list, "t_final": float, "n_paths": int, "seed": int}
_OUTPUT_KEYS = {"dir": str}
_TOP_KEYS = {
    "experiment": str,
    "grid": dict,
    "model": dict,
    "run": dict,
    "check": dict,
    "lambda_study": dict,
    "ito": dict,
    "output": dict,
    "expect_verdict": str,
}

_REQUIRED_SECTIONS = {
    "simulate": ("grid", "model", "run"),
    "hjm": ("grid", "model", "run"),
    "coeff-check": ("grid", "model"),
    "operator-tests": ("grid",),
    "lambda-study": ("grid", "model", "run", "lambda_study"),
    "ito-check": ("grid", "model", "ito"),
}


def _type_ok(value, want) -> bool:
    if want is float:
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if want is int:
        return isinstance(value, int) and not isinstance(value, bool)
    return isinstance(value, want)


def _check_keys(section, allowed, where, problems) -> None:
    if not isinstance(section, dict):
        problems.append(f"{where}: expected an object")
        return
    for key, value in section.items():
        if key not in allowed:
            problems.append(f"{where}.{key}: unknown key")
        elif not _type_ok(value, allowed[key]):
            problems.append(f"{where}.{key}: expected {allowed[key].__name__}")


def parse_config(obj: dict, experiment: str | None = None) -> dict:
    """Validate a config object; returns it with the experiment filled in."""
    problems: list[str] = []
    if not isinstance(obj, dict):
        raise ConfigError(["top level: expected an object"])
    _check_keys(obj, _TOP_KEYS, "config", problems)
    exp = obj.get("experiment", experiment)
    if exp is None:
        problems.append("config.experiment: missing (and none given on the command line)")
    elif exp not in EXPERIMENTS:
        problems.append(f"config.experiment: unknown experiment {exp!r}")
    elif experiment is not None and exp != experiment:
        problems.append(
            f"config.experiment: config says {exp!r} but the command line says {experiment!r}"
        )
    for name, keys in (
        ("grid", _GRID_KEYS),
        ("model", _MODEL_KEYS),
        ("run", _RUN_KEYS),
        ("check", _CHECK_KEYS),
        ("lambda_study", _LAMBDA_KEYS),
        ("ito", _ITO_KEYS),
        ("output", _OUTPUT_KEYS),
    ):
        if name in obj:
            _check_keys(obj[name], keys, name, problems)
    if isinstance(obj.get("model"), dict):
        model = obj["model"]
        for i, m in enumerate(model.get("modes", [])):
            _check_keys(m, _MODE_KEYS, f"model.modes[{i}]", problems)
            if isinstance(m, dict) and "kind" not in m:
                problems.append(f"model.modes[{i}].kind: missing")
        if "initial" in model and isinstance(model["initial"], dict):
            init = model["initial"]
            _check_keys(init, _INITIAL_KEYS, "model.initial", problems)
            forms = [k for k in ("flat", "exp-decay", "table") if k in init]
            if len(forms) != 1:
                problems.append("model.initial: give exactly one of flat, exp-decay, table")
            if "exp-decay" in init:
                _check_keys(init["exp-decay"], _EXPDECAY_KEYS, "model.initial.exp-decay", problems)
    if exp in _REQUIRED_SECTIONS:
        for sec in _REQUIRED_SECTIONS[exp]:
            if sec not in obj:
                problems.append(f"config.{sec}: required by experiment {exp!r}")
    if problems:
        raise ConfigError(problems)
    out = dict(obj)
    out["experiment"] = exp
    return out


def load_config(path: str, experiment: str | None = None) -> dict:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as e:
        raise ConfigError([f"config file: {e}"])
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError([f"config file: invalid JSON ({e})"])
    return parse_config(obj, experiment)


def apply_override(obj: dict, dotted: str) -> None:
    """Apply one KEY.PATH=VALUE override in place; value parsed as JSON."""
    if "=" not in dotted:
        raise ConfigError([f"override {dotted!r}: expected KEY=VALUE"])
    path, _, raw = dotted.partition("=")
    keys = path.strip().split(".")
    if not all(keys):
        raise ConfigError([f"override {dotted!r}: empty key component"])
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    here = obj
    for k in keys[:-1]:
        nxt = here.setdefault(k, {})
        if not isinstance(nxt, dict):
            raise ConfigError([f"override {dotted!r}: {k} is not a section"])
        here = nxt
    here[keys[-1]] = value


def build_grid(cfg: dict) -> Grid:
    g = cfg["grid"]
    try:
        return Grid.uniform(float(g["x_max"]), int(g["n_nodes"]), float(g["alpha"]))
    except KeyError as e:
        raise ConfigError([f"grid.{e.args[0]}: missing"])
    except ValueError as e:
        raise ConfigError([f"grid: {e}"])


def build_modes(model_cfg: dict, grid: Grid) -> tuple:
    modes = []
    for i, m in enumerate(model_cfg.get("modes", [])):
        kw = dict(m)
        kind = kw.pop("kind")
        table = kw.pop("table", None)
        tail = kw.pop("tail", None)
        if table is not None:
            vals = np.asarray(table, dtype=np.float64)
            if vals.shape != grid.nodes.shape:
                raise ConfigError([f"model.modes[{i}].table: needs {grid.n} values"])
            kw["table"] = GridFunction(grid, vals, float(tail) if tail is not None else float(vals[-1]))
        try:
            modes.append(ModeFunction(kind=kind, **kw))
        except (ValueError, TypeError) as e:
            raise ConfigError([f"model.modes[{i}]: {e}"])
    return tuple(modes)


def build_initial(model_cfg: dict, grid: Grid) -> GridFunction:
    init = model_cfg.get("initial")
    if init is None:
        raise ConfigError(["model.initial: missing"])
    if "flat" in init:
        return GridFunction.constant(grid, float(init["flat"]))
    if "exp-decay" in init:
        d = init["exp-decay"]
        base = float(d.get("base", 0.0))
        amp = float(d.get("amp", 1.0))
        decay = float(d.get("decay", 1.0))
        vals = base + amp * np.exp(-decay * grid.nodes)
        return GridFunction(grid, vals, float(vals[-1]))
    vals = np.asarray(init["table"], dtype=np.float64)
    if vals.shape != grid.nodes.shape:
        raise ConfigError([f"model.initial.table: needs {grid.n} values"])
    tail = init.get("tail")
    return GridFunction(grid, vals, float(tail) if tail is not None else float(vals[-1]))


def build_model(cfg: dict, grid: Grid) -> CoefficientModel:
    m = cfg["model"]
    modes = build_modes(m, grid)
    drift = m.get("drift", "hjm" if cfg["experiment"] == "hjm" else "zero")
    alpha_corr = float(m.get("alpha_correction", 0.0))
    if cfg["experiment"] == "hjm" and m.get("alpha_in_drift", True):
        alpha_corr = grid.alpha
    try:
        return CoefficientModel(
            grid=grid,
            modes=modes,
            drift=drift,
            drift_c=float(m.get("drift_c", 0.0)),
            alpha_correction=alpha_corr,
        )
    except ValueError as e:
        raise ConfigError([f"model: {e}"])
