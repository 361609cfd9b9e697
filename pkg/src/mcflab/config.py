"""Experiment configuration files.

Grammar: INI-style text read with :mod:`configparser` (keys are case
sensitive, ``#`` and ``;`` start comments, lists are comma separated)::

    [experiment]
    kind = exact            ; exact | profile | sharpness | sobolev | moser | rescale
    seed = 0
    output_dir = runs/exact
    plots = true

    [parameters]
    n = 3
    c = 1
    H0 = 3

    [tolerances]
    ode_rel_err = 1e-8

A relative ``output_dir`` is taken relative to the working directory.
Every key is checked against the schema of its kind before anything runs;
all violations are collected into one :class:`~mcflab.errors.ConfigError`.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable

from .errors import ConfigError

KINDS = ("exact", "profile", "sharpness", "sobolev", "moser", "rescale")
REQUIRED = object()


@dataclass(frozen=True)
class Param:
    type: str
    default: Any = REQUIRED
    check: Callable[[Any], bool] | None = None
    rule: str = ""
    choices: tuple | None = None


def _pos(v):
    return v > 0


def _dim(v):
    return v >= 3


def _dims(v):
    return len(v) > 0 and all(d >= 3 for d in v)


def _curv(v):
    return v in (-1, 0, 1)


def _curvs(v):
    return len(v) > 0 and all(c in (-1, 0, 1) for c in v)


_N = Param("int", REQUIRED, _dim, "integer >= 3")
_C = Param("int", 0, _curv, "one of -1, 0, 1")
_H0 = Param("float", None, _pos, "positive")
_R0 = Param("float", None, _pos, "positive")

SCHEMAS: dict[str, dict[str, Param]] = {
    "exact": {
        "n": _N, "c": _C, "H0": _H0, "r0": _R0,
        "H_stop": Param("float", 100.0, _pos, "positive"),
        "samples": Param("int", 129, lambda v: v >= 3, "integer >= 3"),
    },
    "profile": {
        "n": _N,
        "shape": Param("str", REQUIRED, choices=("sphere", "ellipsoid", "cylinder", "dumbbell", "file")),
        "boundary": Param("str", "closed", choices=("closed", "reflect", "cap-reflect")),
        "m": Param("int", 64, lambda v: v >= 16, "integer >= 16"),
        "radius": Param("float", 1.0, _pos, "positive"),
        "a": Param("float", 1.0, _pos, "positive"),
        "b": Param("float", 0.5, _pos, "positive"),
        "length": Param("float", 1.0, _pos, "positive"),
        "bulb_radius": Param("float", 1.0, _pos, "positive"),
        "neck_radius": Param("float", 0.35, _pos, "positive"),
        "softness": Param("float", 1.5, _pos, "positive"),
        "file": Param("str", ""),
        "t_end": Param("float", math.inf, _pos, "positive"),
        "stop_H": Param("float", math.inf, _pos, "positive"),
        "max_steps": Param("int", 1_000_000, _pos, "positive integer"),
        "blowup_threshold": Param("float", None, _pos, "positive"),
        "safety": Param("float", 0.5, lambda v: 0 < v <= 1, "in (0, 1]"),
        "expect_singularity": Param("bool", False),
        "expected_location": Param("float", None),
        "growth_ratio": Param("float", 10.0, _pos, "positive"),
        "snapshots": Param("int", 6, lambda v: v >= 1, "integer >= 1"),
    },
    "sharpness": {
        "n": Param("int_list", (3,), _dims, "integers >= 3"),
        "c": Param("int_list", (0,), _curvs, "values in {-1, 0, 1}"),
        "alpha": Param("float_list", None, lambda v: len(v) > 0 and all(a >= 1 for a in v), "values >= 1"),
        "alpha_offsets": Param("int_list", (0, 1, 2, 3), lambda v: len(v) > 0 and all(n + 3 >= 1 for n in v),
                               "alpha = n + offset must stay >= 1"),
        "H0_sphere": Param("float", 3.0, _pos, "positive"),
        "H0_hyperbolic_factor": Param("float", 2.0, lambda v: v > 1, "greater than 1 (H0 = factor * n)"),
        "levels": Param("int", 8, lambda v: v >= 3, "integer >= 3"),
    },
    "sobolev": {
        "trials": Param("int", 500, _pos, "positive integer"),
        "m": Param("int", 64, lambda v: v >= 16, "integer >= 16"),
        "dims": Param("int_list", (3, 4, 5), _dims, "integers >= 3"),
    },
    "moser": {
        "n": _N, "c": _C, "H0": _H0, "r0": _R0,
        "T0_fraction": Param("float", 0.5, lambda v: 0 < v < 1, "in (0, 1)"),
        "p": Param("float", None, lambda v: v >= 1, ">= 1"),
        "levels": Param("int", 0, lambda v: v >= 0, "integer >= 0 (0 means 60 n)"),
        "K_lower": Param("float", -1.0, lambda v: v <= 0, "non-positive"),
    },
    "rescale": {
        "n": _N, "c": _C, "H0": _H0, "r0": _R0,
        "count": Param("int", 8, lambda v: v >= 2, "integer >= 2"),
        "depth": Param("float", 8.0, _pos, "positive (decades of T - t covered)"),
        "alpha": Param("float", None, lambda v: v >= 1, ">= 1"),
    },
}

DEFAULT_TOLERANCES: dict[str, dict[str, float]] = {
    "exact": {"T_rel_err": 1e-12, "H0_rel_err": 1e-12, "ode_rel_err": 1e-8},
    "profile": {"oracle_rel_err": 1e-6, "area_increase": 1e-12, "location_abs": 0.05},
    "sharpness": {"exponent_abs": 0.05},
    "sobolev": {"C_rel_err": 1e-12},
    "moser": {"partial_sum_abs": 1e-12, "cross_rel_err": 1e-8},
    "rescale": {"normalization_abs": 1e-12, "vanishing_ratio": 1e-2},
}


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    parameters: dict
    seed: int = 0
    output_dir: Path = Path("runs")
    tolerances: dict = field(default_factory=dict)
    plots: bool = True

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "seed": self.seed,
            "output_dir": str(self.output_dir),
            "plots": self.plots,
            "parameters": {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.parameters.items()},
            "tolerances": dict(self.tolerances),
        }


_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _convert(raw: str, typ: str):
    raw = raw.strip()
    if typ == "int":
        return int(raw)
    if typ == "float":
        return float(raw)
    if typ == "bool":
        low = raw.lower()
        if low in _TRUE:
            return True
        if low in _FALSE:
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if typ == "int_list":
        return tuple(int(p) for p in raw.split(",") if p.strip())
    if typ == "float_list":
        return tuple(float(p) for p in raw.split(",") if p.strip())
    return raw


def _kind_rules(kind: str, p: dict, problems: list[str]):
    if kind in ("exact", "moser", "rescale"):
        c = p.get("c")
        if c == 0 and p.get("H0") is not None and p.get("r0") is not None:
            problems.append("parameters: give either H0 or r0 for c = 0, not both")
        if c in (-1, 1) and p.get("H0") is None:
            problems.append(f"parameters.H0: required when c = {c}")
        if c in (-1, 1) and p.get("r0") is not None:
            problems.append("parameters.r0: only used when c = 0 (use H0)")
        if c == -1 and p.get("H0") is not None and p.get("n") is not None and not p["H0"] > p["n"]:
            problems.append("parameters.H0: hyperbolic ambient needs H0^2 > n^2")
    if kind == "profile":
        if p.get("shape") == "file" and not p.get("file"):
            problems.append("parameters.file: required when shape = file")
        if p.get("shape") in ("sphere", "ellipsoid", "dumbbell") and p.get("boundary") not in ("closed", "cap-reflect"):
            problems.append("parameters.boundary: closed shapes need closed or cap-reflect")
        if p.get("shape") in ("ellipsoid", "dumbbell") and p.get("boundary") != "closed":
            problems.append("parameters.boundary: ellipsoid and dumbbell profiles are closed")
        if p.get("shape") == "cylinder" and p.get("boundary") != "reflect":
            problems.append("parameters.boundary: cylinder profiles need reflect")
        if p.get("shape") == "dumbbell" and p.get("neck_radius") is not None and p.get("bulb_radius") is not None \
                and not p["neck_radius"] < p["bulb_radius"]:
            problems.append("parameters.neck_radius: must be below bulb_radius")
        if not (math.isfinite(p.get("t_end", math.inf)) or math.isfinite(p.get("stop_H", math.inf))
                or p.get("boundary") in ("closed", "cap-reflect")):
            problems.append("parameters: open profiles need a finite t_end or stop_H")


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    """Parse and validate configuration text; raises :class:`ConfigError` listing every problem."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    cp.optionxform = str
    problems: list[str] = []
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError([f"{source}: {exc}"]) from None
    for sec in cp.sections():
        if sec not in ("experiment", "parameters", "tolerances"):
            problems.append(f"[{sec}]: unknown section")
    exp = cp["experiment"] if cp.has_section("experiment") else {}
    kind = exp.get("kind", "").strip() if exp else ""
    if kind not in KINDS:
        problems.append(f"experiment.kind: must be one of {', '.join(KINDS)} (got {kind!r})")
        raise ConfigError(problems)
    seed, plots, out = 0, True, Path("runs") / kind
    for key, raw in exp.items():
        try:
            if key == "seed":
                seed = int(raw)
            elif key == "plots":
                plots = _convert(raw, "bool")
            elif key == "output_dir":
                out = Path(raw.strip())
            elif key != "kind":
                problems.append(f"experiment.{key}: unknown key")
        except ValueError as exc:
            problems.append(f"experiment.{key}: {exc}")
    schema = SCHEMAS[kind]
    given = dict(cp["parameters"]) if cp.has_section("parameters") else {}
    params: dict = {}
    for key in given:
        if key not in schema:
            problems.append(f"parameters.{key}: unknown key for kind {kind}")
    for key, spec in schema.items():
        if key not in given:
            if spec.default is REQUIRED:
                problems.append(f"parameters.{key}: required")
            else:
                params[key] = spec.default
            continue
        try:
            val = _convert(given[key], spec.type)
        except ValueError:
            problems.append(f"parameters.{key}: expected {spec.type}, got {given[key]!r}")
            continue
        if spec.choices is not None and val not in spec.choices:
            problems.append(f"parameters.{key}: must be one of {', '.join(spec.choices)} (got {val!r})")
        elif spec.check is not None and not spec.check(val):
            problems.append(f"parameters.{key}: must be {spec.rule} (got {given[key].strip()!r})")
        params[key] = val
    _kind_rules(kind, params, problems)
    tol = dict(DEFAULT_TOLERANCES[kind])
    if cp.has_section("tolerances"):
        for key, raw in cp["tolerances"].items():
            if key not in tol:
                problems.append(f"tolerances.{key}: unknown tolerance for kind {kind}")
                continue
            try:
                v = float(raw)
            except ValueError:
                problems.append(f"tolerances.{key}: expected float, got {raw!r}")
                continue
            if not v > 0:
                problems.append(f"tolerances.{key}: must be positive")
            tol[key] = v
    if problems:
        raise ConfigError(problems)
    return ExperimentConfig(kind=kind, parameters=params, seed=seed, output_dir=out,
                            tolerances=tol, plots=plots)


def load_config(path) -> ExperimentConfig:
    """Read a config file; a relative ``file`` parameter resolves against the file's directory."""
    path = Path(path)
    cfg = parse_config(path.read_text(), source=str(path))
    prof = cfg.parameters.get("file")
    if prof:
        f = Path(prof)
        if not f.is_absolute():
            f = path.parent / f
        if not f.is_file():
            raise ConfigError([f"parameters.file: no such file {str(f)!r}"])
        cfg = replace(cfg, parameters={**cfg.parameters, "file": str(f)})
    return cfg
