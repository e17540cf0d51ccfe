"""Experiment configuration: TOML file -> Scenario + experiment list.

Layout::

    [scenario]                 # preset and/or explicit components
    preset = "reflected_ou"    # reflected_ou | scalar_ou
    preset_args = { dim = 1, rate = 1.0, sigma = 1.0 }
    gamma = 1.0                # any Scenario constant overrides the preset
    operator = { kind = "normal_cone", set = { kind = "halfspace", normal = [1.0], offset = 0.0 } }
    drift = { kind = "linear", matrix = [[-1.0]] }
    diffusion = { matrix = [[1.0]] }
    zeta = { kind = "constant", value = 1.0 }

    [output]
    dir = "out"

    [[experiment]]
    kind = "harnack"           # validate | couple | harnack | log_harnack
                               # girsanov | strong_feller | invariant
    x = [1.0]
    dist = 0.5                 # or y = [...]
    T = 1.0
    ...
    functions = [ { kind = "exp_linear", lam = [-1.0], sup = 1.0 } ]
    grid = { alpha = [1.5, 2.0], T = [0.5, 1.0] }   # cartesian product

Overrides ``a.b.c=VALUE`` address the same tree (list items by index) and
VALUE is read as a TOML value, falling back to a bare string.
"""

from __future__ import annotations

import copy
import itertools
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import scenario as sc_mod
from .errors import ConfigError
from .montecarlo import TestFunction
from .operators import ConvexSet, MonotoneOperator

EXPERIMENT_KINDS = ("validate", "couple", "harnack", "log_harnack", "girsanov", "strong_feller", "invariant")
PRESETS = {"reflected_ou": sc_mod.reflected_ou, "scalar_ou": sc_mod.scalar_ou}
CONSTANTS = ("gamma", "omega", "q", "r", "C_sigma", "lambda_embed", "name")


@dataclass
class Experiment:
    kind: str
    params: Dict[str, Any]
    label: str


@dataclass
class ExperimentConfig:
    raw: Dict[str, Any]
    scenario: sc_mod.Scenario
    experiments: List[Experiment]
    out_dir: Optional[str] = None
    metadata: Dict[str, Any] = field(default_factory=dict)


def parse_value(text: str):
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def apply_override(tree: Dict[str, Any], item: str) -> None:
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not KEY=VALUE")
    key, value = item.split("=", 1)
    parts = key.strip().split(".")
    node: Any = tree
    for i, p in enumerate(parts[:-1]):
        nxt = parts[i + 1]
        if isinstance(node, list):
            try:
                node = node[int(p)]
            except (ValueError, IndexError) as e:
                raise ConfigError(f"override {key!r}: bad list index {p!r}") from e
        else:
            if p not in node:
                node[p] = [] if nxt.isdigit() else {}
            node = node[p]
    last = parts[-1]
    if isinstance(node, list):
        try:
            node[int(last)] = parse_value(value.strip())
        except (ValueError, IndexError) as e:
            raise ConfigError(f"override {key!r}: bad list index {last!r}") from e
    else:
        node[last] = parse_value(value.strip())


def load_tree(path, overrides=()) -> Dict[str, Any]:
    try:
        with open(path, "rb") as fh:
            tree = tomllib.load(fh)
    except FileNotFoundError as e:
        raise ConfigError(f"config file {path} not found") from e
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"malformed config {path}: {e}") from e
    for item in overrides:
        apply_override(tree, item)
    return tree


def _vec(v, name):
    try:
        return np.atleast_1d(np.asarray(v, dtype=np.float64))
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{name} must be numeric") from e


def build_operator(spec: Dict[str, Any], dim: int) -> MonotoneOperator:
    kind = spec.get("kind")
    if kind == "zero":
        return MonotoneOperator.zero(int(spec.get("dim", dim)))
    if kind == "normal_cone":
        s = spec.get("set") or {}
        sk = s.get("kind")
        if sk == "halfspace":
            cs = ConvexSet.halfspace(_vec(s["normal"], "normal"), float(s.get("offset", 0.0)))
        elif sk == "box":
            cs = ConvexSet.box(_vec(s["lower"], "lower"), _vec(s["upper"], "upper"))
        elif sk == "ball":
            cs = ConvexSet.ball(_vec(s["center"], "center"), float(s["radius"]))
        else:
            raise ConfigError(f"unknown set kind {sk!r}")
        return MonotoneOperator.normal_cone(cs)
    if kind == "linear_psd":
        return MonotoneOperator.linear_psd(np.asarray(spec["matrix"], dtype=np.float64))
    if kind == "scaled_subgradient_abs":
        return MonotoneOperator.scaled_subgradient_abs(int(spec.get("dim", dim)), float(spec["weight"]))
    raise ConfigError(f"unknown operator kind {kind!r}")


def build_drift(spec: Dict[str, Any], dim: int) -> sc_mod.DriftSpec:
    kind = spec.get("kind")
    gc = spec.get("growth_constant")
    if kind == "linear":
        return sc_mod.DriftSpec.linear(np.asarray(spec["matrix"], dtype=np.float64), gc)
    if kind == "affine":
        return sc_mod.DriftSpec.affine(np.asarray(spec["matrix"], dtype=np.float64), _vec(spec["shift"], "shift"), gc)
    if kind == "power_dissipative":
        return sc_mod.DriftSpec.power_dissipative(int(spec.get("dim", dim)), float(spec["exponent"]),
                                                  float(spec["gain"]), gc)
    raise ConfigError(f"unknown drift kind {kind!r}")


def build_zeta(spec: Dict[str, Any]) -> sc_mod.ZetaSchedule:
    kind = spec.get("kind", "constant")
    if kind == "constant":
        return sc_mod.ZetaSchedule.constant(float(spec["value"]))
    if kind == "piecewise_constant":
        return sc_mod.ZetaSchedule.piecewise_constant(spec["breakpoints"], spec["values"])
    raise ConfigError(f"unknown zeta kind {kind!r}")


def build_scenario(block: Dict[str, Any]) -> sc_mod.Scenario:
    """Scenario from plain data. Structural problems raise InvalidScenario, not ConfigError."""
    block = dict(block)
    preset = block.pop("preset", None)
    args = block.pop("preset_args", {}) or {}
    kw: Dict[str, Any] = {}
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        try:
            base = PRESETS[preset](**args)
        except TypeError as e:
            raise ConfigError(f"bad preset_args for {preset}: {e}") from e
        kw = {k: getattr(base, k) for k in ("operator", "drift", "diffusion", "zeta") + CONSTANTS}
    dim = int(block.pop("dim", kw["operator"].dim if kw else 1))
    try:
        if "operator" in block:
            kw["operator"] = build_operator(block.pop("operator"), dim)
        if "drift" in block:
            kw["drift"] = build_drift(block.pop("drift"), dim)
        if "diffusion" in block:
            d = block.pop("diffusion")
            kw["diffusion"] = (sc_mod.DiffusionSpec(np.asarray(d["matrix"], dtype=np.float64)) if "matrix" in d
                               else sc_mod.DiffusionSpec.scalar(float(d["scalar"]), dim))
        if "zeta" in block:
            kw["zeta"] = build_zeta(block.pop("zeta"))
    except KeyError as e:
        raise ConfigError(f"scenario is missing field {e}") from e
    for k in CONSTANTS:
        if k in block:
            kw[k] = block.pop(k) if k == "name" else float(block.pop(k))
    if block:
        raise ConfigError(f"unknown scenario fields {sorted(block)}")
    missing = [k for k in ("operator", "drift", "diffusion", "gamma", "omega", "q") if k not in kw]
    if missing:
        raise ConfigError(f"scenario is missing {missing}")
    return sc_mod.Scenario(**kw)


def build_function(spec: Dict[str, Any]) -> TestFunction:
    kind = spec.get("kind")
    try:
        if kind == "exp_linear":
            return TestFunction.exp_linear(spec["lam"], float(spec.get("shift", 0.0)), spec.get("sup"))
        if kind in ("smooth_indicator", "shifted_indicator_smooth"):
            return TestFunction.shifted_indicator_smooth(spec["center"], float(spec["radius"]), float(spec["width"]))
        if kind == "tanh":
            lam = _vec(spec["lam"], "lam")
            off = float(spec.get("offset", 2.0))
            return TestFunction.bounded_lipschitz(
                lambda x: off + np.tanh(x @ lam), sup=abs(off) + 1.0, inf=off - 1.0,
                lipschitz=float(np.linalg.norm(lam)),
                name=f"tanh({','.join(f'{v:g}' for v in lam)})+{off:g}")
        if kind == "constant":
            return TestFunction.constant(float(spec.get("value", 1.0)))
    except KeyError as e:
        raise ConfigError(f"test function {kind!r} is missing {e}") from e
    raise ConfigError(f"unknown test function kind {kind!r}")


def _expand(exp: Dict[str, Any], index: int) -> List[Experiment]:
    exp = copy.deepcopy(exp)
    kind = exp.pop("kind", None)
    if kind not in EXPERIMENT_KINDS:
        raise ConfigError(f"experiment {index}: unknown kind {kind!r}; choose from {EXPERIMENT_KINDS}")
    label = str(exp.pop("id", f"{index:02d}_{kind}"))
    grid = exp.pop("grid", {}) or {}
    keys = sorted(grid)
    out = []
    for combo in itertools.product(*(grid[k] if isinstance(grid[k], list) else [grid[k]] for k in keys)):
        p = dict(exp)
        p.update(zip(keys, combo))
        out.append(p)
    return [Experiment(kind, p, label) for p in out]


def group_experiments(tree: Dict[str, Any]) -> List[List[Experiment]]:
    raw = tree.get("experiment", [])
    if not isinstance(raw, list):
        raise ConfigError("'experiment' must be an array of tables")
    return [_expand(e, i) for i, e in enumerate(raw)]


def resolve_points(params: Dict[str, Any], dim: int):
    """``(x, y)`` from ``x`` plus either ``y`` or ``dist`` along ``direction`` (default e_1)."""
    if "x" not in params:
        raise ConfigError("experiment needs x")
    x = _vec(params["x"], "x")
    if "y" in params:
        y = _vec(params["y"], "y")
    elif "dist" in params:
        u = _vec(params.get("direction", [1.0] + [0.0] * (dim - 1)), "direction")
        nu = float(np.linalg.norm(u))
        if nu == 0 or not math.isfinite(nu):
            raise ConfigError("direction must be a nonzero vector")
        y = x + float(params["dist"]) * u / nu
    else:
        y = x.copy()
    return x, y


def functions_of(params: Dict[str, Any]) -> List[TestFunction]:
    specs = params.get("functions")
    if specs is None:
        specs = [params["f"]] if "f" in params else []
    if isinstance(specs, dict):
        specs = [specs]
    return [build_function(s) for s in specs]
