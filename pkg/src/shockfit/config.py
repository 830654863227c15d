"""Scenario configuration: YAML key-tree, schema validation, digest.

Grammar (every section optional unless noted; unknown keys are errors)::

    name: <text>                      # required
    kind: <scenario kind>             # required, see KINDS
    seed: <int>
    law:
      flux: burgers | cubic | linear | polynomial
      flux_params: {scale | speed | coefficients}
      source: zero | bistable | linear | polynomial
      source_params: {beta, center | coefficients}
      source_left:  {family, params}  # per-side override, flux is shared
      source_right: {family, params}
    state:   u_bar, u_minus, u_plus, u_middle, psi0, psi_s0
    perturbation:
      whole | left | middle | right:
        shape: none | constant | sech | gaussian | sine | tanh | xexp | step_exp | spline
        amplitude, width, center, knots, values
    numerics: dt, n_curves, t_final, amplification, x_span, store_every
    oracle:   enabled, dx, cfl, stride, x_span, dx_levels, compare_time
    checks:   see CHECK_KEYS
    toy:      alpha, beta, w0 (list), n_curves, x_span
    resolvent: n_problems, n_nodes, tol
    spectrum: lambdas (list of [re, im]), expected (list), phi, lambda_grid
    extension: n_samples, amplification_range, n_knots
    output:   dir, snapshots

String values expand ``${VAR}`` and ``${VAR:-default}`` from the environment.
"""

from __future__ import annotations

import copy
import hashlib
import logging
import math
import os
import re
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple, Union

import orjson
import yaml

from shockfit.constants import (
    DEFAULT_AMPLIFICATION,
    DEFAULT_CFL,
    DEFAULT_DT,
    DEFAULT_N_CURVES,
    RESOLVENT_NODES,
)
from shockfit.extension import SHAPES
from shockfit.model import FLUX_FAMILIES, SOURCE_FAMILIES

logger = logging.getLogger(__name__)

KINDS = frozenset({
    "constant_state",
    "riemann_shock",
    "shock_plus_small_shock",
    "toy_blowup",
    "resolvent_check",
    "spectrum_scan",
    "extension_check",
})

_ENV_PATTERN = re.compile(r"\$\{([A-Za-z_][A-Za-z0-9_]*)(?::-([^}]*))?\}")


class ConfigError(ValueError):
    """Raised for unreadable or invalid scenario configs."""


# ── Schema ────────────────────────────────────────────────────────────────────

class _Key:
    """Expected type, default and optional predicate of one config key."""

    def __init__(
        self,
        kind: str,
        default: Any = None,
        required: bool = False,
        choices: Optional[frozenset] = None,
        nonnegative: bool = False,
    ) -> None:
        self.kind = kind
        self.default = default
        self.required = required
        self.choices = choices
        self.nonnegative = nonnegative


_PERTURBATION = {
    "shape": _Key("str", "none", choices=SHAPES),
    "amplitude": _Key("number", 0.0, nonnegative=True),
    "width": _Key("number", 1.0),
    "center": _Key("number", 0.0),
    "knots": _Key("numbers", None),
    "values": _Key("numbers", None),
}

_SIDE_SOURCE = {
    "family": _Key("str", "zero", choices=SOURCE_FAMILIES),
    "params": _Key("mapping", {}),
}

CHECK_KEYS = {
    "fit_window": _Key("numbers", None),
    "rate_band": _Key("numbers", None),
    "gradient_rate_band": _Key("numbers", None),
    "rate_slack": _Key("number", None),
    "gradient_rate_slack": _Key("number", None),
    "sup_envelope": _Key("number", None),
    "tv_rate_max": _Key("number", None),
    "phase_rate_max": _Key("number", None),
    "lax_margin_min": _Key("number", None),
    "psi_shift": _Key("number", None),
    "psi_shift_tol": _Key("number", 1e-4),
    "merge_time": _Key("number", None),
    "merge_time_tol": _Key("number", 1e-3),
    "merge_oracle": _Key("bool", False),
    "merged_speed": _Key("bool", False),
    "blowup_tol": _Key("number", 1e-3),
    "oracle_l1_max": _Key("number", None),
    "oracle_order_min": _Key("number", None),
    "rh_residual": _Key("bool", True),
}

SCHEMA = {
    "name": _Key("str", required=True),
    "kind": _Key("str", required=True, choices=KINDS),
    "seed": _Key("int", 0),
    "law": {
        "flux": _Key("str", "burgers", choices=FLUX_FAMILIES),
        "flux_params": _Key("mapping", {}),
        "source": _Key("str", "zero", choices=SOURCE_FAMILIES),
        "source_params": _Key("mapping", {}),
        "source_left": dict(_SIDE_SOURCE, __optional__=True),
        "source_right": dict(_SIDE_SOURCE, __optional__=True),
    },
    "state": {
        "u_bar": _Key("number", None),
        "u_minus": _Key("number", None),
        "u_plus": _Key("number", None),
        "u_middle": _Key("number", None),
        "psi0": _Key("number", 0.0),
        "psi_s0": _Key("number", None),
    },
    "perturbation": {
        "whole": dict(_PERTURBATION),
        "left": dict(_PERTURBATION),
        "middle": dict(_PERTURBATION),
        "right": dict(_PERTURBATION),
    },
    "numerics": {
        "dt": _Key("number", DEFAULT_DT),
        "n_curves": _Key("int", DEFAULT_N_CURVES),
        "t_final": _Key("number", 5.0),
        "amplification": _Key("number", DEFAULT_AMPLIFICATION),
        "x_span": _Key("numbers", None),
        "store_every": _Key("int", None),
    },
    "oracle": {
        "enabled": _Key("bool", False),
        "dx": _Key("number", 0.01),
        "cfl": _Key("number", DEFAULT_CFL),
        "stride": _Key("int", 10),
        "x_span": _Key("numbers", None),
        "dx_levels": _Key("numbers", None),
        "compare_time": _Key("number", None),
    },
    "checks": CHECK_KEYS,
    "toy": {
        "alpha": _Key("number", 1.0),
        "beta": _Key("number", 1.0),
        "w0": _Key("numbers", [-2.0]),
        "n_curves": _Key("int", 129),
        "x_span": _Key("numbers", [-5.0, 5.0]),
    },
    "resolvent": {
        "n_problems": _Key("int", 100),
        "n_nodes": _Key("int", RESOLVENT_NODES),
        "tol": _Key("number", 1e-6),
    },
    "spectrum": {
        "lambdas": _Key("list", []),
        "expected": _Key("list", []),
        "phi": _Key("number", 1.0),
        "lambda_grid": _Key("str", None),
    },
    "extension": {
        "n_samples": _Key("int", 500),
        "amplification_range": _Key("numbers", [1.0, 3.0]),
        "n_knots": _Key("int", 12),
    },
    "output": {
        "dir": _Key("str", "out"),
        "snapshots": _Key("bool", False),
    },
}  # type: Dict[str, Any]


def expand_env(value: str) -> str:
    """Replace ${VAR} and ${VAR:-default} from os.environ."""

    def sub(match: "re.Match[str]") -> str:
        name, default = match.group(1), match.group(2)
        return os.environ.get(name, default if default is not None else "")

    return _ENV_PATTERN.sub(sub, value)


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _check_value(path: str, key: _Key, value: Any) -> Any:
    if value is None:
        if key.required:
            raise ConfigError("{}: required".format(path))
        return copy.deepcopy(key.default)
    kind = key.kind
    if kind == "str":
        if not isinstance(value, str):
            raise ConfigError("{}: expected text, got {!r}".format(path, value))
        value = expand_env(value)
    elif kind == "bool":
        if not isinstance(value, bool):
            raise ConfigError("{}: expected true/false, got {!r}".format(path, value))
    elif kind == "int":
        if not isinstance(value, int) or isinstance(value, bool):
            raise ConfigError("{}: expected an integer, got {!r}".format(path, value))
    elif kind == "number":
        if not _is_number(value) or not math.isfinite(value):
            raise ConfigError("{}: expected a finite number, got {!r}".format(path, value))
        value = float(value)
    elif kind == "numbers":
        if not isinstance(value, list) or not all(_is_number(v) for v in value):
            raise ConfigError("{}: expected a list of numbers, got {!r}".format(path, value))
        if not all(math.isfinite(v) for v in value):
            raise ConfigError("{}: non-finite entry in {!r}".format(path, value))
        value = [float(v) for v in value]
    elif kind == "list":
        if not isinstance(value, list):
            raise ConfigError("{}: expected a list, got {!r}".format(path, value))
    elif kind == "mapping":
        if not isinstance(value, dict):
            raise ConfigError("{}: expected a mapping, got {!r}".format(path, value))
        _check_finite(path, value)
    if key.choices is not None and value not in key.choices:
        raise ConfigError("{}: {!r} is not one of {}".format(path, value, sorted(key.choices)))
    if key.nonnegative and value < 0.0:
        raise ConfigError("{}: must be >= 0, got {}".format(path, value))
    return value


def _check_finite(path: str, value: Any) -> None:
    if isinstance(value, dict):
        for k, v in value.items():
            _check_finite("{}.{}".format(path, k), v)
    elif isinstance(value, list):
        for i, v in enumerate(value):
            _check_finite("{}[{}]".format(path, i), v)
    elif _is_number(value) and not math.isfinite(value):
        raise ConfigError("{}: non-finite number".format(path))


def _validate(schema: Mapping[str, Any], raw: Any, prefix: str) -> Dict[str, Any]:
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("{}: expected a mapping".format(prefix or "config"))
    unknown = sorted(set(raw) - set(k for k in schema if not k.startswith("__")))
    if unknown:
        raise ConfigError("unknown key{} {}".format(
            "s" if len(unknown) > 1 else "",
            ", ".join(prefix + k for k in unknown),
        ))
    out = {}  # type: Dict[str, Any]
    for name, spec in schema.items():
        if name.startswith("__"):
            continue
        path = prefix + name
        value = raw.get(name)
        if isinstance(spec, dict):
            if spec.get("__optional__") and value is None:
                out[name] = None
            else:
                out[name] = _validate(spec, value, path + ".")
        else:
            out[name] = _check_value(path, spec, value)
    return out


# ── Loaded config ─────────────────────────────────────────────────────────────

class ScenarioConfig:
    """A validated scenario config with its digest."""

    def __init__(self, data: Dict[str, Any], source: str = "<memory>") -> None:
        self.data = data
        self.source = source
        self.digest = config_digest(data)

    def __getattr__(self, name: str) -> Any:
        data = self.__dict__.get("data")
        if data is not None and name in data:
            return data[name]
        raise AttributeError(name)

    def with_overrides(self, **sections: Mapping[str, Any]) -> "ScenarioConfig":
        """Copy with some section keys replaced, re-validated."""
        raw = orjson.loads(orjson.dumps(self.data))
        for section, values in sections.items():
            raw[section] = dict(raw.get(section) or {}, **values)
        return ScenarioConfig(_validate(SCHEMA, raw, ""), self.source)

    def __repr__(self) -> str:
        return "ScenarioConfig({}, kind={}, digest={}...)".format(
            self.name, self.kind, self.digest[:12],
        )


def config_digest(data: Mapping[str, Any]) -> str:
    """SHA-256 of the canonical JSON form (sorted keys)."""
    return hashlib.sha256(orjson.dumps(data, option=orjson.OPT_SORT_KEYS)).hexdigest()


def parse_config(raw: Any, source: str = "<memory>") -> ScenarioConfig:
    return ScenarioConfig(_validate(SCHEMA, raw, ""), source)


def load_config(path: Union[str, Path]) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError("cannot read {}: {}".format(path, exc)) from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("{}: invalid YAML: {}".format(path, exc)) from exc
    cfg = parse_config(raw, str(path))
    logger.info("Loaded %s (%s) digest=%s", path, cfg.kind, cfg.digest[:16])
    return cfg


def suite_paths(suite: str, root: Union[str, Path] = "config/suites") -> List[Path]:
    """Config files of a suite directory in file-name order."""
    directory = Path(root) / suite
    if not directory.is_dir():
        raise ConfigError("suite not found: {}".format(directory))
    paths = sorted(p for p in directory.iterdir() if p.suffix in (".yaml", ".yml"))
    if not paths:
        raise ConfigError("suite {} has no configs".format(directory))
    return paths


def check_band(cfg: ScenarioConfig, key: str) -> Optional[Tuple[float, float]]:
    """A two-number checks entry as (lo, hi), validated."""
    value = cfg.checks[key]
    if value is None:
        return None
    if len(value) != 2 or not value[0] <= value[1]:
        raise ConfigError("checks.{}: expected [lo, hi], got {}".format(key, value))
    return value[0], value[1]


def require(cfg: ScenarioConfig, section: str, *keys: str) -> List[Any]:
    """Values that must be present for the scenario kind."""
    values = []
    for key in keys:
        value = cfg.data[section][key]
        if value is None:
            raise ConfigError("{}.{}: required for kind {}".format(section, key, cfg.kind))
        values.append(value)
    return values

