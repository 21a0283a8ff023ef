"""
Pipeline configuration.

Defaults live in the dataclasses below; a single TOML file can override any
of them:

    lambda = 0.8
    epsilon = 1e-5
    xtol = 1e-8
    ftol = 1e-8
    sigma_vis = 2.0
    degenerate_area_frac = 0.01
    loss = "soft_l1"

    [ransac]
    threshold_px = 8.0

    [sweep]
    sigmas = [0.5, 1.0, 2.0, 3.0, 4.0]
    trials = 100
    seed = 42

    [axis_policy]
    x_pairs = [["nose", "tail_base"], ["neck", "tail_base"]]

    [render]
    png = false
"""

from __future__ import annotations

import logging
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Dict, Mapping, Optional, Union

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - Python 3.10 backport
    import tomli as tomllib

from animalbox.errors import ConfigError, ValidationError
from animalbox.evaluate import NoiseSweepConfig
from animalbox.frame import AxisPolicy
from animalbox.obox import DEFAULT_EPSILON
from animalbox.pose import LOSSES, RansacParams, RefineOptions, UncertaintyParams

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PipelineConfig:
    lam: float = 0.8
    epsilon: float = DEFAULT_EPSILON
    xtol: float = 1e-8
    ftol: float = 1e-8
    gtol: float = 1e-8
    max_iters: int = 200
    method: str = "trf"
    restart_residual_px: float = 10.0
    degenerate_area_frac: float = 0.01
    loss: str = "soft_l1"
    f_scale: float = 1.0
    uncertainty: UncertaintyParams = field(default_factory=UncertaintyParams)
    ransac: RansacParams = field(default_factory=RansacParams)
    sweep: NoiseSweepConfig = field(default_factory=NoiseSweepConfig)
    axis_policy: AxisPolicy = field(default_factory=AxisPolicy)
    render_png: bool = False

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ConfigError("lambda", "must lie in [0, 1]")
        if self.epsilon < 0:
            raise ConfigError("epsilon", "must be >= 0")
        if self.method not in ("trf", "lm", "dogbox"):
            raise ConfigError("method", "must be one of trf, lm, dogbox")
        if self.loss not in LOSSES:
            raise ConfigError("loss", f"must be one of {', '.join(LOSSES)}")
        if self.method == "lm" and self.loss != "linear":
            raise ConfigError("loss", "method lm supports only the linear loss")
        if not self.f_scale > 0:
            raise ConfigError("f_scale", "must be positive")
        if self.max_iters < 1:
            raise ConfigError("max_iters", "must be >= 1")

    def refine_options(self) -> RefineOptions:
        return RefineOptions(
            lam=self.lam,
            xtol=self.xtol,
            ftol=self.ftol,
            gtol=self.gtol,
            max_iters=self.max_iters,
            method=self.method,
            restart_residual_px=self.restart_residual_px,
            degenerate_area_frac=self.degenerate_area_frac,
            loss=self.loss,
            f_scale=self.f_scale,
        )


def _number(key: str, value: Any) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(key, f"expected a number, got {type(value).__name__}")
    return float(value)


def _integer(key: str, value: Any) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(key, f"expected an integer, got {type(value).__name__}")
    return value


def _string(key: str, value: Any) -> str:
    if not isinstance(value, str):
        raise ConfigError(key, f"expected a string, got {type(value).__name__}")
    return value


def _boolean(key: str, value: Any) -> bool:
    if not isinstance(value, bool):
        raise ConfigError(key, f"expected true/false, got {type(value).__name__}")
    return value


def _sigmas(key: str, value: Any) -> tuple:
    if not isinstance(value, list):
        raise ConfigError(key, "expected a list of numbers")
    return tuple(_number(f"{key}[{i}]", v) for i, v in enumerate(value))


def _pairs(key: str, value: Any) -> tuple:
    if not isinstance(value, list) or not all(
        isinstance(p, list) and len(p) == 2 and all(isinstance(s, str) for s in p) for p in value
    ):
        raise ConfigError(key, "expected a list of [from, to] name pairs")
    return tuple((a, b) for a, b in value)


def _midpoints(key: str, value: Any) -> dict:
    if not isinstance(value, dict):
        raise ConfigError(key, "expected a table of name = [a, b]")
    return {name: _pairs(f"{key}.{name}", [parts])[0] for name, parts in value.items()}


# toml key -> (PipelineConfig field, coercion)
_TOP_LEVEL: Dict[str, tuple] = {
    "lambda": ("lam", _number),
    "epsilon": ("epsilon", _number),
    "xtol": ("xtol", _number),
    "ftol": ("ftol", _number),
    "gtol": ("gtol", _number),
    "max_iters": ("max_iters", _integer),
    "method": ("method", _string),
    "restart_residual_px": ("restart_residual_px", _number),
    "degenerate_area_frac": ("degenerate_area_frac", _number),
    "loss": ("loss", _string),
    "f_scale": ("f_scale", _number),
}
_UNCERTAINTY = {"sigma_vis": _number, "sigma_occ": _number, "conf_floor": _number, "edge_margin_frac": _number}
_TABLES: Dict[str, Dict[str, Callable]] = {
    "ransac": {"threshold_px": _number, "confidence": _number, "max_iters": _integer},
    "sweep": {"sigmas": _sigmas, "trials": _integer, "seed": _integer},
    "axis_policy": {
        "x_pairs": _pairs,
        "y_pairs": _pairs,
        "reliability_threshold": _number,
        "midpoints": _midpoints,
    },
    "render": {"png": _boolean},
}


def _read_table(name: str, data: Any) -> Dict[str, Any]:
    if not isinstance(data, dict):
        raise ConfigError(name, "expected a table")
    coercions = _TABLES[name]
    out = {}
    for key, value in data.items():
        if key not in coercions:
            raise ConfigError(f"{name}.{key}", "unknown key")
        out[key] = coercions[key](f"{name}.{key}", value)
    return out


def config_from_mapping(data: Mapping[str, Any], base: Optional[PipelineConfig] = None) -> PipelineConfig:
    """
    Apply a parsed TOML mapping on top of `base` (defaults when None).

    Raises:
        ConfigError: unknown key, wrong type or out-of-range value
    """
    cfg = base or PipelineConfig()
    top: Dict[str, Any] = {}
    uncertainty: Dict[str, Any] = {}
    tables: Dict[str, Dict[str, Any]] = {}
    for key, value in data.items():
        if key in _TOP_LEVEL:
            attr, coerce = _TOP_LEVEL[key]
            top[attr] = coerce(key, value)
        elif key in _UNCERTAINTY:
            uncertainty[key] = _UNCERTAINTY[key](key, value)
        elif key in _TABLES:
            tables[key] = _read_table(key, value)
        else:
            raise ConfigError(key, "unknown key")

    try:
        if uncertainty:
            top["uncertainty"] = replace(cfg.uncertainty, **uncertainty)
        if "ransac" in tables:
            top["ransac"] = replace(cfg.ransac, **tables["ransac"])
        if "sweep" in tables:
            sweep = tables["sweep"]
            top["sweep"] = NoiseSweepConfig(
                sigmas=sweep.get("sigmas", cfg.sweep.sigmas),
                trials_per_sigma=sweep.get("trials", cfg.sweep.trials_per_sigma),
                seed=sweep.get("seed", cfg.sweep.seed),
            )
        if "axis_policy" in tables:
            top["axis_policy"] = replace(cfg.axis_policy, **tables["axis_policy"])
        if "render" in tables:
            top["render_png"] = tables["render"].get("png", cfg.render_png)
        return replace(cfg, **top)
    except ConfigError:
        raise
    except ValidationError as e:
        raise ConfigError(e.field, e.message) from e


def load_config(path: Optional[Union[str, Path]] = None) -> PipelineConfig:
    """Defaults, overridden by the TOML file at `path` when given."""
    if path is None:
        return PipelineConfig()
    path = Path(path)
    try:
        with path.open("rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(str(path), f"invalid TOML: {e}") from e
    logger.debug("Loaded configuration from %s", path)
    return config_from_mapping(data)
