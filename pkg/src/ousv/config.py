"""Line-oriented run configuration.

Format: `key = value` with dotted section prefixes and `#` comments, e.g.

    market.spot = 100.0
    vol.family = ExpClamped
    vol.a = 0.2

Unknown keys are rejected; every domain invariant is enforced at load and
reported with the offending key. ``render_config`` produces the canonical
text, and parse(render(c)) round-trips exactly.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Optional

from .conditional import MarketParams, ModelParams, OptionSpec
from .mc import MeasureSpec
from .ou import OUParams
from .vols import Constant, ExpClamped, SigmoidAffine, VolSpec

__all__ = ["RunConfig", "ConfigError", "parse_config", "render_config",
           "config_digest", "NUMERIC_DEFAULTS"]

NUMERIC_DEFAULTS = {
    "numerics.grid_n": 512,
    "numerics.n_paths": 100_000,
    "numerics.seed": 12345,
    "numerics.quad_nodes": 128,
    "numerics.moment_order": 12,
}

_INT_KEYS = set(NUMERIC_DEFAULTS)
_FLOAT_KEYS = {
    "market.spot", "market.rate", "market.drift",
    "option.strike", "option.maturity",
    "ou.alpha", "ou.k_vol", "ou.y0",
    "vol.sigma0", "vol.a", "vol.b", "vol.lo", "vol.hi",
    "measure.rho", "measure.nu",
    "numerics.inversion_U",
}
_STR_KEYS = {"vol.family", "output.path", "output.format"}
_ALL_KEYS = _INT_KEYS | _FLOAT_KEYS | _STR_KEYS

_REQUIRED = [
    "market.spot", "market.rate", "market.drift",
    "option.strike", "option.maturity",
    "ou.alpha", "ou.k_vol", "ou.y0",
    "vol.family",
]

_FAMILY_PARAMS = {
    "Constant": ["vol.sigma0"],
    "ExpClamped": ["vol.a", "vol.b", "vol.lo", "vol.hi"],
    "SigmoidAffine": ["vol.lo", "vol.hi"],
}


class ConfigError(ValueError):
    """A configuration problem, carrying the offending key."""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"config key '{key}': {message}")


@dataclass(frozen=True)
class RunConfig:
    model: ModelParams
    option: OptionSpec
    measure: MeasureSpec
    grid_n: int = 512
    n_paths: int = 100_000
    seed: int = 12345
    quad_nodes: int = 128
    inversion_u: Optional[float] = None
    moment_order: int = 12
    out_path: Optional[str] = None
    out_format: str = "csv"


def _parse_lines(text: str) -> dict:
    pairs = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(line.split()[0], f"line {lineno} is not 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _ALL_KEYS:
            raise ConfigError(key, "unknown key")
        if key in pairs:
            raise ConfigError(key, "duplicate key")
        pairs[key] = value
    return pairs


def _typed(pairs: dict, key: str):
    value = pairs[key]
    try:
        if key in _INT_KEYS:
            return int(value)
        if key in _FLOAT_KEYS:
            return float(value)
    except ValueError:
        kind = "an integer" if key in _INT_KEYS else "a number"
        raise ConfigError(key, f"expected {kind}, got {value!r}") from None
    return value


def _build_vol(pairs: dict) -> VolSpec:
    family = pairs["vol.family"]
    if family not in _FAMILY_PARAMS:
        raise ConfigError("vol.family",
                          f"unknown family {family!r}; expected one of "
                          f"{sorted(_FAMILY_PARAMS)}")
    wanted = _FAMILY_PARAMS[family]
    for key in wanted:
        if key not in pairs:
            raise ConfigError(key, f"required by vol.family = {family}")
    stray = [k for k in pairs if k.startswith("vol.") and k != "vol.family"
             and k not in wanted]
    if stray:
        raise ConfigError(stray[0], f"not a parameter of vol.family = {family}")
    args = [_typed(pairs, key) for key in wanted]
    try:
        if family == "Constant":
            return Constant(*args)
        if family == "ExpClamped":
            return ExpClamped(*args)
        return SigmoidAffine(*args)
    except ValueError as exc:
        raise ConfigError("vol.family", str(exc)) from None


def parse_config(text: str) -> RunConfig:
    """Parse and fully validate a configuration, or raise ConfigError."""
    pairs = _parse_lines(text)
    for key in _REQUIRED:
        if key not in pairs:
            raise ConfigError(key, "required key missing")

    def build(key, ctor, *args):
        try:
            return ctor(*args)
        except ValueError as exc:
            raise ConfigError(key, str(exc)) from None

    market = build("market.spot", MarketParams, _typed(pairs, "market.spot"),
                   _typed(pairs, "market.rate"), _typed(pairs, "market.drift"))
    option = build("option.strike", OptionSpec, _typed(pairs, "option.strike"),
                   _typed(pairs, "option.maturity"))
    ou = build("ou.alpha", OUParams, _typed(pairs, "ou.alpha"),
               _typed(pairs, "ou.k_vol"), _typed(pairs, "ou.y0"))
    vol = _build_vol(pairs)
    measure = build("measure.rho", MeasureSpec,
                    _typed(pairs, "measure.rho") if "measure.rho" in pairs else 0.0,
                    _typed(pairs, "measure.nu") if "measure.nu" in pairs else 0.0)

    numerics = {}
    for key, default in NUMERIC_DEFAULTS.items():
        value = _typed(pairs, key) if key in pairs else default
        field = key.split(".", 1)[1]
        if value <= 0:
            raise ConfigError(key, f"{field} must be positive, got {value}")
        numerics[field] = value
    if numerics["grid_n"] < 2:
        raise ConfigError("numerics.grid_n", "grid_n must be at least 2")

    inversion_u = None
    if "numerics.inversion_U" in pairs:
        inversion_u = _typed(pairs, "numerics.inversion_U")
        if inversion_u <= 0:
            raise ConfigError("numerics.inversion_U", "must be positive")

    out_format = pairs.get("output.format", "csv")
    if out_format != "csv":
        raise ConfigError("output.format", f"only 'csv' is supported, got {out_format!r}")

    return RunConfig(model=ModelParams(market, ou, vol), option=option,
                     measure=measure, inversion_u=inversion_u,
                     out_path=pairs.get("output.path"), out_format=out_format,
                     **numerics)


def render_config(config: RunConfig) -> str:
    """Canonical text form; parse_config(render_config(c)) == c."""
    mkt, ou, vol = config.model.market, config.model.ou, config.model.vol
    lines = [
        f"market.spot = {mkt.spot!r}",
        f"market.rate = {mkt.rate!r}",
        f"market.drift = {mkt.drift!r}",
        f"option.strike = {config.option.strike!r}",
        f"option.maturity = {config.option.maturity!r}",
        f"ou.alpha = {ou.alpha!r}",
        f"ou.k_vol = {ou.k_vol!r}",
        f"ou.y0 = {ou.y0!r}",
        f"vol.family = {type(vol).__name__}",
    ]
    for key in _FAMILY_PARAMS[type(vol).__name__]:
        lines.append(f"{key} = {getattr(vol, key.split('.', 1)[1])!r}")
    lines += [
        f"measure.rho = {config.measure.rho!r}",
        f"measure.nu = {config.measure.nu!r}",
        f"numerics.grid_n = {config.grid_n}",
        f"numerics.n_paths = {config.n_paths}",
        f"numerics.seed = {config.seed}",
        f"numerics.quad_nodes = {config.quad_nodes}",
        f"numerics.moment_order = {config.moment_order}",
    ]
    if config.inversion_u is not None:
        lines.append(f"numerics.inversion_U = {config.inversion_u!r}")
    if config.out_path is not None:
        lines.append(f"output.path = {config.out_path}")
    lines.append(f"output.format = {config.out_format}")
    return "\n".join(lines) + "\n"


def config_digest(config: RunConfig) -> str:
    """Short opaque token identifying the full configuration."""
    return hashlib.sha256(render_config(config).encode()).hexdigest()[:12]
