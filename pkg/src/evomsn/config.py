"""Run configuration: flat dotted keys, loaded from TOML text and overridden by flags."""
from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .errors import ConfigError, RangeError, UnknownKey

OUTPUT_DIR_ENV = "EVOMSN_OUTPUT_DIR"
MODES = ("online", "offline")
RUN_VARIANTS = ("full", "no_online", "freeze_stats", "freeze_backbone", "vanilla")


@dataclass
class RunConfig:
    dataset: str = ""
    channels: List[str] = field(default_factory=list)
    lookback: int = 96
    horizon: int = 96
    k: int = 4
    eps: float = 1e-5
    backbone: str = "dlinear"
    kernel_size: int = 25
    lr_stats: float = 1e-3
    lr_backbone: float = 1e-3
    weight_decay: float = 1e-2
    epochs: int = 100
    batch_size: int = 32
    patience: int = 5
    seed: int = 0
    mode: str = "online"
    variant: str = "full"
    standardize: bool = True
    output_dir: str = "runs"

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)

    def replace(self, **changes) -> "RunConfig":
        return validate(dataclasses.replace(self, **changes))


# dotted section names accepted in files; the last component is the field name
SECTIONS = {
    "data": ("dataset", "channels"),
    "model": ("lookback", "horizon", "k", "eps", "backbone", "kernel_size"),
    "train": ("lr_stats", "lr_backbone", "weight_decay", "epochs", "batch_size", "patience", "seed"),
    "run": ("mode", "variant", "standardize", "output_dir"),
}
ALIASES = {"L": "lookback", "H": "horizon", "path": "dataset"}
FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _flatten(table: Mapping[str, Any], prefix: str = "") -> Dict[str, Any]:
    flat = {}
    for key, value in table.items():
        full = f"{prefix}{key}"
        if isinstance(value, Mapping):
            flat.update(_flatten(value, full + "."))
        else:
            flat[full] = value
    return flat


def _field_for(key: str) -> str:
    parts = key.split(".")
    name = ALIASES.get(parts[-1], parts[-1])
    if name not in FIELD_TYPES:
        raise UnknownKey(key)
    if len(parts) == 2 and (parts[0] not in SECTIONS or name not in SECTIONS[parts[0]]):
        raise UnknownKey(key)
    if len(parts) > 2:
        raise UnknownKey(key)
    return name


def _coerce(name: str, value: Any) -> Any:
    kind = FIELD_TYPES[name]
    try:
        if kind == "int":
            if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
                raise ValueError
            return int(value)
        if kind == "float":
            return float(value)
        if kind == "bool":
            if isinstance(value, str):
                if value.lower() in ("1", "true", "yes", "on"):
                    return True
                if value.lower() in ("0", "false", "no", "off"):
                    return False
                raise ValueError
            return bool(value)
        if kind == "List[str]":
            if isinstance(value, str):
                return [v.strip() for v in value.split(",") if v.strip()]
            return [str(v) for v in value]
        return str(value)
    except (TypeError, ValueError):
        raise RangeError(name, f"cannot interpret {value!r} as {kind}") from None


def validate(cfg: RunConfig) -> RunConfig:
    for name in ("lookback", "horizon", "k", "kernel_size", "epochs", "batch_size", "patience"):
        low = 0 if name in ("epochs", "patience") else 1
        if getattr(cfg, name) < low:
            raise RangeError(name, f"must be >= {low}")
    if cfg.kernel_size % 2 == 0:
        raise RangeError("kernel_size", "must be odd")
    if not cfg.eps > 0:
        raise RangeError("eps", "must be > 0")
    for name in ("lr_stats", "lr_backbone", "weight_decay"):
        if getattr(cfg, name) < 0:
            raise RangeError(name, "must be >= 0")
    if cfg.mode not in MODES:
        raise RangeError("mode", f"expected one of {MODES}")
    if cfg.variant not in RUN_VARIANTS:
        raise RangeError("variant", f"expected one of {RUN_VARIANTS}")
    if cfg.backbone not in ("linear", "dlinear"):
        raise RangeError("backbone", "expected 'linear' or 'dlinear'")
    return cfg


def parse_config(text: Optional[str] = None, path: Optional[str | Path] = None,
                 overrides: Optional[Mapping[str, Any]] = None, check_paths: bool = False) -> RunConfig:
    """Build a validated RunConfig. Precedence: defaults < file/text < $EVOMSN_OUTPUT_DIR < overrides."""
    values: Dict[str, Any] = {}
    if path is not None:
        text = Path(path).read_text()
    if text:
        try:
            table = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"config syntax error: {exc}") from None
        for key, value in _flatten(table).items():
            name = _field_for(key)
            values[name] = _coerce(name, value)
    env_dir = os.environ.get(OUTPUT_DIR_ENV)
    if env_dir:
        values["output_dir"] = env_dir
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        name = _field_for(key)
        values[name] = _coerce(name, value)
    cfg = validate(RunConfig(**values))
    if check_paths and cfg.dataset and not Path(cfg.dataset).is_file():
        raise ConfigError(f"dataset: file not found: {cfg.dataset}")
    return cfg
