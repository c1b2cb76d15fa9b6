"""Flat ``key = value`` run configuration and the seeded step placement RNG."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Optional

from .errors import ConfigError
from .fcrk import METHODS

TRUE_WORDS = {"1", "true", "yes", "on"}
FALSE_WORDS = {"0", "false", "no", "off"}

#: top-level keys and their parsers; model parameters use ``model.<name>``
_SCALAR_KEYS = {
    "model": str,
    "preset": str,
    "method": str,
    "detection": "bool",
    "h": float,
    "n": "ints",
    "lambda": str,
    "anchor": float,
    "seed": int,
    "samples_per_step": int,
    "output": str,
    "breakpoints_output": str,
    "audit_output": str,
    "summary_output": str,
    "jobs": int,
    "transient": float,
    "a1": float,
    "a2": float,
    "component": int,
    "sweep.param": str,
    "sweep.values": "floats",
    "box": "floats",
    "differentiated": "bool",
    "branch": int,
}

#: keys that choose where results go or how they are scheduled, not what they are
_UNHASHED_KEYS = {"output", "breakpoints_output", "audit_output", "summary_output", "jobs"}

DEFAULTS = {
    "method": "fcrk4",
    "detection": True,
    "seed": 1,
    "samples_per_step": 20,
    "output": "-",
    "jobs": 1,
    "transient": 0.0,
    "component": 0,
    "box": [-5.0, 2.0, 20.0],
    "differentiated": False,
    "branch": 0,
}


def parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in TRUE_WORDS:
        return True
    if low in FALSE_WORDS:
        return False
    raise ValueError(f"not a boolean: {text!r}")


def parse_floats(text: str) -> list:
    """Comma list, or ``start:stop:count`` for evenly spaced values."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"range must be start:stop:count, got {text!r}")
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
        if count < 2:
            return [start]
        return [start + (stop - start) * k / (count - 1) for k in range(count)]
    return [float(x) for x in text.split(",") if x.strip()]


def _parse_scalar(kind, text: str):
    if kind == "bool":
        return parse_bool(text)
    if kind == "floats":
        return parse_floats(text)
    if kind == "ints":
        return [int(x) for x in text.split(",") if x.strip()]
    return kind(text.strip())


def _coerce_like(default, text: str):
    """Parse a model parameter using the type of its default value."""
    if isinstance(default, bool):
        return parse_bool(text)
    if isinstance(default, int):
        return int(text)
    if isinstance(default, str):
        return text.strip()
    return float(text)


@dataclass
class RunConfig:
    """Parsed run configuration.

    ``values`` holds the top-level keys, ``model_params`` the raw
    ``model.<name>`` overrides (typed once the model is known).
    """

    values: dict = field(default_factory=dict)
    model_params: dict = field(default_factory=dict)
    lines: list = field(default_factory=list)

    def get(self, key: str, default=None):
        if key in self.values:
            return self.values[key]
        return DEFAULTS.get(key, default)

    def require(self, key: str):
        value = self.get(key)
        if value is None:
            raise ConfigError(f"missing required key {key!r}")
        return value

    @property
    def method(self) -> str:
        return self.get("method")

    @property
    def detection(self) -> bool:
        return bool(self.get("detection"))

    def sha256(self) -> str:
        """Hash of the canonical ``key=value`` listing, output paths and ``jobs`` excluded."""
        canon = "\n".join(f"{k}={v}" for k, v in sorted(self.lines) if k not in _UNHASHED_KEYS)
        return hashlib.sha256(canon.encode()).hexdigest()

    def entry(self):
        from .models import CATALOG

        name = self.require("model")
        if name not in CATALOG:
            raise ConfigError(f"unknown model {name!r}; catalog: {', '.join(sorted(CATALOG))}")
        return CATALOG[name]

    def params(self) -> dict:
        """Model parameters after the preset and the typed overrides."""
        entry = self.entry()
        try:
            base = entry.params(preset=self.get("preset"))
        except KeyError as exc:
            raise ConfigError(exc.args[0]) from None
        overrides = {}
        for key, (text, where) in self.model_params.items():
            if key not in base:
                raise ConfigError(f"{where}: model {entry.name!r} has no parameter {key!r}; known: {sorted(base)}")
            try:
                overrides[key] = _coerce_like(base[key], text)
            except ValueError as exc:
                raise ConfigError(f"{where}: key 'model.{key}': {exc}") from None
        base.update(overrides)
        return base


def _validate(cfg: RunConfig) -> None:
    method = cfg.get("method")
    if method not in METHODS:
        raise ConfigError(f"unknown method {method!r}; choose from {', '.join(sorted(METHODS))}")
    ns = cfg.get("n")
    if ns is not None and any(n < 1 for n in ns):
        raise ConfigError("every N must be >= 1")
    lam = cfg.get("lambda")
    if lam is not None and lam != "random":
        value = float(lam)
        if not 0.0 <= value < 1.0:
            raise ConfigError(f"lambda must lie in [0, 1), got {value!r}")
    h = cfg.get("h")
    if h is not None and not (h > 0 and math.isfinite(h)):
        raise ConfigError(f"h must be positive, got {h!r}")
    if cfg.get("samples_per_step") < 1:
        raise ConfigError("samples_per_step must be >= 1")
    if len(cfg.get("box")) != 3:
        raise ConfigError("box needs three values: re_min, re_max, im_max")


def parse_config(text: str, source: str = "<config>", overrides: Optional[list] = None) -> RunConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment.

    ``overrides`` are extra ``key=value`` strings applied after the text.
    """
    cfg = RunConfig()
    entries = [(f"{source}:{i}", line) for i, line in enumerate(text.splitlines(), 1)]
    entries += [(f"--set {item}", item) for item in (overrides or [])]
    for where, raw in entries:
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{where}: expected key = value, got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"{where}: empty key")
        cfg.lines = [kv for kv in cfg.lines if kv[0] != key] + [(key, value)]
        if key.startswith("model."):
            cfg.model_params[key[len("model."):]] = (value, where)
            continue
        if key not in _SCALAR_KEYS:
            raise ConfigError(f"{where}: unknown key {key!r}")
        try:
            cfg.values[key] = _parse_scalar(_SCALAR_KEYS[key], value)
        except ValueError as exc:
            raise ConfigError(f"{where}: key {key!r}: {exc}") from None
    _validate(cfg)
    return cfg


def load_config(path: str, overrides: Optional[list] = None) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc.strerror}") from None
    return parse_config(text, path, overrides)


class Lcg64:
    """64-bit linear congruential generator (Knuth's MMIX constants).

    ``random()`` returns the top 53 bits of the state as a float in ``[0, 1)``.
    """

    A = 6364136223846793005
    C = 1442695040888963407
    MASK = (1 << 64) - 1

    def __init__(self, seed: int):
        self.state = int(seed) & self.MASK

    def next(self) -> int:
        self.state = (self.A * self.state + self.C) & self.MASK
        return self.state

    def random(self) -> float:
        return (self.next() >> 11) / float(1 << 53)
