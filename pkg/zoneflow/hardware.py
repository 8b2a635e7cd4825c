from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Dict, Mapping, Optional

from .errors import ConfigError


@dataclass(frozen=True)
class HardwareParams:
    """Neutral-atom timing and fidelity constants. Durations in µs, T2 in s."""

    f2: float = 0.995
    f1: float = 0.9997
    f_exc: float = 0.9975
    f_tran: float = 0.999
    t_1q: float = 52.0
    t_ryd: float = 0.36
    t_tran: float = 15.0
    t2: float = 1.5
    accel: float = 2750.0
    d_sep: float = 10.0

    def __post_init__(self) -> None:
        for name in ("f2", "f1", "f_exc", "f_tran"):
            value = getattr(self, name)
            if not 0.0 < value <= 1.0:
                raise ConfigError(f"hardware fidelity {name}={value} must lie in (0, 1]")
        for name in ("t_1q", "t_ryd", "t_tran", "t2", "accel"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"hardware parameter {name} must be positive")
        if self.d_sep < 0:
            raise ConfigError("d_sep must be non-negative")

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "HardwareParams":
        if not isinstance(doc, Mapping):
            raise ConfigError("hardware params must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ConfigError(f"unknown hardware parameter(s): {', '.join(unknown)}")
        values = {}
        for key, value in doc.items():
            try:
                values[key] = float(value)
            except (TypeError, ValueError):
                raise ConfigError(f"hardware parameter '{key}' must be a number, got {value!r}") from None
        return cls(**values)

    @classmethod
    def load(cls, path: Optional[Path]) -> "HardwareParams":
        if path is None:
            return cls()
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read hardware params {path}: {exc}") from None
        return cls.from_dict(doc)

    def as_dict(self) -> Dict[str, float]:
        return asdict(self)


def movement_time(d: float, hw: Optional[HardwareParams] = None) -> float:
    """Duration in µs of a move over d µm under the constant d/t^2 = a law."""
    if d <= 0:
        return 0.0
    accel = (hw or HardwareParams()).accel
    return math.sqrt(d * 1e-6 / accel) * 1e6
