from __future__ import annotations

from typing import Any, Dict, List, Optional


class ZoneflowError(Exception):
    """Base error; `exit_code` is what the CLI returns when it surfaces."""

    exit_code = 1
    module = "zoneflow"

    def __init__(self, message: str, *, context: Optional[Dict[str, Any]] = None) -> None:
        super().__init__(message)
        self.context = dict(context or {})

    def describe(self) -> str:
        detail = " ".join(f"{key}={value}" for key, value in sorted(self.context.items()))
        return f"{self.module}: {self}" + (f" ({detail})" if detail else "")


class ArchitectureError(ZoneflowError, ValueError):
    exit_code = 2
    module = "arch"


class CircuitError(ZoneflowError, ValueError):
    exit_code = 2
    module = "circuit"


class ConfigError(ZoneflowError, ValueError):
    exit_code = 2
    module = "config"


class CapacityError(ZoneflowError, RuntimeError):
    exit_code = 3
    module = "placement"


class ReplayError(ZoneflowError, RuntimeError):
    exit_code = 4
    module = "zair"

    def __init__(self, message: str, violations: List[Any]) -> None:
        super().__init__(message, context={"violations": len(violations)})
        self.violations = list(violations)


class CompilerBugError(ZoneflowError, RuntimeError):
    module = "compiler"
