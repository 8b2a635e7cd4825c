from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import List, Optional, Tuple

from .errors import ConfigError

PRESETS = {
    # name: (sa_enabled, dynamic_placement_enabled, reuse_enabled)
    "vanilla": (False, False, False),
    "dynplace": (False, True, False),
    "dynplace-reuse": (False, True, True),
    "full": (True, True, True),
}


@dataclass
class CompilerConfig:
    sa_iteration_limit: int = 1000
    sa_seed: int = 0
    sa_cooling: float = 0.98
    sa_convergence_window: int = 200
    delta: int = 2
    neighbor_hops: int = 1
    lookahead_weight: float = 0.1
    reuse_enabled: bool = True
    dynamic_placement_enabled: bool = True
    sa_enabled: bool = True

    def validate(self) -> "CompilerConfig":
        if self.delta < 1:
            raise ConfigError(f"delta must be >= 1 (got {self.delta})")
        if self.neighbor_hops < 0:
            raise ConfigError(f"k must be >= 0 (got {self.neighbor_hops})")
        if not 0.0 <= self.lookahead_weight <= 1.0:
            raise ConfigError(f"alpha must lie in [0, 1] (got {self.lookahead_weight})")
        if self.sa_iteration_limit < 0:
            raise ConfigError("SA iteration limit must be >= 0")
        if not 0.0 < self.sa_cooling < 1.0:
            raise ConfigError("SA cooling factor must lie in (0, 1)")
        return self

    def apply_preset(self, name: str) -> "CompilerConfig":
        try:
            self.sa_enabled, self.dynamic_placement_enabled, self.reuse_enabled = PRESETS[name]
        except KeyError:
            raise ConfigError(f"unknown preset '{name}' (choose from {', '.join(PRESETS)})") from None
        return self

    def variants(self) -> List["CompilerConfig"]:
        """Reuse and dynamic-placement settings this config allows, most capable first."""
        reuse = (True, False) if self.reuse_enabled else (False,)
        dynamic = (True, False) if self.dynamic_placement_enabled else (False,)
        return [replace(self, reuse_enabled=r, dynamic_placement_enabled=d) for r in reuse for d in dynamic]


@dataclass
class OutputConfig:
    zair: Optional[Path] = None
    report: Optional[Path] = None
    log_file: Optional[Path] = None


@dataclass
class RunConfig:
    repo_root: Path = field(default_factory=lambda: Path(__file__).resolve().parents[1])
    arch: Path = field(default_factory=lambda: Path("architectures/reference.json"))
    circuit: Optional[Path] = None
    circuit_format: Optional[str] = None
    hw_params: Optional[Path] = None
    num_aods: Optional[int] = None
    blocks: Optional[Tuple[int, int]] = None
    compiler: CompilerConfig = field(default_factory=CompilerConfig)
    outputs: OutputConfig = field(default_factory=OutputConfig)

    def resolve(self) -> "RunConfig":
        """Normalize relative paths and check the referenced inputs exist."""
        self.arch = self._resolve_path(self.arch)
        self.circuit = self._resolve_optional(self.circuit)
        self.hw_params = self._resolve_optional(self.hw_params)
        self.outputs.zair = self._resolve_optional(self.outputs.zair)
        self.outputs.report = self._resolve_optional(self.outputs.report)
        self.outputs.log_file = self._resolve_optional(self.outputs.log_file)
        for label, path in (("architecture", self.arch), ("circuit", self.circuit), ("hardware params", self.hw_params)):
            if path is not None and not path.exists():
                raise ConfigError(f"{label} file not found: {path}")
        if self.num_aods is not None and self.num_aods < 1:
            raise ConfigError("--aods must be >= 1")
        if self.blocks is not None and min(self.blocks) < 1:
            raise ConfigError("block shape must be at least 1x1")
        self.compiler.validate()
        return self

    def _resolve_path(self, target: Path) -> Path:
        if target.is_absolute():
            return target
        # Paths given on the command line are relative to the caller; shipped data to the repo.
        local = Path.cwd() / target
        return local.resolve() if local.exists() else (self.repo_root / target).resolve()

    def _resolve_optional(self, target: Optional[Path]) -> Optional[Path]:
        if not target:
            return None
        return self._resolve_path(Path(target))


def parse_block_shape(text: str) -> Tuple[int, int]:
    """'2x4' -> (2, 4)."""
    try:
        rows, cols = text.lower().split("x")
        shape = (int(rows), int(cols))
    except ValueError:
        raise ConfigError(f"block shape must look like RxC, got '{text}'") from None
    if min(shape) < 1:
        raise ConfigError(f"block shape must be positive, got '{text}'")
    return shape
