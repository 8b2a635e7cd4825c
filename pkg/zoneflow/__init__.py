"""zoneflow: a compiler for zoned neutral-atom architectures."""

from .config import CompilerConfig, OutputConfig, RunConfig
from .pipeline import build_pipeline_chain, compile_circuit, run_compile

__all__ = ["CompilerConfig", "OutputConfig", "RunConfig", "build_pipeline_chain", "compile_circuit", "run_compile"]
