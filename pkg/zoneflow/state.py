from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

from .arch import Architecture
from .circuit import ParsedCircuit, StagedCircuit
from .fidelity import FidelityReport
from .hardware import HardwareParams
from .placement import Placement, StagePlan
from .program import StageJobs
from .scheduler import DependencyEdge, Instruction, Schedule
from .zair import ReplayCounters, ZairProgram


@dataclass
class CompileState:
    """Artifacts handed from one compile stage to the next."""

    arch: Optional[Architecture] = None
    declared_aods: int = 0
    hw: HardwareParams = field(default_factory=HardwareParams)
    parsed: Optional[ParsedCircuit] = None
    circuit: Optional[StagedCircuit] = None
    # Logical-block mode: placement runs on these, everything else on the physical pair above.
    planning_arch: Optional[Architecture] = None
    planning_circuit: Optional[StagedCircuit] = None
    seeded: Optional[Placement] = None
    initial: Optional[Placement] = None
    plans: List[StagePlan] = field(default_factory=list)
    jobs: List[StageJobs] = field(default_factory=list)
    instructions: List[Instruction] = field(default_factory=list)
    deps: List[DependencyEdge] = field(default_factory=list)
    schedule: Optional[Schedule] = None
    program: Optional[ZairProgram] = None
    counters: Optional[ReplayCounters] = None
    report: Optional[FidelityReport] = None
    stats: Dict[str, Any] = field(default_factory=dict)

    def as_dict(self) -> Dict[str, Any]:
        return {
            "architecture": self.arch.summary() if self.arch else None,
            "qubits": self.circuit.num_qubits if self.circuit else 0,
            "rydberg_stages": self.circuit.num_rydberg_stages if self.circuit else 0,
            "plans": [plan.summary() for plan in self.plans],
            "jobs": [stage.summary() for stage in self.jobs],
            "dependencies": len(self.deps),
            "makespan_us": self.schedule.makespan if self.schedule else 0.0,
            "replay": self.counters.as_dict() if self.counters else None,
            "fidelity": self.report.as_dict() if self.report else None,
            "stats": dict(self.stats),
        }
