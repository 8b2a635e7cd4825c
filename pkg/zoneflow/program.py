"""Lowering compiled stage plans and jobs into schedulable instructions and a ZAIR program."""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Sequence

from .arch import TrapRef
from .circuit import StagedCircuit
from .errors import CompilerBugError
from .hardware import HardwareParams
from .placement import Placement, StagePlan
from .routing import TO_ENTANGLEMENT, TO_STORAGE, RearrangementJob
from .scheduler import JOB, ONEQ, RYDBERG, Instruction, Schedule
from .zair import InitInst, OneQGateInst, QLoc, RearrangeJobInst, RydbergGate, RydbergInst, ZairProgram


@dataclass
class StageJobs:
    t: int
    inbound: List[RearrangementJob] = field(default_factory=list)
    outbound: List[RearrangementJob] = field(default_factory=list)

    def summary(self) -> Dict[str, object]:
        return {
            "t": self.t,
            "to_entanglement_jobs": len(self.inbound),
            "to_storage_jobs": len(self.outbound),
            "to_entanglement_moves": sum(len(j.movements) for j in self.inbound),
            "to_storage_moves": sum(len(j.movements) for j in self.outbound),
        }


def _qloc(q: int, trap: TrapRef) -> QLoc:
    return QLoc(q, trap.slm_id, trap.row, trap.col)


def build_instructions(
    circuit: StagedCircuit, plans: Sequence[StagePlan], jobs: Sequence[StageJobs], hw: HardwareParams
) -> List[Instruction]:
    """Program order: leading 1Q gates, then per stage inbound jobs, pulses, 1Q gates, outbound jobs."""
    out: List[Instruction] = []

    def emit(**kwargs) -> None:
        out.append(Instruction(index=len(out), **kwargs))

    def emit_oneq(t: int) -> None:
        for stage in circuit.oneq_after(t):
            for gate in stage.gates:
                emit(kind=ONEQ, qubits=gate.qubits, duration=hw.t_1q, stage=t, phase=ONEQ, gates=(gate,))

    def emit_jobs(batch: Sequence[RearrangementJob], t: int, phase: str) -> None:
        for job in batch:
            emit(kind=JOB, qubits=tuple(job.qubits), duration=job.duration, stage=t, phase=phase, job=job)

    emit_oneq(0)
    for plan, stage_jobs in zip(plans, jobs):
        t = plan.t
        emit_jobs(stage_jobs.inbound, t, TO_ENTANGLEMENT)
        per_zone = defaultdict(list)
        for gate, site in plan.gate_sites.items():
            per_zone[site.zone_id].append(gate)
        for zone_id in sorted(per_zone):
            gates = tuple(sorted(per_zone[zone_id], key=lambda g: g.index))
            qubits = tuple(sorted(q for g in gates for q in g.qubits))
            emit(kind=RYDBERG, qubits=qubits, duration=hw.t_ryd, stage=t, phase=RYDBERG, zone_id=zone_id, gates=gates)
        emit_oneq(t)
        emit_jobs(stage_jobs.outbound, t, TO_STORAGE)
    return out


def _grid(job: RearrangementJob, end: bool) -> List[List[QLoc]]:
    return [[_qloc(m.qubit, m.dst if end else m.src) for m in row] for row in job.rows]


def emit_program(
    initial: Placement,
    instructions: Sequence[Instruction],
    plans: Sequence[StagePlan],
    timeline: Schedule,
    name: str = "",
) -> ZairProgram:
    """ZAIR program in program order with schedule annotations; 1Q locs follow the plan placements."""
    at_stage: Mapping[int, StagePlan] = {plan.t: plan for plan in plans}
    timed = timeline.by_index()
    current: Dict[int, TrapRef] = dict(initial)
    program = ZairProgram([InitInst([_qloc(q, trap) for q, trap in sorted(initial.items())], 0.0, 0.0)], name=name)
    for inst in instructions:
        item = timed[inst.index]
        if inst.kind == JOB:
            job = inst.job
            program.instructions.append(
                RearrangeJobInst(job.aod_id, _grid(job, False), _grid(job, True), list(job.insts), item.start, item.end)
            )
            for m in job.movements:
                current[m.qubit] = m.dst
        elif inst.kind == RYDBERG:
            gates = [RydbergGate(g.index, g.qubits[0], g.qubits[1]) for g in inst.gates]
            program.instructions.append(RydbergInst(inst.zone_id, gates, item.start, item.end))
        else:
            gate = inst.gates[0]
            q = gate.qubits[0]
            program.instructions.append(
                OneQGateInst(tuple(gate.params), [_qloc(q, current[q])], gate.index, item.start, item.end)
            )
    if plans:
        final = at_stage[max(at_stage)].after
        drift = [q for q in final if final[q].key != current[q].key]
        if drift:
            raise CompilerBugError(f"lowered program leaves qubits {drift} off their planned traps")
    return program


def instruction_stats(program: ZairProgram, circuit: StagedCircuit) -> Dict[str, float]:
    gates = circuit.g1 + circuit.g2
    zair_count = len(program.instructions)
    machine = program.machine_instruction_count()
    return {
        "zair_instructions": zair_count,
        "machine_instructions": machine,
        "rearrange_jobs": program.count("rearrangeJob"),
        "rydberg_instructions": program.count("rydberg"),
        "zair_per_gate": zair_count / gates if gates else 0.0,
        "machine_per_gate": machine / gates if gates else 0.0,
    }

