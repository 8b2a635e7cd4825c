from __future__ import annotations

import logging

from .arch import load_architecture
from .blocks import BlockMapper, coarsen_architecture, expand_circuit
from .circuit import guess_format, parse_circuit, stage_asap
from .config import RunConfig
from .fidelity import compute_bounds, evaluate
from .hardware import HardwareParams
from .placement import anneal_initial_placement, plan_circuit
from .program import StageJobs, build_instructions, emit_program, instruction_stats
from .report import build_report, emit_report
from .routing import route_plan
from .scheduler import build_dependencies, schedule
from .state import CompileState
from .zair import require_clean, serialize, validate_replay

logger = logging.getLogger(__name__)


def _announce(stage: str, detail: str) -> None:
    logger.info("[PIPELINE] → %s: %s", stage, detail)


def _announce_done(stage: str) -> None:
    logger.info("[PIPELINE] ✓ %s completed", stage)


def ingest_stage(state: CompileState, config: RunConfig) -> CompileState:
    """Load the architecture, hardware constants and circuit; stage the circuit ASAP."""
    _announce("ingest", f"arch={config.arch.name} circuit={config.circuit.name if config.circuit else '-'}")
    arch = load_architecture(config.arch)
    state.declared_aods = len(arch.aods)
    if config.num_aods is not None:
        arch = arch.with_aods(config.num_aods)
    state.arch = arch
    state.hw = HardwareParams.load(config.hw_params)
    if config.circuit is None:
        parsed = parse_circuit({"num_qubits": 0, "gates": []}, "json-gates")
    else:
        fmt = config.circuit_format or guess_format(str(config.circuit))
        parsed = parse_circuit(config.circuit.read_text(encoding="utf-8"), fmt)
    state.parsed = parsed
    if config.blocks is not None:
        state.planning_arch = coarsen_architecture(arch, config.blocks)
        state.planning_circuit = stage_asap(parsed.gates, parsed.num_qubits)
        physical = expand_circuit(parsed, config.blocks)
        state.circuit = stage_asap(physical.gates, physical.num_qubits)
    else:
        state.planning_arch = arch
        state.circuit = stage_asap(parsed.gates, parsed.num_qubits)
        state.planning_circuit = state.circuit
    state.stats["architecture_warnings"] = list(arch.warnings)
    logger.info(
        "[PIPELINE] %d qubits, %d CZ in %d Rydberg stages, %d U3",
        state.circuit.num_qubits,
        state.circuit.g2,
        state.circuit.num_rydberg_stages,
        state.circuit.g1,
    )
    _announce_done("ingest")
    return state


def anneal_stage(state: CompileState, config: RunConfig) -> CompileState:
    _announce("anneal", f"sa={config.compiler.sa_enabled} seed={config.compiler.sa_seed}")
    state.seeded = anneal_initial_placement(state.planning_circuit, state.planning_arch, config.compiler)
    _announce_done("anneal")
    return state


def place_stage(state: CompileState, config: RunConfig) -> CompileState:
    compiler = config.compiler
    _announce("place", f"dynamic={compiler.dynamic_placement_enabled} reuse={compiler.reuse_enabled}")
    initial = state.seeded
    plans = plan_circuit(state.planning_circuit, state.planning_arch, compiler, initial)
    if config.blocks is not None:
        mapper = BlockMapper(state.arch, config.blocks)
        initial = mapper.placement(initial)
        plans = mapper.plans(plans, state.planning_circuit, state.circuit)
    state.initial = initial
    state.plans = plans
    _announce_done("place")
    return state


def route_stage(state: CompileState, config: RunConfig) -> CompileState:
    _announce("route", f"{len(state.plans)} stage plans")
    next_id = 0
    state.jobs = []
    for plan in state.plans:
        inbound, outbound = route_plan(plan, state.arch, state.hw, first_id=next_id)
        next_id += len(inbound) + len(outbound)
        state.jobs.append(StageJobs(plan.t, inbound, outbound))
    logger.info("[ROUTE] %d rearrangement jobs", next_id)
    _announce_done("route")
    return state


def schedule_stage(state: CompileState, config: RunConfig) -> CompileState:
    _announce("schedule", f"aods={len(state.arch.aods)}")
    state.instructions = build_instructions(state.circuit, state.plans, state.jobs, state.hw)
    state.deps = build_dependencies(state.instructions)
    state.schedule = schedule(state.instructions, state.deps, len(state.arch.aods))
    _announce_done("schedule")
    return state


def emit_stage(state: CompileState, config: RunConfig) -> CompileState:
    name = config.circuit.stem if config.circuit else "empty"
    _announce("emit", name)
    state.program = emit_program(state.initial, state.instructions, state.plans, state.schedule, name=name)
    state.stats["instructions"] = instruction_stats(state.program, state.circuit)
    _announce_done("emit")
    return state


def validate_stage(state: CompileState, config: RunConfig) -> CompileState:
    _announce("validate", f"{len(state.program.instructions)} instructions")
    state.counters = validate_replay(state.program, state.arch, state.hw, state.circuit)
    require_clean(state.counters)
    _announce_done("validate")
    return state


def evaluate_stage(state: CompileState, config: RunConfig) -> CompileState:
    _announce("evaluate", f"makespan={state.schedule.makespan:.2f}us")
    report = evaluate(state.schedule, state.counters, state.hw)
    report.bounds = compute_bounds(state.circuit, state.plans, state.hw, report)
    state.report = report
    _announce_done("evaluate")
    return state


def write_stage(state: CompileState, config: RunConfig) -> CompileState:
    outputs = config.outputs
    _announce("write", f"zair={outputs.zair or '-'} report={outputs.report or '-'}")
    if outputs.zair is not None:
        outputs.zair.parent.mkdir(parents=True, exist_ok=True)
        outputs.zair.write_text(serialize(state.program), encoding="utf-8")
        logger.info("[PIPELINE] ZAIR written to %s", outputs.zair)
    if outputs.report is not None:
        outputs.report.parent.mkdir(parents=True, exist_ok=True)
        outputs.report.write_text(emit_report(build_report(state, config)), encoding="utf-8")
        logger.info("[PIPELINE] Report written to %s", outputs.report)
    _announce_done("write")
    return state
