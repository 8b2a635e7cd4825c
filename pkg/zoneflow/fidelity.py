"""Circuit fidelity and duration estimates, plus the idealised upper bounds."""
from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Set

from .circuit import StagedCircuit
from .hardware import HardwareParams, movement_time
from .placement import StagePlan
from .routing import movements_for_stage
from .scheduler import Schedule
from .zair import ReplayCounters

logger = logging.getLogger(__name__)

# Linear decoherence is only trusted while every idle time stays well below T2.
VALIDITY_RATIO = 0.1


@dataclass
class FidelityReport:
    g1: int = 0
    g2: int = 0
    n_exc: int = 0
    n_tran: int = 0
    duration: float = 0.0
    idle: Dict[int, float] = field(default_factory=dict)
    factor_1q: float = 1.0
    factor_2q: float = 1.0
    factor_transfer: float = 1.0
    factor_decoherence: float = 1.0
    fidelity: float = 1.0
    model_valid: bool = True
    saturated_qubits: List[int] = field(default_factory=list)
    bounds: Dict[str, float] = field(default_factory=dict)

    def as_dict(self) -> Dict[str, Any]:
        return {
            "fidelity": self.fidelity,
            "duration_us": self.duration,
            "counts": {"g1": self.g1, "g2": self.g2, "n_exc": self.n_exc, "n_tran": self.n_tran},
            "factors": {
                "one_qubit": self.factor_1q,
                "two_qubit_and_excitation": self.factor_2q,
                "transfer": self.factor_transfer,
                "decoherence": self.factor_decoherence,
            },
            "idle_us": {str(q): t for q, t in sorted(self.idle.items())},
            "model_valid": self.model_valid,
            "saturated_qubits": list(self.saturated_qubits),
            "bounds": dict(self.bounds),
        }


def _assemble(
    g1: int, g2: int, n_exc: int, n_tran: int, duration: float, busy: Dict[int, float], hw: HardwareParams
) -> FidelityReport:
    report = FidelityReport(g1=g1, g2=g2, n_exc=n_exc, n_tran=n_tran, duration=duration)
    report.factor_1q = hw.f1**g1
    report.factor_2q = hw.f2**g2 * hw.f_exc**n_exc
    report.factor_transfer = hw.f_tran**n_tran
    decoherence = 1.0
    for q in sorted(busy):
        t_q = max(duration - busy[q], 0.0)
        report.idle[q] = t_q
        ratio = t_q * 1e-6 / hw.t2
        if ratio > VALIDITY_RATIO:
            report.model_valid = False
        if ratio >= 1.0:
            report.saturated_qubits.append(q)
            decoherence = 0.0
        else:
            decoherence *= 1.0 - ratio
    report.factor_decoherence = decoherence
    report.fidelity = report.factor_1q * report.factor_2q * report.factor_transfer * report.factor_decoherence
    return report


def evaluate(schedule: Schedule, counters: ReplayCounters, hw: Optional[HardwareParams] = None) -> FidelityReport:
    """Fidelity of a scheduled program from its replay counters."""
    hw = hw or HardwareParams()
    busy = {q: counters.busy.get(q, 0.0) for q in range(counters.num_qubits)}
    report = _assemble(counters.g1, counters.g2, counters.n_exc, counters.n_tran, schedule.makespan, busy, hw)
    if not report.model_valid:
        logger.warning("[WARN] idle time exceeds %.0f%% of T2; linear decoherence model is loose", VALIDITY_RATIO * 100)
    logger.info(
        "[SCORE] f=%.6f duration=%.2f us g1=%d g2=%d n_tran=%d n_exc=%d",
        report.fidelity,
        report.duration,
        report.g1,
        report.g2,
        report.n_tran,
        report.n_exc,
    )
    return report


# -- idealised bounds --------------------------------------------------------


def perfect_layer_duration(hw: Optional[HardwareParams] = None) -> float:
    """Shortest possible rearrangement layer: two transfers plus one hop across the zone gap."""
    hw = hw or HardwareParams()
    return 2 * hw.t_tran + movement_time(hw.d_sep, hw)


@dataclass
class _Layers:
    """Per stage: who moves in, who moves out, and how far the furthest atom travels."""

    inbound: List[Set[int]] = field(default_factory=list)
    outbound: List[Set[int]] = field(default_factory=list)
    inbound_reach: List[float] = field(default_factory=list)
    outbound_reach: List[float] = field(default_factory=list)


def _layers_from_plans(plans: Sequence[StagePlan]) -> _Layers:
    layers = _Layers()
    for plan in plans:
        inbound, outbound = movements_for_stage(plan)
        layers.inbound.append({m.qubit for m in inbound})
        layers.outbound.append({m.qubit for m in outbound})
        layers.inbound_reach.append(max((m.displacement for m in inbound), default=0.0))
        layers.outbound_reach.append(max((m.displacement for m in outbound), default=0.0))
    return layers


def _layers_without_reuse(circuit: StagedCircuit) -> _Layers:
    layers = _Layers()
    for stage in circuit.rydberg_stages:
        qubits = set(stage.qubits)
        layers.inbound.append(set(qubits))
        layers.outbound.append(set(qubits))
        layers.inbound_reach.append(0.0)
        layers.outbound_reach.append(0.0)
    return layers


def reusable_qubits(circuit: StagedCircuit, t: int) -> Set[int]:
    """Qubits acting in a 2Q gate in both stage t and stage t+1."""
    if t >= circuit.num_rydberg_stages:
        return set()
    return set(circuit.rydberg_stage(t).qubits) & set(circuit.rydberg_stage(t + 1).qubits)


def _bound(
    circuit: StagedCircuit,
    layers: _Layers,
    hw: HardwareParams,
    layer_time,
    cap: Optional[float],
) -> FidelityReport:
    busy: Dict[int, float] = defaultdict(float)
    for q in range(circuit.num_qubits):
        busy[q] = 0.0
    duration = 0.0
    n_tran = 0
    for t in range(0, circuit.num_rydberg_stages + 1):
        if t:
            stage = circuit.rydberg_stage(t)
            duration += layer_time(layers.inbound[t - 1], layers.inbound_reach[t - 1])
            duration += hw.t_ryd if stage.gates else 0.0
            for q in stage.qubits:
                busy[q] += hw.t_ryd
        for oneq in circuit.oneq_after(t):
            duration += hw.t_1q * len(oneq.gates)
            for gate in oneq.gates:
                busy[gate.qubits[0]] += hw.t_1q
        if t:
            duration += layer_time(layers.outbound[t - 1], layers.outbound_reach[t - 1])
            for moved in (layers.inbound[t - 1], layers.outbound[t - 1]):
                for q in moved:
                    busy[q] += 2 * hw.t_tran
                    n_tran += 2
    if cap is not None:
        duration = min(duration, cap)
    return _assemble(circuit.g1, circuit.g2, 0, n_tran, duration, dict(busy), hw)


def perfect_movement_report(
    circuit: StagedCircuit, plans: Sequence[StagePlan], hw: Optional[HardwareParams] = None, cap: Optional[float] = None
) -> FidelityReport:
    hw = hw or HardwareParams()

    def layer_time(moved: Set[int], reach: float) -> float:
        return 2 * hw.t_tran + movement_time(reach, hw) if moved else 0.0

    return _bound(circuit, _layers_from_plans(plans), hw, layer_time, cap)


def perfect_placement_report(
    circuit: StagedCircuit,
    hw: Optional[HardwareParams] = None,
    plans: Optional[Sequence[StagePlan]] = None,
    cap: Optional[float] = None,
) -> FidelityReport:
    hw = hw or HardwareParams()
    layers = _layers_from_plans(plans) if plans is not None else _layers_without_reuse(circuit)
    hop = perfect_layer_duration(hw)
    return _bound(circuit, layers, hw, lambda moved, _: hop if moved else 0.0, cap)


def perfect_reuse_report(
    circuit: StagedCircuit,
    hw: Optional[HardwareParams] = None,
    plans: Optional[Sequence[StagePlan]] = None,
    cap: Optional[float] = None,
) -> FidelityReport:
    hw = hw or HardwareParams()
    layers = _layers_from_plans(plans) if plans is not None else _layers_without_reuse(circuit)
    for t in range(1, circuit.num_rydberg_stages + 1):
        layers.outbound[t - 1] -= reusable_qubits(circuit, t)
    hop = perfect_layer_duration(hw)
    return _bound(circuit, layers, hw, lambda moved, _: hop if moved else 0.0, cap)


def bound_perfect_movement(
    circuit: StagedCircuit, plans: Sequence[StagePlan], hw: Optional[HardwareParams] = None, cap: Optional[float] = None
) -> float:
    return perfect_movement_report(circuit, plans, hw, cap).fidelity


def bound_perfect_placement(
    circuit: StagedCircuit,
    hw: Optional[HardwareParams] = None,
    plans: Optional[Sequence[StagePlan]] = None,
    cap: Optional[float] = None,
) -> float:
    return perfect_placement_report(circuit, hw, plans, cap).fidelity


def bound_perfect_reuse(
    circuit: StagedCircuit,
    hw: Optional[HardwareParams] = None,
    plans: Optional[Sequence[StagePlan]] = None,
    cap: Optional[float] = None,
) -> float:
    return perfect_reuse_report(circuit, hw, plans, cap).fidelity


def compute_bounds(
    circuit: StagedCircuit, plans: Sequence[StagePlan], hw: HardwareParams, actual: FidelityReport
) -> Dict[str, float]:
    """The three bounds, each built on the one below it so the chain stays ordered."""
    movement = perfect_movement_report(circuit, plans, hw, cap=actual.duration)
    placement = perfect_placement_report(circuit, hw, plans, cap=movement.duration)
    reuse = perfect_reuse_report(circuit, hw, plans, cap=placement.duration)
    bounds = {
        "perfect_movement": movement.fidelity,
        "perfect_placement": placement.fidelity,
        "perfect_reuse": reuse.fidelity,
        "perfect_movement_duration_us": movement.duration,
        "perfect_placement_duration_us": placement.duration,
        "perfect_reuse_duration_us": reuse.duration,
    }
    logger.info(
        "[SCORE] bounds movement=%.6f placement=%.6f reuse=%.6f",
        movement.fidelity,
        placement.fidelity,
        reuse.fidelity,
    )
    return bounds
