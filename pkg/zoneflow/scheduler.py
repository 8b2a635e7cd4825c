"""Dependency construction and multi-AOD list scheduling."""
from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import networkx as nx

from .arch import TOL, TrapKey
from .circuit import Gate
from .errors import CompilerBugError
from .routing import TO_ENTANGLEMENT, TO_STORAGE, RearrangementJob

logger = logging.getLogger(__name__)

JOB = "job"
RYDBERG = "rydberg"
ONEQ = "oneq"

EDGE_KINDS = ("trap", "qubit", "stage", "lane")


@dataclass
class Instruction:
    """One schedulable unit: a rearrangement job, a Rydberg pulse in one zone, or a 1Q gate."""

    index: int
    kind: str
    qubits: Tuple[int, ...]
    duration: float
    stage: int
    phase: str
    job: Optional[RearrangementJob] = None
    zone_id: Optional[int] = None
    gates: Tuple[Gate, ...] = ()

    @property
    def vacates(self) -> Iterable[TrapKey]:
        return sorted(self.job.vacated) if self.job else ()

    @property
    def fills(self) -> Iterable[TrapKey]:
        return sorted(self.job.filled) if self.job else ()

    @property
    def pickup_finish(self) -> float:
        return self.job.pickup_finish if self.job else self.duration

    @property
    def move_finish(self) -> float:
        return self.job.move_finish if self.job else self.duration

    @property
    def group(self) -> Tuple[int, str]:
        return (self.stage, self.phase)


@dataclass(frozen=True)
class DependencyEdge:
    src: int
    dst: int
    kind: str


@dataclass
class ScheduledInst:
    inst: Instruction
    start: float
    end: float
    aod_id: Optional[int] = None


@dataclass
class Schedule:
    items: List[ScheduledInst] = field(default_factory=list)
    makespan: float = 0.0

    def by_index(self) -> Dict[int, ScheduledInst]:
        return {item.inst.index: item for item in self.items}


def build_dependencies(insts: Sequence[Instruction]) -> List[DependencyEdge]:
    """Trap, qubit, stage and 1Q-lane edges over instructions given in program order."""
    edges: Dict[Tuple[int, int], str] = {}

    def add(src: int, dst: int, kind: str) -> None:
        if src == dst:
            return
        # A qubit edge is at least as strict as a trap edge between the same pair.
        if (src, dst) in edges and edges[(src, dst)] != "trap":
            return
        edges[(src, dst)] = kind

    last_on_qubit: Dict[int, int] = {}
    last_vacater: Dict[TrapKey, int] = {}
    last_oneq: Optional[int] = None
    for inst in insts:
        if inst.kind == JOB:
            for key in inst.fills:
                if key in last_vacater:
                    add(last_vacater[key], inst.index, "trap")
            for key in inst.vacates:
                last_vacater[key] = inst.index
        for q in inst.qubits:
            if q in last_on_qubit:
                add(last_on_qubit[q], inst.index, "qubit")
            last_on_qubit[q] = inst.index
        if inst.kind == ONEQ:
            if last_oneq is not None:
                add(last_oneq, inst.index, "lane")
            last_oneq = inst.index

    by_group: Dict[Tuple[int, str], List[Instruction]] = defaultdict(list)
    for inst in insts:
        by_group[inst.group].append(inst)
    for inst in insts:
        if inst.kind != RYDBERG:
            continue
        t = inst.stage
        for job in by_group[(t, TO_ENTANGLEMENT)] + by_group[(t - 1, TO_STORAGE)]:
            add(job.index, inst.index, "stage")
        for job in by_group[(t, TO_STORAGE)] + by_group[(t + 1, TO_ENTANGLEMENT)]:
            add(inst.index, job.index, "stage")

    result = [DependencyEdge(src, dst, kind) for (src, dst), kind in sorted(edges.items())]
    graph = nx.DiGraph()
    graph.add_nodes_from(inst.index for inst in insts)
    graph.add_edges_from((e.src, e.dst) for e in result)
    if not nx.is_directed_acyclic_graph(graph):
        cycle = nx.find_cycle(graph)
        raise CompilerBugError(f"dependency cycle through instructions {[u for u, _ in cycle]}")
    return result


def _earliest(inst: Instruction, preds: Sequence[DependencyEdge], placed: Dict[int, ScheduledInst]) -> float:
    start = 0.0
    for edge in preds:
        before = placed[edge.src]
        if edge.kind == "trap":
            # The trap must be empty by the time this job's atoms arrive over it.
            bound = before.start + before.inst.pickup_finish - inst.move_finish
        else:
            bound = before.end
        start = max(start, bound)
    return max(start, 0.0)


def schedule(insts: Sequence[Instruction], deps: Sequence[DependencyEdge], num_aods: int) -> Schedule:
    """Assign start times group by group; jobs go longest-ready-first to the earliest free AOD."""
    if num_aods < 1:
        raise ValueError("num_aods must be >= 1")
    preds: Dict[int, List[DependencyEdge]] = defaultdict(list)
    position = {inst.index: i for i, inst in enumerate(insts)}
    for edge in deps:
        if position[edge.src] >= position[edge.dst]:
            raise CompilerBugError(f"dependency {edge.src}->{edge.dst} points backwards in program order")
        preds[edge.dst].append(edge)

    placed: Dict[int, ScheduledInst] = {}
    aod_free = [0.0] * num_aods
    groups: List[List[Instruction]] = []
    for inst in insts:
        if groups and groups[-1][0].group == inst.group and groups[-1][0].kind == inst.kind:
            groups[-1].append(inst)
        else:
            groups.append([inst])

    for group in groups:
        if group[0].kind != JOB:
            for inst in group:
                start = _earliest(inst, preds[inst.index], placed)
                placed[inst.index] = ScheduledInst(inst, start, start + inst.duration)
            continue
        waiting = list(group)
        while waiting:
            ready = [j for j in waiting if all(e.src in placed for e in preds[j.index])]
            if not ready:
                raise CompilerBugError("job group has no ready job")
            job = min(ready, key=lambda j: (-j.duration, j.index))
            waiting.remove(job)
            aod = min(range(num_aods), key=lambda a: (aod_free[a], a))
            start = max(aod_free[aod], _earliest(job, preds[job.index], placed))
            end = start + job.duration
            aod_free[aod] = end
            if job.job is not None:
                job.job.aod_id = aod
            placed[job.index] = ScheduledInst(job, start, end, aod)

    items = [placed[inst.index] for inst in insts]
    makespan = max((item.end for item in items), default=0.0)
    logger.info("[SCHED] %d instructions on %d AOD(s), makespan %.3f us", len(items), num_aods, makespan)
    _check(items, deps, placed)
    return Schedule(items, makespan)


def _check(items: Sequence[ScheduledInst], deps: Sequence[DependencyEdge], placed: Dict[int, ScheduledInst]) -> None:
    for edge in deps:
        a, b = placed[edge.src], placed[edge.dst]
        if edge.kind == "trap":
            ok = b.start + b.inst.move_finish >= a.start + a.inst.pickup_finish - TOL
        else:
            ok = b.start >= a.end - TOL
        if not ok:
            raise CompilerBugError(f"{edge.kind} dependency {edge.src}->{edge.dst} violated by the schedule")
    per_aod: Dict[int, List[ScheduledInst]] = defaultdict(list)
    for item in items:
        if item.aod_id is not None:
            per_aod[item.aod_id].append(item)
    for jobs in per_aod.values():
        jobs.sort(key=lambda item: item.start)
        for a, b in zip(jobs, jobs[1:]):
            if b.start < a.end - TOL:
                raise CompilerBugError(f"jobs {a.inst.index} and {b.inst.index} overlap on AOD {a.aod_id}")
